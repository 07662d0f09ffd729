#include "dsqa/features.hpp"

#include <unsupported/Eigen/FFT>

#include <bit>
#include <cmath>
#include <complex>
#include <cstdint>
#include <fstream>
#include <numbers>
#include <stdexcept>
#include <vector>

namespace dsqa {
namespace {

Eigen::VectorXd periodic_hann(int n) {
  Eigen::VectorXd w(n);
  for (int i = 0; i < n; ++i)
    w[i] = 0.5 * (1.0 - std::cos(2.0 * std::numbers::pi * i / n));
  return w;
}

// Mirror without repeating the edge sample, as in centred STFT framing.
Eigen::Index reflect_index(Eigen::Index i, Eigen::Index len) {
  while (i < 0 || i >= len) {
    if (i < 0) i = -i;
    if (i >= len) i = 2 * (len - 1) - i;
  }
  return i;
}

}  // namespace

Eigen::MatrixXd stft_magnitude(const Waveform& w, const FeatureConfig& cfg) {
  if (w.sample_rate != cfg.sample_rate)
    throw std::runtime_error("stft_magnitude: unsupported sample rate " +
                             std::to_string(w.sample_rate) + " Hz, expected " +
                             std::to_string(cfg.sample_rate) + " Hz (resample upstream)");
  const Eigen::Index len = w.samples.size();
  if (len < cfg.n_fft)
    throw std::invalid_argument("stft_magnitude: input shorter than one window (" +
                                std::to_string(cfg.n_fft) + " samples)");

  const Eigen::Index frames = (len + cfg.hop - 1) / cfg.hop;
  const Eigen::Index half = cfg.n_fft / 2;
  const Eigen::VectorXd window = periodic_hann(cfg.n_fft);

  Eigen::MatrixXd mag(cfg.bins(), frames);
  Eigen::FFT<double> fft;
  std::vector<double> frame(static_cast<std::size_t>(cfg.n_fft));
  std::vector<std::complex<double>> spectrum;
  for (Eigen::Index m = 0; m < frames; ++m) {
    const Eigen::Index start = m * cfg.hop - half;
    for (int i = 0; i < cfg.n_fft; ++i)
      frame[static_cast<std::size_t>(i)] = w.samples[reflect_index(start + i, len)] * window[i];
    fft.fwd(spectrum, frame);
    for (Eigen::Index k = 0; k <= half; ++k)
      mag(k, m) = std::abs(spectrum[static_cast<std::size_t>(k)]);
  }
  return mag;
}

double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }

double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

Eigen::MatrixXd mel_filterbank(const FeatureConfig& cfg) {
  const Eigen::Index bins = cfg.bins();
  const double mel_lo = hz_to_mel(cfg.fmin);
  const double mel_hi = hz_to_mel(cfg.fmax);

  Eigen::VectorXd edges(cfg.n_mels + 2);
  for (Eigen::Index j = 0; j < edges.size(); ++j)
    edges[j] = mel_to_hz(mel_lo + (mel_hi - mel_lo) * static_cast<double>(j) /
                                      static_cast<double>(cfg.n_mels + 1));

  Eigen::MatrixXd fb = Eigen::MatrixXd::Zero(cfg.n_mels, bins);
  for (Eigen::Index b = 0; b < cfg.n_mels; ++b) {
    const double f_lo = edges[b];
    const double f_mid = edges[b + 1];
    const double f_hi = edges[b + 2];
    for (Eigen::Index k = 0; k < bins; ++k) {
      const double f = static_cast<double>(k) * cfg.sample_rate / cfg.n_fft;
      if (f <= f_lo || f >= f_hi) continue;
      fb(b, k) = f <= f_mid ? (f - f_lo) / (f_mid - f_lo) : (f_hi - f) / (f_hi - f_mid);
    }
  }
  return fb;
}

Eigen::MatrixXd mel_project(const Eigen::Ref<const Eigen::MatrixXd>& magnitude,
                            const FeatureConfig& cfg) {
  if (magnitude.rows() != cfg.bins())
    throw std::invalid_argument("mel_project: expected " + std::to_string(cfg.bins()) +
                                " spectral rows, got " + std::to_string(magnitude.rows()));
  return mel_filterbank(cfg) * magnitude.cwiseAbs2();
}

MelSpectrogram log_compress_normalize(const Eigen::Ref<const Eigen::MatrixXd>& mel, double mean,
                                      double std_dev, const FeatureConfig& cfg) {
  if (!(std_dev > 0.0))
    throw std::invalid_argument("log_compress_normalize: std must be > 0");
  MelSpectrogram out;
  out.values = ((mel.array().max(cfg.log_floor).log() - mean) / std_dev * 0.5).matrix();
  out.normalized = true;
  return out;
}

std::pair<double, double> compute_dataset_stats(const std::vector<Waveform>& corpus,
                                                const FeatureConfig& cfg) {
  if (corpus.empty()) throw std::invalid_argument("compute_dataset_stats: empty corpus");
  double count = 0.0;
  double sum = 0.0;
  double sum_sq = 0.0;
  for (const auto& w : corpus) {
    const Eigen::ArrayXXd log_mel =
        mel_project(stft_magnitude(w, cfg), cfg).array().max(cfg.log_floor).log();
    count += static_cast<double>(log_mel.size());
    sum += log_mel.sum();
    sum_sq += log_mel.square().sum();
  }
  const double mean = sum / count;
  const double var = sum_sq / count - mean * mean;
  if (!(var > 0.0))
    throw std::invalid_argument(
        "compute_dataset_stats: log-mel values are constant (zero variance); training needs a "
        "corpus with non-degenerate spectra");
  return {mean, std::sqrt(var)};
}

MelSpectrogram waveform_to_features(const Waveform& w, double mean, double std_dev,
                                    const FeatureConfig& cfg) {
  return log_compress_normalize(mel_project(stft_magnitude(w, cfg), cfg), mean, std_dev, cfg);
}

void write_mel_file(const std::filesystem::path& path,
                    const Eigen::Ref<const Eigen::MatrixXd>& values) {
  static_assert(std::endian::native == std::endian::little);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("write_mel_file: cannot open " + path.string());
  out.write("MELF0001", 8);
  const std::uint32_t rows = static_cast<std::uint32_t>(values.rows());
  const std::uint32_t cols = static_cast<std::uint32_t>(values.cols());
  out.write(reinterpret_cast<const char*>(&rows), 4);
  out.write(reinterpret_cast<const char*>(&cols), 4);
  std::vector<float> payload;
  payload.reserve(static_cast<std::size_t>(values.size()));
  for (Eigen::Index r = 0; r < values.rows(); ++r)
    for (Eigen::Index c = 0; c < values.cols(); ++c)
      payload.push_back(static_cast<float>(values(r, c)));
  out.write(reinterpret_cast<const char*>(payload.data()),
            static_cast<std::streamsize>(payload.size() * 4));
  if (!out) throw std::runtime_error("write_mel_file: write failed: " + path.string());
}

Eigen::MatrixXd read_mel_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("read_mel_file: cannot open " + path.string());
  char magic[8];
  in.read(magic, 8);
  if (!in || std::string(magic, 8) != "MELF0001")
    throw std::runtime_error("read_mel_file: bad magic: " + path.string());
  std::uint32_t rows = 0, cols = 0;
  in.read(reinterpret_cast<char*>(&rows), 4);
  in.read(reinterpret_cast<char*>(&cols), 4);
  if (!in) throw std::runtime_error("read_mel_file: truncated header: " + path.string());
  std::vector<float> payload(static_cast<std::size_t>(rows) * cols);
  in.read(reinterpret_cast<char*>(payload.data()),
          static_cast<std::streamsize>(payload.size() * 4));
  if (!in) throw std::runtime_error("read_mel_file: truncated payload: " + path.string());
  Eigen::MatrixXd values(rows, cols);
  std::size_t k = 0;
  for (std::uint32_t r = 0; r < rows; ++r)
    for (std::uint32_t c = 0; c < cols; ++c) values(r, c) = payload[k++];
  return values;
}

}  // namespace dsqa
