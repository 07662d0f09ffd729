#pragma once

#include <Eigen/Core>

#include <filesystem>
#include <utility>
#include <vector>

namespace dsqa {

struct Waveform {
  Eigen::VectorXd samples;  // nominally in [-1, 1]
  int sample_rate = 16000;
};

struct FeatureConfig {
  int sample_rate = 16000;
  int n_fft = 1024;  // 64 ms window at 16 kHz
  int hop = 256;     // 75% overlap
  int n_mels = 80;
  double fmin = 0.0;
  double fmax = 8000.0;
  double log_floor = 1e-5;

  Eigen::Index bins() const { return n_fft / 2 + 1; }
};

struct MelSpectrogram {
  Eigen::MatrixXd values;  // n_mels x frames
  bool normalized = false;
};

// Magnitude STFT with a periodic Hann window. The signal is reflect-padded
// so frame m is centred on sample m*hop; frames = ceil(len/hop).
Eigen::MatrixXd stft_magnitude(const Waveform& w, const FeatureConfig& cfg = {});

double hz_to_mel(double hz);
double mel_to_hz(double mel);

// Triangular filters on the HTK mel scale spanning [fmin, fmax].
Eigen::MatrixXd mel_filterbank(const FeatureConfig& cfg = {});

// Filterbank applied to the power spectrum |X|^2.
Eigen::MatrixXd mel_project(const Eigen::Ref<const Eigen::MatrixXd>& magnitude,
                            const FeatureConfig& cfg = {});

// y = (ln(max(mel, log_floor)) - mean) / std * 0.5
MelSpectrogram log_compress_normalize(const Eigen::Ref<const Eigen::MatrixXd>& mel, double mean,
                                      double std_dev, const FeatureConfig& cfg = {});

// Global mean/std of the log-compressed mel values over a whole corpus.
std::pair<double, double> compute_dataset_stats(const std::vector<Waveform>& corpus,
                                                const FeatureConfig& cfg = {});

// Full pipeline: waveform -> normalized log-mel features.
MelSpectrogram waveform_to_features(const Waveform& w, double mean, double std_dev,
                                    const FeatureConfig& cfg = {});

// "MELF0001" dump: magic, u32 n_mels, u32 frames, then float32 little-endian
// values in row-major order.
void write_mel_file(const std::filesystem::path& path,
                    const Eigen::Ref<const Eigen::MatrixXd>& values);
Eigen::MatrixXd read_mel_file(const std::filesystem::path& path);

}  // namespace dsqa
