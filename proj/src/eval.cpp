#include "dsqa/eval.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <optional>
#include <stdexcept>

#include "dsqa/util.hpp"

namespace dsqa {
namespace {

std::string condition_name(double snr_db) { return "snr_" + format_double(snr_db) + "dB"; }

std::vector<double> average_ranks(const std::vector<double>& values) {
  const std::size_t n = values.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });

  std::vector<double> ranks(n);
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && values[order[j + 1]] == values[order[i]]) ++j;
    const double mean_rank = 0.5 * (static_cast<double>(i) + static_cast<double>(j)) + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = mean_rank;
    i = j + 1;
  }
  return ranks;
}

std::ofstream open_csv(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);  // binary keeps LF endings everywhere
  if (!out) throw std::runtime_error("cannot open for writing: " + path.string());
  return out;
}

}  // namespace

MixResult add_noise_at_snr(const Waveform& clean, const Waveform& noise, double snr_db,
                           SeededRng& rng) {
  if (noise.sample_rate != clean.sample_rate)
    throw std::invalid_argument("add_noise_at_snr: sample rate mismatch");
  const Eigen::Index n = clean.samples.size();
  if (n == 0) throw std::invalid_argument("add_noise_at_snr: empty clean signal");
  if (noise.samples.size() == 0) throw std::invalid_argument("add_noise_at_snr: empty noise");

  const double clean_power = clean.samples.squaredNorm() / static_cast<double>(n);
  if (!(clean_power > 0.0))
    throw std::invalid_argument("add_noise_at_snr: clean signal is silent");

  Eigen::VectorXd cut(n);
  if (noise.samples.size() >= n) {
    const Eigen::Index range = noise.samples.size() - n;
    const Eigen::Index start =
        range > 0
            ? static_cast<Eigen::Index>(rng.next_u64() % static_cast<std::uint64_t>(range + 1))
            : 0;
    cut = noise.samples.segment(start, n);
  } else {
    for (Eigen::Index i = 0; i < n; ++i) cut[i] = noise.samples[i % noise.samples.size()];
  }
  const double noise_power = cut.squaredNorm() / static_cast<double>(n);
  if (!(noise_power > 0.0))
    throw std::invalid_argument("add_noise_at_snr: noise signal is silent");

  const double gain = std::sqrt(clean_power / (noise_power * std::pow(10.0, snr_db / 10.0)));

  MixResult result;
  result.mix.sample_rate = clean.sample_rate;
  result.mix.samples = clean.samples + gain * cut;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (result.mix.samples[i] > 1.0) {
      result.mix.samples[i] = 1.0;
      ++result.clipped;
    } else if (result.mix.samples[i] < -1.0) {
      result.mix.samples[i] = -1.0;
      ++result.clipped;
    }
  }
  return result;
}

double pearson(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2)
    throw std::invalid_argument("pearson: need two equal-length series of length >= 2");
  const Eigen::Map<const Eigen::VectorXd> vx(x.data(), static_cast<Eigen::Index>(x.size()));
  const Eigen::Map<const Eigen::VectorXd> vy(y.data(), static_cast<Eigen::Index>(y.size()));
  const Eigen::ArrayXd dx = vx.array() - vx.mean();
  const Eigen::ArrayXd dy = vy.array() - vy.mean();
  const double sx = std::sqrt(dx.square().sum());
  const double sy = std::sqrt(dy.square().sum());
  if (sx == 0.0 || sy == 0.0)
    throw std::invalid_argument("pearson: undefined correlation (zero variance)");
  return (dx * dy).sum() / (sx * sy);
}

double spearman(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2)
    throw std::invalid_argument("spearman: need two equal-length series of length >= 2");
  return pearson(average_ranks(x), average_ranks(y));
}

SweepResult run_corruption_sweep(const ModelBundle& model,
                                 const std::vector<NamedWaveform>& clean,
                                 const std::vector<Waveform>& noise_corpus,
                                 const SweepConfig& sweep, const TraceMode& mode) {
  if (clean.empty()) throw std::invalid_argument("run_corruption_sweep: empty clean corpus");
  const std::size_t conditions = sweep.snr_grid.size() + 1;  // index 0 = clean
  const std::size_t total = clean.size() * conditions;

  std::vector<std::optional<EvalRecord>> slots(total);
  std::vector<std::optional<SweepFailure>> failures(total);
  std::vector<std::size_t> clipped(total, 0);

  parallel_for(total, sweep.threads, [&](std::size_t job) {
    const std::size_t u = job / conditions;
    const std::size_t c = job % conditions;
    const std::string condition = c == 0 ? "clean" : condition_name(sweep.snr_grid[c - 1]);
    try {
      Waveform input;
      double reference = std::numeric_limits<double>::infinity();
      if (c == 0) {
        input = clean[u].wave;
      } else {
        // One derived stream per (condition, utterance) task: draws the
        // noise, the crop offset, nothing else.
        SeededRng rng(derive_seed(derive_seed(sweep.seed, c), u));
        const double snr_db = sweep.snr_grid[c - 1];
        Waveform noise;
        if (noise_corpus.empty()) {
          noise.sample_rate = clean[u].wave.sample_rate;
          noise.samples = sample_gaussian(rng, clean[u].wave.samples.size(), 1.0);
        } else {
          noise = noise_corpus[rng.next_u64() % noise_corpus.size()];
        }
        MixResult mixed = add_noise_at_snr(clean[u].wave, noise, snr_db, rng);
        clipped[job] = mixed.clipped;
        input = std::move(mixed.mix);
        reference = snr_db;
      }
      const MelSpectrogram feats = waveform_to_features(
          input, model.params.feature_mean, model.params.feature_std, model.feature);
      const double score = score_utterance(model.params, feats, model.schedule, mode);
      slots[job] = EvalRecord{clean[u].id, condition, score, reference};
    } catch (const std::exception& e) {
      failures[job] = SweepFailure{clean[u].id, condition, e.what()};
    }
  });

  SweepResult result;
  result.records.reserve(total);
  for (std::size_t j = 0; j < total; ++j) {
    if (slots[j]) result.records.push_back(std::move(*slots[j]));
    if (failures[j]) result.failures.push_back(std::move(*failures[j]));
    result.clipped_samples += clipped[j];
  }
  return result;
}

void write_records_csv(const std::filesystem::path& path,
                       const std::vector<EvalRecord>& records) {
  auto out = open_csv(path);
  out << "utterance_id,condition,score,reference\n";
  for (const auto& r : records)
    out << r.utterance_id << ',' << r.condition << ',' << format_double(r.score) << ','
        << format_double(r.reference) << '\n';
}

void write_correlations_csv(const std::filesystem::path& path,
                            const std::vector<EvalRecord>& records) {
  std::vector<double> scores;
  std::vector<double> refs;
  for (const auto& r : records) {
    if (std::isfinite(r.reference)) {
      scores.push_back(r.score);
      refs.push_back(r.reference);
    }
  }
  auto corr_or_nan = [&](double (*fn)(const std::vector<double>&, const std::vector<double>&)) {
    try {
      return fn(scores, refs);
    } catch (const std::invalid_argument&) {
      return std::numeric_limits<double>::quiet_NaN();
    }
  };
  auto out = open_csv(path);
  out << "metric,value,n\n";
  out << "pcc," << format_double(corr_or_nan(pearson)) << ',' << scores.size() << '\n';
  out << "srcc," << format_double(corr_or_nan(spearman)) << ',' << scores.size() << '\n';
}

void emit_histogram_csv(const std::filesystem::path& path, const std::vector<EvalRecord>& records,
                        int bins) {
  if (bins < 2) throw std::invalid_argument("emit_histogram_csv: bins must be >= 2");
  auto out = open_csv(path);
  out << "condition,bin_left,bin_right,count\n";
  if (records.empty()) return;

  double lo = records.front().score;
  double hi = lo;
  for (const auto& r : records) {
    lo = std::min(lo, r.score);
    hi = std::max(hi, r.score);
  }
  if (lo == hi) {
    lo -= 0.5;
    hi += 0.5;
  }
  const double width = (hi - lo) / bins;

  // Conditions in first-appearance order keeps the output deterministic.
  std::vector<std::string> conditions;
  for (const auto& r : records)
    if (std::find(conditions.begin(), conditions.end(), r.condition) == conditions.end())
      conditions.push_back(r.condition);

  for (const auto& condition : conditions) {
    std::vector<std::size_t> counts(static_cast<std::size_t>(bins), 0);
    for (const auto& r : records) {
      if (r.condition != condition) continue;
      auto bin = static_cast<std::size_t>((r.score - lo) / width);
      bin = std::min(bin, static_cast<std::size_t>(bins - 1));
      ++counts[bin];
    }
    for (int b = 0; b < bins; ++b)
      out << condition << ',' << format_double(lo + b * width) << ','
          << format_double(lo + (b + 1) * width) << ',' << counts[static_cast<std::size_t>(b)]
          << '\n';
  }
}

}  // namespace dsqa
