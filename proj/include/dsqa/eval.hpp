#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "dsqa/checkpoint.hpp"
#include "dsqa/likelihood.hpp"
#include "dsqa/rng.hpp"

namespace dsqa {

struct EvalRecord {
  std::string utterance_id;
  std::string condition;   // "clean" or "snr_<v>dB"
  double score = 0.0;      // per-element log-likelihood
  double reference = 0.0;  // injected SNR in dB; +inf for clean rows
};

struct MixResult {
  Waveform mix;
  std::size_t clipped = 0;
};

// Noise is randomly cropped (or tiled) to the clean length, scaled for the
// target SNR, added, and the sum is clipped to [-1, 1]. The realized SNR
// before clipping matches the target exactly.
MixResult add_noise_at_snr(const Waveform& clean, const Waveform& noise, double snr_db,
                           SeededRng& rng);

double pearson(const std::vector<double>& x, const std::vector<double>& y);
// Pearson correlation of average ranks; ties get the mean of their ranks.
double spearman(const std::vector<double>& x, const std::vector<double>& y);

struct NamedWaveform {
  std::string id;
  Waveform wave;
};

struct SweepConfig {
  std::vector<double> snr_grid{-10, -5, 0, 5, 10, 20};
  std::uint64_t seed = 0;
  int threads = 0;  // 0 = resolve automatically
};

struct SweepFailure {
  std::string utterance_id;
  std::string condition;
  std::string message;
};

struct SweepResult {
  std::vector<EvalRecord> records;  // sorted by utterance, then condition
  std::vector<SweepFailure> failures;
  std::size_t clipped_samples = 0;
};

// Scores every utterance clean and at every SNR of the grid. Per-record
// failures are collected and the sweep continues. Deterministic given the
// seed, independent of the thread count.
SweepResult run_corruption_sweep(const ModelBundle& model,
                                 const std::vector<NamedWaveform>& clean,
                                 const std::vector<Waveform>& noise_corpus,  // empty = white
                                 const SweepConfig& sweep, const TraceMode& mode);

// CSV emitters; UTF-8, LF line endings, '.' decimal separator.
void write_records_csv(const std::filesystem::path& path, const std::vector<EvalRecord>& records);
// metric,value,n rows for PCC and SRCC of score vs reference over the
// finite-reference records; "nan" when the correlation is undefined.
void write_correlations_csv(const std::filesystem::path& path,
                            const std::vector<EvalRecord>& records);
// condition,bin_left,bin_right,count over shared uniform bin edges.
void emit_histogram_csv(const std::filesystem::path& path, const std::vector<EvalRecord>& records,
                        int bins);

}  // namespace dsqa
