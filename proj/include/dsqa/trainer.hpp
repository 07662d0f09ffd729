#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <iosfwd>
#include <vector>

#include "dsqa/network.hpp"

namespace dsqa {

struct TrainConfig {
  int batch_size = 32;
  long long total_samples = 200000;
  double lr = 1e-3;
  int warmup_steps = 1000;  // linear warmup to lr
  double ema_rate = 0.999;
  double p_mean = -1.2;  // ln sigma ~ N(p_mean, p_std^2)
  double p_std = 1.2;
  std::uint64_t seed = 0;
  double sigma_data = 0.5;

  void validate() const;
};

// Any source of fixed-size training patches.
class PatchSource {
 public:
  virtual ~PatchSource() = default;
  virtual Eigen::Index dim() const = 0;
  virtual void sample(SeededRng& rng, Eigen::Ref<Eigen::VectorXd> out) const = 0;
};

// Random fixed-width windows from a set of normalized spectrograms.
// Spectrograms shorter than one window are zero-padded up front.
class MelPatchSource final : public PatchSource {
 public:
  MelPatchSource(std::vector<Eigen::MatrixXd> mels, Eigen::Index patch_frames);

  Eigen::Index dim() const override { return n_mels_ * patch_frames_; }
  void sample(SeededRng& rng, Eigen::Ref<Eigen::VectorXd> out) const override;

 private:
  std::vector<Eigen::MatrixXd> mels_;
  Eigen::Index n_mels_ = 0;
  Eigen::Index patch_frames_ = 0;
};

struct DsmLoss {
  double loss = 0.0;
  ParamGrads grads;
};

// Weighted denoising loss for one sample:
//   lambda(sigma) * |D(clean + noise; sigma) - clean|^2,
//   lambda(sigma) = (sigma^2 + sigma_data^2) / (sigma * sigma_data)^2
// with exact parameter gradients. The caller pre-samples noise ~ N(0, sigma^2).
DsmLoss dsm_loss(const DenoiserParams& params, const Eigen::Ref<const Eigen::VectorXd>& clean,
                 double sigma, const Eigen::Ref<const Eigen::VectorXd>& noise);

// Batched equivalent: mean loss and mean gradients over the columns.
DsmLoss dsm_loss_batch(const DenoiserParams& params,
                       const Eigen::Ref<const Eigen::MatrixXd>& clean,
                       const Eigen::Ref<const Eigen::ArrayXd>& sigmas,
                       const Eigen::Ref<const Eigen::MatrixXd>& noise);

// ln sigma ~ N(p_mean, p_std^2); always strictly positive.
double sample_sigma(SeededRng& rng, double p_mean, double p_std);

struct AdamState {
  std::vector<Layer> m;
  std::vector<Layer> v;
  long long step = 0;

  static AdamState zeros_like(const DenoiserParams& params);
};

void adam_step(DenoiserParams& params, AdamState& state, const ParamGrads& grads, double lr,
               double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8);

// ema <- rate * ema + (1 - rate) * current, coefficient-wise.
void ema_update(DenoiserParams& ema, const DenoiserParams& current, double rate);

struct TrainResult {
  DenoiserParams params;  // EMA weights
  double final_smoothed_loss = 0.0;
  long long steps = 0;
  std::vector<double> loss_history;  // raw per-step batch losses
};

// Denoising-score-matching training; returns the EMA parameters.
// Deterministic for a fixed config. log_csv, when given, receives one
// "step,loss,lr,ema_rate" row per step.
TrainResult train(const PatchSource& data, const NetworkArch& arch, const TrainConfig& config,
                  std::ostream* log_csv = nullptr);

}  // namespace dsqa
