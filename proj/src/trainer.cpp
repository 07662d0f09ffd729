#include "dsqa/trainer.hpp"

#include <cmath>
#include <ostream>
#include <stdexcept>

#include "dsqa/diffusion.hpp"
#include "dsqa/util.hpp"

namespace dsqa {

void TrainConfig::validate() const {
  if (batch_size < 1) throw std::invalid_argument("TrainConfig: batch_size must be >= 1");
  if (total_samples < 1) throw std::invalid_argument("TrainConfig: total_samples must be >= 1");
  if (!(lr > 0.0)) throw std::invalid_argument("TrainConfig: lr must be > 0");
  if (warmup_steps < 0) throw std::invalid_argument("TrainConfig: warmup_steps must be >= 0");
  if (!(ema_rate >= 0.0) || ema_rate >= 1.0)
    throw std::invalid_argument("TrainConfig: ema_rate must be in [0, 1)");
  if (!(p_std > 0.0)) throw std::invalid_argument("TrainConfig: p_std must be > 0");
  if (!(sigma_data > 0.0)) throw std::invalid_argument("TrainConfig: sigma_data must be > 0");
}

MelPatchSource::MelPatchSource(std::vector<Eigen::MatrixXd> mels, Eigen::Index patch_frames)
    : mels_(std::move(mels)), patch_frames_(patch_frames) {
  if (mels_.empty()) throw std::invalid_argument("MelPatchSource: empty dataset");
  if (patch_frames_ < 1) throw std::invalid_argument("MelPatchSource: patch_frames must be >= 1");
  n_mels_ = mels_.front().rows();
  for (auto& m : mels_) {
    if (m.rows() != n_mels_)
      throw std::invalid_argument("MelPatchSource: inconsistent mel band count");
    if (m.cols() < patch_frames_) {
      Eigen::MatrixXd padded = Eigen::MatrixXd::Zero(n_mels_, patch_frames_);
      padded.leftCols(m.cols()) = m;
      m = std::move(padded);
    }
  }
}

void MelPatchSource::sample(SeededRng& rng, Eigen::Ref<Eigen::VectorXd> out) const {
  const auto& mel = mels_[rng.next_u64() % mels_.size()];
  const Eigen::Index range = mel.cols() - patch_frames_;
  const Eigen::Index start =
      range > 0 ? static_cast<Eigen::Index>(rng.next_u64() % static_cast<std::uint64_t>(range + 1))
                : 0;
  out = flatten_row_major(mel.middleCols(start, patch_frames_));
}

DsmLoss dsm_loss(const DenoiserParams& params, const Eigen::Ref<const Eigen::VectorXd>& clean,
                 double sigma, const Eigen::Ref<const Eigen::VectorXd>& noise) {
  if (!(sigma > 0.0)) throw std::invalid_argument("dsm_loss: sigma must be > 0");
  if (clean.size() != params.arch.in_dim || noise.size() != clean.size())
    throw std::invalid_argument("dsm_loss: shape mismatch");

  const PrecondConstants c = precond_constants(sigma, params.sigma_data);
  const double sd = params.sigma_data;
  const double lambda = (sigma * sigma + sd * sd) / ((sigma * sd) * (sigma * sd));

  const Eigen::VectorXd noisy = clean + noise;
  ForwardCache cache;
  forward(params, (c.c_in * noisy).eval(), c.c_noise, cache);
  const Eigen::VectorXd diff = c.c_skip * noisy + c.c_out * cache.output - clean;

  DsmLoss out;
  out.loss = lambda * diff.squaredNorm();
  out.grads = grad_params(params, cache, ((2.0 * lambda * c.c_out) * diff).eval());
  return out;
}

DsmLoss dsm_loss_batch(const DenoiserParams& params,
                       const Eigen::Ref<const Eigen::MatrixXd>& clean,
                       const Eigen::Ref<const Eigen::ArrayXd>& sigmas,
                       const Eigen::Ref<const Eigen::MatrixXd>& noise) {
  const Eigen::Index batch = clean.cols();
  if (batch < 1) throw std::invalid_argument("dsm_loss_batch: empty batch");
  if (clean.rows() != params.arch.in_dim || noise.rows() != clean.rows() ||
      noise.cols() != batch || sigmas.size() != batch)
    throw std::invalid_argument("dsm_loss_batch: shape mismatch");
  if ((sigmas <= 0.0).any()) throw std::invalid_argument("dsm_loss_batch: sigma must be > 0");

  const double sd = params.sigma_data;
  Eigen::ArrayXd c_in(batch), c_out(batch), c_skip(batch), lambda(batch);
  Eigen::RowVectorXd c_noise(batch);
  for (Eigen::Index b = 0; b < batch; ++b) {
    const PrecondConstants c = precond_constants(sigmas[b], sd);
    c_in[b] = c.c_in;
    c_out[b] = c.c_out;
    c_skip[b] = c.c_skip;
    c_noise[b] = c.c_noise;
    lambda[b] = (sigmas[b] * sigmas[b] + sd * sd) / ((sigmas[b] * sd) * (sigmas[b] * sd));
  }

  const Eigen::MatrixXd noisy = clean + noise;
  const Eigen::MatrixXd scaled =
      (noisy.array().rowwise() * c_in.transpose().array()).matrix();
  BatchForwardCache cache;
  forward_batch(params, scaled, c_noise, cache);

  Eigen::MatrixXd diff =
      (noisy.array().rowwise() * c_skip.transpose().array() +
       cache.output.array().rowwise() * c_out.transpose().array())
          .matrix() -
      clean;

  DsmLoss out;
  const Eigen::ArrayXd per_sample = diff.colwise().squaredNorm().transpose().array() * lambda;
  out.loss = per_sample.mean();

  const Eigen::ArrayXd upstream_scale =
      2.0 * lambda * c_out / static_cast<double>(batch);
  const Eigen::MatrixXd upstream =
      (diff.array().rowwise() * upstream_scale.transpose().array()).matrix();
  out.grads = grad_params_batch(params, cache, upstream);
  return out;
}

double sample_sigma(SeededRng& rng, double p_mean, double p_std) {
  if (p_std < 0.0) throw std::invalid_argument("sample_sigma: p_std must be >= 0");
  const double z = sample_gaussian(rng, 1, 1.0)[0];
  return std::exp(p_mean + p_std * z);
}

AdamState AdamState::zeros_like(const DenoiserParams& params) {
  AdamState s;
  s.m.reserve(params.layers.size());
  s.v.reserve(params.layers.size());
  for (const auto& l : params.layers) {
    s.m.push_back({Eigen::MatrixXd::Zero(l.weight.rows(), l.weight.cols()),
                   Eigen::VectorXd::Zero(l.bias.size())});
    s.v.push_back({Eigen::MatrixXd::Zero(l.weight.rows(), l.weight.cols()),
                   Eigen::VectorXd::Zero(l.bias.size())});
  }
  return s;
}

void adam_step(DenoiserParams& params, AdamState& state, const ParamGrads& grads, double lr,
               double beta1, double beta2, double eps) {
  if (grads.layers.size() != params.layers.size() || state.m.size() != params.layers.size())
    throw std::invalid_argument("adam_step: layout mismatch");
  state.step += 1;
  const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(state.step));

  for (std::size_t l = 0; l < params.layers.size(); ++l) {
    {
      auto& m = state.m[l].weight;
      auto& v = state.v[l].weight;
      const auto& g = grads.layers[l].weight;
      m = beta1 * m + (1.0 - beta1) * g;
      v = (beta2 * v.array() + (1.0 - beta2) * g.array().square()).matrix();
      params.layers[l].weight.array() -=
          lr * (m.array() / bc1) / ((v.array() / bc2).sqrt() + eps);
    }
    // biases
    {
      auto& m = state.m[l].bias;
      auto& v = state.v[l].bias;
      const auto& g = grads.layers[l].bias;
      m = beta1 * m + (1.0 - beta1) * g;
      v = (beta2 * v.array() + (1.0 - beta2) * g.array().square()).matrix();
      params.layers[l].bias.array() -=
          lr * (m.array() / bc1) / ((v.array() / bc2).sqrt() + eps);
    }
  }
}

void ema_update(DenoiserParams& ema, const DenoiserParams& current, double rate) {
  if (ema.layers.size() != current.layers.size())
    throw std::invalid_argument("ema_update: layout mismatch");
  for (std::size_t l = 0; l < ema.layers.size(); ++l) {
    ema.layers[l].weight = rate * ema.layers[l].weight + (1.0 - rate) * current.layers[l].weight;
    ema.layers[l].bias = rate * ema.layers[l].bias + (1.0 - rate) * current.layers[l].bias;
  }
}

TrainResult train(const PatchSource& data, const NetworkArch& arch, const TrainConfig& config,
                  std::ostream* log_csv) {
  config.validate();
  arch.validate();
  if (data.dim() != arch.in_dim)
    throw std::invalid_argument("train: patch dimension does not match arch.in_dim");

  // Independent derived streams so that changing one consumer does not shift
  // the others.
  SeededRng rng_init(derive_seed(config.seed, 0));
  SeededRng rng_sigma(derive_seed(config.seed, 1));
  SeededRng rng_noise(derive_seed(config.seed, 2));
  SeededRng rng_patch(derive_seed(config.seed, 3));

  DenoiserParams params = init_denoiser(arch, rng_init, config.sigma_data);
  DenoiserParams ema = params;
  AdamState opt = AdamState::zeros_like(params);

  const Eigen::Index dim = arch.in_dim;
  const Eigen::Index batch = config.batch_size;
  const long long steps = (config.total_samples + config.batch_size - 1) / config.batch_size;

  Eigen::MatrixXd clean(dim, batch);
  Eigen::MatrixXd noise(dim, batch);
  Eigen::ArrayXd sigmas(batch);

  TrainResult result;
  result.loss_history.reserve(static_cast<std::size_t>(steps));
  double smoothed = 0.0;
  if (log_csv) *log_csv << "step,loss,lr,ema_rate\n";

  for (long long step = 0; step < steps; ++step) {
    for (Eigen::Index b = 0; b < batch; ++b) {
      data.sample(rng_patch, clean.col(b));
      sigmas[b] = sample_sigma(rng_sigma, config.p_mean, config.p_std);
      noise.col(b) = sample_gaussian(rng_noise, dim, sigmas[b]);
    }
    const DsmLoss batch_loss = dsm_loss_batch(params, clean, sigmas, noise);

    const double lr =
        config.warmup_steps > 0
            ? config.lr * std::min(1.0, static_cast<double>(step + 1) / config.warmup_steps)
            : config.lr;
    adam_step(params, opt, batch_loss.grads, lr);
    ema_update(ema, params, config.ema_rate);

    smoothed = step == 0 ? batch_loss.loss : 0.99 * smoothed + 0.01 * batch_loss.loss;
    result.loss_history.push_back(batch_loss.loss);
    if (log_csv)
      *log_csv << step << ',' << format_double(batch_loss.loss) << ',' << format_double(lr)
               << ',' << format_double(config.ema_rate) << '\n';
  }

  result.params = std::move(ema);
  result.final_smoothed_loss = smoothed;
  result.steps = steps;
  return result;
}

}  // namespace dsqa
