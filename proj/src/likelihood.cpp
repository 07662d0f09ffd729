#include "dsqa/likelihood.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

#include "dsqa/rng.hpp"
#include "dsqa/util.hpp"

namespace dsqa {
namespace {

// Divergence guard: an untrained or broken model can blow the state up long
// before the floats overflow.
constexpr double kStateNormLimit = 1e6;

void check_state(const Eigen::VectorXd& x, int step) {
  if (!x.allFinite()) throw numerical_error("state became non-finite", step);
  if (x.norm() > kStateNormLimit) throw numerical_error("state norm exceeded 1e6", step);
}

}  // namespace

void TraceMode::validate(Eigen::Index n_elements) const {
  if (kind == Kind::kHutchinson) {
    if (probe_count < 1) throw std::invalid_argument("TraceMode: probe_count must be >= 1");
  } else if (n_elements > kExactTraceMaxDim) {
    throw std::invalid_argument("TraceMode: exact trace limited to " +
                                std::to_string(kExactTraceMaxDim) + " elements, got " +
                                std::to_string(n_elements));
  }
}

ModelDriftField::ModelDriftField(const DenoiserParams& params, const NoiseSchedule& schedule)
    : params_(&params), schedule_(schedule) {
  params.validate();
  schedule.validate();
}

Eigen::VectorXd ModelDriftField::prepare(const Eigen::Ref<const Eigen::VectorXd>& x, double t) {
  if (!(t >= schedule_.sigma_min))
    throw std::invalid_argument("ModelDriftField: t below sigma_min");
  const PrecondConstants c = precond_constants(t, params_->sigma_data);
  forward(*params_, (c.c_in * x).eval(), c.c_noise, cache_);
  c_skip_ = c.c_skip;
  c_out_in_ = c.c_out * c.c_in;
  t_ = t;
  Eigen::VectorXd denoised = c.c_skip * x + c.c_out * cache_.output;
  return (x - denoised) / t;
}

Eigen::VectorXd ModelDriftField::vjp_prepared(const Eigen::Ref<const Eigen::VectorXd>& v) const {
  if (t_ <= 0.0) throw std::logic_error("ModelDriftField: vjp_prepared before prepare");
  Eigen::VectorXd w = vjp_input(*params_, cache_, v);
  return (v - c_skip_ * v - c_out_in_ * w) / t_;
}

double hutchinson_trace_term(const DriftVjpFn& drift_vjp, const Eigen::VectorXd& x,
                             const Eigen::VectorXd& eps) {
  if (eps.size() != x.size())
    throw std::invalid_argument("hutchinson_trace_term: shape mismatch");
  if ((eps.array().abs() != 1.0).any())
    throw std::invalid_argument("hutchinson_trace_term: probe must be a Rademacher vector");
  Eigen::VectorXd w = drift_vjp(x, eps);
  if (w.size() != eps.size())
    throw std::invalid_argument("hutchinson_trace_term: vjp output shape mismatch");
  return w.dot(eps);
}

double exact_trace_term(const DriftVjpFn& drift_vjp, const Eigen::VectorXd& x) {
  const Eigen::Index n = x.size();
  if (n > kExactTraceMaxDim)
    throw std::invalid_argument("exact_trace_term: dimension above the cost guard");
  double trace = 0.0;
  Eigen::VectorXd basis = Eigen::VectorXd::Zero(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    basis[i] = 1.0;
    trace += drift_vjp(x, basis)[i];
    basis[i] = 0.0;
  }
  return trace;
}

double log_p_terminal(const Eigen::Ref<const Eigen::VectorXd>& x_T, double T) {
  if (!(T > 0.0)) throw std::invalid_argument("log_p_terminal: T must be > 0");
  const double n = static_cast<double>(x_T.size());
  return -0.5 * n * std::log(2.0 * std::numbers::pi * T * T) -
         x_T.squaredNorm() / (2.0 * T * T);
}

LikelihoodResult compute_log_likelihood(DriftField& field,
                                        const Eigen::Ref<const Eigen::VectorXd>& x0,
                                        const NoiseSchedule& schedule, const TraceMode& mode) {
  schedule.validate();
  const Eigen::Index n = field.dim();
  if (x0.size() != n) throw std::invalid_argument("compute_log_likelihood: input size mismatch");
  mode.validate(n);

  std::vector<Eigen::VectorXd> probes;
  if (mode.kind == TraceMode::Kind::kHutchinson) {
    SeededRng rng(mode.probe_seed);
    probes.reserve(mode.probe_count);
    for (int p = 0; p < mode.probe_count; ++p) probes.push_back(sample_rademacher(rng, n));
  }

  // Drift and trace estimate at one point, sharing the forward pass.
  auto stage = [&](const Eigen::VectorXd& x, double t, int step, Eigen::VectorXd& f_out) {
    f_out = field.prepare(x, t);
    if (!f_out.allFinite()) throw numerical_error("drift became non-finite", step);
    double trace = 0.0;
    if (mode.kind == TraceMode::Kind::kExact) {
      Eigen::VectorXd basis = Eigen::VectorXd::Zero(n);
      for (Eigen::Index i = 0; i < n; ++i) {
        basis[i] = 1.0;
        trace += field.vjp_prepared(basis)[i];
        basis[i] = 0.0;
      }
    } else {
      for (const auto& eps : probes) trace += field.vjp_prepared(eps).dot(eps);
      trace /= static_cast<double>(mode.probe_count);
    }
    if (!std::isfinite(trace)) throw numerical_error("trace term became non-finite", step);
    return trace;
  };

  const std::vector<double> grid = karras_time_grid(schedule);
  Eigen::VectorXd x = x0;
  check_state(x, 0);
  double delta_log_p = 0.0;
  Eigen::VectorXd f0, f1;
  for (int i = 0; i + 1 < static_cast<int>(grid.size()); ++i) {
    const double t0 = grid[i];
    const double t1 = grid[i + 1];
    const double h = t1 - t0;

    const double tr0 = stage(x, t0, i, f0);
    Eigen::VectorXd x_pred = x + h * f0;
    check_state(x_pred, i);
    const double tr1 = stage(x_pred, t1, i, f1);

    x += 0.5 * h * (f0 + f1);
    delta_log_p += 0.5 * h * (tr0 + tr1);
    check_state(x, i);
  }

  LikelihoodResult result;
  result.x_T = std::move(x);
  result.delta_log_p = delta_log_p;
  result.n_elements = n;
  result.probe_seed = mode.probe_seed;
  result.log_p = log_p_terminal(result.x_T, schedule.sigma_max) + delta_log_p;
  result.log_p_per_dim = result.log_p / static_cast<double>(n);
  return result;
}

LikelihoodResult compute_log_likelihood(const DenoiserParams& params,
                                        const Eigen::Ref<const Eigen::VectorXd>& x0,
                                        const NoiseSchedule& schedule, const TraceMode& mode) {
  ModelDriftField field(params, schedule);
  return compute_log_likelihood(field, x0, schedule, mode);
}

std::vector<Eigen::VectorXd> extract_patches(const Eigen::Ref<const Eigen::MatrixXd>& values,
                                             Eigen::Index patch_frames) {
  if (patch_frames < 1) throw std::invalid_argument("extract_patches: patch_frames must be >= 1");
  const Eigen::Index frames = values.cols();
  const Eigen::Index full = frames / patch_frames;
  const Eigen::Index rem = frames - full * patch_frames;

  std::vector<Eigen::VectorXd> patches;
  patches.reserve(full + 1);
  for (Eigen::Index i = 0; i < full; ++i)
    patches.push_back(flatten_row_major(values.middleCols(i * patch_frames, patch_frames)));
  if (2 * rem >= patch_frames) {
    Eigen::MatrixXd padded = Eigen::MatrixXd::Zero(values.rows(), patch_frames);
    padded.leftCols(rem) = values.rightCols(rem);
    patches.push_back(flatten_row_major(padded));
  }
  return patches;
}

double score_utterance(const DenoiserParams& params, const MelSpectrogram& spec,
                       const NoiseSchedule& schedule, const TraceMode& mode) {
  if (!spec.normalized)
    throw std::invalid_argument("score_utterance: spectrogram must be normalized");
  const Eigen::Index n_mels = spec.values.rows();
  if (n_mels < 1 || params.arch.in_dim % n_mels != 0)
    throw std::invalid_argument("score_utterance: model input is not a whole number of frames");
  const Eigen::Index patch_frames = params.arch.in_dim / n_mels;

  const auto patches = extract_patches(spec.values, patch_frames);
  if (patches.empty())
    throw std::invalid_argument("score_utterance: input too short, need at least " +
                                std::to_string((patch_frames + 1) / 2) + " frames");

  ModelDriftField field(params, schedule);
  double acc = 0.0;
  for (const auto& patch : patches)
    acc += compute_log_likelihood(field, patch, schedule, mode).log_p_per_dim;
  return acc / static_cast<double>(patches.size());
}

}  // namespace dsqa
