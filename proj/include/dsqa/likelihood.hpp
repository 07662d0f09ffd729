#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <functional>
#include <vector>

#include "dsqa/diffusion.hpp"
#include "dsqa/features.hpp"

namespace dsqa {

// Exact trace costs one backward pass per element per drift evaluation, so
// it is gated to small state dimensions.
inline constexpr Eigen::Index kExactTraceMaxDim = 4096;

// How the Jacobian trace of the drift is estimated along the flow.
struct TraceMode {
  enum class Kind { kHutchinson, kExact };

  Kind kind = Kind::kHutchinson;
  int probe_count = 1;
  std::uint64_t probe_seed = 0;

  static TraceMode hutchinson(int probe_count = 1, std::uint64_t probe_seed = 0) {
    return {Kind::kHutchinson, probe_count, probe_seed};
  }
  static TraceMode exact() { return {Kind::kExact, 0, 0}; }

  void validate(Eigen::Index n_elements) const;
};

struct LikelihoodResult {
  double log_p = 0.0;          // nats
  double log_p_per_dim = 0.0;  // nats per element
  double delta_log_p = 0.0;    // integral of the trace term
  Eigen::VectorXd x_T;         // terminal state
  std::uint64_t probe_seed = 0;
  Eigen::Index n_elements = 0;
};

// A drift field f(x, t) over R^n with exact vector-Jacobian products.
// prepare() fixes the evaluation point and returns f(x, t); vjp_prepared()
// then reuses that forward pass. Instances are cheap and single-threaded;
// use one per worker.
class DriftField {
 public:
  virtual ~DriftField() = default;
  virtual Eigen::Index dim() const = 0;
  // Characteristic scale of the clean data; the solver integrates the state
  // rescaled by sqrt(data_std^2 + t^2), which removes the t-fold amplitude
  // growth of the flow from the discretization error.
  virtual double data_std() const = 0;
  virtual Eigen::VectorXd prepare(const Eigen::Ref<const Eigen::VectorXd>& x, double t) = 0;
  virtual Eigen::VectorXd vjp_prepared(const Eigen::Ref<const Eigen::VectorXd>& v) const = 0;

  Eigen::VectorXd drift(const Eigen::Ref<const Eigen::VectorXd>& x, double t) {
    return prepare(x, t);
  }
  Eigen::VectorXd vjp(const Eigen::Ref<const Eigen::VectorXd>& x, double t,
                      const Eigen::Ref<const Eigen::VectorXd>& v) {
    prepare(x, t);
    return vjp_prepared(v);
  }
};

// The trained-model drift of the sigma(t)=t flow.
class ModelDriftField final : public DriftField {
 public:
  ModelDriftField(const DenoiserParams& params, const NoiseSchedule& schedule);

  Eigen::Index dim() const override { return params_->arch.in_dim; }
  Eigen::VectorXd prepare(const Eigen::Ref<const Eigen::VectorXd>& x, double t) override;
  Eigen::VectorXd vjp_prepared(const Eigen::Ref<const Eigen::VectorXd>& v) const override;

 private:
  const DenoiserParams* params_;
  NoiseSchedule schedule_;
  ForwardCache cache_;
  double c_skip_ = 0.0;
  double c_out_in_ = 0.0;
  double t_ = 0.0;
};

// A vjp closure (x, v) -> v^T df/dx at some fixed time.
using DriftVjpFn =
    std::function<Eigen::VectorXd(const Eigen::VectorXd& x, const Eigen::VectorXd& v)>;

// eps^T (df/dx) eps from one product and one dot; eps must be a Rademacher
// vector.
double hutchinson_trace_term(const DriftVjpFn& drift_vjp, const Eigen::VectorXd& x,
                             const Eigen::VectorXd& eps);

// Sum of e_i^T (df/dx) e_i over all basis vectors; gated by kExactTraceMaxDim.
double exact_trace_term(const DriftVjpFn& drift_vjp, const Eigen::VectorXd& x);

// log N(x_T; 0, T^2 I) = -(n/2) ln(2 pi T^2) - |x_T|^2 / (2 T^2)
double log_p_terminal(const Eigen::Ref<const Eigen::VectorXd>& x_T, double T);

// Integrates the coupled state/trace system from sigma_min to T with Heun
// steps on the rho-warped grid; the trapezoidal correction is applied to the
// state and the trace accumulator alike. Deterministic given its arguments.
LikelihoodResult compute_log_likelihood(DriftField& field,
                                        const Eigen::Ref<const Eigen::VectorXd>& x0,
                                        const NoiseSchedule& schedule, const TraceMode& mode);
LikelihoodResult compute_log_likelihood(const DenoiserParams& params,
                                        const Eigen::Ref<const Eigen::VectorXd>& x0,
                                        const NoiseSchedule& schedule, const TraceMode& mode);

// Non-overlapping patches of patch_frames columns, flattened row-major. A
// trailing remainder of at least half a patch is zero-padded to a full
// patch; anything shorter is dropped.
std::vector<Eigen::VectorXd> extract_patches(const Eigen::Ref<const Eigen::MatrixXd>& values,
                                             Eigen::Index patch_frames);

// Mean per-element log-likelihood over the patches of a normalized
// spectrogram. Higher means closer to the learned clean distribution. The
// patch width is arch.in_dim / n_mels.
double score_utterance(const DenoiserParams& params, const MelSpectrogram& spec,
                       const NoiseSchedule& schedule, const TraceMode& mode);

}  // namespace dsqa
