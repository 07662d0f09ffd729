#pragma once

#include <Eigen/Core>

#include "dsqa/likelihood.hpp"

namespace dsqa {

// Isotropic Gaussian mixture with a shared component std. Every quantity
// the likelihood engine consumes has a closed form here, which is what makes
// the engine testable without any training.
struct GaussianMixture {
  Eigen::VectorXd weights;  // positive, sums to 1
  Eigen::MatrixXd means;    // dim x K, one column per component
  double component_std = 1.0;

  Eigen::Index dim() const { return means.rows(); }
  Eigen::Index components() const { return means.cols(); }
  void validate() const;

  static GaussianMixture isotropic(Eigen::Index dim, double std_dev);
  // Equal-weight pair at +mean and -mean.
  static GaussianMixture symmetric_pair(const Eigen::VectorXd& mean, double std_dev);
};

// Posterior-mean denoiser of the mixture convolved with N(0, sigma^2 I):
// D(x; sigma) = x + sigma^2 * grad log p_sigma(x).
Eigen::VectorXd oracle_denoiser(const GaussianMixture& gmm,
                                const Eigen::Ref<const Eigen::VectorXd>& x, double sigma);

// log p(x) of the clean mixture (sigma = 0), log-sum-exp stabilized.
double oracle_log_density(const GaussianMixture& gmm,
                          const Eigen::Ref<const Eigen::VectorXd>& x);
// log p_sigma(x) of the noised mixture.
double oracle_log_density_at(const GaussianMixture& gmm,
                             const Eigen::Ref<const Eigen::VectorXd>& x, double sigma);
// grad_x log p_sigma(x).
Eigen::VectorXd oracle_score(const GaussianMixture& gmm,
                             const Eigen::Ref<const Eigen::VectorXd>& x, double sigma);

// Drift of the sigma(t)=t flow, f(x; t) = -t * grad log p_t(x), with its
// exact product and trace from the analytic Hessian of log p_t.
Eigen::VectorXd oracle_drift(const GaussianMixture& gmm,
                             const Eigen::Ref<const Eigen::VectorXd>& x, double t);
Eigen::VectorXd oracle_drift_vjp(const GaussianMixture& gmm,
                                 const Eigen::Ref<const Eigen::VectorXd>& x, double t,
                                 const Eigen::Ref<const Eigen::VectorXd>& v);
double oracle_drift_trace(const GaussianMixture& gmm,
                          const Eigen::Ref<const Eigen::VectorXd>& x, double t);

// Engine adapter around the closed-form drift.
class OracleDriftField final : public DriftField {
 public:
  explicit OracleDriftField(GaussianMixture gmm);

  Eigen::Index dim() const override { return gmm_.dim(); }
  Eigen::VectorXd prepare(const Eigen::Ref<const Eigen::VectorXd>& x, double t) override;
  Eigen::VectorXd vjp_prepared(const Eigen::Ref<const Eigen::VectorXd>& v) const override;

 private:
  GaussianMixture gmm_;
  double t_ = 0.0;
  double inv_var_ = 0.0;     // 1 / (s^2 + t^2)
  Eigen::MatrixXd resid_;    // columns (mu_k - x) / (s^2 + t^2)
  Eigen::VectorXd resp_;     // posterior weights
  Eigen::VectorXd score_;    // grad log p_t(x)
};

}  // namespace dsqa
