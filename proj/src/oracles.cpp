#include "dsqa/oracles.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace dsqa {
namespace {

struct Posterior {
  double log_density;    // log p_sigma(x)
  Eigen::VectorXd resp;  // posterior component weights
  Eigen::MatrixXd resid; // columns (mu_k - x) / v2
  double v2;             // s^2 + sigma^2
};

Posterior mixture_posterior(const GaussianMixture& gmm,
                            const Eigen::Ref<const Eigen::VectorXd>& x, double sigma) {
  if (x.size() != gmm.dim()) throw std::invalid_argument("GaussianMixture: dimension mismatch");
  const Eigen::Index n = gmm.dim();
  const Eigen::Index k = gmm.components();
  const double v2 = gmm.component_std * gmm.component_std + sigma * sigma;

  Posterior post;
  post.v2 = v2;
  post.resid.resize(n, k);
  Eigen::VectorXd log_terms(k);
  const double log_norm =
      -0.5 * static_cast<double>(n) * std::log(2.0 * std::numbers::pi * v2);
  for (Eigen::Index j = 0; j < k; ++j) {
    const Eigen::VectorXd diff = gmm.means.col(j) - x;
    post.resid.col(j) = diff / v2;
    log_terms[j] = std::log(gmm.weights[j]) + log_norm - diff.squaredNorm() / (2.0 * v2);
  }
  const double peak = log_terms.maxCoeff();
  post.log_density = peak + std::log((log_terms.array() - peak).exp().sum());
  post.resp = (log_terms.array() - post.log_density).exp();
  return post;
}

}  // namespace

void GaussianMixture::validate() const {
  if (means.rows() < 1 || means.cols() < 1)
    throw std::invalid_argument("GaussianMixture: need at least one component");
  if (weights.size() != means.cols())
    throw std::invalid_argument("GaussianMixture: weight count mismatch");
  if ((weights.array() <= 0.0).any())
    throw std::invalid_argument("GaussianMixture: weights must be positive");
  if (std::abs(weights.sum() - 1.0) > 1e-12)
    throw std::invalid_argument("GaussianMixture: weights must sum to 1");
  if (!(component_std > 0.0))
    throw std::invalid_argument("GaussianMixture: component_std must be > 0");
}

GaussianMixture GaussianMixture::isotropic(Eigen::Index dim, double std_dev) {
  GaussianMixture g;
  g.weights = Eigen::VectorXd::Ones(1);
  g.means = Eigen::MatrixXd::Zero(dim, 1);
  g.component_std = std_dev;
  g.validate();
  return g;
}

GaussianMixture GaussianMixture::symmetric_pair(const Eigen::VectorXd& mean, double std_dev) {
  GaussianMixture g;
  g.weights = Eigen::VectorXd::Constant(2, 0.5);
  g.means.resize(mean.size(), 2);
  g.means.col(0) = mean;
  g.means.col(1) = -mean;
  g.component_std = std_dev;
  g.validate();
  return g;
}

Eigen::VectorXd oracle_denoiser(const GaussianMixture& gmm,
                                const Eigen::Ref<const Eigen::VectorXd>& x, double sigma) {
  if (!(sigma > 0.0)) throw std::invalid_argument("oracle_denoiser: sigma must be > 0");
  const Posterior post = mixture_posterior(gmm, x, sigma);
  return x + (sigma * sigma) * (post.resid * post.resp);
}

double oracle_log_density(const GaussianMixture& gmm,
                          const Eigen::Ref<const Eigen::VectorXd>& x) {
  return mixture_posterior(gmm, x, 0.0).log_density;
}

double oracle_log_density_at(const GaussianMixture& gmm,
                             const Eigen::Ref<const Eigen::VectorXd>& x, double sigma) {
  return mixture_posterior(gmm, x, sigma).log_density;
}

Eigen::VectorXd oracle_score(const GaussianMixture& gmm,
                             const Eigen::Ref<const Eigen::VectorXd>& x, double sigma) {
  const Posterior post = mixture_posterior(gmm, x, sigma);
  return post.resid * post.resp;
}

Eigen::VectorXd oracle_drift(const GaussianMixture& gmm,
                             const Eigen::Ref<const Eigen::VectorXd>& x, double t) {
  if (!(t > 0.0)) throw std::invalid_argument("oracle_drift: t must be > 0");
  return -t * oracle_score(gmm, x, t);
}

// Hessian of log p_t: H = -I/v2 + sum_k resp_k r_k r_k^T - m m^T with
// r_k = (mu_k - x)/v2 and m the score; the drift Jacobian is -t*H.
Eigen::VectorXd oracle_drift_vjp(const GaussianMixture& gmm,
                                 const Eigen::Ref<const Eigen::VectorXd>& x, double t,
                                 const Eigen::Ref<const Eigen::VectorXd>& v) {
  if (!(t > 0.0)) throw std::invalid_argument("oracle_drift_vjp: t must be > 0");
  if (v.size() != gmm.dim()) throw std::invalid_argument("oracle_drift_vjp: shape mismatch");
  const Posterior post = mixture_posterior(gmm, x, t);
  const Eigen::VectorXd score = post.resid * post.resp;
  const Eigen::VectorXd projections = post.resid.transpose() * v;
  Eigen::VectorXd hv = -v / post.v2;
  hv.noalias() += post.resid * (post.resp.array() * projections.array()).matrix();
  hv -= score.dot(v) * score;
  return -t * hv;
}

double oracle_drift_trace(const GaussianMixture& gmm,
                          const Eigen::Ref<const Eigen::VectorXd>& x, double t) {
  if (!(t > 0.0)) throw std::invalid_argument("oracle_drift_trace: t must be > 0");
  const Posterior post = mixture_posterior(gmm, x, t);
  const Eigen::VectorXd score = post.resid * post.resp;
  const double tr_h = -static_cast<double>(gmm.dim()) / post.v2 +
                      post.resid.colwise().squaredNorm().dot(post.resp.transpose()) -
                      score.squaredNorm();
  return -t * tr_h;
}

OracleDriftField::OracleDriftField(GaussianMixture gmm) : gmm_(std::move(gmm)) {
  gmm_.validate();
}

Eigen::VectorXd OracleDriftField::prepare(const Eigen::Ref<const Eigen::VectorXd>& x, double t) {
  if (!(t > 0.0)) throw std::invalid_argument("OracleDriftField: t must be > 0");
  Posterior post = mixture_posterior(gmm_, x, t);
  t_ = t;
  inv_var_ = 1.0 / post.v2;
  resid_ = std::move(post.resid);
  resp_ = std::move(post.resp);
  score_ = resid_ * resp_;
  return -t * score_;
}

Eigen::VectorXd OracleDriftField::vjp_prepared(const Eigen::Ref<const Eigen::VectorXd>& v) const {
  if (t_ <= 0.0) throw std::logic_error("OracleDriftField: vjp_prepared before prepare");
  const Eigen::VectorXd projections = resid_.transpose() * v;
  Eigen::VectorXd hv = -inv_var_ * v;
  hv.noalias() += resid_ * (resp_.array() * projections.array()).matrix();
  hv -= score_.dot(v) * score_;
  return -t_ * hv;
}

}  // namespace dsqa
