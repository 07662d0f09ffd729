#include "dsqa/diffusion.hpp"

#include <cmath>
#include <stdexcept>

namespace dsqa {
namespace {

void check_drift_time(double t, double t_floor) {
  if (!(t_floor > 0.0)) throw std::invalid_argument("drift: t_floor must be > 0");
  if (!(t >= t_floor))
    throw std::invalid_argument("drift: t below the schedule floor (drift is singular at t = 0)");
}

}  // namespace

void NoiseSchedule::validate() const {
  if (!(sigma_min > 0.0) || !(sigma_min < sigma_max))
    throw std::invalid_argument("NoiseSchedule: need 0 < sigma_min < sigma_max");
  if (!(rho > 0.0)) throw std::invalid_argument("NoiseSchedule: rho must be > 0");
  if (num_steps < 2) throw std::invalid_argument("NoiseSchedule: num_steps must be >= 2");
}

PrecondConstants precond_constants(double sigma, double sigma_data) {
  if (!(sigma > 0.0)) throw std::invalid_argument("precond_constants: sigma must be > 0");
  if (!(sigma_data > 0.0)) throw std::invalid_argument("precond_constants: sigma_data must be > 0");
  const double sum_sq = sigma * sigma + sigma_data * sigma_data;
  PrecondConstants c;
  c.c_skip = sigma_data * sigma_data / sum_sq;
  c.c_out = sigma * sigma_data / std::sqrt(sum_sq);
  c.c_in = 1.0 / std::sqrt(sum_sq);
  c.c_noise = std::log(sigma) / 4.0;
  return c;
}

Eigen::VectorXd denoise(const DenoiserParams& params,
                        const Eigen::Ref<const Eigen::VectorXd>& x, double sigma,
                        ForwardCache& cache) {
  const PrecondConstants c = precond_constants(sigma, params.sigma_data);
  forward(params, (c.c_in * x).eval(), c.c_noise, cache);
  return c.c_skip * x + c.c_out * cache.output;
}

Eigen::VectorXd denoise(const DenoiserParams& params,
                        const Eigen::Ref<const Eigen::VectorXd>& x, double sigma) {
  ForwardCache cache;
  return denoise(params, x, sigma, cache);
}

Eigen::VectorXd drift(const DenoiserParams& params, const Eigen::Ref<const Eigen::VectorXd>& x,
                      double t, double t_floor) {
  check_drift_time(t, t_floor);
  ForwardCache cache;
  return (x - denoise(params, x, t, cache)) / t;
}

Eigen::VectorXd drift_vjp(const DenoiserParams& params,
                          const Eigen::Ref<const Eigen::VectorXd>& x, double t,
                          const Eigen::Ref<const Eigen::VectorXd>& v, double t_floor) {
  return drift_and_vjp(params, x, t, v, t_floor).second;
}

std::pair<Eigen::VectorXd, Eigen::VectorXd> drift_and_vjp(
    const DenoiserParams& params, const Eigen::Ref<const Eigen::VectorXd>& x, double t,
    const Eigen::Ref<const Eigen::VectorXd>& v, double t_floor) {
  check_drift_time(t, t_floor);
  const PrecondConstants c = precond_constants(t, params.sigma_data);
  ForwardCache cache;
  forward(params, (c.c_in * x).eval(), c.c_noise, cache);
  Eigen::VectorXd denoised = c.c_skip * x + c.c_out * cache.output;
  Eigen::VectorXd f = (x - denoised) / t;
  Eigen::VectorXd w = vjp_input(params, cache, v);
  Eigen::VectorXd vj = (v - c.c_skip * v - (c.c_out * c.c_in) * w) / t;
  return {std::move(f), std::move(vj)};
}

std::vector<double> karras_time_grid(const NoiseSchedule& schedule) {
  schedule.validate();
  const double lo = std::pow(schedule.sigma_min, 1.0 / schedule.rho);
  const double hi = std::pow(schedule.sigma_max, 1.0 / schedule.rho);
  std::vector<double> grid(schedule.num_steps);
  for (int i = 0; i < schedule.num_steps; ++i) {
    const double frac = static_cast<double>(i) / static_cast<double>(schedule.num_steps - 1);
    grid[i] = std::pow(lo + frac * (hi - lo), schedule.rho);
  }
  grid.front() = schedule.sigma_min;
  grid.back() = schedule.sigma_max;
  return grid;
}

}  // namespace dsqa
