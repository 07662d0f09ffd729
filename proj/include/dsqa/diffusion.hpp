#pragma once

#include <Eigen/Core>

#include <utility>
#include <vector>

#include "dsqa/network.hpp"

namespace dsqa {

// sigma(t) = t noise schedule with the rho-warped discrete time grid.
// sigma_max doubles as the terminal time T.
struct NoiseSchedule {
  double sigma_min = 0.002;
  double sigma_max = 80.0;
  double rho = 7.0;
  int num_steps = 32;

  void validate() const;
};

struct PrecondConstants {
  double c_in;
  double c_out;
  double c_skip;
  double c_noise;
};

// Scalings keeping network input/output near unit variance at noise level s:
//   c_skip = sd^2/(s^2+sd^2)        c_out = s*sd/sqrt(s^2+sd^2)
//   c_in   = 1/sqrt(s^2+sd^2)       c_noise = ln(s)/4
PrecondConstants precond_constants(double sigma, double sigma_data);

// D(x; sigma) = c_skip*x + c_out * F(c_in*x; c_noise)
Eigen::VectorXd denoise(const DenoiserParams& params,
                        const Eigen::Ref<const Eigen::VectorXd>& x, double sigma);
Eigen::VectorXd denoise(const DenoiserParams& params,
                        const Eigen::Ref<const Eigen::VectorXd>& x, double sigma,
                        ForwardCache& cache);

// Probability-flow drift f(x; t) = (x - D(x; t)) / t. The drift is 0/0 at
// t = 0, so t must stay at or above t_floor (the schedule's sigma_min).
Eigen::VectorXd drift(const DenoiserParams& params, const Eigen::Ref<const Eigen::VectorXd>& x,
                      double t, double t_floor);

// v^T df/dx = (v - c_skip*v - c_out*c_in * v^T dF/dx) / t, exact.
Eigen::VectorXd drift_vjp(const DenoiserParams& params,
                          const Eigen::Ref<const Eigen::VectorXd>& x, double t,
                          const Eigen::Ref<const Eigen::VectorXd>& v, double t_floor);

// Drift value and product from a single forward pass.
std::pair<Eigen::VectorXd, Eigen::VectorXd> drift_and_vjp(
    const DenoiserParams& params, const Eigen::Ref<const Eigen::VectorXd>& x, double t,
    const Eigen::Ref<const Eigen::VectorXd>& v, double t_floor);

// Ascending grid t_i = (smin^(1/rho) + i/(N-1) * (smax^(1/rho) - smin^(1/rho)))^rho,
// i = 0..N-1; endpoints are exact.
std::vector<double> karras_time_grid(const NoiseSchedule& schedule);

}  // namespace dsqa
