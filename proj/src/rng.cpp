#include "dsqa/rng.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace dsqa {

std::uint64_t derive_seed(std::uint64_t parent, std::uint64_t stream) {
  SeededRng mix(parent ^ (0xA0761D6478BD642Full * (stream + 1)));
  return mix.next_u64();
}

Eigen::VectorXd sample_rademacher(SeededRng& rng, Eigen::Index n) {
  if (n < 1) throw std::invalid_argument("sample_rademacher: n must be >= 1");
  Eigen::VectorXd out(n);
  for (Eigen::Index i = 0; i < n; ++i) out[i] = (rng.next_u64() >> 63) ? 1.0 : -1.0;
  return out;
}

Eigen::VectorXd sample_gaussian(SeededRng& rng, Eigen::Index n, double sigma) {
  if (sigma < 0.0) throw std::invalid_argument("sample_gaussian: sigma must be >= 0");
  if (n < 0) throw std::invalid_argument("sample_gaussian: n must be >= 0");
  Eigen::VectorXd out(n);
  for (Eigen::Index i = 0; i < n; i += 2) {
    const double u1 = 1.0 - rng.next_unit();  // (0, 1], keeps the log finite
    const double u2 = rng.next_unit();
    const double r = sigma * std::sqrt(-2.0 * std::log(u1));
    out[i] = r * std::cos(2.0 * std::numbers::pi * u2);
    if (i + 1 < n) out[i + 1] = r * std::sin(2.0 * std::numbers::pi * u2);
  }
  return out;
}

std::pair<double, double> mean_std(const Eigen::Ref<const Eigen::MatrixXd>& x) {
  if (x.size() == 0) throw std::invalid_argument("mean_std: empty input");
  const double mean = x.mean();
  const double var = (x.array() - mean).square().sum() / static_cast<double>(x.size());
  return {mean, std::sqrt(var)};
}

}  // namespace dsqa
