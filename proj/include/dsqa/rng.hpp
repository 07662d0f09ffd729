#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <utility>

namespace dsqa {

// SplitMix64 counter generator (Steele, Lea, Flood 2014). The output
// sequence for a given seed is fixed by the algorithm itself, not by the
// platform or standard library, which is what makes probe vectors and
// training runs reproducible everywhere.
class SeededRng {
 public:
  explicit SeededRng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64() {
    state_ += 0x9E3779B97F4A7C15ull;
    std::uint64_t z = state_;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
  }

  // Uniform in [0, 1) with 53-bit resolution.
  double next_unit() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

 private:
  std::uint64_t state_;
};

// Child-stream seed for parallel or per-subsystem work; runs the parent seed
// and stream index through one SplitMix64 step.
std::uint64_t derive_seed(std::uint64_t parent, std::uint64_t stream);

// n values in {-1, +1}, equiprobable. One u64 draw per value.
Eigen::VectorXd sample_rademacher(SeededRng& rng, Eigen::Index n);

// n i.i.d. N(0, sigma^2) draws via Box-Muller; consumes 2*ceil(n/2) uniforms.
Eigen::VectorXd sample_gaussian(SeededRng& rng, Eigen::Index n, double sigma);

// Arithmetic mean and population standard deviation over all coefficients.
std::pair<double, double> mean_std(const Eigen::Ref<const Eigen::MatrixXd>& x);

}  // namespace dsqa
