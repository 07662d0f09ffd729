#pragma once

#include <Eigen/Core>

#include <cstddef>
#include <functional>
#include <stdexcept>
#include <string>

namespace dsqa {

// Thrown when ODE integration leaves the finite/bounded regime. Carries the
// step index at which the state went bad.
class numerical_error : public std::runtime_error {
 public:
  numerical_error(const std::string& what, int step)
      : std::runtime_error(what + " (integration step " + std::to_string(step) + ")"),
        step_(step) {}
  int step() const noexcept { return step_; }

 private:
  int step_;
};

// Thread count resolution: explicit request > DSQA_THREADS > hardware.
int resolve_thread_count(int requested = 0);

// Runs fn(i) for i in [0, n). Callers must write results to per-index slots
// so the outcome does not depend on scheduling.
void parallel_for(std::size_t n, int threads, const std::function<void(std::size_t)>& fn);

// Row-major reshape helpers shared by patching and the binary file formats.
Eigen::VectorXd flatten_row_major(const Eigen::Ref<const Eigen::MatrixXd>& m);
Eigen::MatrixXd unflatten_row_major(const Eigen::Ref<const Eigen::VectorXd>& v,
                                    Eigen::Index rows, Eigen::Index cols);

// Shortest-ish decimal form used for every CSV/stdout number, so identical
// doubles always print identical bytes.
std::string format_double(double v);

}  // namespace dsqa
