#pragma once

#include <Eigen/Core>

#include <utility>
#include <vector>

#include "dsqa/rng.hpp"

namespace dsqa {

// Shape of the denoiser MLP. The fixed sin/cos noise embedding is
// concatenated to the flattened input patch, so the first weight matrix has
// in_dim + embed_dim columns; the final layer projects back to in_dim with
// no activation.
struct NetworkArch {
  Eigen::Index in_dim = 80 * 64;
  std::vector<Eigen::Index> hidden_dims{512, 512, 512};
  Eigen::Index embed_dim = 64;

  void validate() const;
  // (rows, cols) of each weight matrix, input to output.
  std::vector<std::pair<Eigen::Index, Eigen::Index>> layer_shapes() const;
};

struct Layer {
  Eigen::MatrixXd weight;
  Eigen::VectorXd bias;
};

struct DenoiserParams {
  NetworkArch arch;
  std::vector<Layer> layers;
  double sigma_data = 0.5;
  // Global statistics of the log-mel training corpus; applied by the feature
  // pipeline, stored here so a checkpoint is self-contained.
  double feature_mean = 0.0;
  double feature_std = 1.0;

  void validate() const;
};

// Gradient set with the same layout as DenoiserParams::layers.
struct ParamGrads {
  std::vector<Layer> layers;
  static ParamGrads zeros_like(const DenoiserParams& params);
};

// He-uniform weights drawn from the given stream (row-major order), biases
// zero.
DenoiserParams init_denoiser(const NetworkArch& arch, SeededRng& rng, double sigma_data = 0.5);

// Fourier features [sin(2*pi*f_k*u)..., cos(2*pi*f_k*u)...] with embed_dim/2
// frequencies log-spaced in [1, 1000]. The frequencies are fixed, never
// learned, so the network Jacobian w.r.t. x never touches the embedding.
Eigen::VectorXd embed_noise(double c_noise_value, Eigen::Index embed_dim);

// Activations saved by a forward pass and reused by the backward passes.
struct ForwardCache {
  Eigen::VectorXd input;                // [x; embedding]
  std::vector<Eigen::VectorXd> preact;  // pre-activation of each hidden layer
  std::vector<Eigen::VectorXd> act;     // silu(preact)
  Eigen::VectorXd output;
};

const Eigen::VectorXd& forward(const DenoiserParams& params,
                               const Eigen::Ref<const Eigen::VectorXd>& x,
                               double c_noise_value, ForwardCache& cache);
Eigen::VectorXd forward(const DenoiserParams& params,
                        const Eigen::Ref<const Eigen::VectorXd>& x, double c_noise_value);

// v^T dF/dx at the cached point, by exact reverse mode.
Eigen::VectorXd vjp_input(const DenoiserParams& params, const ForwardCache& cache,
                          const Eigen::Ref<const Eigen::VectorXd>& v);
Eigen::VectorXd vjp_input(const DenoiserParams& params,
                          const Eigen::Ref<const Eigen::VectorXd>& x, double c_noise_value,
                          const Eigen::Ref<const Eigen::VectorXd>& v);

// Exact gradients of upstream^T F(x) w.r.t. every weight and bias.
ParamGrads grad_params(const DenoiserParams& params, const ForwardCache& cache,
                       const Eigen::Ref<const Eigen::VectorXd>& upstream);
ParamGrads grad_params(const DenoiserParams& params,
                       const Eigen::Ref<const Eigen::VectorXd>& x, double c_noise_value,
                       const Eigen::Ref<const Eigen::VectorXd>& upstream);

// Batched variants used by the trainer; columns are independent samples with
// per-column conditioning values.
struct BatchForwardCache {
  Eigen::MatrixXd input;
  std::vector<Eigen::MatrixXd> preact;
  std::vector<Eigen::MatrixXd> act;
  Eigen::MatrixXd output;
};

const Eigen::MatrixXd& forward_batch(const DenoiserParams& params,
                                     const Eigen::Ref<const Eigen::MatrixXd>& x,
                                     const Eigen::Ref<const Eigen::RowVectorXd>& c_noise_values,
                                     BatchForwardCache& cache);
// Per-sample gradients summed over all columns of upstream.
ParamGrads grad_params_batch(const DenoiserParams& params, const BatchForwardCache& cache,
                             const Eigen::Ref<const Eigen::MatrixXd>& upstream);

}  // namespace dsqa
