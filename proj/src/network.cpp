#include "dsqa/network.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

namespace dsqa {
namespace {

// silu(z) = z * sigmoid(z); this form stays finite for any finite z.
template <typename Derived>
typename Derived::PlainObject silu(const Eigen::ArrayBase<Derived>& z) {
  return z.derived() / (1.0 + (-z.derived()).exp());
}

template <typename Derived>
typename Derived::PlainObject silu_grad(const Eigen::ArrayBase<Derived>& z) {
  const typename Derived::PlainObject s = 1.0 / (1.0 + (-z.derived()).exp());
  return s * (1.0 + z.derived() * (1.0 - s));
}

}  // namespace

void NetworkArch::validate() const {
  if (in_dim < 1) throw std::invalid_argument("NetworkArch: in_dim must be >= 1");
  for (const auto h : hidden_dims)
    if (h < 1) throw std::invalid_argument("NetworkArch: hidden widths must be >= 1");
  if (embed_dim < 0 || embed_dim % 2 != 0)
    throw std::invalid_argument("NetworkArch: embed_dim must be even");
}

std::vector<std::pair<Eigen::Index, Eigen::Index>> NetworkArch::layer_shapes() const {
  std::vector<std::pair<Eigen::Index, Eigen::Index>> shapes;
  shapes.reserve(hidden_dims.size() + 1);
  Eigen::Index prev = in_dim + embed_dim;
  for (const auto h : hidden_dims) {
    shapes.emplace_back(h, prev);
    prev = h;
  }
  shapes.emplace_back(in_dim, prev);
  return shapes;
}

void DenoiserParams::validate() const {
  arch.validate();
  const auto shapes = arch.layer_shapes();
  if (layers.size() != shapes.size())
    throw std::invalid_argument("DenoiserParams: layer count does not match arch");
  for (std::size_t l = 0; l < layers.size(); ++l) {
    if (layers[l].weight.rows() != shapes[l].first || layers[l].weight.cols() != shapes[l].second)
      throw std::invalid_argument("DenoiserParams: weight shape mismatch at layer " +
                                  std::to_string(l));
    if (layers[l].bias.size() != shapes[l].first)
      throw std::invalid_argument("DenoiserParams: bias shape mismatch at layer " +
                                  std::to_string(l));
  }
  if (!(sigma_data > 0.0)) throw std::invalid_argument("DenoiserParams: sigma_data must be > 0");
  if (!(feature_std > 0.0)) throw std::invalid_argument("DenoiserParams: feature_std must be > 0");
}

ParamGrads ParamGrads::zeros_like(const DenoiserParams& params) {
  ParamGrads g;
  g.layers.reserve(params.layers.size());
  for (const auto& l : params.layers)
    g.layers.push_back({Eigen::MatrixXd::Zero(l.weight.rows(), l.weight.cols()),
                        Eigen::VectorXd::Zero(l.bias.size())});
  return g;
}

DenoiserParams init_denoiser(const NetworkArch& arch, SeededRng& rng, double sigma_data) {
  arch.validate();
  DenoiserParams params;
  params.arch = arch;
  params.sigma_data = sigma_data;
  for (const auto [rows, cols] : arch.layer_shapes()) {
    Layer layer;
    layer.weight.resize(rows, cols);
    const double limit = std::sqrt(6.0 / static_cast<double>(cols));
    for (Eigen::Index r = 0; r < rows; ++r)
      for (Eigen::Index c = 0; c < cols; ++c)
        layer.weight(r, c) = (2.0 * rng.next_unit() - 1.0) * limit;
    layer.bias = Eigen::VectorXd::Zero(rows);
    params.layers.push_back(std::move(layer));
  }
  return params;
}

Eigen::VectorXd embed_noise(double c_noise_value, Eigen::Index embed_dim) {
  if (embed_dim < 0 || embed_dim % 2 != 0)
    throw std::invalid_argument("embed_noise: embed_dim must be even");
  const Eigen::Index half = embed_dim / 2;
  Eigen::VectorXd e(embed_dim);
  for (Eigen::Index k = 0; k < half; ++k) {
    const double expo =
        half > 1 ? 3.0 * static_cast<double>(k) / static_cast<double>(half - 1) : 0.0;
    const double freq = std::pow(10.0, expo);
    const double phase = 2.0 * std::numbers::pi * freq * c_noise_value;
    e[k] = std::sin(phase);
    e[half + k] = std::cos(phase);
  }
  return e;
}

const Eigen::VectorXd& forward(const DenoiserParams& params,
                               const Eigen::Ref<const Eigen::VectorXd>& x,
                               double c_noise_value, ForwardCache& cache) {
  const auto& arch = params.arch;
  if (x.size() != arch.in_dim) throw std::invalid_argument("forward: input size mismatch");
  const std::size_t hidden = arch.hidden_dims.size();

  cache.input.resize(arch.in_dim + arch.embed_dim);
  cache.input.head(arch.in_dim) = x;
  cache.input.tail(arch.embed_dim) = embed_noise(c_noise_value, arch.embed_dim);
  cache.preact.resize(hidden);
  cache.act.resize(hidden);

  const Eigen::VectorXd* cur = &cache.input;
  for (std::size_t l = 0; l < hidden; ++l) {
    cache.preact[l].noalias() = params.layers[l].weight * (*cur);
    cache.preact[l] += params.layers[l].bias;
    cache.act[l] = silu(cache.preact[l].array()).matrix();
    cur = &cache.act[l];
  }
  cache.output.noalias() = params.layers[hidden].weight * (*cur);
  cache.output += params.layers[hidden].bias;
  return cache.output;
}

Eigen::VectorXd forward(const DenoiserParams& params,
                        const Eigen::Ref<const Eigen::VectorXd>& x, double c_noise_value) {
  ForwardCache cache;
  return forward(params, x, c_noise_value, cache);
}

Eigen::VectorXd vjp_input(const DenoiserParams& params, const ForwardCache& cache,
                          const Eigen::Ref<const Eigen::VectorXd>& v) {
  if (v.size() != params.arch.in_dim)
    throw std::invalid_argument("vjp_input: cotangent size mismatch");
  const int hidden = static_cast<int>(params.arch.hidden_dims.size());

  Eigen::VectorXd g = v;
  for (int l = hidden; l >= 1; --l) {
    Eigen::VectorXd back = params.layers[l].weight.transpose() * g;
    g = (back.array() * silu_grad(cache.preact[l - 1].array())).matrix();
  }
  Eigen::VectorXd input_grad = params.layers[0].weight.transpose() * g;
  return input_grad.head(params.arch.in_dim);
}

Eigen::VectorXd vjp_input(const DenoiserParams& params,
                          const Eigen::Ref<const Eigen::VectorXd>& x, double c_noise_value,
                          const Eigen::Ref<const Eigen::VectorXd>& v) {
  ForwardCache cache;
  forward(params, x, c_noise_value, cache);
  return vjp_input(params, cache, v);
}

ParamGrads grad_params(const DenoiserParams& params, const ForwardCache& cache,
                       const Eigen::Ref<const Eigen::VectorXd>& upstream) {
  if (upstream.size() != params.arch.in_dim)
    throw std::invalid_argument("grad_params: upstream size mismatch");
  const int hidden = static_cast<int>(params.arch.hidden_dims.size());

  ParamGrads grads;
  grads.layers.resize(hidden + 1);
  Eigen::VectorXd delta = upstream;  // gradient w.r.t. the layer's linear output
  for (int l = hidden; l >= 0; --l) {
    const Eigen::VectorXd& below = (l == 0) ? cache.input : cache.act[l - 1];
    grads.layers[l].weight.noalias() = delta * below.transpose();
    grads.layers[l].bias = delta;
    if (l > 0) {
      Eigen::VectorXd back = params.layers[l].weight.transpose() * delta;
      delta = (back.array() * silu_grad(cache.preact[l - 1].array())).matrix();
    }
  }
  return grads;
}

ParamGrads grad_params(const DenoiserParams& params,
                       const Eigen::Ref<const Eigen::VectorXd>& x, double c_noise_value,
                       const Eigen::Ref<const Eigen::VectorXd>& upstream) {
  ForwardCache cache;
  forward(params, x, c_noise_value, cache);
  return grad_params(params, cache, upstream);
}

const Eigen::MatrixXd& forward_batch(const DenoiserParams& params,
                                     const Eigen::Ref<const Eigen::MatrixXd>& x,
                                     const Eigen::Ref<const Eigen::RowVectorXd>& c_noise_values,
                                     BatchForwardCache& cache) {
  const auto& arch = params.arch;
  if (x.rows() != arch.in_dim) throw std::invalid_argument("forward_batch: input size mismatch");
  if (c_noise_values.size() != x.cols())
    throw std::invalid_argument("forward_batch: conditioning count mismatch");
  const Eigen::Index batch = x.cols();
  const std::size_t hidden = arch.hidden_dims.size();

  cache.input.resize(arch.in_dim + arch.embed_dim, batch);
  cache.input.topRows(arch.in_dim) = x;
  for (Eigen::Index b = 0; b < batch; ++b)
    cache.input.col(b).tail(arch.embed_dim) = embed_noise(c_noise_values[b], arch.embed_dim);
  cache.preact.resize(hidden);
  cache.act.resize(hidden);

  const Eigen::MatrixXd* cur = &cache.input;
  for (std::size_t l = 0; l < hidden; ++l) {
    cache.preact[l].noalias() = params.layers[l].weight * (*cur);
    cache.preact[l].colwise() += params.layers[l].bias;
    cache.act[l] = silu(cache.preact[l].array()).matrix();
    cur = &cache.act[l];
  }
  cache.output.noalias() = params.layers[hidden].weight * (*cur);
  cache.output.colwise() += params.layers[hidden].bias;
  return cache.output;
}

ParamGrads grad_params_batch(const DenoiserParams& params, const BatchForwardCache& cache,
                             const Eigen::Ref<const Eigen::MatrixXd>& upstream) {
  if (upstream.rows() != params.arch.in_dim || upstream.cols() != cache.output.cols())
    throw std::invalid_argument("grad_params_batch: upstream shape mismatch");
  const int hidden = static_cast<int>(params.arch.hidden_dims.size());

  ParamGrads grads;
  grads.layers.resize(hidden + 1);
  Eigen::MatrixXd delta = upstream;
  for (int l = hidden; l >= 0; --l) {
    const Eigen::MatrixXd& below = (l == 0) ? cache.input : cache.act[l - 1];
    grads.layers[l].weight.noalias() = delta * below.transpose();
    grads.layers[l].bias = delta.rowwise().sum();
    if (l > 0) {
      Eigen::MatrixXd back = params.layers[l].weight.transpose() * delta;
      delta = (back.array() * silu_grad(cache.preact[l - 1].array())).matrix();
    }
  }
  return grads;
}

}  // namespace dsqa
