#pragma once

// Dense multilayer perceptrons with hand-written reverse-mode gradients.

#include <Eigen/Core>

#include <atomic>
#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "srl/core/rng.hpp"

namespace srl::nn {

template <class Scalar>
using MatrixT = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <class Scalar>
using VectorT = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

using Matrix = MatrixT<float>;
using Vector = VectorT<float>;

enum class Activation { relu };

namespace detail {
inline std::uint64_t next_generation() {
  static std::atomic<std::uint64_t> counter{1};
  return counter.fetch_add(1, std::memory_order_relaxed);
}

inline std::string shape_string(Eigen::Index r, Eigen::Index c) {
  return std::to_string(r) + "x" + std::to_string(c);
}
}  // namespace detail

/// Weights and biases of an MLP. weights[l] maps layer l (cols) to layer
/// l + 1 (rows). Hidden layers use `activation`; the output layer is linear.
template <class Scalar>
struct BasicMlpParams {
  std::vector<int> layer_sizes;
  std::vector<MatrixT<Scalar>> weights;
  std::vector<VectorT<Scalar>> biases;
  Activation activation = Activation::relu;
  // Changes whenever the parameters are rewritten by an optimizer or loader;
  // forward caches remember it so a stale cache can be detected.
  std::uint64_t generation = detail::next_generation();

  static BasicMlpParams zeros(std::vector<int> sizes) {
    BasicMlpParams p;
    if (sizes.size() < 2) throw std::invalid_argument("mlp needs at least input and output layers");
    for (int s : sizes)
      if (s <= 0) throw std::invalid_argument("mlp layer sizes must be positive");
    p.layer_sizes = std::move(sizes);
    for (std::size_t l = 0; l + 1 < p.layer_sizes.size(); ++l) {
      p.weights.push_back(MatrixT<Scalar>::Zero(p.layer_sizes[l + 1], p.layer_sizes[l]));
      p.biases.push_back(VectorT<Scalar>::Zero(p.layer_sizes[l + 1]));
    }
    return p;
  }

  /// Fan-in scaled uniform init, U(-1/sqrt(fan_in), 1/sqrt(fan_in)), biases
  /// zero. `output_scale` shrinks the last layer (small initial policy logits).
  static BasicMlpParams init(std::vector<int> sizes, Rng& rng, double output_scale = 1.0) {
    BasicMlpParams p = zeros(std::move(sizes));
    for (std::size_t l = 0; l < p.weights.size(); ++l) {
      const double bound = 1.0 / std::sqrt(static_cast<double>(p.layer_sizes[l]));
      const double scale = (l + 1 == p.weights.size()) ? output_scale : 1.0;
      auto& w = p.weights[l];
      for (Eigen::Index j = 0; j < w.cols(); ++j)
        for (Eigen::Index i = 0; i < w.rows(); ++i)
          w(i, j) = static_cast<Scalar>(scale * rng.uniform(-bound, bound));
    }
    return p;
  }

  std::size_t num_layers() const { return weights.size(); }
  int input_size() const { return layer_sizes.front(); }
  int output_size() const { return layer_sizes.back(); }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (std::size_t l = 0; l < weights.size(); ++l) n += weights[l].size() + biases[l].size();
    return n;
  }

  void touch() { generation = detail::next_generation(); }

  /// Throws std::invalid_argument if shapes do not chain or an entry is not finite.
  void validate() const {
    if (layer_sizes.size() < 2 || weights.size() + 1 != layer_sizes.size() ||
        biases.size() != weights.size())
      throw std::invalid_argument("mlp layer count mismatch");
    for (std::size_t l = 0; l < weights.size(); ++l) {
      if (weights[l].rows() != layer_sizes[l + 1] || weights[l].cols() != layer_sizes[l])
        throw std::invalid_argument("mlp weight " + std::to_string(l) + " has shape " +
                                    detail::shape_string(weights[l].rows(), weights[l].cols()));
      if (biases[l].size() != layer_sizes[l + 1])
        throw std::invalid_argument("mlp bias " + std::to_string(l) + " has wrong length");
      if (!weights[l].allFinite() || !biases[l].allFinite())
        throw std::invalid_argument("mlp layer " + std::to_string(l) + " has non-finite entries");
    }
  }

  template <class Other>
  BasicMlpParams<Other> cast() const {
    BasicMlpParams<Other> p;
    p.layer_sizes = layer_sizes;
    p.activation = activation;
    for (const auto& w : weights) p.weights.push_back(w.template cast<Other>());
    for (const auto& b : biases) p.biases.push_back(b.template cast<Other>());
    return p;
  }

  /// Visits every parameter block as (data pointer, element count).
  template <class F>
  void for_each_block(F&& f) {
    for (std::size_t l = 0; l < weights.size(); ++l) {
      f(weights[l].data(), weights[l].size());
      f(biases[l].data(), biases[l].size());
    }
  }
  template <class F>
  void for_each_block(F&& f) const {
    for (std::size_t l = 0; l < weights.size(); ++l) {
      f(weights[l].data(), weights[l].size());
      f(biases[l].data(), biases[l].size());
    }
  }
};

using MlpParams = BasicMlpParams<float>;

/// Accumulated gradients, shaped like the parameters they belong to.
template <class Scalar>
struct BasicGradBuffer {
  std::vector<MatrixT<Scalar>> weights;
  std::vector<VectorT<Scalar>> biases;

  BasicGradBuffer() = default;
  explicit BasicGradBuffer(const BasicMlpParams<Scalar>& p) {
    for (std::size_t l = 0; l < p.weights.size(); ++l) {
      weights.push_back(MatrixT<Scalar>::Zero(p.weights[l].rows(), p.weights[l].cols()));
      biases.push_back(VectorT<Scalar>::Zero(p.biases[l].size()));
    }
  }

  void zero() {
    for (auto& w : weights) w.setZero();
    for (auto& b : biases) b.setZero();
  }

  void scale(Scalar s) {
    for (auto& w : weights) w *= s;
    for (auto& b : biases) b *= s;
  }

  BasicGradBuffer& operator+=(const BasicGradBuffer& o) {
    for (std::size_t l = 0; l < weights.size(); ++l) {
      weights[l] += o.weights[l];
      biases[l] += o.biases[l];
    }
    return *this;
  }

  double squared_norm() const {
    double s = 0.0;
    for (const auto& w : weights) s += static_cast<double>(w.squaredNorm());
    for (const auto& b : biases) s += static_cast<double>(b.squaredNorm());
    return s;
  }

  bool all_finite() const {
    for (const auto& w : weights)
      if (!w.allFinite()) return false;
    for (const auto& b : biases)
      if (!b.allFinite()) return false;
    return true;
  }

  bool matches(const BasicMlpParams<Scalar>& p) const {
    if (weights.size() != p.weights.size() || biases.size() != p.biases.size()) return false;
    for (std::size_t l = 0; l < weights.size(); ++l)
      if (weights[l].rows() != p.weights[l].rows() || weights[l].cols() != p.weights[l].cols() ||
          biases[l].size() != p.biases[l].size())
        return false;
    return true;
  }

  template <class F>
  void for_each_block(F&& f) {
    for (std::size_t l = 0; l < weights.size(); ++l) {
      f(weights[l].data(), weights[l].size());
      f(biases[l].data(), biases[l].size());
    }
  }
};

using GradBuffer = BasicGradBuffer<float>;

/// Rescales `g` so its global L2 norm is at most max_norm. Returns the norm
/// before clipping.
template <class Scalar>
double clip_global_norm(BasicGradBuffer<Scalar>& g, double max_norm) {
  const double norm = std::sqrt(g.squared_norm());
  if (max_norm > 0.0 && norm > max_norm) g.scale(static_cast<Scalar>(max_norm / norm));
  return norm;
}

/// Activations recorded by a forward pass; columns are batch entries.
template <class Scalar>
struct BasicForwardCache {
  std::vector<MatrixT<Scalar>> activations;  // activations[0] is the input
  std::vector<int> layer_sizes;
  std::uint64_t generation = 0;

  Eigen::Index batch_size() const { return activations.empty() ? 0 : activations.front().cols(); }
  const MatrixT<Scalar>& output() const { return activations.back(); }
};

using ForwardCache = BasicForwardCache<float>;

/// Batched forward pass. `input` is (input_size x batch).
template <class Scalar>
BasicForwardCache<Scalar> mlp_forward_batch(const BasicMlpParams<Scalar>& params,
                                            MatrixT<Scalar> input) {
  if (input.rows() != params.input_size())
    throw std::invalid_argument("mlp input has " + std::to_string(input.rows()) +
                                " rows, expected " + std::to_string(params.input_size()));
  BasicForwardCache<Scalar> cache;
  cache.layer_sizes = params.layer_sizes;
  cache.generation = params.generation;
  cache.activations.reserve(params.num_layers() + 1);
  cache.activations.push_back(std::move(input));
  for (std::size_t l = 0; l < params.num_layers(); ++l) {
    MatrixT<Scalar> z = params.weights[l] * cache.activations.back();
    z.colwise() += params.biases[l];
    if (l + 1 < params.num_layers()) z = z.cwiseMax(Scalar(0));
    cache.activations.push_back(std::move(z));
  }
  return cache;
}

/// Batched forward pass without keeping intermediate activations.
template <class Scalar>
MatrixT<Scalar> mlp_apply_batch(const BasicMlpParams<Scalar>& params, const MatrixT<Scalar>& input) {
  if (input.rows() != params.input_size())
    throw std::invalid_argument("mlp input has " + std::to_string(input.rows()) +
                                " rows, expected " + std::to_string(params.input_size()));
  MatrixT<Scalar> a = input;
  for (std::size_t l = 0; l < params.num_layers(); ++l) {
    MatrixT<Scalar> z = params.weights[l] * a;
    z.colwise() += params.biases[l];
    if (l + 1 < params.num_layers()) z = z.cwiseMax(Scalar(0));
    a = std::move(z);
  }
  return a;
}

/// Single-input forward pass returning the output and the cache for backward.
template <class Scalar>
std::pair<VectorT<Scalar>, BasicForwardCache<Scalar>> mlp_forward(
    const BasicMlpParams<Scalar>& params, std::span<const Scalar> input) {
  if (static_cast<int>(input.size()) != params.input_size())
    throw std::invalid_argument("mlp input has length " + std::to_string(input.size()) +
                                ", expected " + std::to_string(params.input_size()));
  MatrixT<Scalar> x =
      Eigen::Map<const MatrixT<Scalar>>(input.data(), static_cast<Eigen::Index>(input.size()), 1);
  auto cache = mlp_forward_batch(params, std::move(x));
  VectorT<Scalar> out = cache.output().col(0);
  return {std::move(out), std::move(cache)};
}

/// Matrix-vector evaluation for rollout collection; float-only fast path.
inline Vector mlp_apply(const MlpParams& params, std::span<const float> input) {
  if (static_cast<int>(input.size()) != params.input_size())
    throw std::invalid_argument("mlp input has length " + std::to_string(input.size()) +
                                ", expected " + std::to_string(params.input_size()));
  Vector a = Eigen::Map<const Vector>(input.data(), static_cast<Eigen::Index>(input.size()));
  for (std::size_t l = 0; l < params.num_layers(); ++l) {
    Vector z = params.weights[l] * a + params.biases[l];
    if (l + 1 < params.num_layers()) z = z.cwiseMax(0.0f);
    a = std::move(z);
  }
  return a;
}

/// Reverse pass. Adds d(loss)/d(params) into `grads`, where `output_grad`
/// (output_size x batch) is d(loss)/d(output). If `input_grad` is non-null it
/// receives d(loss)/d(input).
template <class Scalar>
void mlp_backward_accumulate(const BasicMlpParams<Scalar>& params,
                             const BasicForwardCache<Scalar>& cache,
                             const MatrixT<Scalar>& output_grad, BasicGradBuffer<Scalar>& grads,
                             MatrixT<Scalar>* input_grad = nullptr) {
  if (cache.generation != params.generation || cache.layer_sizes != params.layer_sizes ||
      cache.activations.size() != params.num_layers() + 1)
    throw std::invalid_argument("forward cache does not belong to these parameters");
  if (output_grad.rows() != params.output_size() || output_grad.cols() != cache.batch_size())
    throw std::invalid_argument("output gradient shape mismatch");
  if (!grads.matches(params)) throw std::invalid_argument("gradient buffer shape mismatch");

  MatrixT<Scalar> delta = output_grad;
  for (std::size_t l = params.num_layers(); l-- > 0;) {
    const auto& a_in = cache.activations[l];
    grads.weights[l].noalias() += delta * a_in.transpose();
    grads.biases[l].noalias() += delta.rowwise().sum();
    if (l == 0 && input_grad == nullptr) break;
    MatrixT<Scalar> back = params.weights[l].transpose() * delta;
    if (l > 0) back = back.cwiseProduct((a_in.array() > Scalar(0)).template cast<Scalar>().matrix());
    delta = std::move(back);
  }
  if (input_grad != nullptr) *input_grad = std::move(delta);
}

template <class Scalar>
BasicGradBuffer<Scalar> mlp_backward(const BasicMlpParams<Scalar>& params,
                                     const BasicForwardCache<Scalar>& cache,
                                     const MatrixT<Scalar>& output_grad) {
  BasicGradBuffer<Scalar> g(params);
  mlp_backward_accumulate(params, cache, output_grad, g);
  return g;
}

template <class Scalar>
BasicGradBuffer<Scalar> mlp_backward(const BasicMlpParams<Scalar>& params,
                                     const BasicForwardCache<Scalar>& cache,
                                     std::span<const Scalar> output_grad) {
  MatrixT<Scalar> g = Eigen::Map<const MatrixT<Scalar>>(
      output_grad.data(), static_cast<Eigen::Index>(output_grad.size()), 1);
  return mlp_backward(params, cache, g);
}

/// Packs equally sized feature vectors into a (dim x count) matrix.
inline Matrix stack_columns(const std::vector<std::vector<float>>& columns) {
  if (columns.empty()) return Matrix(0, 0);
  const auto dim = static_cast<Eigen::Index>(columns.front().size());
  Matrix m(dim, static_cast<Eigen::Index>(columns.size()));
  for (std::size_t j = 0; j < columns.size(); ++j) {
    if (static_cast<Eigen::Index>(columns[j].size()) != dim)
      throw std::invalid_argument("stack_columns: ragged input");
    m.col(static_cast<Eigen::Index>(j)) = Eigen::Map<const Vector>(columns[j].data(), dim);
  }
  return m;
}

}  // namespace srl::nn
