#pragma once

// Dense numerics for the statistics network: a row-major double matrix,
// ELU, Xavier initialization, a (d_in -> 512 -> 128 -> 1) MLP with hand
// written forward/backward passes, and Adam.

#include <Eigen/Dense>

#include <cstddef>
#include <cstdint>
#include <string_view>

#include "expressivity/rng.hpp"

namespace expressivity {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using RowVector = Eigen::RowVectorXd;
using Vector = Eigen::VectorXd;

inline constexpr std::size_t kHidden1 = 512;
inline constexpr std::size_t kHidden2 = 128;

double elu(double x);
// Derivative of elu at x.
double elu_grad(double x);

// fan_in x fan_out matrix of N(0, 2 / (fan_in + fan_out)) draws.
Matrix xavier_normal_init(std::size_t fan_in, std::size_t fan_out, Rng& rng);

bool all_finite(const Matrix& m);

struct NetworkParams {
  Matrix w1, w2, w3;
  RowVector b1, b2, b3;
  // Bumped by every in-place update; forward caches remember it so that a
  // backward pass against modified parameters is caught.
  std::uint64_t version = 0;

  static NetworkParams zeros(std::size_t d_in);
  // Xavier-normal weights, zero biases.
  static NetworkParams xavier(std::size_t d_in, Rng& rng);

  std::size_t input_dim() const { return static_cast<std::size_t>(w1.rows()); }
  std::size_t parameter_count() const;
};

// Calls fn(name, tensor) for the six tensors of `params` in a fixed order.
template <class Params, class Fn>
void visit_tensors(Params& params, Fn&& fn) {
  fn(std::string_view("W1"), params.w1);
  fn(std::string_view("b1"), params.b1);
  fn(std::string_view("W2"), params.w2);
  fn(std::string_view("b2"), params.b2);
  fn(std::string_view("W3"), params.w3);
  fn(std::string_view("b3"), params.b3);
}

struct ForwardCache {
  Matrix input;
  Matrix z1, h1;
  Matrix z2, h2;
  std::size_t input_dim = 0;
  std::uint64_t params_version = 0;
  bool valid = false;
};

struct ForwardResult {
  Vector scores;
  ForwardCache cache;
};

// Row-wise scores of the network on x (b x d_in).
ForwardResult forward(const NetworkParams& params, const Matrix& x);

// Scores without keeping the activation cache.
Vector evaluate(const NetworkParams& params, const Matrix& x);

// Gradients of sum_i upstream_i * score_i with respect to every parameter.
NetworkParams backward(const NetworkParams& params, const ForwardCache& cache,
                       const Vector& upstream);

struct AdamState {
  NetworkParams m;
  NetworkParams v;
  std::uint64_t t = 0;
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  static AdamState for_params(const NetworkParams& params, double learning_rate);
};

// One bias-corrected Adam update, in place. Throws NumericError naming the
// tensor when a gradient entry is not finite; params and state are untouched
// in that case.
void adam_step(NetworkParams& params, const NetworkParams& grads, AdamState& state);

}  // namespace expressivity
