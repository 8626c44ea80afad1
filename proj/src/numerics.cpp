#include "expressivity/numerics.hpp"

#include <cmath>
#include <string>

#include "expressivity/errors.hpp"

namespace expressivity {

namespace {

// max(z, 0) + exp(min(z, 0)) - 1 equals elu(z) on both branches and
// vectorizes; exp(0) - 1 is exactly 0.
Matrix elu_matrix(const Matrix& z) {
  return (z.array().max(0.0) + (z.array().min(0.0).exp() - 1.0)).matrix();
}

// ELU derivative from z and h = elu(z): 1 for z > 0, h + 1 = exp(z) otherwise.
auto elu_grad_matrix(const Matrix& z, const Matrix& h) {
  return h.array() - z.array().max(0.0) + 1.0;
}

template <class A, class B>
void require_same_shape(const A& a, const B& b, std::string_view name) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw DimensionError("shape mismatch for " + std::string(name) + ": " +
                         std::to_string(a.rows()) + "x" + std::to_string(a.cols()) +
                         " vs " + std::to_string(b.rows()) + "x" +
                         std::to_string(b.cols()));
  }
}

}  // namespace

double elu(double x) { return x > 0.0 ? x : std::expm1(x); }

double elu_grad(double x) { return x > 0.0 ? 1.0 : std::exp(x); }

Matrix xavier_normal_init(std::size_t fan_in, std::size_t fan_out, Rng& rng) {
  if (fan_in == 0 || fan_out == 0) {
    throw DimensionError("xavier init needs fan_in, fan_out >= 1 (got " +
                         std::to_string(fan_in) + ", " + std::to_string(fan_out) + ")");
  }
  const double stddev = std::sqrt(2.0 / static_cast<double>(fan_in + fan_out));
  std::normal_distribution<double> normal(0.0, stddev);
  Matrix w(fan_in, fan_out);
  for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = normal(rng);
  return w;
}

bool all_finite(const Matrix& m) { return m.allFinite(); }

NetworkParams NetworkParams::zeros(std::size_t d_in) {
  if (d_in == 0) throw DimensionError("network input dimension must be >= 1");
  NetworkParams p;
  p.w1 = Matrix::Zero(d_in, kHidden1);
  p.w2 = Matrix::Zero(kHidden1, kHidden2);
  p.w3 = Matrix::Zero(kHidden2, 1);
  p.b1 = RowVector::Zero(kHidden1);
  p.b2 = RowVector::Zero(kHidden2);
  p.b3 = RowVector::Zero(1);
  return p;
}

NetworkParams NetworkParams::xavier(std::size_t d_in, Rng& rng) {
  NetworkParams p = zeros(d_in);
  p.w1 = xavier_normal_init(d_in, kHidden1, rng);
  p.w2 = xavier_normal_init(kHidden1, kHidden2, rng);
  p.w3 = xavier_normal_init(kHidden2, 1, rng);
  return p;
}

std::size_t NetworkParams::parameter_count() const {
  return static_cast<std::size_t>(w1.size() + w2.size() + w3.size() + b1.size() +
                                  b2.size() + b3.size());
}

ForwardResult forward(const NetworkParams& params, const Matrix& x) {
  if (static_cast<std::size_t>(x.cols()) != params.input_dim()) {
    throw DimensionError("forward: input has " + std::to_string(x.cols()) +
                         " columns, network expects " +
                         std::to_string(params.input_dim()));
  }
  ForwardResult out;
  ForwardCache& c = out.cache;
  c.input = x;
  c.z1.noalias() = x * params.w1;
  c.z1.rowwise() += params.b1;
  c.h1 = elu_matrix(c.z1);
  c.z2.noalias() = c.h1 * params.w2;
  c.z2.rowwise() += params.b2;
  c.h2 = elu_matrix(c.z2);
  out.scores.noalias() = c.h2 * params.w3.col(0);
  out.scores.array() += params.b3(0);
  c.input_dim = params.input_dim();
  c.params_version = params.version;
  c.valid = true;
  if (!out.scores.allFinite()) throw NumericError("forward: non-finite network output");
  return out;
}

Vector evaluate(const NetworkParams& params, const Matrix& x) {
  return forward(params, x).scores;
}

NetworkParams backward(const NetworkParams& params, const ForwardCache& cache,
                       const Vector& upstream) {
  if (!cache.valid) throw UsageError("backward: cache was not produced by forward");
  if (cache.input_dim != params.input_dim() || cache.params_version != params.version) {
    throw UsageError("backward: cache does not match the current parameters");
  }
  if (upstream.size() != cache.h2.rows()) {
    throw DimensionError("backward: upstream has " + std::to_string(upstream.size()) +
                         " rows, cache has " + std::to_string(cache.h2.rows()));
  }

  NetworkParams g;
  g.version = params.version;
  g.w3.noalias() = cache.h2.transpose() * upstream;
  g.b3 = RowVector::Constant(1, upstream.sum());

  Matrix dz2 = upstream * params.w3.col(0).transpose();
  dz2.array() *= elu_grad_matrix(cache.z2, cache.h2);
  g.w2.noalias() = cache.h1.transpose() * dz2;
  g.b2 = dz2.colwise().sum();

  Matrix dz1;
  dz1.noalias() = dz2 * params.w2.transpose();
  dz1.array() *= elu_grad_matrix(cache.z1, cache.h1);
  g.w1.noalias() = cache.input.transpose() * dz1;
  g.b1 = dz1.colwise().sum();
  return g;
}

AdamState AdamState::for_params(const NetworkParams& params, double learning_rate) {
  AdamState s;
  s.m = NetworkParams::zeros(params.input_dim());
  s.v = NetworkParams::zeros(params.input_dim());
  s.learning_rate = learning_rate;
  return s;
}

void adam_step(NetworkParams& params, const NetworkParams& grads, AdamState& state) {
  auto check = [](std::string_view name, const auto& p, const auto& m, const auto& g) {
    require_same_shape(p, g, name);
    require_same_shape(m, g, name);
    if (!g.allFinite()) {
      throw NumericError("adam_step: non-finite gradient in layer " + std::string(name));
    }
  };
  check("W1", params.w1, state.m.w1, grads.w1);
  check("b1", params.b1, state.m.b1, grads.b1);
  check("W2", params.w2, state.m.w2, grads.w2);
  check("b2", params.b2, state.m.b2, grads.b2);
  check("W3", params.w3, state.m.w3, grads.w3);
  check("b3", params.b3, state.m.b3, grads.b3);

  state.t += 1;
  const double t = static_cast<double>(state.t);
  const double bc1 = 1.0 - std::pow(state.beta1, t);
  const double bc2 = 1.0 - std::pow(state.beta2, t);
  const double beta1 = state.beta1, beta2 = state.beta2;
  const double lr = state.learning_rate, eps = state.epsilon;

  auto update = [&](auto& p, auto& m, auto& v, const auto& g) {
    m.array() = beta1 * m.array() + (1.0 - beta1) * g.array();
    v.array() = beta2 * v.array() + (1.0 - beta2) * g.array().square();
    p.array() -= lr * (m.array() / bc1) / ((v.array() / bc2).sqrt() + eps);
  };
  update(params.w1, state.m.w1, state.v.w1, grads.w1);
  update(params.b1, state.m.b1, state.v.b1, grads.b1);
  update(params.w2, state.m.w2, state.v.w2, grads.w2);
  update(params.b2, state.m.b2, state.v.b2, grads.b2);
  update(params.w3, state.m.w3, state.v.w3, grads.w3);
  update(params.b3, state.m.b3, state.v.b3, grads.b3);
  params.version += 1;
}

}  // namespace expressivity
