#pragma once

// Central finite-difference check of backward(), shared by the unit and
// acceptance suites.

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "expressivity/numerics.hpp"

namespace expressivity::testing {

struct GradientCheckReport {
  double max_relative_error = 0.0;
  std::size_t entries_checked = 0;
};

inline constexpr double kFiniteDifferenceStep = 1e-5;
// Denominator floor for the relative error, so entries whose true gradient is
// ~0 are judged on absolute error instead.
inline constexpr double kRelativeErrorFloor = 1e-6;

// One random configuration: Xavier weights, N(0, 0.3^2) biases, N(0, 1)
// inputs and upstream weights. Checks `per_tensor` random entries of every
// tensor (all entries when a tensor is smaller).
inline GradientCheckReport gradient_check(Rng& rng, std::size_t d_in, std::size_t batch,
                                          std::size_t per_tensor) {
  std::normal_distribution<double> normal(0.0, 1.0);
  NetworkParams p = NetworkParams::xavier(d_in, rng);
  for (auto* b : {&p.b1, &p.b2, &p.b3}) {
    for (Eigen::Index i = 0; i < b->size(); ++i) (*b)(i) = 0.3 * normal(rng);
  }
  Matrix x(batch, d_in);
  for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = normal(rng);
  Vector upstream(batch);
  for (Eigen::Index i = 0; i < upstream.size(); ++i) upstream(i) = normal(rng);

  const auto fw = forward(p, x);
  const NetworkParams analytic = backward(p, fw.cache, upstream);

  auto objective = [&](const NetworkParams& q) { return upstream.dot(evaluate(q, x)); };

  GradientCheckReport report;
  auto check_tensor = [&](auto& tensor, const auto& grad) {
    const Eigen::Index size = tensor.size();
    std::vector<Eigen::Index> idx;
    if (static_cast<std::size_t>(size) <= per_tensor) {
      for (Eigen::Index i = 0; i < size; ++i) idx.push_back(i);
    } else {
      std::uniform_int_distribution<Eigen::Index> pick(0, size - 1);
      for (std::size_t k = 0; k < per_tensor; ++k) idx.push_back(pick(rng));
    }
    for (Eigen::Index i : idx) {
      const double saved = tensor.data()[i];
      tensor.data()[i] = saved + kFiniteDifferenceStep;
      const double up = objective(p);
      tensor.data()[i] = saved - kFiniteDifferenceStep;
      const double down = objective(p);
      tensor.data()[i] = saved;
      const double numeric = (up - down) / (2.0 * kFiniteDifferenceStep);
      const double a = grad.data()[i];
      const double denom = std::max({std::abs(a), std::abs(numeric), kRelativeErrorFloor});
      report.max_relative_error = std::max(report.max_relative_error, std::abs(a - numeric) / denom);
      ++report.entries_checked;
    }
  };
  check_tensor(p.w1, analytic.w1);
  check_tensor(p.b1, analytic.b1);
  check_tensor(p.w2, analytic.w2);
  check_tensor(p.b2, analytic.b2);
  check_tensor(p.w3, analytic.w3);
  check_tensor(p.b3, analytic.b3);
  return report;
}

}  // namespace expressivity::testing
