#include "expressivity/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>
#include <vector>

#include "expressivity/errors.hpp"
#include "expressivity/rng.hpp"

namespace expressivity::oracle {

namespace {

void check_rho(double rho) {
  if (!(rho > -1.0 && rho < 1.0)) {
    throw UsageError("rho must lie in (-1, 1), got " + std::to_string(rho));
  }
}

void check_n(std::size_t n) {
  if (n < 2) throw UsageError("n must be >= 2");
}

// Correlated (signal, attribute) pairs; shared by both Gaussian generators so
// the embedded variant with m = 1 reproduces the plain one draw for draw.
void draw_pairs(std::size_t n, double rho, std::uint64_t seed, Vector& signal,
                Vector& attribute) {
  Rng rng = make_rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  const double residual = std::sqrt(1.0 - rho * rho);
  signal.resize(static_cast<Eigen::Index>(n));
  attribute.resize(static_cast<Eigen::Index>(n));
  for (Eigen::Index i = 0; i < signal.size(); ++i) {
    const double z1 = normal(rng);
    const double z2 = normal(rng);
    signal(i) = z1;
    attribute(i) = rho * z1 + residual * z2;
  }
}

double sorted_sum(std::vector<double> values) {
  std::sort(values.begin(), values.end());
  double s = 0.0;
  for (double v : values) s += v;
  return s;
}

}  // namespace

double gaussian_mi(double rho) {
  check_rho(rho);
  return -0.5 * std::log1p(-rho * rho);
}

double binary_entropy(double p) {
  if (!(p >= 0.0 && p <= 1.0)) throw UsageError("probability outside [0, 1]");
  double h = 0.0;
  if (p > 0.0) h -= p * std::log(p);
  if (p < 1.0) h -= (1.0 - p) * std::log1p(-p);
  return h;
}

double binary_channel_mi(double p_flip) {
  if (!(p_flip >= 0.0 && p_flip <= 0.5)) {
    throw UsageError("p_flip must lie in [0, 0.5], got " + std::to_string(p_flip));
  }
  if (p_flip == 0.5) return 0.0;
  return std::max(0.0, std::numbers::ln2 - binary_entropy(p_flip));
}

Dataset gen_correlated_gaussian(std::size_t n, double rho, std::uint64_t seed) {
  check_rho(rho);
  check_n(n);
  Vector signal, attribute;
  draw_pairs(n, rho, seed, signal, attribute);
  Matrix f = signal;
  return {FeatureMatrix::from_values(std::move(f), "gaussian"),
          AttributeVector::from_values(std::move(attribute), "attribute",
                                       AttributeKind::kContinuous),
          gaussian_mi(rho)};
}

Vector embedded_signal_direction(std::size_t m, std::uint64_t seed) {
  if (m == 0) throw UsageError("m must be >= 1");
  Rng rng = make_rng(split_seed(seed, 1));
  std::normal_distribution<double> normal(0.0, 1.0);
  Vector u(static_cast<Eigen::Index>(m));
  double norm = 0.0;
  do {
    for (Eigen::Index i = 0; i < u.size(); ++i) u(i) = normal(rng);
    norm = u.norm();
  } while (!(norm > 0.0));
  u /= norm;
  for (Eigen::Index i = 0; i < u.size(); ++i) {
    if (u(i) != 0.0) {
      if (u(i) < 0.0) u = -u;
      break;
    }
  }
  if (m == 1) u(0) = 1.0;
  return u;
}

Dataset gen_embedded_signal(std::size_t n, std::size_t m, double rho, std::uint64_t seed) {
  check_rho(rho);
  check_n(n);
  const Vector u = embedded_signal_direction(m, seed);
  Vector signal, attribute;
  draw_pairs(n, rho, seed, signal, attribute);

  Matrix f(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(m));
  if (m == 1) {
    f.col(0) = signal;
  } else {
    Rng noise_rng = make_rng(split_seed(seed, 2));
    std::normal_distribution<double> normal(0.0, 1.0);
    for (Eigen::Index r = 0; r < f.rows(); ++r) {
      for (Eigen::Index c = 0; c < f.cols(); ++c) f(r, c) = normal(noise_rng);
    }
    // Remove the noise component along u, then plant the signal there.
    const Vector along = f * u;
    f.noalias() -= (along - signal) * u.transpose();
  }
  return {FeatureMatrix::from_values(std::move(f), "embedded"),
          AttributeVector::from_values(std::move(attribute), "attribute",
                                       AttributeKind::kContinuous),
          gaussian_mi(rho)};
}

Dataset gen_binary_channel(std::size_t n, double p_flip, std::uint64_t seed) {
  const double mi = binary_channel_mi(p_flip);
  check_n(n);
  Rng rng = make_rng(seed);
  std::bernoulli_distribution coin(0.5);
  std::bernoulli_distribution flip(p_flip);
  std::normal_distribution<double> dither(0.0, kChannelDither);
  Matrix f(static_cast<Eigen::Index>(n), 1);
  Vector a(static_cast<Eigen::Index>(n));
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    const bool bit = coin(rng);
    const bool seen = flip(rng) ? !bit : bit;
    a(i) = bit ? 1.0 : 0.0;
    f(i, 0) = (seen ? 1.0 : 0.0) + dither(rng);
  }
  return {FeatureMatrix::from_values(std::move(f), "channel"),
          AttributeVector::from_values(std::move(a), "attribute", AttributeKind::kBinary),
          mi};
}

double discrete_entropy(std::span<const double> counts) {
  double total = 0.0;
  for (double c : counts) {
    if (!(c >= 0.0) || !std::isfinite(c)) throw DataError("counts must be finite and >= 0");
    total += c;
  }
  if (!(total > 0.0)) throw DataError("all-zero count vector");
  double h = 0.0;
  for (double c : counts) {
    if (c > 0.0) h -= (c / total) * std::log(c / total);
  }
  return h;
}

double brute_force_mi_discrete(const Matrix& joint_counts) {
  if (joint_counts.size() == 0) throw DataError("empty contingency table");
  if (!joint_counts.allFinite() || (joint_counts.array() < 0.0).any()) {
    throw DataError("contingency table must hold finite non-negative counts");
  }
  // Every sum runs in sorted order so the result does not depend on the table
  // orientation.
  const Matrix& t = joint_counts;
  const double total = sorted_sum({t.data(), t.data() + t.size()});
  if (!(total > 0.0)) throw DataError("all-zero contingency table");
  Vector row(t.rows());
  RowVector col(t.cols());
  for (Eigen::Index r = 0; r < t.rows(); ++r) {
    row(r) = sorted_sum({t.row(r).begin(), t.row(r).end()}) / total;
  }
  for (Eigen::Index c = 0; c < t.cols(); ++c) {
    col(c) = sorted_sum({t.col(c).begin(), t.col(c).end()}) / total;
  }
  std::vector<double> terms;
  for (Eigen::Index r = 0; r < joint_counts.rows(); ++r) {
    for (Eigen::Index c = 0; c < joint_counts.cols(); ++c) {
      const double p = joint_counts(r, c) / total;
      if (p > 0.0) terms.push_back(p * std::log(p / (row(r) * col(c))));
    }
  }
  return std::max(0.0, sorted_sum(std::move(terms)));
}

}  // namespace expressivity::oracle
