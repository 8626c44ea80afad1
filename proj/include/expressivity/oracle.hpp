#pragma once

// Synthetic datasets with known mutual information, in nats.

#include <cstdint>
#include <span>

#include "expressivity/data.hpp"

namespace expressivity::oracle {

struct Dataset {
  FeatureMatrix features;
  AttributeVector attribute;
  double true_mi = 0.0;
};

// -0.5 * ln(1 - rho^2)
double gaussian_mi(double rho);
// Binary entropy in nats.
double binary_entropy(double p);
// ln 2 - H_b(p_flip)
double binary_channel_mi(double p_flip);

// (f, a) standard bivariate normal with correlation rho.
Dataset gen_correlated_gaussian(std::size_t n, double rho, std::uint64_t seed);

// A rho-correlated scalar signal placed along a random unit direction of R^m,
// plus isotropic Gaussian noise in the orthogonal complement. The direction is
// sign-normalized (first non-zero component positive), so m = 1 reproduces
// gen_correlated_gaussian exactly.
Dataset gen_embedded_signal(std::size_t n, std::size_t m, double rho, std::uint64_t seed);

// The unit direction gen_embedded_signal uses for (m, seed).
Vector embedded_signal_direction(std::size_t m, std::uint64_t seed);

inline constexpr double kChannelDither = 0.05;

// A ~ Bernoulli(1/2); feature = A flipped with probability p_flip, plus
// N(0, kChannelDither^2) dither.
Dataset gen_binary_channel(std::size_t n, double p_flip, std::uint64_t seed);

// Plug-in MI of a rows x cols contingency table of non-negative counts.
double brute_force_mi_discrete(const Matrix& joint_counts);

// Plug-in entropy of a vector of non-negative counts.
double discrete_entropy(std::span<const double> counts);

}  // namespace expressivity::oracle
