#pragma once

// Donsker-Varadhan mutual information estimator (MINE).
//
// The statistics network T scores augmented rows [f | a]. Joint rows keep
// the observed pairing; marginal rows reuse the same features with the
// attribute column shuffled inside the minibatch. The trained objective is
//
//   V = mean_joint(T) - log mean_marginal(exp T)
//
// and the gradient replaces the per-batch partition denominator by an
// exponential moving average of mean(exp T) over marginal batches.

#include <cstdint>
#include <span>
#include <vector>

#include "expressivity/data.hpp"
#include "expressivity/numerics.hpp"
#include "expressivity/rng.hpp"

namespace expressivity {

struct MineConfig {
  double learning_rate = 1e-3;
  std::size_t batch_size = 100;
  std::size_t max_iterations = 5000;
  std::size_t convergence_window = 50;
  double convergence_tol = 1e-4;
  double ema_decay = 0.99;
  std::size_t eval_batches = 100;
  // Row fractions held out of training. Validation rows drive early stopping
  // (the best validation checkpoint is kept). The final value is averaged over
  // test rows when test_fraction > 0, otherwise over the training rows.
  double validation_fraction = 0.15;
  double test_fraction = 0.15;
  // Validation checks (one per convergence window) without improvement
  // before training stops.
  std::size_t patience = 10;
  std::uint64_t seed = 0;

  // Throws UsageError when an invariant does not hold.
  void validate() const;
};

struct MiEstimate {
  double value = 0.0;  // nats
  std::vector<double> trace;
  std::size_t iterations_run = 0;
  bool converged = false;
  bool early_stopped = false;
  std::size_t best_iteration = 0;  // iteration whose parameters were kept
  std::uint64_t seed = 0;
};

// Fisher-Yates shuffle of a minibatch attribute column. Requires >= 2 rows.
Vector shuffle_marginal(const Vector& batch_attrs, Rng& rng);

// log((1/b) sum exp(t_i)) evaluated with max subtraction.
double log_mean_exp(std::span<const double> t);
double log_mean_exp(const Vector& t);

// mean(t_joint) - log_mean_exp(t_marginal).
double dv_objective(const Vector& t_joint, const Vector& t_marginal);

// Running estimate of E_marginal[exp T] used as the gradient denominator.
struct EmaState {
  double value = 0.0;
  bool initialized = false;

  // Folds in a batch mean: the first call adopts it, later calls blend
  // decay * value + (1 - decay) * batch_mean. Returns the new value.
  double update(double batch_mean, double decay);
};

struct DvGradient {
  NetworkParams grads;   // gradient of the loss -V with the EMA denominator
  double objective = 0;  // batch V
  double denominator = 0;
};

// Gradient of the bias-corrected DV loss for one joint/marginal batch pair.
// Updates `ema` with the marginal batch mean of exp(T) before using it.
DvGradient dv_gradient(const NetworkParams& params, const Matrix& batch_joint,
                       const Matrix& batch_marginal, EmaState& ema, double ema_decay);

// dv_gradient followed by one Adam step. Returns the batch V.
double dv_gradient_step(NetworkParams& params, const Matrix& batch_joint,
                        const Matrix& batch_marginal, EmaState& ema, AdamState& adam,
                        double ema_decay);

// Trains a freshly initialized statistics network on (F, A) and returns the
// averaged evaluation-batch DV estimate.
MiEstimate train_mine(const FeatureMatrix& features, const AttributeVector& attribute,
                      const MineConfig& cfg);

// Same, on an already augmented matrix whose last column is the attribute.
MiEstimate train_mine(const Matrix& augmented, const MineConfig& cfg);

}  // namespace expressivity
