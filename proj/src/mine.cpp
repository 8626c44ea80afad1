#include "expressivity/mine.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <mutex>
#include <string>

#ifdef __GLIBC__
#include <malloc.h>
#endif

#include "expressivity/errors.hpp"
#include "expressivity/expressivity.hpp"

namespace expressivity {

namespace {

constexpr double kDivergenceLimit = 50.0;
constexpr std::size_t kValidationShuffles = 4;

Matrix gather_rows(const Matrix& x, std::span<const std::size_t> rows) {
  Matrix out(rows.size(), x.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    out.row(static_cast<Eigen::Index>(i)) = x.row(static_cast<Eigen::Index>(rows[i]));
  }
  return out;
}

Matrix with_shuffled_attribute(const Matrix& joint, Rng& rng) {
  Matrix marginal = joint;
  const Eigen::Index last = joint.cols() - 1;
  marginal.col(last) = shuffle_marginal(joint.col(last), rng);
  return marginal;
}

double batch_objective(const NetworkParams& params, const Matrix& joint,
                       const Matrix& marginal) {
  return dv_objective(evaluate(params, joint), evaluate(params, marginal));
}

// Sequential minibatches over a permutation of [0, n); the permutation is
// redrawn whenever fewer than `batch` indices remain.
class EpochSampler {
 public:
  EpochSampler(std::size_t n, std::size_t batch) : order_(n), batch_(batch), pos_(n) {
    std::iota(order_.begin(), order_.end(), std::size_t{0});
  }

  std::span<const std::size_t> next(Rng& rng) {
    if (pos_ + batch_ > order_.size()) {
      std::shuffle(order_.begin(), order_.end(), rng);
      pos_ = 0;
    }
    std::span<const std::size_t> out(order_.data() + pos_, batch_);
    pos_ += batch_;
    return out;
  }

 private:
  std::vector<std::size_t> order_;
  std::size_t batch_;
  std::size_t pos_;
};

// Each iteration allocates and frees activation buffers of a few hundred KB.
// glibc would otherwise hand them back to the kernel every time.
void keep_freed_memory() {
#ifdef __GLIBC__
  static std::once_flag once;
  std::call_once(once, [] {
    mallopt(M_MMAP_THRESHOLD, 256 << 20);
    mallopt(M_TRIM_THRESHOLD, 512 << 20);
  });
#endif
}

double window_mean(const std::vector<double>& trace, std::size_t end, std::size_t width) {
  double s = 0.0;
  for (std::size_t i = end - width; i < end; ++i) s += trace[i];
  return s / static_cast<double>(width);
}

}  // namespace

void MineConfig::validate() const {
  if (batch_size < 2) throw UsageError("batch_size must be >= 2");
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) {
    throw UsageError("learning_rate must be positive");
  }
  if (!(ema_decay > 0.0 && ema_decay < 1.0)) throw UsageError("ema_decay must lie in (0, 1)");
  if (!(convergence_tol > 0.0)) throw UsageError("convergence_tol must be positive");
  if (convergence_window == 0) throw UsageError("convergence_window must be >= 1");
  if (max_iterations == 0) throw UsageError("max_iterations must be >= 1");
  if (eval_batches == 0) throw UsageError("eval_batches must be >= 1");
  if (!(validation_fraction >= 0.0) || !(test_fraction >= 0.0) ||
      !(validation_fraction + test_fraction < 0.9)) {
    throw UsageError("validation_fraction and test_fraction must be >= 0 and sum below 0.9");
  }
  if (patience == 0) throw UsageError("patience must be >= 1");
}

Vector shuffle_marginal(const Vector& batch_attrs, Rng& rng) {
  if (batch_attrs.size() < 2) {
    throw UsageError("marginal shuffle needs a batch of at least 2 rows, got " +
                     std::to_string(batch_attrs.size()));
  }
  Vector out = batch_attrs;
  std::shuffle(out.data(), out.data() + out.size(), rng);
  return out;
}

double log_mean_exp(std::span<const double> t) {
  if (t.empty()) throw DimensionError("log_mean_exp of an empty vector");
  const double peak = *std::max_element(t.begin(), t.end());
  double sum = 0.0;
  for (double v : t) sum += std::exp(v - peak);
  return peak + std::log(sum / static_cast<double>(t.size()));
}

double log_mean_exp(const Vector& t) {
  return log_mean_exp(std::span<const double>(t.data(), static_cast<std::size_t>(t.size())));
}

double dv_objective(const Vector& t_joint, const Vector& t_marginal) {
  if (t_joint.size() != t_marginal.size()) {
    throw DimensionError("dv_objective: joint has " + std::to_string(t_joint.size()) +
                         " scores, marginal has " + std::to_string(t_marginal.size()));
  }
  if (t_joint.size() == 0) throw DimensionError("dv_objective: empty batch");
  return t_joint.mean() - log_mean_exp(t_marginal);
}

double EmaState::update(double batch_mean, double decay) {
  if (!initialized) {
    value = batch_mean;
    initialized = true;
  } else {
    value = decay * value + (1.0 - decay) * batch_mean;
  }
  return value;
}

DvGradient dv_gradient(const NetworkParams& params, const Matrix& batch_joint,
                       const Matrix& batch_marginal, EmaState& ema, double ema_decay) {
  if (batch_joint.rows() != batch_marginal.rows() ||
      batch_joint.cols() != batch_marginal.cols()) {
    throw DimensionError("joint and marginal batches differ in shape");
  }
  const Eigen::Index b = batch_joint.rows();
  if (b == 0) throw DimensionError("empty batch");

  Matrix stacked(2 * b, batch_joint.cols());
  stacked.topRows(b) = batch_joint;
  stacked.bottomRows(b) = batch_marginal;
  ForwardResult fw = forward(params, stacked);
  const Vector t_joint = fw.scores.head(b);
  const Vector t_marginal = fw.scores.tail(b);

  const Vector exp_marginal = t_marginal.array().exp().matrix();
  if (!exp_marginal.allFinite()) {
    throw NumericError("exp(T) overflowed on the marginal batch");
  }
  const double denominator = ema.update(exp_marginal.mean(), ema_decay);
  if (!(denominator > 0.0) || !std::isfinite(denominator)) {
    throw NumericError("moving-average denominator is not a positive finite number");
  }

  // d(-V)/dT: -1/b on joint rows, exp(T_i) / (b * denominator) on marginal rows.
  const double inv_b = 1.0 / static_cast<double>(b);
  Vector upstream(2 * b);
  upstream.head(b).setConstant(-inv_b);
  upstream.tail(b) = exp_marginal * (inv_b / denominator);

  DvGradient out;
  out.grads = backward(params, fw.cache, upstream);
  out.objective = dv_objective(t_joint, t_marginal);
  out.denominator = denominator;
  return out;
}

double dv_gradient_step(NetworkParams& params, const Matrix& batch_joint,
                        const Matrix& batch_marginal, EmaState& ema, AdamState& adam,
                        double ema_decay) {
  DvGradient g = dv_gradient(params, batch_joint, batch_marginal, ema, ema_decay);
  adam_step(params, g.grads, adam);
  return g.objective;
}

MiEstimate train_mine(const FeatureMatrix& features, const AttributeVector& attribute,
                      const MineConfig& cfg) {
  return train_mine(augment(features, attribute), cfg);
}

MiEstimate train_mine(const Matrix& augmented, const MineConfig& cfg) {
  cfg.validate();
  keep_freed_memory();
  const std::size_t n = static_cast<std::size_t>(augmented.rows());
  if (augmented.cols() < 2) throw DataError("augmented matrix needs >= 1 feature column");
  if (!augmented.allFinite()) throw DataError("augmented matrix has non-finite entries");

  const auto n_val = static_cast<std::size_t>(cfg.validation_fraction * static_cast<double>(n));
  const auto n_test = static_cast<std::size_t>(cfg.test_fraction * static_cast<double>(n));
  const std::size_t n_train = n - n_val - n_test;
  const bool holdout = n_val > 0 || n_test > 0;
  if (n_train < 2 * cfg.batch_size || (cfg.validation_fraction > 0 && n_val < 2) ||
      (cfg.test_fraction > 0 && n_test < 2)) {
    throw DataError("need at least 2 * batch_size = " + std::to_string(2 * cfg.batch_size) +
                    " training samples plus held-out rows, got " + std::to_string(n) +
                    " samples in total");
  }

  Rng rng = make_rng(cfg.seed);
  NetworkParams params =
      NetworkParams::xavier(static_cast<std::size_t>(augmented.cols()), rng);
  AdamState adam = AdamState::for_params(params, cfg.learning_rate);
  EmaState ema;

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  if (holdout) std::shuffle(order.begin(), order.end(), rng);
  const std::span<const std::size_t> all(order);
  const Matrix train = gather_rows(augmented, all.first(n_train));
  const Matrix test = n_test > 0 ? gather_rows(augmented, all.subspan(n_train, n_test)) : train;
  // Validation uses fixed shuffles so successive checks compare like with like.
  Matrix val_joint;
  std::vector<Matrix> val_marginals;
  if (n_val > 0) {
    val_joint = gather_rows(augmented, all.last(n_val));
    for (std::size_t k = 0; k < kValidationShuffles; ++k) {
      val_marginals.push_back(with_shuffled_attribute(val_joint, rng));
    }
  }
  const auto validation_score = [&] {
    const Vector tj = evaluate(params, val_joint);
    double s = 0.0;
    for (const Matrix& vm : val_marginals) s += tj.mean() - log_mean_exp(evaluate(params, vm));
    return s / static_cast<double>(val_marginals.size());
  };

  EpochSampler sampler(n_train, cfg.batch_size);
  MiEstimate est;
  est.seed = cfg.seed;
  est.trace.reserve(cfg.max_iterations);
  const std::size_t window = cfg.convergence_window;
  NetworkParams best = params;
  double best_score = -std::numeric_limits<double>::infinity();
  std::size_t stale = 0;
  for (std::size_t it = 0; it < cfg.max_iterations; ++it) {
    const Matrix joint = gather_rows(train, sampler.next(rng));
    const Matrix marginal = with_shuffled_attribute(joint, rng);
    double v = 0.0;
    try {
      v = dv_gradient_step(params, joint, marginal, ema, adam, cfg.ema_decay);
    } catch (const Error& e) {
      rethrow_annotated(e, "iteration " + std::to_string(it + 1) + ": ");
    }
    if (!std::isfinite(v) || std::abs(v) > kDivergenceLimit) {
      throw NumericError("training diverged at iteration " + std::to_string(it + 1) +
                         " (V = " + std::to_string(v) + ")");
    }
    est.trace.push_back(v);

    const std::size_t done = it + 1;
    if (done % window != 0) continue;
    if (n_val > 0) {
      const double score = validation_score();
      if (score > best_score) {
        best_score = score;
        best = params;
        est.best_iteration = done;
        stale = 0;
      } else if (++stale >= cfg.patience) {
        est.early_stopped = true;
        break;
      }
    }
    if (done >= 2 * window) {
      const double current = window_mean(est.trace, done, window);
      const double previous = window_mean(est.trace, done - window, window);
      if (std::abs(current - previous) < cfg.convergence_tol) {
        est.converged = true;
        break;
      }
    }
  }
  est.iterations_run = est.trace.size();
  if (n_val > 0 && est.best_iteration > 0) {
    params = best;
  } else {
    est.best_iteration = est.iterations_run;
  }

  const std::size_t eval_rows = static_cast<std::size_t>(test.rows());
  EpochSampler eval_sampler(eval_rows, std::min(cfg.batch_size, eval_rows));
  double total = 0.0;
  for (std::size_t k = 0; k < cfg.eval_batches; ++k) {
    const Matrix joint = gather_rows(test, eval_sampler.next(rng));
    const Matrix marginal = with_shuffled_attribute(joint, rng);
    total += batch_objective(params, joint, marginal);
  }
  est.value = total / static_cast<double>(cfg.eval_batches);
  if (!std::isfinite(est.value)) throw NumericError("non-finite final estimate");
  return est;
}

}  // namespace expressivity
