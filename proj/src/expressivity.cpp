#include "expressivity/expressivity.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <functional>
#include <thread>

#include "expressivity/errors.hpp"
#include "expressivity/report.hpp"
#include "expressivity/rng.hpp"

namespace expressivity {

namespace {

// Calls fn(i) for i in [0, count) on up to `threads` workers. Exceptions are
// collected per index and the lowest-index one is rethrown.
void parallel_for(std::size_t count, unsigned threads,
                  const std::function<void(std::size_t)>& fn) {
  std::vector<std::exception_ptr> errors(count);
  auto body = [&](std::size_t i) {
    try {
      fn(i);
    } catch (...) {
      errors[i] = std::current_exception();
    }
  };
  const std::size_t workers = std::min<std::size_t>(std::max(1u, threads), count);
  if (workers <= 1) {
    for (std::size_t i = 0; i < count; ++i) body(i);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (std::size_t i = next++; i < count; i = next++) body(i);
      });
    }
    for (auto& t : pool) t.join();
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

}  // namespace

Matrix augment(const FeatureMatrix& features, const AttributeVector& attribute) {
  if (features.cols() == 0) throw DataError("augment: no feature columns");
  if (features.rows() != attribute.size()) {
    throw DataError("augment: feature rows " + std::to_string(features.rows()) +
                    " != attribute rows " + std::to_string(attribute.size()));
  }
  if (!attribute.values.allFinite()) throw DataError("augment: non-finite attribute value");
  Matrix x(features.values.rows(), features.values.cols() + 1);
  x.leftCols(features.values.cols()) = features.values;
  x.col(x.cols() - 1) = attribute.values;
  return x;
}

std::uint64_t run_seed(std::uint64_t base_seed, std::size_t index) {
  return split_seed(base_seed, index);
}

ExpressivityResult compute_expressivity(const FeatureMatrix& features,
                                        const AttributeVector& attribute,
                                        const MineConfig& cfg,
                                        const ExpressivityOptions& options) {
  if (options.runs == 0) throw UsageError("number of runs M must be >= 1");
  cfg.validate();
  validate_pairing(features, attribute);

  ExpressivityResult result;
  result.attribute_name = attribute.name;
  result.base_seed = cfg.seed;
  result.config_digest = config_digest(cfg);
  result.standardized = options.standardize;

  Matrix x;
  if (options.standardize) {
    StandardizeResult s = standardize_features(features);
    result.constant_columns = std::move(s.constant_columns);
    x = augment(s.features, attribute);
  } else {
    x = augment(features, attribute);
  }

  const std::size_t m = options.runs;
  std::vector<MiEstimate> estimates(m);
  parallel_for(m, options.threads, [&](std::size_t i) {
    MineConfig run_cfg = cfg;
    run_cfg.seed = run_seed(cfg.seed, i);
    try {
      estimates[i] = train_mine(x, run_cfg);
    } catch (const Error& e) {
      rethrow_annotated(e, "run " + std::to_string(i + 1) + "/" + std::to_string(m) + ": ");
    }
  });

  double sum = 0.0;
  for (const auto& e : estimates) {
    result.run_values.push_back(e.value);
    result.run_iterations.push_back(e.iterations_run);
    result.run_converged.push_back(e.converged);
    result.run_best_iterations.push_back(e.best_iteration);
    result.run_seeds.push_back(e.seed);
    sum += e.value;
  }
  result.mean = sum / static_cast<double>(m);
  if (m > 1) {
    double ss = 0.0;
    for (double v : result.run_values) ss += (v - result.mean) * (v - result.mean);
    result.stddev = std::sqrt(ss / static_cast<double>(m - 1));
  }
  return result;
}

std::vector<std::pair<std::string, double>> rank_attributes(
    const std::map<std::string, double>& scores) {
  if (scores.empty()) throw UsageError("cannot rank an empty set of attributes");
  std::vector<std::pair<std::string, double>> out(scores.begin(), scores.end());
  for (const auto& [name, v] : out) {
    if (!std::isfinite(v)) throw DataError("non-finite score for attribute " + name);
  }
  std::stable_sort(out.begin(), out.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  return out;
}

std::string format_ranking(const std::vector<std::pair<std::string, double>>& ranking) {
  std::string out;
  for (std::size_t i = 0; i < ranking.size(); ++i) {
    if (i > 0) out += " > ";
    out += ranking[i].first;
  }
  return out;
}

const AuditCell* AuditGrid::find(const std::string& row_label,
                                 const std::string& attribute) const {
  for (const auto& c : cells) {
    if (c.row_label == row_label && c.attribute == attribute) return &c;
  }
  return nullptr;
}

std::vector<std::pair<std::string, double>> AuditGrid::row_ranking(
    const std::string& row_label) const {
  std::map<std::string, double> scores;
  for (const auto& c : cells) {
    if (c.row_label == row_label && c.result) scores[c.attribute] = c.result->mean;
  }
  if (scores.empty()) return {};
  return rank_attributes(scores);
}

AuditGrid run_audit(const AuditManifest& manifest, const MineConfig& cfg,
                    const AuditOptions& options) {
  MineConfig base_cfg = cfg;
  if (manifest.base_seed) base_cfg.seed = *manifest.base_seed;
  ExpressivityOptions eopts = options.expressivity;
  eopts.standardize = manifest.standardize;
  if (eopts.runs == 0) throw UsageError("number of runs M must be >= 1");
  base_cfg.validate();

  AuditGrid grid;
  grid.model_label = manifest.model_label;
  grid.standardized = eopts.standardize;
  grid.base_seed = base_cfg.seed;

  std::optional<std::size_t> n;
  for (const auto& mc : manifest.cells) {
    const std::string row = mc.label();
    grid.row_labels.push_back(row);
    for (const auto& a : mc.attributes) {
      if (std::find(grid.attribute_names.begin(), grid.attribute_names.end(), a.name) ==
          grid.attribute_names.end()) {
        grid.attribute_names.push_back(a.name);
      }
    }

    std::optional<FeatureMatrix> features;
    std::string row_error;
    try {
      features = load_feature_matrix(mc.feature_path, mc.feature_format);
      if (n && *n != features->rows()) {
        throw DataError("sample count " + std::to_string(features->rows()) +
                        " differs from earlier cells (" + std::to_string(*n) + ")");
      }
      n = features->rows();
    } catch (const Error& e) {
      if (!options.keep_going) rethrow_annotated(e, "cell " + row + ": ");
      row_error = e.what();
    }

    for (const auto& spec : mc.attributes) {
      AuditCell cell{row, mc.group, mc.tag, spec.name, std::nullopt, row_error};
      if (features) {
        try {
          AttributeVector attr = load_attributes(spec.path, spec.name, spec.kind, spec.units);
          ExpressivityResult r = compute_expressivity(*features, attr, base_cfg, eopts);
          r.group = mc.group;
          r.tag = mc.tag;
          cell.result = std::move(r);
        } catch (const Error& e) {
          if (!options.keep_going) rethrow_annotated(e, "cell (" + row + ", " + spec.name + "): ");
          cell.error = e.what();
        }
      }
      grid.cells.push_back(std::move(cell));
    }
  }
  grid.sample_count = n.value_or(0);
  return grid;
}

}  // namespace expressivity
