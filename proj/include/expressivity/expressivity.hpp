#pragma once

// Expressivity of a feature set with respect to an attribute: the mean of M
// independent MINE estimates, each with a freshly initialized network.

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "expressivity/data.hpp"
#include "expressivity/mine.hpp"

namespace expressivity {

// [F | A]: the features followed by the attribute as the last column.
Matrix augment(const FeatureMatrix& features, const AttributeVector& attribute);

struct ExpressivityOptions {
  std::size_t runs = 5;
  bool standardize = true;
  unsigned threads = 1;  // parallelism across runs only
};

struct ExpressivityResult {
  std::string attribute_name;
  std::vector<double> run_values;  // nats
  double mean = 0.0;
  double stddev = 0.0;  // sample std of run_values, 0 for a single run
  std::vector<std::size_t> run_iterations;
  std::vector<bool> run_converged;
  std::vector<std::size_t> run_best_iterations;  // checkpoint kept by early stopping
  std::vector<std::uint64_t> run_seeds;
  std::string group;
  std::string tag;
  std::uint64_t base_seed = 0;
  std::string config_digest;
  bool standardized = false;
  std::vector<std::size_t> constant_columns;

  std::size_t runs() const { return run_values.size(); }
};

// Seed of run `index` under `base_seed`.
std::uint64_t run_seed(std::uint64_t base_seed, std::size_t index);

// cfg.seed is the base seed; run i trains with run_seed(cfg.seed, i).
ExpressivityResult compute_expressivity(const FeatureMatrix& features,
                                        const AttributeVector& attribute,
                                        const MineConfig& cfg,
                                        const ExpressivityOptions& options = {});

// Descending by value, ties by ascending name.
std::vector<std::pair<std::string, double>> rank_attributes(
    const std::map<std::string, double>& scores);

// "BMI > Pitch > Gender > Yaw"
std::string format_ranking(const std::vector<std::pair<std::string, double>>& ranking);

struct AuditCell {
  std::string row_label;
  std::string group;
  std::string tag;
  std::string attribute;
  std::optional<ExpressivityResult> result;  // empty only with keep_going
  std::string error;
};

struct AuditGrid {
  std::string model_label;
  std::vector<std::string> row_labels;       // manifest order
  std::vector<std::string> attribute_names;  // order of first appearance
  std::vector<AuditCell> cells;              // row-major over (row, attribute)
  std::size_t sample_count = 0;
  bool standardized = true;
  std::uint64_t base_seed = 0;

  const AuditCell* find(const std::string& row_label, const std::string& attribute) const;
  // Ranking of the finished cells in one row.
  std::vector<std::pair<std::string, double>> row_ranking(const std::string& row_label) const;
};

struct AuditOptions {
  ExpressivityOptions expressivity;
  bool keep_going = false;
};

// Runs every (row, attribute) cell of the manifest. The manifest's base_seed
// and standardize settings override cfg.seed and options when present.
AuditGrid run_audit(const AuditManifest& manifest, const MineConfig& cfg,
                    const AuditOptions& options = {});

}  // namespace expressivity
