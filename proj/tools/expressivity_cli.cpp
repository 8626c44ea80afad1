// expressivity: estimate, audit, calibrate, gen.

#include <CLI11.hpp>

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "expressivity/calibrate.hpp"
#include "expressivity/errors.hpp"
#include "expressivity/expressivity.hpp"
#include "expressivity/oracle.hpp"
#include "expressivity/report.hpp"

using namespace expressivity;
namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace {

struct SharedFlags {
  std::optional<std::uint64_t> seed;
  std::size_t runs = 5;
  std::size_t batch_size = MineConfig{}.batch_size;
  double lr = MineConfig{}.learning_rate;
  std::size_t max_iters = MineConfig{}.max_iterations;
  bool no_standardize = false;
  std::string out;
  std::string format = "json";
  unsigned threads = 1;
  bool keep_going = false;
};

void add_shared(CLI::App* cmd, SharedFlags& f, bool with_keep_going) {
  cmd->add_option("--seed", f.seed, "base seed (default: $EXPRESSIVITY_SEED or 0)");
  cmd->add_option("--runs", f.runs, "estimator runs M")->capture_default_str();
  cmd->add_option("--batch-size", f.batch_size, "minibatch size")->capture_default_str();
  cmd->add_option("--lr", f.lr, "Adam learning rate")->capture_default_str();
  cmd->add_option("--max-iters", f.max_iters, "training iterations cap")->capture_default_str();
  cmd->add_flag("--no-standardize", f.no_standardize, "skip feature z-scoring");
  cmd->add_option("--out", f.out, "write the report to this path");
  cmd->add_option("--format", f.format, "report format")
      ->check(CLI::IsMember({"json", "csv"}))
      ->capture_default_str();
  cmd->add_option("--threads", f.threads, "worker threads across runs")->capture_default_str();
  if (with_keep_going) {
    cmd->add_flag("--keep-going", f.keep_going, "emit null cells instead of aborting");
  }
}

std::uint64_t base_seed(const SharedFlags& f) {
  if (f.seed) return *f.seed;
  const char* env = std::getenv("EXPRESSIVITY_SEED");
  if (env == nullptr || *env == '\0') return 0;
  try {
    std::size_t used = 0;
    const unsigned long long v = std::stoull(env, &used);
    if (used != std::string(env).size()) throw std::invalid_argument(env);
    return v;
  } catch (const std::exception&) {
    throw UsageError(std::string("EXPRESSIVITY_SEED is not an unsigned integer: ") + env);
  }
}

MineConfig mine_config(const SharedFlags& f) {
  MineConfig cfg;
  cfg.batch_size = f.batch_size;
  cfg.learning_rate = f.lr;
  cfg.max_iterations = f.max_iters;
  cfg.seed = base_seed(f);
  cfg.validate();
  return cfg;
}

ExpressivityOptions expressivity_options(const SharedFlags& f) {
  if (f.runs == 0) throw UsageError("--runs must be >= 1");
  if (f.threads == 0) throw UsageError("--threads must be >= 1");
  ExpressivityOptions o;
  o.runs = f.runs;
  o.standardize = !f.no_standardize;
  o.threads = f.threads;
  return o;
}

void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IngestionError("cannot write " + path);
  out << text;
  if (!out) throw IngestionError("write failed for " + path);
}

void emit(const SharedFlags& f, const ordered_json& json, const std::string& csv) {
  if (f.out.empty()) return;
  write_file(f.out, f.format == "csv" ? csv : json.dump(2) + "\n");
}

int cmd_estimate(const std::string& features, const std::string& attribute,
                 const std::string& kind, const std::string& name, const SharedFlags& f) {
  const ExpressivityOptions options = expressivity_options(f);
  const MineConfig cfg = mine_config(f);
  const FeatureMatrix fm = load_feature_matrix(features);
  const std::string attr_name = name.empty() ? fs::path(attribute).stem().string() : name;
  const AttributeVector av = load_attributes(attribute, attr_name, parse_attribute_kind(kind));
  const ExpressivityResult r = compute_expressivity(fm, av, cfg, options);

  ReportContext ctx;
  ctx.config = cfg;
  ctx.input_digests[features] = file_digest(features);
  ctx.input_digests[attribute] = file_digest(attribute);
  std::cout << estimate_console(r);
  emit(f, estimate_report(r, ctx), estimate_csv(r));
  return 0;
}

int cmd_audit(const std::string& manifest_path, const SharedFlags& f) {
  AuditOptions options;
  options.expressivity = expressivity_options(f);
  options.keep_going = f.keep_going;
  MineConfig cfg = mine_config(f);
  AuditManifest manifest = parse_manifest(manifest_path);
  if (f.no_standardize) manifest.standardize = false;
  const AuditGrid grid = run_audit(manifest, cfg, options);

  ReportContext ctx;
  ctx.config = cfg;
  ctx.config.seed = grid.base_seed;
  // With --keep-going some inputs may be absent.
  auto digest = [](const fs::path& p) {
    return fs::exists(p) ? file_digest(p) : std::string("missing");
  };
  ctx.input_digests[manifest_path] = file_digest(manifest_path);
  for (const auto& cell : manifest.cells) {
    ctx.input_digests[cell.feature_path.string()] = digest(cell.feature_path);
    for (const auto& a : cell.attributes) ctx.input_digests[a.path.string()] = digest(a.path);
  }
  std::cout << audit_console(grid);
  emit(f, audit_report(grid, ctx), audit_csv(grid));
  for (const auto& c : grid.cells) {
    if (!c.result) return 2;
  }
  return 0;
}

int cmd_calibrate(bool quick, std::optional<double> tolerance, const SharedFlags& f) {
  const ExpressivityOptions options = expressivity_options(f);
  const MineConfig cfg = mine_config(f);
  const double tol = tolerance.value_or(quick ? 0.10 : 0.05);
  if (!(tol > 0.0)) throw UsageError("--tolerance must be positive");
  const CalibrationReport report =
      run_calibration(calibration_suite(quick), cfg, options, tol);
  ReportContext ctx;
  ctx.config = cfg;
  std::cout << calibration_console(report);
  emit(f, calibration_report_json(report, ctx, cfg.seed, options.runs),
       calibration_csv(report));
  return report.all_pass() ? 0 : 3;
}

struct GenFlags {
  std::string generator;
  std::size_t n = 10000;
  std::size_t m = 1536;
  double rho = 0.8;
  double p = 0.1;
  std::optional<std::uint64_t> seed;
  std::string out;
};

int cmd_gen(const GenFlags& g) {
  SharedFlags seed_only;
  seed_only.seed = g.seed;
  const std::uint64_t seed = base_seed(seed_only);
  if (g.out.empty()) throw UsageError("--out prefix is required");

  oracle::Dataset d;
  ordered_json params;
  params["n"] = g.n;
  if (g.generator == "gaussian") {
    d = oracle::gen_correlated_gaussian(g.n, g.rho, seed);
    params["rho"] = g.rho;
  } else if (g.generator == "embedded") {
    d = oracle::gen_embedded_signal(g.n, g.m, g.rho, seed);
    params["m"] = g.m;
    params["rho"] = g.rho;
  } else {
    d = oracle::gen_binary_channel(g.n, g.p, seed);
    params["p_flip"] = g.p;
  }

  const std::string features = g.out + ".fbin";
  const std::string attribute = g.out + ".attr.csv";
  const std::string meta = g.out + ".meta.json";
  write_feature_matrix(d.features, features);
  write_attributes(d.attribute.values, attribute);
  ordered_json j;
  j["tool"] = "expressivity";
  j["version"] = std::string(kToolVersion);
  j["generator"] = g.generator;
  j["params"] = params;
  j["seed"] = seed;
  j["true_mi"] = d.true_mi;
  j["units"] = "nats";
  j["attribute_kind"] = std::string(to_string(d.attribute.kind));
  j["features"] = fs::path(features).filename().string();
  j["attribute"] = fs::path(attribute).filename().string();
  write_file(meta, j.dump(2) + "\n");
  std::cout << "wrote " << features << ", " << attribute << ", " << meta << "\n"
            << "true_mi " << fixed4(d.true_mi) << " nats\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Attribute expressivity of learned features via MINE"};
  app.set_version_flag("--version", std::string(kToolVersion));
  app.require_subcommand(1);

  SharedFlags est_flags, audit_flags, cal_flags;

  std::string features, attribute, kind = "continuous", name;
  auto* est = app.add_subcommand("estimate", "expressivity of one attribute");
  est->add_option("features", features, "feature matrix (.fbin or .csv)")->required();
  est->add_option("attribute", attribute, "attribute column (.csv)")->required();
  est->add_option("--kind", kind, "binary or continuous")->capture_default_str();
  est->add_option("--name", name, "attribute name (default: file stem)");
  add_shared(est, est_flags, false);

  std::string manifest;
  auto* audit = app.add_subcommand("audit", "grid over manifest cells");
  audit->add_option("manifest", manifest, "audit manifest (.json)")->required();
  add_shared(audit, audit_flags, true);

  bool quick = false;
  std::optional<double> tolerance;
  auto* cal = app.add_subcommand("calibrate", "run the oracle suite");
  cal->add_flag("--quick", quick, "n = 2000, reduced case list, tolerance 0.10");
  cal->add_option("--tolerance", tolerance, "absolute error allowed per case");
  add_shared(cal, cal_flags, false);

  GenFlags gen_flags;
  auto* gen = app.add_subcommand("gen", "write a synthetic dataset with known MI");
  gen->add_option("generator", gen_flags.generator)
      ->required()
      ->check(CLI::IsMember({"gaussian", "embedded", "channel"}));
  gen->add_option("--n", gen_flags.n, "rows")->capture_default_str();
  gen->add_option("--m", gen_flags.m, "feature width (embedded)")->capture_default_str();
  gen->add_option("--rho", gen_flags.rho, "correlation (gaussian, embedded)")
      ->capture_default_str();
  gen->add_option("--p", gen_flags.p, "flip probability (channel)")->capture_default_str();
  gen->add_option("--seed", gen_flags.seed, "seed (default: $EXPRESSIVITY_SEED or 0)");
  gen->add_option("--out", gen_flags.out, "output prefix")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (*est) return cmd_estimate(features, attribute, kind, name, est_flags);
    if (*audit) return cmd_audit(manifest, audit_flags);
    if (*cal) return cmd_calibrate(quick, tolerance, cal_flags);
    return cmd_gen(gen_flags);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code_for(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}
