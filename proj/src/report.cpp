#include "expressivity/report.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "expressivity/errors.hpp"

namespace expressivity {

using nlohmann::ordered_json;

std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t state) {
  for (unsigned char c : bytes) {
    state ^= c;
    state *= 0x100000001b3ull;
  }
  return state;
}

std::string hex64(std::uint64_t v) {
  std::array<char, 17> buf{};
  std::snprintf(buf.data(), buf.size(), "%016llx", static_cast<unsigned long long>(v));
  return buf.data();
}

std::string file_digest(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IngestionError("cannot open " + path.string());
  std::uint64_t h = fnv1a64({});
  std::array<char, 1 << 16> buf;
  while (in) {
    in.read(buf.data(), buf.size());
    h = fnv1a64(std::string_view(buf.data(), static_cast<std::size_t>(in.gcount())), h);
  }
  return "fnv1a64:" + hex64(h);
}

std::string full_precision(double v) {
  std::array<char, 64> buf;
  const auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  return ec == std::errc() ? std::string(buf.data(), ptr) : std::string("nan");
}

std::string config_digest(const MineConfig& cfg) {
  std::ostringstream s;
  s << "lr=" << full_precision(cfg.learning_rate) << ";batch=" << cfg.batch_size
    << ";max_iter=" << cfg.max_iterations << ";window=" << cfg.convergence_window
    << ";tol=" << full_precision(cfg.convergence_tol)
    << ";ema=" << full_precision(cfg.ema_decay) << ";eval=" << cfg.eval_batches
    << ";val=" << full_precision(cfg.validation_fraction)
    << ";test=" << full_precision(cfg.test_fraction) << ";patience=" << cfg.patience
    << ";hidden=512,128;act=elu;init=xavier_normal;opt=adam(0.9,0.999,1e-8)";
  return "fnv1a64:" + hex64(fnv1a64(s.str()));
}

std::string fixed4(double v) {
  std::ostringstream s;
  s << std::fixed << std::setprecision(4) << v;
  return s.str();
}

ordered_json config_to_json(const MineConfig& cfg) {
  ordered_json j;
  j["learning_rate"] = cfg.learning_rate;
  j["batch_size"] = cfg.batch_size;
  j["max_iterations"] = cfg.max_iterations;
  j["convergence_window"] = cfg.convergence_window;
  j["convergence_tol"] = cfg.convergence_tol;
  j["ema_decay"] = cfg.ema_decay;
  j["eval_batches"] = cfg.eval_batches;
  j["validation_fraction"] = cfg.validation_fraction;
  j["test_fraction"] = cfg.test_fraction;
  j["patience"] = cfg.patience;
  j["hidden_units"] = {kHidden1, kHidden2};
  j["activation"] = "elu";
  j["init"] = "xavier_normal";
  j["optimizer"] = {{"name", "adam"}, {"beta1", 0.9}, {"beta2", 0.999}, {"epsilon", 1e-8}};
  return j;
}

ordered_json result_to_json(const ExpressivityResult& r) {
  ordered_json j;
  j["attribute"] = r.attribute_name;
  if (!r.group.empty()) j["group"] = r.group;
  if (!r.tag.empty()) j["tag"] = r.tag;
  j["mean"] = r.mean;
  j["stddev"] = r.stddev;
  j["runs"] = r.runs();
  j["run_values"] = r.run_values;
  j["run_iterations"] = r.run_iterations;
  j["run_converged"] = r.run_converged;
  j["run_best_iterations"] = r.run_best_iterations;
  j["run_seeds"] = r.run_seeds;
  j["base_seed"] = r.base_seed;
  j["config_digest"] = r.config_digest;
  j["standardized"] = r.standardized;
  j["constant_columns"] = r.constant_columns;
  j["units"] = "nats";
  return j;
}

namespace {

ordered_json header(const ReportContext& ctx, std::uint64_t base_seed, bool standardized) {
  ordered_json j;
  j["tool"] = "expressivity";
  j["version"] = std::string(kToolVersion);
  j["base_seed"] = base_seed;
  j["standardize"] = standardized;
  j["final_value"] = ctx.config.test_fraction > 0
                         ? "mean DV objective over eval_batches batches of held-out test rows, "
                           "best validation checkpoint"
                         : "mean DV objective over eval_batches evaluation batches";
  j["config"] = config_to_json(ctx.config);
  j["config_digest"] = config_digest(ctx.config);
  ordered_json inputs = ordered_json::object();
  for (const auto& [path, digest] : ctx.input_digests) inputs[path] = digest;
  j["inputs"] = inputs;
  return j;
}

std::string pad(const std::string& s, std::size_t width) {
  return s.size() >= width ? s : s + std::string(width - s.size(), ' ');
}

std::string lpad(const std::string& s, std::size_t width) {
  return s.size() >= width ? s : std::string(width - s.size(), ' ') + s;
}

}  // namespace

ordered_json estimate_report(const ExpressivityResult& r, const ReportContext& ctx) {
  ordered_json j = header(ctx, r.base_seed, r.standardized);
  j["result"] = result_to_json(r);
  return j;
}

std::string estimate_console(const ExpressivityResult& r) {
  std::ostringstream s;
  s << "attribute     " << r.attribute_name << "\n"
    << "expressivity  " << fixed4(r.mean) << " nats (M=" << r.runs() << ")\n"
    << "run std       " << fixed4(r.stddev) << "\n"
    << "runs         ";
  for (double v : r.run_values) s << " " << fixed4(v);
  s << "\n"
    << "base seed     " << r.base_seed << "\n"
    << "config        " << r.config_digest << "\n"
    << "standardized  " << (r.standardized ? "yes" : "no") << "\n";
  if (!r.constant_columns.empty()) {
    s << "warning       " << r.constant_columns.size()
      << " constant feature column(s) zeroed\n";
  }
  return s.str();
}

std::string estimate_csv(const ExpressivityResult& r) {
  std::ostringstream s;
  s << "attribute,run,seed,value,iterations,converged,mean,stddev\n";
  for (std::size_t i = 0; i < r.runs(); ++i) {
    s << r.attribute_name << "," << i + 1 << "," << r.run_seeds[i] << ","
      << full_precision(r.run_values[i]) << "," << r.run_iterations[i] << ","
      << (r.run_converged[i] ? "true" : "false") << "," << full_precision(r.mean) << ","
      << full_precision(r.stddev) << "\n";
  }
  return s.str();
}

ordered_json audit_report(const AuditGrid& grid, const ReportContext& ctx) {
  ordered_json j = header(ctx, grid.base_seed, grid.standardized);
  j["model_label"] = grid.model_label;
  j["sample_count"] = grid.sample_count;
  j["rows"] = grid.row_labels;
  j["attributes"] = grid.attribute_names;
  ordered_json cells = ordered_json::array();
  for (const auto& c : grid.cells) {
    ordered_json cj;
    cj["row"] = c.row_label;
    cj["attribute"] = c.attribute;
    if (c.result) {
      cj["result"] = result_to_json(*c.result);
    } else {
      cj["result"] = nullptr;
      cj["error"] = c.error;
    }
    cells.push_back(cj);
  }
  j["cells"] = cells;
  ordered_json rankings = ordered_json::array();
  for (const auto& row : grid.row_labels) {
    const auto ranking = grid.row_ranking(row);
    ordered_json rj;
    rj["row"] = row;
    rj["ranking"] = format_ranking(ranking);
    ordered_json order = ordered_json::array();
    for (const auto& [name, v] : ranking) order.push_back({{"attribute", name}, {"mean", v}});
    rj["order"] = order;
    rankings.push_back(rj);
  }
  j["rankings"] = rankings;
  return j;
}

std::string audit_console(const AuditGrid& grid) {
  std::size_t row_width = 4;
  for (const auto& r : grid.row_labels) row_width = std::max(row_width, r.size());
  std::size_t col_width = 8;
  for (const auto& a : grid.attribute_names) col_width = std::max(col_width, a.size());

  std::ostringstream s;
  s << "model: " << grid.model_label << "  (n=" << grid.sample_count
    << ", base seed " << grid.base_seed << ", standardized "
    << (grid.standardized ? "yes" : "no") << ")\n";
  s << pad("row", row_width);
  for (const auto& a : grid.attribute_names) s << "  " << lpad(a, col_width);
  s << "\n";
  for (const auto& row : grid.row_labels) {
    s << pad(row, row_width);
    for (const auto& a : grid.attribute_names) {
      const AuditCell* c = grid.find(row, a);
      std::string text = "-";
      if (c && c->result) text = fixed4(c->result->mean);
      else if (c) text = "null";
      s << "  " << lpad(text, col_width);
    }
    s << "\n";
  }
  s << "\nranking\n";
  for (const auto& row : grid.row_labels) {
    s << pad(row, row_width) << "  " << format_ranking(grid.row_ranking(row)) << "\n";
  }
  return s.str();
}

std::string audit_csv(const AuditGrid& grid) {
  std::ostringstream s;
  s << "row,group,tag,attribute,mean,stddev,runs,status\n";
  for (const auto& c : grid.cells) {
    s << c.row_label << "," << c.group << "," << c.tag << "," << c.attribute << ",";
    if (c.result) {
      s << full_precision(c.result->mean) << "," << full_precision(c.result->stddev) << ","
        << c.result->runs() << ",ok\n";
    } else {
      s << ",,0,error\n";
    }
  }
  return s.str();
}

ordered_json calibration_report_json(const CalibrationReport& report,
                                     const ReportContext& ctx, std::uint64_t base_seed,
                                     std::size_t runs) {
  ordered_json j = header(ctx, base_seed, true);
  j["runs"] = runs;
  j["tolerance"] = report.tolerance;
  ordered_json cases = ordered_json::array();
  for (const auto& r : report.rows) {
    ordered_json c;
    c["case"] = r.spec.name;
    c["generator"] = r.spec.generator;
    c["n"] = r.spec.n;
    c["m"] = r.spec.m;
    c["param"] = r.spec.param;
    c["data_seed"] = r.spec.data_seed;
    c["true_mi"] = r.true_mi;
    if (r.error.empty()) {
      c["estimate"] = r.estimate;
      c["abs_error"] = r.abs_error;
    } else {
      c["estimate"] = nullptr;
      c["abs_error"] = nullptr;
      c["error"] = r.error;
    }
    c["pass"] = r.pass;
    cases.push_back(c);
  }
  j["cases"] = cases;
  j["verdict"] = report.all_pass() ? "pass" : "fail";
  return j;
}

std::string calibration_console(const CalibrationReport& report) {
  std::size_t width = 4;
  for (const auto& r : report.rows) width = std::max(width, r.spec.name.size());
  std::ostringstream s;
  s << pad("case", width) << "  " << lpad("true", 8) << "  " << lpad("estimate", 8) << "  "
    << lpad("|error|", 8) << "  result\n";
  for (const auto& r : report.rows) {
    s << pad(r.spec.name, width) << "  " << lpad(fixed4(r.true_mi), 8) << "  ";
    if (r.error.empty()) {
      s << lpad(fixed4(r.estimate), 8) << "  " << lpad(fixed4(r.abs_error), 8) << "  "
        << (r.pass ? "pass" : "FAIL") << "\n";
    } else {
      s << lpad("-", 8) << "  " << lpad("-", 8) << "  FAIL (" << r.error << ")\n";
    }
  }
  s << "tolerance " << fixed4(report.tolerance) << ": " << (report.all_pass() ? "pass" : "fail")
    << "\n";
  return s.str();
}

std::string calibration_csv(const CalibrationReport& report) {
  std::ostringstream s;
  s << "case,generator,n,m,param,true_mi,estimate,abs_error,pass\n";
  for (const auto& r : report.rows) {
    s << r.spec.name << "," << r.spec.generator << "," << r.spec.n << "," << r.spec.m << ","
      << full_precision(r.spec.param) << "," << full_precision(r.true_mi) << ",";
    if (r.error.empty()) {
      s << full_precision(r.estimate) << "," << full_precision(r.abs_error);
    } else {
      s << ",";
    }
    s << "," << (r.pass ? "true" : "false") << "\n";
  }
  return s.str();
}

}  // namespace expressivity
