#include "expressivity/calibrate.hpp"

#include <cmath>
#include <sstream>

#include "expressivity/errors.hpp"

namespace expressivity {

namespace {

CalibrationCase make_case(std::string generator, std::size_t n, std::size_t m, double param,
                          std::uint64_t seed) {
  std::ostringstream name;
  if (generator == "channel") {
    name << "channel p=" << param;
  } else if (generator == "embedded") {
    name << "embedded m=" << m << " rho=" << param;
  } else {
    name << "gaussian rho=" << param;
  }
  name << " n=" << n;
  return {name.str(), std::move(generator), n, m, param, seed};
}

}  // namespace

oracle::Dataset CalibrationCase::generate() const {
  if (generator == "gaussian") return oracle::gen_correlated_gaussian(n, param, data_seed);
  if (generator == "embedded") return oracle::gen_embedded_signal(n, m, param, data_seed);
  if (generator == "channel") return oracle::gen_binary_channel(n, param, data_seed);
  throw UsageError("unknown generator '" + generator + "'");
}

bool CalibrationReport::all_pass() const {
  for (const auto& r : rows) {
    if (!r.pass) return false;
  }
  return !rows.empty();
}

std::vector<CalibrationCase> calibration_suite(bool quick) {
  std::vector<CalibrationCase> cases;
  if (quick) {
    const std::size_t n = 2000;
    for (double rho : {0.0, 0.5, 0.8}) cases.push_back(make_case("gaussian", n, 1, rho, 101));
    cases.push_back(make_case("embedded", n, 8, 0.8, 102));
    cases.push_back(make_case("channel", n, 1, 0.1, 103));
    return cases;
  }
  const std::size_t n = 10000;
  for (double rho : {0.0, 0.3, 0.6, 0.8, 0.9}) {
    cases.push_back(make_case("gaussian", n, 1, rho, 201));
  }
  cases.push_back(make_case("embedded", n, 8, 0.8, 202));
  cases.push_back(make_case("embedded", n, 128, 0.8, 203));
  cases.push_back(make_case("embedded", 5000, 1536, 0.8, 204));
  for (double p : {0.1, 0.25, 0.5}) cases.push_back(make_case("channel", n, 1, p, 205));
  return cases;
}

CalibrationReport run_calibration(const std::vector<CalibrationCase>& cases,
                                  const MineConfig& cfg, const ExpressivityOptions& options,
                                  double tolerance) {
  CalibrationReport report;
  report.tolerance = tolerance;
  for (const auto& c : cases) {
    CalibrationRow row;
    row.spec = c;
    try {
      const oracle::Dataset d = c.generate();
      row.true_mi = d.true_mi;
      const auto r = compute_expressivity(d.features, d.attribute, cfg, options);
      row.estimate = r.mean;
      row.abs_error = std::abs(r.mean - d.true_mi);
      row.pass = row.abs_error <= tolerance;
    } catch (const Error& e) {
      row.error = e.what();
      row.pass = false;
    }
    report.rows.push_back(row);
  }
  return report;
}

}  // namespace expressivity
