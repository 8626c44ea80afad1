#pragma once

// Built-in oracle suite: estimates on synthetic data with closed-form MI.

#include <string>
#include <vector>

#include "expressivity/expressivity.hpp"
#include "expressivity/oracle.hpp"

namespace expressivity {

struct CalibrationCase {
  std::string name;       // e.g. "gaussian rho=0.8"
  std::string generator;  // gaussian | embedded | channel
  std::size_t n = 0;
  std::size_t m = 1;
  double param = 0.0;  // rho, or p_flip for the channel
  std::uint64_t data_seed = 0;

  oracle::Dataset generate() const;
};

struct CalibrationRow {
  CalibrationCase spec;
  double true_mi = 0.0;
  double estimate = 0.0;
  double abs_error = 0.0;
  bool pass = false;
  std::string error;  // set when the case failed to run
};

struct CalibrationReport {
  std::vector<CalibrationRow> rows;
  double tolerance = 0.0;
  bool all_pass() const;
};

// Full suite: gaussian rho grid, embedded m in {8, 128, 1536}, channel p grid.
// Quick suite: n = 2000 and a subset of cases.
std::vector<CalibrationCase> calibration_suite(bool quick);

CalibrationReport run_calibration(const std::vector<CalibrationCase>& cases,
                                  const MineConfig& cfg, const ExpressivityOptions& options,
                                  double tolerance);

}  // namespace expressivity
