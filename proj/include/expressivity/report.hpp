#pragma once

// Report rendering (console, JSON, CSV) and reproducibility digests.

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>

#include <json.hpp>

#include "expressivity/calibrate.hpp"
#include "expressivity/expressivity.hpp"
#include "expressivity/mine.hpp"

namespace expressivity {

inline constexpr std::string_view kToolVersion = "1.0.0";

// FNV-1a, 64-bit.
std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t state = 0xcbf29ce484222325ull);
std::string hex64(std::uint64_t v);
// "fnv1a64:<hex>" of the file contents.
std::string file_digest(const std::filesystem::path& path);
// Digest of every MineConfig field except the seed.
std::string config_digest(const MineConfig& cfg);

// Fixed 4-decimal rendering used for console tables.
std::string fixed4(double v);

nlohmann::ordered_json config_to_json(const MineConfig& cfg);
nlohmann::ordered_json result_to_json(const ExpressivityResult& r);

struct ReportContext {
  MineConfig config;
  std::map<std::string, std::string> input_digests;  // path -> digest
};

nlohmann::ordered_json estimate_report(const ExpressivityResult& r, const ReportContext& ctx);
std::string estimate_console(const ExpressivityResult& r);
// One header line plus one row per run.
std::string estimate_csv(const ExpressivityResult& r);

nlohmann::ordered_json audit_report(const AuditGrid& grid, const ReportContext& ctx);
// Table with rows = manifest rows, columns = attributes, then rankings.
std::string audit_console(const AuditGrid& grid);
// Long format: row,group,tag,attribute,mean,stddev,runs,status
std::string audit_csv(const AuditGrid& grid);

nlohmann::ordered_json calibration_report_json(const CalibrationReport& report,
                                               const ReportContext& ctx,
                                               std::uint64_t base_seed, std::size_t runs);
std::string calibration_console(const CalibrationReport& report);
std::string calibration_csv(const CalibrationReport& report);

// Shortest round-trip decimal form of v; used wherever full precision is kept.
std::string full_precision(double v);

}  // namespace expressivity
