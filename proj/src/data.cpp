#include "expressivity/data.hpp"

#include <array>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>
#include <tuple>

#include <json.hpp>

#include "expressivity/errors.hpp"

namespace expressivity {

namespace fs = std::filesystem;

namespace {

std::string location(std::size_t row, std::size_t col) {
  return "(row " + std::to_string(row) + ", col " + std::to_string(col) + ")";
}

std::string_view trim(std::string_view s) {
  const char* ws = " \t\r\n";
  const auto first = s.find_first_not_of(ws);
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(ws);
  return s.substr(first, last - first + 1);
}

std::string read_file(const fs::path& path, std::ios::openmode mode = std::ios::in) {
  std::ifstream in(path, mode);
  if (!in) throw IngestionError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Parses one numeric token; non-finite values are returned as-is so the
// caller can report them with their location.
double parse_number(std::string_view token, const fs::path& path, std::size_t row,
                    std::size_t col) {
  token = trim(token);
  if (!token.empty() && token.front() == '+') token.remove_prefix(1);
  double value = 0.0;
  const auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), value);
  if (token.empty() || ec != std::errc() || ptr != token.data() + token.size()) {
    throw FormatError(path.string() + ": cannot parse '" + std::string(token) + "' at " +
                      location(row, col));
  }
  return value;
}

std::vector<std::string_view> split_lines(std::string_view text) {
  std::vector<std::string_view> lines;
  std::size_t start = 0;
  while (start <= text.size()) {
    const auto end = text.find('\n', start);
    const auto stop = end == std::string_view::npos ? text.size() : end;
    lines.push_back(text.substr(start, stop - start));
    if (end == std::string_view::npos) break;
    start = end + 1;
  }
  // Trailing blank lines are allowed; interior ones are not.
  while (!lines.empty() && trim(lines.back()).empty()) lines.pop_back();
  return lines;
}

FeatureMatrix load_csv_matrix(const fs::path& path) {
  const std::string text = read_file(path);
  const auto lines = split_lines(text);
  if (lines.empty()) throw DataError(path.string() + ": empty feature file");

  std::vector<double> values;
  std::size_t cols = 0;
  for (std::size_t r = 0; r < lines.size(); ++r) {
    std::string_view line = lines[r];
    if (trim(line).empty()) {
      throw FormatError(path.string() + ": blank line at row " + std::to_string(r + 1));
    }
    std::size_t c = 0;
    std::size_t start = 0;
    while (true) {
      const auto comma = line.find(',', start);
      const auto token =
          line.substr(start, comma == std::string_view::npos ? line.npos : comma - start);
      values.push_back(parse_number(token, path, r + 1, c + 1));
      ++c;
      if (comma == std::string_view::npos) break;
      start = comma + 1;
    }
    if (r == 0) {
      cols = c;
    } else if (c != cols) {
      throw FormatError(path.string() + ": row " + std::to_string(r + 1) + " has " +
                        std::to_string(c) + " fields, expected " + std::to_string(cols));
    }
  }
  Matrix m = Eigen::Map<Matrix>(values.data(), static_cast<Eigen::Index>(lines.size()),
                                static_cast<Eigen::Index>(cols));
  return FeatureMatrix::from_values(std::move(m), path.string());
}

template <class T>
T read_le(const unsigned char* p) {
  T v{};
  std::array<unsigned char, sizeof(T)> buf;
  std::memcpy(buf.data(), p, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) {
    std::reverse(buf.begin(), buf.end());
  }
  std::memcpy(&v, buf.data(), sizeof(T));
  return v;
}

template <class T>
void append_le(std::string& out, T v) {
  std::array<unsigned char, sizeof(T)> buf;
  std::memcpy(buf.data(), &v, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) {
    std::reverse(buf.begin(), buf.end());
  }
  out.append(reinterpret_cast<const char*>(buf.data()), buf.size());
}

constexpr std::size_t kFbinHeaderSize = 4 + 4 + 8 + 8;

FeatureMatrix load_fbin_matrix(const fs::path& path) {
  const std::string bytes = read_file(path, std::ios::in | std::ios::binary);
  const auto* p = reinterpret_cast<const unsigned char*>(bytes.data());
  if (bytes.size() < kFbinHeaderSize) {
    throw FormatError(path.string() + ": truncated fbin header");
  }
  if (std::memcmp(p, kFbinMagic, 4) != 0) {
    throw FormatError(path.string() + ": bad fbin magic (expected \"EXPR\")");
  }
  const auto version = read_le<std::uint32_t>(p + 4);
  if (version != kFbinVersion) {
    throw FormatError(path.string() + ": unsupported fbin version " + std::to_string(version));
  }
  const auto rows = read_le<std::uint64_t>(p + 8);
  const auto cols = read_le<std::uint64_t>(p + 16);
  if (rows == 0 || cols == 0) {
    throw FormatError(path.string() + ": fbin dimensions must be non-zero");
  }
  const std::uint64_t max_count = (std::numeric_limits<std::uint64_t>::max() - kFbinHeaderSize) / 4;
  if (cols > max_count / rows) throw FormatError(path.string() + ": fbin dimensions overflow");
  const std::uint64_t payload = rows * cols * 4;
  if (bytes.size() - kFbinHeaderSize != payload) {
    throw FormatError(path.string() + ": fbin payload is " +
                      std::to_string(bytes.size() - kFbinHeaderSize) + " bytes, header implies " +
                      std::to_string(payload));
  }
  Matrix m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  const unsigned char* data = p + kFbinHeaderSize;
  for (Eigen::Index i = 0; i < m.size(); ++i) {
    m.data()[i] = static_cast<double>(read_le<float>(data + 4 * i));
  }
  return FeatureMatrix::from_values(std::move(m), path.string());
}

}  // namespace

FeatureMatrix FeatureMatrix::from_values(Matrix values, std::string source_path) {
  if (values.rows() == 0 || values.cols() == 0) {
    throw DataError("feature matrix is empty" +
                    (source_path.empty() ? std::string() : " (" + source_path + ")"));
  }
  if (!values.allFinite()) {
    for (Eigen::Index r = 0; r < values.rows(); ++r) {
      for (Eigen::Index c = 0; c < values.cols(); ++c) {
        if (!std::isfinite(values(r, c))) {
          throw DataError((source_path.empty() ? std::string("features") : source_path) +
                          ": non-finite value at " +
                          location(static_cast<std::size_t>(r + 1), static_cast<std::size_t>(c + 1)));
        }
      }
    }
  }
  FeatureMatrix f;
  f.values = std::move(values);
  f.source_path = std::move(source_path);
  return f;
}

std::string_view to_string(AttributeKind kind) {
  return kind == AttributeKind::kBinary ? "binary" : "continuous";
}

AttributeKind parse_attribute_kind(std::string_view text) {
  if (text == "binary" || text == "binary-discrete") return AttributeKind::kBinary;
  if (text == "continuous") return AttributeKind::kContinuous;
  throw UsageError("unknown attribute kind '" + std::string(text) +
                   "' (expected binary or continuous)");
}

AttributeVector AttributeVector::from_values(Vector values, std::string name,
                                             AttributeKind kind, std::string units) {
  if (values.size() == 0) throw DataError("attribute '" + name + "' is empty");
  for (Eigen::Index i = 0; i < values.size(); ++i) {
    const double v = values(i);
    if (!std::isfinite(v)) {
      throw DataError("attribute '" + name + "': non-finite value at row " +
                      std::to_string(i + 1));
    }
    if (kind == AttributeKind::kBinary && v != 0.0 && v != 1.0) {
      throw EncodingError("attribute '" + name + "' is binary but row " +
                          std::to_string(i + 1) + " holds " + std::to_string(v));
    }
  }
  AttributeVector a;
  a.values = std::move(values);
  a.kind = kind;
  a.name = std::move(name);
  a.units = units.empty() && kind == AttributeKind::kBinary ? "{0,1}" : std::move(units);
  return a;
}

std::string_view to_string(MatrixFormat format) {
  return format == MatrixFormat::kCsv ? "csv" : "fbin";
}

MatrixFormat parse_matrix_format(std::string_view text) {
  if (text == "csv") return MatrixFormat::kCsv;
  if (text == "fbin") return MatrixFormat::kFbin;
  throw UsageError("unknown matrix format '" + std::string(text) + "' (expected csv or fbin)");
}

MatrixFormat infer_matrix_format(const fs::path& path) {
  return path.extension() == ".fbin" ? MatrixFormat::kFbin : MatrixFormat::kCsv;
}

FeatureMatrix load_feature_matrix(const fs::path& path, MatrixFormat format) {
  return format == MatrixFormat::kCsv ? load_csv_matrix(path) : load_fbin_matrix(path);
}

FeatureMatrix load_feature_matrix(const fs::path& path) {
  return load_feature_matrix(path, infer_matrix_format(path));
}

void write_feature_matrix(const Matrix& values, const fs::path& path) {
  std::string out;
  out.reserve(kFbinHeaderSize + 4 * static_cast<std::size_t>(values.size()));
  out.append(kFbinMagic, 4);
  append_le<std::uint32_t>(out, kFbinVersion);
  append_le<std::uint64_t>(out, static_cast<std::uint64_t>(values.rows()));
  append_le<std::uint64_t>(out, static_cast<std::uint64_t>(values.cols()));
  for (Eigen::Index r = 0; r < values.rows(); ++r) {
    for (Eigen::Index c = 0; c < values.cols(); ++c) {
      const float v = static_cast<float>(values(r, c));
      if (!std::isfinite(v)) {
        throw DataError("value at " +
                        location(static_cast<std::size_t>(r + 1), static_cast<std::size_t>(c + 1)) +
                        " is not representable as float32");
      }
      append_le<float>(out, v);
    }
  }
  std::ofstream file(path, std::ios::out | std::ios::binary | std::ios::trunc);
  if (!file) throw IngestionError("cannot write " + path.string());
  file.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!file) throw IngestionError("write failed for " + path.string());
}

void write_feature_matrix(const FeatureMatrix& features, const fs::path& path) {
  write_feature_matrix(features.values, path);
}

AttributeVector load_attributes(const fs::path& path, std::string name, AttributeKind kind,
                                std::string units) {
  const std::string text = read_file(path);
  const auto lines = split_lines(text);
  if (lines.empty()) throw DataError(path.string() + ": empty attribute file");
  Vector values(static_cast<Eigen::Index>(lines.size()));
  for (std::size_t r = 0; r < lines.size(); ++r) {
    if (lines[r].find(',') != std::string_view::npos) {
      throw FormatError(path.string() + ": attribute file must have one column (row " +
                        std::to_string(r + 1) + ")");
    }
    if (trim(lines[r]).empty()) {
      throw DataError(path.string() + ": missing value at row " + std::to_string(r + 1));
    }
    values(static_cast<Eigen::Index>(r)) = parse_number(lines[r], path, r + 1, 1);
  }
  try {
    return AttributeVector::from_values(std::move(values), std::move(name), kind,
                                        std::move(units));
  } catch (const Error& e) {
    rethrow_annotated(e, path.string() + ": ");
  }
}

void write_attributes(const Vector& values, const fs::path& path) {
  std::string out;
  std::array<char, 64> buf;
  for (Eigen::Index i = 0; i < values.size(); ++i) {
    const auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), values(i));
    if (ec != std::errc()) throw DataError("cannot format attribute value");
    out.append(buf.data(), ptr);
    out.push_back('\n');
  }
  std::ofstream file(path, std::ios::out | std::ios::binary | std::ios::trunc);
  if (!file) throw IngestionError("cannot write " + path.string());
  file << out;
  if (!file) throw IngestionError("write failed for " + path.string());
}

StandardizeResult standardize_features(const FeatureMatrix& features) {
  const Eigen::Index n = features.values.rows();
  if (n < 2) throw DataError("standardization needs at least 2 rows");
  StandardizeResult out;
  out.features = features;
  Matrix& x = out.features.values;
  for (Eigen::Index c = 0; c < x.cols(); ++c) {
    auto col = x.col(c);
    const double mean = col.mean();
    const double var = (col.array() - mean).square().mean();
    const double sd = std::sqrt(var);
    if (sd < 1e-12) {
      col.setZero();
      out.constant_columns.push_back(static_cast<std::size_t>(c));
    } else {
      col = ((col.array() - mean) / sd).matrix();
    }
  }
  out.features.standardized = true;
  return out;
}

void validate_pairing(const FeatureMatrix& features, const AttributeVector& attribute) {
  if (features.rows() != attribute.size()) {
    throw DataError("feature rows " + std::to_string(features.rows()) +
                    " != attribute rows " + std::to_string(attribute.size()));
  }
  if (features.rows() == 0) throw DataError("empty dataset");
}

std::string ManifestCell::label() const { return group.empty() ? tag : group + " " + tag; }

namespace {

using nlohmann::json;

void reject_unknown(const json& obj, std::initializer_list<std::string_view> allowed,
                    std::string_view where) {
  for (const auto& [key, _] : obj.items()) {
    bool ok = false;
    for (auto a : allowed) ok = ok || key == a;
    if (!ok) throw FormatError("manifest: unknown field '" + key + "' in " + std::string(where));
  }
}

const json& require(const json& obj, const char* key, std::string_view where) {
  if (!obj.contains(key)) {
    throw FormatError("manifest: missing field '" + std::string(key) + "' in " + std::string(where));
  }
  return obj.at(key);
}

std::string require_string(const json& obj, const char* key, std::string_view where) {
  const json& v = require(obj, key, where);
  if (!v.is_string()) {
    throw FormatError("manifest: field '" + std::string(key) + "' in " + std::string(where) +
                      " must be a string");
  }
  return v.get<std::string>();
}

fs::path resolve(const std::string& p, const fs::path& base, std::string_view where) {
  if (p.empty()) throw FormatError("manifest: empty path in " + std::string(where));
  fs::path path(p);
  return path.is_absolute() || base.empty() ? path : base / path;
}

std::vector<AttributeSpec> parse_attribute_list(const json& list, const fs::path& base,
                                                const std::string& where) {
  if (!list.is_array() || list.empty()) {
    throw FormatError("manifest: 'attributes' in " + where + " must be a non-empty array");
  }
  std::vector<AttributeSpec> out;
  for (std::size_t i = 0; i < list.size(); ++i) {
    const json& a = list[i];
    const std::string at = where + " attribute " + std::to_string(i + 1);
    if (!a.is_object()) throw FormatError("manifest: " + at + " must be an object");
    reject_unknown(a, {"name", "path", "kind", "units"}, at);
    AttributeSpec spec;
    spec.name = require_string(a, "name", at);
    if (spec.name.empty()) throw FormatError("manifest: empty attribute name in " + at);
    spec.path = resolve(require_string(a, "path", at), base, at);
    try {
      spec.kind = parse_attribute_kind(require_string(a, "kind", at));
    } catch (const UsageError& e) {
      throw FormatError("manifest: " + at + ": " + e.what());
    }
    if (a.contains("units")) spec.units = require_string(a, "units", at);
    out.push_back(std::move(spec));
  }
  return out;
}

}  // namespace

AuditManifest parse_manifest_text(std::string_view text, const fs::path& base_dir) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error& e) {
    throw FormatError(std::string("manifest: invalid JSON: ") + e.what());
  }
  if (!root.is_object()) throw FormatError("manifest: top level must be an object");
  reject_unknown(root, {"model_label", "standardize", "base_seed", "attributes", "cells"},
                 "manifest");

  AuditManifest m;
  m.model_label = require_string(root, "model_label", "manifest");
  if (root.contains("standardize")) {
    if (!root["standardize"].is_boolean()) {
      throw FormatError("manifest: 'standardize' must be a boolean");
    }
    m.standardize = root["standardize"].get<bool>();
  }
  if (root.contains("base_seed")) {
    if (!root["base_seed"].is_number_unsigned()) {
      throw FormatError("manifest: 'base_seed' must be a non-negative integer");
    }
    m.base_seed = root["base_seed"].get<std::uint64_t>();
  }
  std::vector<AttributeSpec> shared;
  if (root.contains("attributes")) {
    shared = parse_attribute_list(root["attributes"], base_dir, "manifest");
  }

  const json& cells = require(root, "cells", "manifest");
  if (!cells.is_array() || cells.empty()) {
    throw FormatError("manifest: 'cells' must be a non-empty array");
  }
  std::set<std::pair<std::string, std::string>> seen;
  for (std::size_t i = 0; i < cells.size(); ++i) {
    const json& c = cells[i];
    const std::string where = "cell " + std::to_string(i + 1);
    if (!c.is_object()) throw FormatError("manifest: " + where + " must be an object");
    reject_unknown(c, {"group", "tag", "features", "format", "attributes"}, where);
    ManifestCell cell;
    if (c.contains("group")) cell.group = require_string(c, "group", where);
    const json& tag = require(c, "tag", where);
    if (tag.is_string()) {
      cell.tag = tag.get<std::string>();
    } else if (tag.is_number_integer()) {
      cell.tag = std::to_string(tag.get<long long>());
    } else {
      throw FormatError("manifest: 'tag' in " + where + " must be a string or integer");
    }
    if (cell.tag.empty()) throw FormatError("manifest: empty tag in " + where);
    cell.feature_path = resolve(require_string(c, "features", where), base_dir, where);
    cell.feature_format = infer_matrix_format(cell.feature_path);
    if (c.contains("format")) {
      try {
        cell.feature_format = parse_matrix_format(require_string(c, "format", where));
      } catch (const UsageError& e) {
        throw FormatError("manifest: " + where + ": " + e.what());
      }
    }
    if (c.contains("attributes")) {
      cell.attributes = parse_attribute_list(c["attributes"], base_dir, where);
    } else if (!shared.empty()) {
      cell.attributes = shared;
    } else {
      throw FormatError("manifest: " + where + " has no attributes and no shared list is given");
    }
    for (const auto& a : cell.attributes) {
      if (!seen.emplace(cell.label(), a.name).second) {
        throw DataError("manifest: duplicate cell (" + cell.label() + ", " + a.name + ")");
      }
    }
    m.cells.push_back(std::move(cell));
  }
  return m;
}

AuditManifest parse_manifest(const fs::path& path) {
  const std::string text = read_file(path);
  try {
    return parse_manifest_text(text, path.parent_path());
  } catch (const Error& e) {
    rethrow_annotated(e, path.string() + ": ");
  }
}

}  // namespace expressivity
