#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "expressivity/numerics.hpp"

namespace expressivity {

// n x m embedding features, one row per sample. Always finite.
struct FeatureMatrix {
  Matrix values;
  std::string source_path;
  bool standardized = false;

  std::size_t rows() const { return static_cast<std::size_t>(values.rows()); }
  std::size_t cols() const { return static_cast<std::size_t>(values.cols()); }

  // Validates finiteness and reports the first offending (row, col), 1-based.
  static FeatureMatrix from_values(Matrix values, std::string source_path = {});
};

enum class AttributeKind { kBinary, kContinuous };

std::string_view to_string(AttributeKind kind);
// Accepts "binary", "binary-discrete", "continuous".
AttributeKind parse_attribute_kind(std::string_view text);

// One attribute value per sample. Binary attributes hold exactly 0 or 1.
struct AttributeVector {
  Vector values;
  AttributeKind kind = AttributeKind::kContinuous;
  std::string name;
  std::string units;

  std::size_t size() const { return static_cast<std::size_t>(values.size()); }

  static AttributeVector from_values(Vector values, std::string name, AttributeKind kind,
                                     std::string units = {});
};

enum class MatrixFormat { kCsv, kFbin };

std::string_view to_string(MatrixFormat format);
MatrixFormat parse_matrix_format(std::string_view text);
// .fbin -> fbin, everything else -> csv.
MatrixFormat infer_matrix_format(const std::filesystem::path& path);

// fbin layout, little-endian:
//   "EXPR" | u32 version = 1 | u64 rows | u64 cols | rows*cols float32, row-major
inline constexpr char kFbinMagic[4] = {'E', 'X', 'P', 'R'};
inline constexpr std::uint32_t kFbinVersion = 1;

FeatureMatrix load_feature_matrix(const std::filesystem::path& path, MatrixFormat format);
FeatureMatrix load_feature_matrix(const std::filesystem::path& path);

// Writes values narrowed to float32.
void write_feature_matrix(const Matrix& values, const std::filesystem::path& path);
void write_feature_matrix(const FeatureMatrix& features, const std::filesystem::path& path);

AttributeVector load_attributes(const std::filesystem::path& path, std::string name,
                                AttributeKind kind, std::string units = {});
// One value per line, shortest round-trip representation.
void write_attributes(const Vector& values, const std::filesystem::path& path);

struct StandardizeResult {
  FeatureMatrix features;
  std::vector<std::size_t> constant_columns;  // 0-based
};

// Per-column z-score with population std; columns with std < 1e-12 become 0.
StandardizeResult standardize_features(const FeatureMatrix& features);

// Throws DataError unless rows match and are non-zero.
void validate_pairing(const FeatureMatrix& features, const AttributeVector& attribute);

struct AttributeSpec {
  std::string name;
  std::filesystem::path path;
  AttributeKind kind = AttributeKind::kContinuous;
  std::string units;
};

struct ManifestCell {
  std::string group;  // "layer", "epoch" or empty
  std::string tag;
  std::filesystem::path feature_path;
  MatrixFormat feature_format = MatrixFormat::kFbin;
  std::vector<AttributeSpec> attributes;

  // Row label used in grids: "<group> <tag>" or just the tag.
  std::string label() const;
};

struct AuditManifest {
  std::string model_label;
  bool standardize = true;
  std::optional<std::uint64_t> base_seed;
  std::vector<ManifestCell> cells;
};

// Parses the JSON manifest. Relative paths resolve against the manifest's
// directory. Unknown fields, empty paths and duplicate (row, attribute)
// pairs are rejected.
AuditManifest parse_manifest(const std::filesystem::path& path);
AuditManifest parse_manifest_text(std::string_view text,
                                  const std::filesystem::path& base_dir = {});

}  // namespace expressivity
