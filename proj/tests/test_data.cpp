#include <doctest.h>

#include <cmath>
#include <fstream>
#include <limits>
#include <random>

#include "expressivity/data.hpp"
#include "expressivity/errors.hpp"
#include "temp_dir.hpp"

using namespace expressivity;
namespace fs = std::filesystem;

namespace {

void write_text(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  out << text;
}

std::string read_bytes(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

template <class Fn>
std::string error_message(Fn&& fn) {
  try {
    fn();
  } catch (const std::exception& e) {
    return e.what();
  }
  return {};
}

}  // namespace

TEST_CASE("csv feature loading") {
  testing::TempDir dir;
  SUBCASE("literal parse") {
    write_text(dir / "f.csv", "1.0,2.0\n3.0,4.0\n");
    const FeatureMatrix f = load_feature_matrix(dir / "f.csv", MatrixFormat::kCsv);
    CHECK(f.rows() == 2);
    CHECK(f.cols() == 2);
    CHECK(f.values(0, 0) == 1.0);
    CHECK(f.values(0, 1) == 2.0);
    CHECK(f.values(1, 0) == 3.0);
    CHECK(f.values(1, 1) == 4.0);
    CHECK_FALSE(f.standardized);
  }
  SUBCASE("inf is a data error with its location") {
    write_text(dir / "f.csv", "1,2\n3,inf\n");
    CHECK_THROWS_AS(load_feature_matrix(dir / "f.csv"), DataError);
    const std::string msg = error_message([&] { load_feature_matrix(dir / "f.csv"); });
    CHECK(msg.find("row 2, col 2") != std::string::npos);
  }
  SUBCASE("nan is a data error") {
    write_text(dir / "f.csv", "nan,2\n");
    CHECK_THROWS_AS(load_feature_matrix(dir / "f.csv"), DataError);
  }
  SUBCASE("ragged rows") {
    write_text(dir / "f.csv", "1,2\n3\n");
    CHECK_THROWS_AS(load_feature_matrix(dir / "f.csv"), FormatError);
  }
  SUBCASE("garbage token") {
    write_text(dir / "f.csv", "1,abc\n");
    CHECK_THROWS_AS(load_feature_matrix(dir / "f.csv"), FormatError);
  }
  SUBCASE("empty file") {
    write_text(dir / "f.csv", "");
    CHECK_THROWS_AS(load_feature_matrix(dir / "f.csv"), DataError);
  }
  SUBCASE("missing file names the path") {
    CHECK_THROWS_AS(load_feature_matrix(dir / "nope.csv"), IngestionError);
    CHECK(error_message([&] { load_feature_matrix(dir / "nope.csv"); }).find("nope.csv") !=
          std::string::npos);
  }
}

TEST_CASE("fbin format") {
  testing::TempDir dir;
  SUBCASE("exact byte layout") {
    Matrix m(2, 3);
    m << 1, 2, 3, 4, 5, -0.5;
    write_feature_matrix(m, dir / "m.fbin");
    const std::string bytes = read_bytes(dir / "m.fbin");
    REQUIRE(bytes.size() == 24 + 6 * 4);
    CHECK(bytes.substr(0, 4) == "EXPR");
    CHECK(bytes.substr(4, 4) == std::string("\x01\x00\x00\x00", 4));
    CHECK(bytes.substr(8, 8) == std::string("\x02\x00\x00\x00\x00\x00\x00\x00", 8));
    CHECK(bytes.substr(16, 8) == std::string("\x03\x00\x00\x00\x00\x00\x00\x00", 8));
    // 1.0f = 0x3F800000, -0.5f = 0xBF000000, little-endian.
    CHECK(bytes.substr(24, 4) == std::string("\x00\x00\x80\x3f", 4));
    CHECK(bytes.substr(44, 4) == std::string("\x00\x00\x00\xbf", 4));
  }
  SUBCASE("round trip is bit exact for float32-representable values") {
    std::mt19937_64 rng(5);
    std::normal_distribution<float> normal(0.0f, 100.0f);
    for (int trial = 0; trial < 20; ++trial) {
      const Eigen::Index r = 1 + trial % 7, c = 1 + (trial * 3) % 11;
      Matrix m(r, c);
      for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = static_cast<double>(normal(rng));
      write_feature_matrix(m, dir / "r.fbin");
      const FeatureMatrix back = load_feature_matrix(dir / "r.fbin");
      CHECK(back.values == m);
    }
  }
  SUBCASE("bad magic") {
    write_text(dir / "bad.fbin", std::string("EXPQ\x01\x00\x00\x00", 8) + std::string(16, '\0'));
    CHECK_THROWS_AS(load_feature_matrix(dir / "bad.fbin"), FormatError);
  }
  SUBCASE("dimension mismatch") {
    Matrix m = Matrix::Ones(3, 3);
    write_feature_matrix(m, dir / "t.fbin");
    std::string bytes = read_bytes(dir / "t.fbin");
    write_text(dir / "t.fbin", bytes.substr(0, bytes.size() - 4));
    CHECK_THROWS_AS(load_feature_matrix(dir / "t.fbin"), FormatError);
  }
  SUBCASE("unsupported version") {
    Matrix m = Matrix::Ones(1, 1);
    write_feature_matrix(m, dir / "v.fbin");
    std::string bytes = read_bytes(dir / "v.fbin");
    bytes[4] = 2;
    write_text(dir / "v.fbin", bytes);
    CHECK_THROWS_AS(load_feature_matrix(dir / "v.fbin"), FormatError);
  }
  SUBCASE("non-finite payload") {
    Matrix m = Matrix::Ones(2, 2);
    write_feature_matrix(m, dir / "n.fbin");
    std::string bytes = read_bytes(dir / "n.fbin");
    const float nan = std::numeric_limits<float>::quiet_NaN();
    std::memcpy(bytes.data() + 24 + 3 * 4, &nan, 4);
    write_text(dir / "n.fbin", bytes);
    CHECK_THROWS_AS(load_feature_matrix(dir / "n.fbin"), DataError);
  }
  SUBCASE("values beyond float range are rejected on write") {
    Matrix m = Matrix::Constant(1, 1, 1e300);
    CHECK_THROWS_AS(write_feature_matrix(m, dir / "o.fbin"), DataError);
  }
}

TEST_CASE("attribute loading") {
  testing::TempDir dir;
  SUBCASE("binary column") {
    write_text(dir / "g.csv", "1\n0\n1\n");
    const AttributeVector a = load_attributes(dir / "g.csv", "gender", AttributeKind::kBinary);
    CHECK(a.size() == 3);
    CHECK(a.kind == AttributeKind::kBinary);
    CHECK(a.units == "{0,1}");
  }
  SUBCASE("binary column with a fraction") {
    write_text(dir / "g.csv", "0.5\n");
    CHECK_THROWS_AS(load_attributes(dir / "g.csv", "gender", AttributeKind::kBinary),
                    EncodingError);
  }
  SUBCASE("binary column with a 2") {
    write_text(dir / "g.csv", "0\n2\n");
    CHECK_THROWS_AS(load_attributes(dir / "g.csv", "gender", AttributeKind::kBinary),
                    EncodingError);
  }
  SUBCASE("continuous column") {
    write_text(dir / "bmi.csv", "23.4\n31.0\n");
    const AttributeVector a =
        load_attributes(dir / "bmi.csv", "BMI", AttributeKind::kContinuous, "kg/m^2");
    CHECK(a.size() == 2);
    CHECK(a.values(0) == 23.4);
    CHECK(a.name == "BMI");
    CHECK(a.units == "kg/m^2");
  }
  SUBCASE("empty file") {
    write_text(dir / "e.csv", "");
    CHECK_THROWS_AS(load_attributes(dir / "e.csv", "x", AttributeKind::kContinuous), DataError);
  }
  SUBCASE("blank row is a missing value") {
    write_text(dir / "e.csv", "1\n\n2\n");
    CHECK_THROWS_AS(load_attributes(dir / "e.csv", "x", AttributeKind::kContinuous), DataError);
  }
  SUBCASE("two columns") {
    write_text(dir / "e.csv", "1,2\n");
    CHECK_THROWS_AS(load_attributes(dir / "e.csv", "x", AttributeKind::kContinuous), FormatError);
  }
  SUBCASE("kind names") {
    CHECK(parse_attribute_kind("binary-discrete") == AttributeKind::kBinary);
    CHECK(parse_attribute_kind("binary") == AttributeKind::kBinary);
    CHECK(parse_attribute_kind("continuous") == AttributeKind::kContinuous);
    CHECK_THROWS_AS(parse_attribute_kind("ordinal"), UsageError);
  }
  SUBCASE("write then load") {
    Vector v(3);
    v << 0.1, -2.5, 1e-9;
    write_attributes(v, dir / "w.csv");
    CHECK(load_attributes(dir / "w.csv", "w", AttributeKind::kContinuous).values == v);
  }
}

TEST_CASE("standardize_features") {
  SUBCASE("two-point column") {
    Matrix m(2, 1);
    m << 1, 3;
    const auto s = standardize_features(FeatureMatrix::from_values(m));
    CHECK(s.features.values(0, 0) == doctest::Approx(-1.0));
    CHECK(s.features.values(1, 0) == doctest::Approx(1.0));
    CHECK(s.features.standardized);
    CHECK(s.constant_columns.empty());
  }
  SUBCASE("constant column is zeroed and reported") {
    Matrix m(3, 2);
    m << 5, 1, 5, 2, 5, 4;
    const auto s = standardize_features(FeatureMatrix::from_values(m));
    CHECK(s.features.values.col(0).isZero());
    REQUIRE(s.constant_columns.size() == 1);
    CHECK(s.constant_columns[0] == 0);
  }
  SUBCASE("column moments and idempotence") {
    std::mt19937_64 rng(8);
    std::normal_distribution<double> normal(3.0, 7.0);
    Matrix m(200, 5);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = normal(rng);
    const auto once = standardize_features(FeatureMatrix::from_values(m));
    for (Eigen::Index c = 0; c < 5; ++c) {
      const auto col = once.features.values.col(c);
      CHECK(std::abs(col.mean()) < 1e-9);
      CHECK(std::abs(std::sqrt((col.array() - col.mean()).square().mean()) - 1.0) < 1e-6);
    }
    const auto twice = standardize_features(once.features);
    CHECK((twice.features.values - once.features.values).cwiseAbs().maxCoeff() < 1e-9);
    CHECK(twice.features.standardized);
  }
  SUBCASE("needs two rows") {
    CHECK_THROWS_AS(standardize_features(FeatureMatrix::from_values(Matrix::Ones(1, 3))),
                    DataError);
  }
}

TEST_CASE("validate_pairing") {
  const FeatureMatrix f = FeatureMatrix::from_values(Matrix::Zero(10, 2));
  const AttributeVector a10 =
      AttributeVector::from_values(Vector::Zero(10), "a", AttributeKind::kContinuous);
  const AttributeVector a9 =
      AttributeVector::from_values(Vector::Zero(9), "a", AttributeKind::kContinuous);
  CHECK_NOTHROW(validate_pairing(f, a10));
  CHECK_THROWS_AS(validate_pairing(f, a9), DataError);
  CHECK(error_message([&] { validate_pairing(f, a9); }) == "feature rows 10 != attribute rows 9");
  FeatureMatrix empty;
  AttributeVector none;
  CHECK_THROWS_AS(validate_pairing(empty, none), DataError);
}

TEST_CASE("manifest parsing") {
  SUBCASE("minimal one-cell manifest") {
    const auto m = parse_manifest_text(R"({
      "model_label": "toy",
      "cells": [{"tag": "late", "features": "f.fbin",
                 "attributes": [{"name": "BMI", "path": "bmi.csv", "kind": "continuous"}]}]
    })", "/data");
    CHECK(m.model_label == "toy");
    CHECK(m.standardize);
    CHECK_FALSE(m.base_seed.has_value());
    REQUIRE(m.cells.size() == 1);
    CHECK(m.cells[0].feature_path == fs::path("/data/f.fbin"));
    CHECK(m.cells[0].feature_format == MatrixFormat::kFbin);
    CHECK(m.cells[0].attributes[0].path == fs::path("/data/bmi.csv"));
    CHECK(m.cells[0].label() == "late");
  }
  SUBCASE("duplicate (tag, attribute)") {
    CHECK_THROWS_AS(parse_manifest_text(R"({
      "model_label": "toy",
      "attributes": [{"name": "Yaw", "path": "y.csv", "kind": "continuous"}],
      "cells": [{"tag": "a", "features": "f.csv"}, {"tag": "a", "features": "g.csv"}]
    })"), DataError);
  }
  SUBCASE("unknown field") {
    CHECK_THROWS_AS(parse_manifest_text(R"({"model_label": "x", "cells": [], "colour": 1})"),
                    FormatError);
    CHECK_THROWS_AS(parse_manifest_text(R"({
      "model_label": "x",
      "cells": [{"tag": "a", "features": "f.csv", "layer": 3,
                 "attributes": [{"name": "g", "path": "g.csv", "kind": "binary"}]}]
    })"), FormatError);
  }
  SUBCASE("empty path") {
    CHECK_THROWS_AS(parse_manifest_text(R"({
      "model_label": "x",
      "cells": [{"tag": "a", "features": "",
                 "attributes": [{"name": "g", "path": "g.csv", "kind": "binary"}]}]
    })"), FormatError);
  }
  SUBCASE("bad kind and bad json") {
    CHECK_THROWS_AS(parse_manifest_text(R"({
      "model_label": "x",
      "cells": [{"tag": "a", "features": "f.csv",
                 "attributes": [{"name": "g", "path": "g.csv", "kind": "ordinal"}]}]
    })"), FormatError);
    CHECK_THROWS_AS(parse_manifest_text("{not json"), FormatError);
  }
  SUBCASE("layer and epoch protocol skeleton") {
    std::string cells;
    for (const char* t : {"2", "4", "6", "9", "12"}) {
      cells += std::string(cells.empty() ? "" : ",") + R"({"group": "layer", "tag": ")" + t +
               R"(", "features": "layer)" + t + R"(.fbin"})";
    }
    for (int t : {1, 3, 5, 8, 11}) {
      cells += R"(,{"group": "epoch", "tag": )" + std::to_string(t) +
               R"(, "features": "epoch)" + std::to_string(t) + R"(.fbin"})";
    }
    const auto m = parse_manifest_text(R"({
      "model_label": "SemReID", "standardize": false, "base_seed": 7,
      "attributes": [
        {"name": "Gender", "path": "g.csv", "kind": "binary"},
        {"name": "Yaw", "path": "y.csv", "kind": "continuous", "units": "deg"},
        {"name": "BMI", "path": "b.csv", "kind": "continuous", "units": "kg/m^2"},
        {"name": "Pitch", "path": "p.csv", "kind": "continuous", "units": "deg"}],
      "cells": [)" + cells + "]}");
    REQUIRE(m.cells.size() == 10);
    CHECK(m.cells[0].label() == "layer 2");
    CHECK(m.cells[4].label() == "layer 12");
    CHECK(m.cells[5].label() == "epoch 1");
    CHECK(m.cells[9].label() == "epoch 11");
    CHECK(m.base_seed == 7u);
    CHECK_FALSE(m.standardize);
    for (const auto& c : m.cells) CHECK(c.attributes.size() == 4);
  }
  SUBCASE("missing manifest file") {
    CHECK_THROWS_AS(parse_manifest("/nonexistent/manifest.json"), IngestionError);
  }
}
