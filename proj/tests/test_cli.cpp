#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <fstream>
#include <iterator>
#include <string>
#include <sys/wait.h>

#include <json.hpp>

#include "expressivity/data.hpp"
#include "expressivity/oracle.hpp"
#include "temp_dir.hpp"

using namespace expressivity;
using nlohmann::json;

namespace {

struct Run {
  int code;
  std::string out, err;
};

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

Run cli(const testing::TempDir& dir, const std::string& args, const std::string& env = "") {
  const auto out = dir / "stdout.txt", err = dir / "stderr.txt";
  const std::string cmd = "cd \"" + dir.path().string() + "\" && " + env + " \"" +
                          EXPRESSIVITY_CLI + "\" " + args + " > \"" + out.string() + "\" 2> \"" +
                          err.string() + "\"";
  const int status = std::system(cmd.c_str());
  return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, slurp(out), slurp(err)};
}

const char* kFast = " --runs 2 --max-iters 300 --batch-size 50";

}  // namespace

TEST_CASE("gen") {
  testing::TempDir dir;
  REQUIRE(cli(dir, "gen gaussian --n 1000 --rho 0.8 --seed 1 --out a").code == 0);
  REQUIRE(cli(dir, "gen gaussian --n 1000 --rho 0.8 --seed 1 --out b").code == 0);
  CHECK(slurp(dir / "a.fbin") == slurp(dir / "b.fbin"));
  CHECK(slurp(dir / "a.attr.csv") == slurp(dir / "b.attr.csv"));
  const json meta = json::parse(slurp(dir / "a.meta.json"));
  CHECK(meta["true_mi"].get<double>() == doctest::Approx(0.5108).epsilon(1e-4));
  CHECK(meta["seed"] == 1);
  CHECK(meta["generator"] == "gaussian");
  CHECK(load_feature_matrix(dir / "a.fbin").rows() == 1000);

  REQUIRE(cli(dir, "gen channel --n 100 --p 0.5 --out c").code == 0);
  CHECK(json::parse(slurp(dir / "c.meta.json"))["true_mi"] == 0.0);
  REQUIRE(cli(dir, "gen embedded --n 50 --m 16 --out e").code == 0);
  CHECK(load_feature_matrix(dir / "e.fbin").cols() == 16);

  CHECK(cli(dir, "gen gaussian --rho 1.5 --out x").code == 1);
  CHECK(cli(dir, "gen channel --p 0.7 --out x").code == 1);
  CHECK(cli(dir, "gen uniform --out x").code == 1);
}

TEST_CASE("exit codes") {
  testing::TempDir dir;
  REQUIRE(cli(dir, "gen gaussian --n 1000 --out g").code == 0);

  CHECK(cli(dir, "").code == 1);
  CHECK(cli(dir, "frobnicate").code == 1);
  CHECK(cli(dir, std::string("estimate g.fbin g.attr.csv --runs 0")).code == 1);
  CHECK(cli(dir, "estimate g.fbin g.attr.csv --kind ordinal").code == 1);
  CHECK(cli(dir, "estimate g.fbin g.attr.csv --runs 1", "EXPRESSIVITY_SEED=abc").code == 1);

  const Run missing = cli(dir, "estimate g.fbin absent.csv");
  CHECK(missing.code == 2);
  CHECK(missing.err.find("absent.csv") != std::string::npos);

  {
    std::ofstream out(dir / "bad.csv");
    for (int i = 0; i < 1000; ++i) out << (i % 3) << "\n";
  }
  CHECK(cli(dir, "estimate g.fbin bad.csv --kind binary").code == 2);
  {
    std::ofstream out(dir / "short.csv");
    for (int i = 0; i < 10; ++i) out << i << "\n";
  }
  CHECK(cli(dir, "estimate g.fbin short.csv").code == 2);

  // Unstandardized features of magnitude 1e6 with a huge step blow up training.
  const auto d = oracle::gen_correlated_gaussian(1000, 0.8, 1);
  write_feature_matrix(Matrix(d.features.values * 1e6), dir / "huge.fbin");
  const Run diverged =
      cli(dir, "estimate huge.fbin g.attr.csv --no-standardize --lr 10 --runs 1");
  CHECK(diverged.code == 3);
  CHECK(diverged.err.find("iteration") != std::string::npos);
}

TEST_CASE("estimate reports") {
  testing::TempDir dir;
  REQUIRE(cli(dir, "gen gaussian --n 1000 --rho 0.8 --seed 3 --out g").code == 0);
  const Run r = cli(dir, std::string("estimate g.fbin g.attr.csv --name A --seed 9 --out r.json") +
                             kFast);
  REQUIRE(r.code == 0);
  CHECK(r.out.find("expressivity") != std::string::npos);
  CHECK(r.out.find("(M=2)") != std::string::npos);

  const json j = json::parse(slurp(dir / "r.json"));
  CHECK(j["base_seed"] == 9);
  CHECK(j["version"] == "1.0.0");
  CHECK(j["standardize"] == true);
  CHECK(j["config"]["max_iterations"] == 300);
  CHECK(j["inputs"].contains("g.fbin"));
  CHECK(j["inputs"]["g.attr.csv"].get<std::string>().rfind("fnv1a64:", 0) == 0);
  CHECK(j["result"]["runs"] == 2);

  SUBCASE("same inputs give identical bytes") {
    REQUIRE(cli(dir, std::string("estimate g.fbin g.attr.csv --name A --seed 9 --out s.json") +
                         kFast)
                .code == 0);
    CHECK(slurp(dir / "r.json") == slurp(dir / "s.json"));
  }
  SUBCASE("EXPRESSIVITY_SEED is the default base seed") {
    REQUIRE(cli(dir, std::string("estimate g.fbin g.attr.csv --name A --out e.json") + kFast,
                "EXPRESSIVITY_SEED=9")
                .code == 0);
    const json e = json::parse(slurp(dir / "e.json"));
    CHECK(e["base_seed"] == 9);
    CHECK(e["result"]["run_values"] == j["result"]["run_values"]);
  }
  SUBCASE("csv carries the same numbers") {
    REQUIRE(cli(dir, std::string("estimate g.fbin g.attr.csv --name A --seed 9 --format csv "
                                 "--out r.csv") +
                         kFast)
                .code == 0);
    const std::string csv = slurp(dir / "r.csv");
    for (const auto& v : j["result"]["run_values"]) {
      CHECK(csv.find("," + v.dump() + ",") != std::string::npos);
    }
  }
}

TEST_CASE("audit") {
  testing::TempDir dir;
  REQUIRE(cli(dir, "gen gaussian --n 1000 --rho 0.8 --seed 3 --out g").code == 0);
  {
    std::ofstream m(dir / "m.json");
    m << R"({"model_label": "toy", "base_seed": 9, "cells": [
      {"group": "epoch", "tag": 11, "features": "g.fbin",
       "attributes": [{"name": "A", "path": "g.attr.csv", "kind": "continuous"}]}]})";
  }
  const Run r = cli(dir, std::string("audit m.json --out a.json") + kFast);
  REQUIRE(r.code == 0);
  CHECK(r.out.find("epoch 11") != std::string::npos);

  REQUIRE(cli(dir, std::string("estimate g.fbin g.attr.csv --name A --seed 9 --out e.json") +
                       kFast)
              .code == 0);
  const json a = json::parse(slurp(dir / "a.json"));
  const json e = json::parse(slurp(dir / "e.json"));
  CHECK(a["cells"][0]["result"]["run_values"] == e["result"]["run_values"]);
  CHECK(a["cells"][0]["result"]["mean"] == e["result"]["mean"]);
  CHECK(a["rankings"][0]["ranking"] == "A");

  REQUIRE(cli(dir, std::string("audit m.json --format csv --out a.csv") + kFast).code == 0);
  CHECK(slurp(dir / "a.csv").find("," + a["cells"][0]["result"]["mean"].dump() + ",") !=
        std::string::npos);

  {
    std::ofstream m(dir / "broken.json");
    m << R"({"model_label": "toy", "cells": [
      {"tag": "1", "features": "g.fbin", "attributes": [
        {"name": "A", "path": "g.attr.csv", "kind": "continuous"},
        {"name": "B", "path": "gone.csv", "kind": "continuous"}]}]})";
  }
  const Run fail = cli(dir, std::string("audit broken.json") + kFast);
  CHECK(fail.code == 2);
  CHECK(fail.err.find("(1, B)") != std::string::npos);

  const Run partial = cli(dir, std::string("audit broken.json --keep-going --out p.json") + kFast);
  CHECK(partial.code == 2);
  CHECK(partial.out.find("null") != std::string::npos);
  const json p = json::parse(slurp(dir / "p.json"));
  CHECK(p["cells"][1]["result"].is_null());
  CHECK_FALSE(p["cells"][0]["result"].is_null());
}
