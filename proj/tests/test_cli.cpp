#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "skewinfo/cli.hpp"

using namespace skewinfo;

namespace {

const std::filesystem::path kSpecs = SKEWINFO_SPEC_DIR;

struct Outcome {
  int code;
  std::string out;
  std::string err;
};

Outcome run_cli(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

std::filesystem::path scratch() {
  const auto dir = std::filesystem::temp_directory_path() / "skewinfo_cli_test";
  std::filesystem::create_directories(dir);
  return dir;
}

std::vector<std::string> lines_of(const std::filesystem::path& p) {
  std::ifstream in(p);
  std::vector<std::string> lines;
  for (std::string l; std::getline(in, l);) lines.push_back(l);
  return lines;
}

std::vector<double> split_numbers(const std::string& line) {
  std::vector<double> v;
  std::stringstream ss(line);
  for (std::string f; std::getline(ss, f, ',');) v.push_back(std::stod(f));
  return v;
}

}  // namespace

TEST_CASE("cli info reports the rank") {
  const auto r = run_cli({"info", (kSpecs / "skew_normal.toml").string(), "--full"});
  CHECK(r.code == cli::kExitOk);
  CHECK(r.out.find("rank: 2\n") != std::string::npos);
  const auto reduced = run_cli({"info", (kSpecs / "skew_normal.toml").string()});
  CHECK(reduced.out.find("rank: 1\n") != std::string::npos);
}

TEST_CASE("cli info names the violated assumption") {
  const auto r = run_cli({"info", (kSpecs / "cauchy_tailed.toml").string(), "--full"});
  CHECK(r.code == cli::kExitAssumption);
  CHECK(r.err.find("(A1⁺)") != std::string::npos);
  CHECK(run_cli({"info", (kSpecs / "cauchy_tailed.toml").string()}).code == cli::kExitOk);
}

TEST_CASE("cli plot of the sine-skewed normal") {
  const auto csv = scratch() / "curves.csv";
  const auto svg = scratch() / "curves.svg";
  const auto r = run_cli({"plot", (kSpecs / "sine_skew.toml").string(), "--deltas", "0,0.5,2,6", "--out",
                          csv.string(), "--svg", svg.string()});
  REQUIRE(r.code == cli::kExitOk);
  const auto lines = lines_of(csv);
  REQUIRE(lines.size() == 403);
  CHECK(lines[0].rfind("# skewinfo ", 0) == 0);
  CHECK(lines[0].find("seed=") != std::string::npos);
  CHECK(lines[0].find("quadrature=") != std::string::npos);
  CHECK(lines[1] == "x,pdf_delta=0,pdf_delta=0.5,pdf_delta=2,pdf_delta=6");
  double worst = 0.0;
  for (std::size_t i = 2; i < lines.size(); ++i) {
    const auto v = split_numbers(lines[i]);
    REQUIRE(v.size() == 5);
    const double phi = std::exp(-0.5 * v[0] * v[0]) / std::sqrt(2.0 * std::numbers::pi);
    worst = std::max(worst, std::abs(v[1] - phi));
  }
  CHECK(worst < 1e-12);
  const auto svg_lines = lines_of(svg);
  REQUIRE_FALSE(svg_lines.empty());
  CHECK(svg_lines[0].find("viewBox=\"0 0 800 600\"") != std::string::npos);
}

TEST_CASE("cli spec errors exit 2 with a line") {
  const auto bad = scratch() / "bad.toml";
  std::ofstream(bad) << "dim = 1\n[kernel]\nfamily = \"gaussian\"\nshape = 2\n[skewer]\nfamily = \"linear\"\n";
  const auto r = run_cli({"info", bad.string()});
  CHECK(r.code == cli::kExitSpec);
  CHECK(r.err.find("bad.toml:4: unknown key 'shape'") != std::string::npos);
  CHECK(run_cli({"info"}).code == cli::kExitSpec);
  CHECK(run_cli({"frobnicate"}).code == cli::kExitSpec);
  CHECK(run_cli({"--help"}).code == cli::kExitOk);
}

TEST_CASE("cli match output runs under every subcommand") {
  const auto dir = scratch();
  const auto spec = dir / "matched.toml";
  const auto m = run_cli({"match", (kSpecs / "ep_power.toml").string(), "--out", spec.string()});
  REQUIRE(m.code == cli::kExitOk);
  CHECK(m.out.find("natural space: positive") != std::string::npos);
  const std::string s = spec.string();
  CHECK(run_cli({"info", s}).code == cli::kExitOk);
  CHECK(run_cli({"info", s, "--full", "--csv", (dir / "info.csv").string()}).code == cli::kExitOk);
  const auto p = run_cli({"predict", s});
  CHECK(p.code == cli::kExitOk);
  CHECK(p.out.find("prediction: singular(1)") != std::string::npos);
  CHECK(run_cli({"match", s}).code == cli::kExitOk);
  CHECK(run_cli({"plot", s, "--out", (dir / "m_curves.csv").string()}).code == cli::kExitOk);
  const auto data = dir / "m_samples.csv";
  CHECK(run_cli({"sample", s, "-n", "300", "--seed", "7", "--out", data.string()}).code == cli::kExitOk);
  const auto f = run_cli({"fit", s, "--data", data.string()});
  CHECK(f.code == cli::kExitOk);
  CHECK(f.out.find("converged:") != std::string::npos);
  const auto e = run_cli({"experiment", s, "-n", "40", "-R", "100", "--seed", "3", "--out",
                          (dir / "m_exp.csv").string()});
  CHECK(e.code == cli::kExitOk);
  CHECK(e.out.find("bimodality coefficient:") != std::string::npos);
  CHECK(lines_of(dir / "m_exp.csv").size() == 102);
}

TEST_CASE("cli match without a degenerate kernel") {
  const auto r = run_cli({"match", (kSpecs / "sine_skew.toml").string()});
  CHECK(r.code == cli::kExitOk);
  CHECK(r.out.find("natural space: empty (50 of 50") != std::string::npos);
  CHECK(r.out.find("no degenerate kernel exists for this skewer") != std::string::npos);
}

TEST_CASE("cli fit rejects malformed data") {
  const auto data = scratch() / "short.csv";
  std::ofstream(data) << "x1\n0.1\n0.2\n";
  CHECK(run_cli({"fit", (kSpecs / "skew_normal.toml").string(), "--data", data.string()}).code ==
        cli::kExitSpec);
}
