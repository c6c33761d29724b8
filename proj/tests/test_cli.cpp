#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <array>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "nlohmann/json.hpp"

// Drives the installed binary end to end. The harness passes its path via
// the HYBRIDCERT_CLI environment variable.

namespace {

std::string cli_path() {
  const char* path = std::getenv("HYBRIDCERT_CLI");
  REQUIRE_MESSAGE(path != nullptr, "HYBRIDCERT_CLI must point at the binary");
  return path;
}

struct CliResult {
  int exit_code = -1;
  std::string out;
};

CliResult run_cli(const std::string& args) {
  const std::string cmd = cli_path() + " " + args + " 2>/dev/null";
  std::array<char, 4096> buffer;
  CliResult result;
  FILE* pipe = popen(cmd.c_str(), "r");
  REQUIRE(pipe != nullptr);
  std::size_t got = 0;
  while ((got = fread(buffer.data(), 1, buffer.size(), pipe)) > 0) {
    result.out.append(buffer.data(), got);
  }
  const int status = pclose(pipe);
  result.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return result;
}

std::string strip_timestamp(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  std::string out;
  while (std::getline(in, line)) {
    if (line.rfind("# timestamp:", 0) == 0) continue;
    out += line + "\n";
  }
  return out;
}

std::vector<std::vector<std::string>> parse_csv_rows(const std::string& text) {
  std::vector<std::vector<std::string>> rows;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    rows.push_back(cells);
  }
  return rows;
}

}  // namespace

TEST_CASE("certify: gaussian-limit radius and exit 0") {
  const auto res = run_cli(
      "certify --pa 0.9 --sigma 1 --kernel uniform --beta 0.5 --vocab 3 "
      "--d 0 --tau 0.5");
  REQUIRE(res.exit_code == 0);
  const auto record = nlohmann::json::parse(res.out);
  CHECK(record["certified"].get<bool>());
  CHECK(std::abs(record["radius"].get<double>() - 1.28155) < 1e-3);
  CHECK(record["radius"].get<double>() <= 1.2815515655446004);
  CHECK(record["config"]["tau"].get<double>() == 0.5);
}

TEST_CASE("certify: degenerate absorbing case fails cleanly") {
  const auto res = run_cli(
      "certify --pa 0.7 --kernel absorbing --beta 0.5 --d 2 --tau 1e-4");
  REQUIRE(res.exit_code == 0);
  const auto record = nlohmann::json::parse(res.out);
  CHECK(!record["certified"].get<bool>());
  CHECK(record["radius"].get<double>() == 0.0);
}

TEST_CASE("certify: clopper-pearson source for p_A") {
  const auto res = run_cli(
      "certify --n 100 --k 100 --alpha-risk 0.01 --sigma 1 --kernel uniform "
      "--beta 0.5 --vocab 3 --d 0 --tau 0.5");
  REQUIRE(res.exit_code == 0);
  const auto record = nlohmann::json::parse(res.out);
  CHECK(std::abs(record["p_a_lower"].get<double>() - 0.954993) < 1e-5);
}

TEST_CASE("certify: conflicting p_A sources exit 2") {
  const auto res = run_cli("certify --pa 0.9 --n 100 --k 90 --d 0 --tau 0.5");
  CHECK(res.exit_code == 2);
}

TEST_CASE("certify: --dump-groups embeds the channel") {
  const auto res = run_cli(
      "certify --pa 0.9 --kernel uniform --beta 0.5 --vocab 3 --d 1 "
      "--tau 1e-3 --dump-groups");
  REQUIRE(res.exit_code == 0);
  const auto record = nlohmann::json::parse(res.out);
  REQUIRE(record.contains("groups"));
  REQUIRE(record["groups"].size() == 3);
  CHECK(record["groups"][0].contains("clean"));
  CHECK(record["groups"][0].contains("adv"));
}

TEST_CASE("certify: deterministic output bytes") {
  const std::string args =
      "certify --pa 0.87 --kernel uniform --beta 0.25 --vocab 11 --d 2 "
      "--tau 1e-3";
  const auto a = run_cli(args);
  const auto b = run_cli(args);
  CHECK(a.exit_code == 0);
  CHECK(a.out == b.out);
}

TEST_CASE("frontier: sorted rows, monotone radii, provenance header") {
  const auto res = run_cli(
      "frontier --pa 0.9 --sigma 1 --kernel uniform --beta 0.5 --vocab 3 "
      "--d-list 0,1,2,3 --tau 1e-3");
  REQUIRE(res.exit_code == 0);
  CHECK(res.out.find("# hybridcert frontier") == 0);
  CHECK(res.out.find("# config:") != std::string::npos);
  const auto rows = parse_csv_rows(res.out);
  REQUIRE(rows.size() == 5);  // header + 4 budgets
  CHECK(rows[0][0] == "d");
  double prev = 1e300;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    CHECK(rows[i][0] == std::to_string(i - 1));
    const double radius = std::stod(rows[i][1]);
    CHECK(radius <= prev);
    prev = radius;
  }
}

TEST_CASE("frontier: halving tau never shrinks any radius") {
  const auto strict = run_cli(
      "frontier --pa 0.9 --kernel uniform --beta 0.5 --vocab 5 "
      "--d-list 0,1,2 --tau 2e-3");
  const auto loose = run_cli(
      "frontier --pa 0.9 --kernel uniform --beta 0.5 --vocab 5 "
      "--d-list 0,1,2 --tau 1e-3");
  REQUIRE(strict.exit_code == 0);
  REQUIRE(loose.exit_code == 0);
  const auto a = parse_csv_rows(strict.out);
  const auto b = parse_csv_rows(loose.out);
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 1; i < a.size(); ++i) {
    CHECK(std::stod(b[i][1]) >= std::stod(a[i][1]));
  }
}

TEST_CASE("frontier: missing budgets exit 2") {
  const auto res = run_cli("frontier --pa 0.9 --tau 0.5");
  CHECK(res.exit_code == 2);
  const auto both = run_cli(
      "frontier --pa 0.9 --tau 0.5 --d-list 0,1 --d-max 3");
  CHECK(both.exit_code == 2);
}

TEST_CASE("sweep: runs on the synthetic dataset with monotone output") {
  const auto res = run_cli(
      "sweep --n-examples 8 --samples 200 --sigma 1 --beta 0.25 --tau 0.01 "
      "--d-max 1 --seed 7 --epsilon-grid 0,1,2");
  REQUIRE(res.exit_code == 0);
  const auto rows = parse_csv_rows(res.out);
  REQUIRE(rows.size() == 7);  // header + 2 budgets x 3 epsilons
  CHECK(rows[0][2] == "certified_fraction");
  // Monotone in epsilon within each budget.
  CHECK(std::stod(rows[1][2]) >= std::stod(rows[2][2]));
  CHECK(std::stod(rows[2][2]) >= std::stod(rows[3][2]));
}

TEST_CASE("sweep: csv dataset path") {
  const std::string path = "/tmp/hybridcert_cli_sweep.csv";
  {
    std::ofstream f(path);
    f << "color,size,label\n";
    for (int i = 0; i < 6; ++i) {
      f << (i % 2 == 0 ? "a" : "b") << "," << (i % 2 == 0 ? -1.0 - i : 1.0 + i)
        << "," << (i % 2) << "\n";
    }
  }
  const auto res = run_cli(
      "sweep --dataset csv --csv " + std::string(path) +
      " --categorical-columns color --continuous-columns size "
      "--label-column label --samples 100 --sigma 1 --beta 0.25 --tau 0.01 "
      "--d-max 1 --seed 3 --epsilon-grid 0,0.5");
  REQUIRE(res.exit_code == 0);
  const auto rows = parse_csv_rows(res.out);
  REQUIRE(rows.size() == 5);
  std::remove(path.c_str());
}

TEST_CASE("sweep: plot-data emits per-budget blocks") {
  const auto res = run_cli(
      "sweep --n-examples 4 --samples 100 --tau 0.01 --d-max 1 --seed 7 "
      "--epsilon-grid 0,1 --plot-data");
  REQUIRE(res.exit_code == 0);
  CHECK(res.out.find("# d=0") != std::string::npos);
  CHECK(res.out.find("# d=1") != std::string::npos);
  CHECK(res.out.find("epsilon,certified_fraction") != std::string::npos);
}

TEST_CASE("verify: reduced grid passes, bad sample count exits 2") {
  const auto ok = run_cli("verify --mc-configs 5 --mc-samples 2000");
  CHECK(ok.exit_code == 0);
  CHECK(ok.out.find("[PASS] enumeration_vs_builders") != std::string::npos);
  CHECK(ok.out.find("verification passed") != std::string::npos);
  const auto bad = run_cli("verify --mc-samples 0");
  CHECK(bad.exit_code == 2);
}

TEST_CASE("verify: injected CDF fault fails the quadrature check, exit 1") {
  const auto res = run_cli(
      "verify --mc-configs 2 --mc-samples 1000 --perturb-phi 1e-3");
  CHECK(res.exit_code == 1);
  CHECK(res.out.find("[FAIL] quadrature_vs_engine") != std::string::npos);
}

TEST_CASE("certify: corrupted CDF surfaces as a numeric error, exit 3") {
  const auto res = run_cli(
      "certify --pa 0.9 --kernel uniform --beta 0.5 --vocab 3 --d 1 "
      "--tau 1e-3 --perturb-phi -0.9");
  CHECK(res.exit_code == 3);
}

TEST_CASE("config round trip reproduces artifacts byte-identically") {
  const auto first = run_cli(
      "certify --pa 0.88 --kernel absorbing --beta 0.6 --d 2 --tau 1e-4 "
      "--sigma 0.7");
  REQUIRE(first.exit_code == 0);
  const auto record = nlohmann::json::parse(first.out);
  const std::string config_path = "/tmp/hybridcert_cli_config.json";
  {
    std::ofstream f(config_path);
    f << record["config"].dump();
  }
  const auto second = run_cli("certify --config " + config_path);
  REQUIRE(second.exit_code == 0);
  CHECK(second.out == first.out);

  // Flags override config-file values.
  const auto overridden =
      run_cli("certify --config " + config_path + " --tau 1e-2");
  REQUIRE(overridden.exit_code == 0);
  const auto record2 = nlohmann::json::parse(overridden.out);
  CHECK(record2["config"]["tau"].get<double>() == 1e-2);
  std::remove(config_path.c_str());
}

TEST_CASE("frontier: config round trip modulo timestamp") {
  const auto first = run_cli(
      "frontier --pa 0.92 --kernel uniform --beta 0.3 --vocab 7 "
      "--d-list 0,1,2 --tau 1e-3");
  REQUIRE(first.exit_code == 0);
  std::string config_line;
  std::istringstream in(first.out);
  std::string line;
  while (std::getline(in, line)) {
    if (line.rfind("# config: ", 0) == 0) {
      config_line = line.substr(10);
      break;
    }
  }
  REQUIRE(!config_line.empty());
  const std::string config_path = "/tmp/hybridcert_cli_frontier.json";
  {
    std::ofstream f(config_path);
    f << config_line;
  }
  const auto second = run_cli("frontier --config " + config_path);
  REQUIRE(second.exit_code == 0);
  CHECK(strip_timestamp(second.out) == strip_timestamp(first.out));
  std::remove(config_path.c_str());
}

TEST_CASE("environment variable supplies the default seed") {
  const std::string cmd =
      "HYBRIDCERT_SEED=123 " + cli_path() +
      " sweep --n-examples 2 --samples 50 --tau 0.01 --d-max 0 "
      "--epsilon-grid 0 2>/dev/null";
  FILE* pipe = popen(cmd.c_str(), "r");
  REQUIRE(pipe != nullptr);
  std::string out;
  std::array<char, 4096> buffer;
  std::size_t got = 0;
  while ((got = fread(buffer.data(), 1, buffer.size(), pipe)) > 0) {
    out.append(buffer.data(), got);
  }
  pclose(pipe);
  CHECK(out.find("\"seed\":123") != std::string::npos);
}

TEST_CASE("--out writes atomically to a file") {
  const std::string out_path = "/tmp/hybridcert_cli_out.json";
  const auto res = run_cli(
      "certify --pa 0.9 --d 0 --tau 0.5 --out " + out_path);
  REQUIRE(res.exit_code == 0);
  CHECK(res.out.empty());
  std::ifstream f(out_path);
  REQUIRE(f.good());
  const auto record = nlohmann::json::parse(f);
  CHECK(record["certified"].get<bool>());
  std::remove(out_path.c_str());
}

TEST_CASE("help exits 0") {
  CHECK(run_cli("--help").exit_code == 0);
  CHECK(run_cli("certify --help").exit_code == 0);
}
