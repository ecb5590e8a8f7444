#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "mollhelm/commands.hpp"
#include "mollhelm/config.hpp"
#include "mollhelm/csv.hpp"

using namespace mollhelm;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  REQUIRE(in);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path fresh_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

}  // namespace

TEST_CASE("round-trip double formatting") {
  for (double v : {0.1, 1.0 / 3.0, 2.499375, -23.936536824085961, 1e-300, 0.0}) {
    const std::string s = format_double(v);
    CHECK(std::stod(s) == v);
  }
}

TEST_CASE("config parsing") {
  const nlohmann::json j = {
      {"case", "example1"},
      {"grid", {{"nx", 31}, {"ny", 21}}},
      {"noise", {{"levels", {0.01}}, {"seed", 7}}},
      {"alpha", {{"alpha0", 0.3}, {"q", 0.6}, {"n0", 8}}},
  };
  const RunConfig c = config_from_json(j);
  CHECK(c.case_name == "example1");
  CHECK(c.nx == 31);
  CHECK(c.noise_levels == std::vector<double>{0.01});
  CHECK(c.seed == 7);
  CHECK(c.alpha.alpha0 == 0.3);
  CHECK(c.solver_tol == 1e-10);  // untouched default

  SECTION("unknown keys are rejected at every level") {
    nlohmann::json bad = j;
    bad["typo"] = 1;
    CHECK_THROWS_AS(config_from_json(bad), std::invalid_argument);
    nlohmann::json bad2 = j;
    bad2["grid"]["mx"] = 3;
    CHECK_THROWS_AS(config_from_json(bad2), std::invalid_argument);
  }

  SECTION("echo round-trips to the same effective config") {
    const RunConfig c2 = config_from_json(config_to_json(c));
    CHECK(render_config(c2) == render_config(c));
  }
}

TEST_CASE("kernel command output") {
  const fs::path dir = fresh_dir("mollhelm_kernel_test");
  REQUIRE(cmd_kernel({1.0, 0.5, 0.1, 0.01}, dir) == 0);
  const std::string csv = slurp(dir / "kernel.csv");
  CHECK(csv.rfind("alpha,m_alpha,M_alpha,asymptote_ratio\n", 0) == 0);

  // M_alpha column strictly decreasing with alpha
  std::istringstream lines(csv);
  std::string line;
  std::getline(lines, line);
  double prev = 2.0;
  int rows = 0;
  while (std::getline(lines, line)) {
    std::istringstream cells(line);
    std::string a, m, M;
    std::getline(cells, a, ',');
    std::getline(cells, m, ',');
    std::getline(cells, M, ',');
    CHECK(std::stod(M) < prev);
    prev = std::stod(M);
    if (a == "0.1") CHECK(std::stod(M) == Catch::Approx(0.0320889).margin(1e-6));
    ++rows;
  }
  CHECK(rows == 4);
  CHECK_THROWS_AS(cmd_kernel({}, dir), std::invalid_argument);
  CHECK_THROWS_AS(cmd_kernel({2.0}, dir), std::invalid_argument);
}

TEST_CASE("consistency command") {
  std::ostringstream out;
  REQUIRE(cmd_consistency("example2", 31, 21, 61, 41, out) == 0);
  const std::string text = out.str();
  CHECK(text.find("ratio:") != std::string::npos);

  std::ostringstream same;
  cmd_consistency("example2", 31, 21, 31, 21, same);
  CHECK(same.str().find("warning") != std::string::npos);
  CHECK(same.str().find("ratio: 1\n") != std::string::npos);
}

TEST_CASE("run command writes the full report set deterministically") {
  RunConfig cfg;
  cfg.case_name = "example2";
  cfg.nx = 21;
  cfg.ny = 21;
  cfg.noise_levels = {1e-2, 1e-3};
  cfg.alpha = AlphaGrid{0.5, 0.7, 10};
  cfg.seed = 99;

  const fs::path d1 = fresh_dir("mollhelm_run_a");
  const fs::path d2 = fresh_dir("mollhelm_run_b");
  REQUIRE(cmd_run(cfg, d1, /*threads=*/1) == 0);
  REQUIRE(cmd_run(cfg, d2, /*threads=*/2) == 0);

  for (const char* rel : {"config.json", "summary.csv", "slices.csv", "red_0.01/sweep.csv",
                          "red_0.01/field.csv", "red_0.001/sweep.csv", "red_0.001/field.csv"}) {
    INFO(rel);
    REQUIRE(fs::exists(d1 / rel));
    CHECK(slurp(d1 / rel) == slurp(d2 / rel));
  }

  // re-running from the echoed config reproduces the outputs byte for byte
  const RunConfig echoed = load_config(d1 / "config.json");
  const fs::path d3 = fresh_dir("mollhelm_run_c");
  REQUIRE(cmd_run(echoed, d3) == 0);
  CHECK(slurp(d1 / "summary.csv") == slurp(d3 / "summary.csv"));
  CHECK(slurp(d1 / "red_0.01" / "sweep.csv") == slurp(d3 / "red_0.01" / "sweep.csv"));

  // sweep.csv carries exactly one selected row per level
  const std::string sweep = slurp(d1 / "red_0.01" / "sweep.csv");
  size_t selected = 0, pos = 0;
  while ((pos = sweep.find(",1,", pos)) != std::string::npos) {
    ++selected;
    pos += 3;
  }
  CHECK(selected == 1);
}

TEST_CASE("atomic write leaves no partial file on failure") {
  const fs::path dir = fresh_dir("mollhelm_atomic_test");
  const fs::path missing = dir / "nope" / "file.csv";
  CHECK_THROWS_AS(atomic_write_file(missing, "data"), std::runtime_error);
  CHECK_FALSE(fs::exists(missing));
  CHECK_FALSE(fs::exists(missing.string() + ".tmp"));
}
