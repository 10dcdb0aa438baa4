#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <sys/wait.h>

#include "fracseg/commands.hpp"

using namespace fracseg;
namespace fs = std::filesystem;

namespace {

std::string bin_path() {
  const char* env = std::getenv("FRACSEG_BIN");
  REQUIRE(env != nullptr);
  return env;
}

int run_cmd(const std::string& args) {
  const std::string cmd = bin_path() + " " + args + " >/dev/null 2>&1";
  const int rc = std::system(cmd.c_str());
  REQUIRE(WIFEXITED(rc));
  return WEXITSTATUS(rc);
}

fs::path fresh_dir(const std::string& name) {
  const fs::path d = fs::temp_directory_path() / "fracseg_test_cli" / name;
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

std::map<std::string, std::string> parse_summary(const fs::path& p) {
  std::map<std::string, std::string> kv;
  std::istringstream in(read_file(p));
  std::string line;
  while (std::getline(in, line)) {
    const size_t eq = line.find('=');
    if (eq == std::string::npos) continue;
    auto trim = [](std::string s) {
      const size_t b = s.find_first_not_of(" \t");
      return s.substr(b, s.find_last_not_of(" \t") - b + 1);
    };
    kv[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
  }
  return kv;
}

void write_text(const fs::path& p, const std::string& text) {
  std::ofstream out(p);
  out << text;
}

}  // namespace

TEST_CASE("cli: eig smoke run writes lambda and phi") {
  const fs::path d = fresh_dir("eig");
  CHECK(run_cmd("--out " + (d / "run").string() + " eig") == 0);
  const auto sum = parse_summary(d / "run" / "summary");
  // lambda_1 of (-1,1) at the default n = 256, s = 0.5
  const double lambda = std::stod(sum.at("lambda"));
  CHECK(lambda == doctest::Approx(7.27453).epsilon(2e-3));
  CHECK(sum.at("converged") == "true");
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;
  read_csv(d / "run" / "eig.csv", header, rows);
  REQUIRE(header.size() == 2);
  CHECK(rows.size() == 256);
  for (const auto& r : rows) CHECK(r[1] >= 0.0);  // normalized sign
  // persisted config is parseable and materializes every default
  const RunConfig rc = RunConfig::from_file(d / "run" / "config");
  CHECK(rc.n == 256);
  CHECK(rc.s == 0.5);
}

TEST_CASE("cli: usage errors exit 2") {
  const fs::path d = fresh_dir("usage");
  CHECK(run_cmd("") == 2);             // missing subcommand
  CHECK(run_cmd("bogus") == 2);        // unknown subcommand
  write_text(d / "bad", "[domain]\ns = 1.5\n");
  CHECK(run_cmd("--config " + (d / "bad").string() + " --out " +
                (d / "o").string() + " eig") == 2);
  write_text(d / "unknown", "[domain]\nfoo = 1\n");
  CHECK(run_cmd("--config " + (d / "unknown").string() + " --out " +
                (d / "o").string() + " eig") == 2);
}

TEST_CASE("cli: data errors exit 3") {
  const fs::path d = fresh_dir("data");
  // missing config file
  CHECK(run_cmd("--config " + (d / "absent").string() + " --out " +
                (d / "o").string() + " eig") == 3);
  // empty mask set
  std::string zeros;
  for (int i = 0; i < 64; ++i) zeros += "0\n";
  write_text(d / "mask", zeros);
  write_text(d / "cfg", "[domain]\nn = 64\n[eig]\nmask = " +
                            (d / "mask").string() + "\n");
  CHECK(run_cmd("--config " + (d / "cfg").string() + " --out " +
                (d / "o").string() + " eig") == 3);
  // report on a nonexistent run directory
  CHECK(run_cmd("report " + (d / "norun").string()) == 3);
}

TEST_CASE("cli: segregate is deterministic in the seed") {
  const fs::path d = fresh_dir("seg");
  write_text(d / "cfg",
             "[domain]\nn = 64\nk = 2\n[continuation]\nstages = 4\n"
             "max_iter = 4000\n");
  const std::string base = "--config " + (d / "cfg").string();
  CHECK(run_cmd(base + " --out " + (d / "a").string() + " --seed 42 "
                "segregate") == 0);
  CHECK(run_cmd(base + " --out " + (d / "b").string() + " --seed 42 "
                "segregate") == 0);
  CHECK(run_cmd(base + " --out " + (d / "c").string() + " --seed 43 "
                "segregate") == 0);
  // identical seed -> bitwise-identical summary and densities
  CHECK(read_file(d / "a" / "summary") == read_file(d / "b" / "summary"));
  CHECK(read_file(d / "a" / "densities.csv") ==
        read_file(d / "b" / "densities.csv"));
  // different seed -> different trajectory
  CHECK(read_file(d / "a" / "summary") != read_file(d / "c" / "summary"));
  const auto sum = parse_summary(d / "a" / "summary");
  CHECK(sum.at("all_converged") == "true");
  CHECK(sum.at("stages") == "4");
  CHECK(std::stod(sum.at("final_overlap")) < 0.1);
  // per-stage densities persisted
  for (int j = 0; j < 4; ++j)
    CHECK(fs::exists(d / "a" /
                     ("densities_stage" + std::to_string(j) + ".csv")));
  CHECK(fs::exists(d / "a" / "trace.csv"));
}

TEST_CASE("cli: beta schedule of length 1 equals a single minimize_stage") {
  const fs::path d = fresh_dir("single");
  RunConfig cfg;
  cfg.n = 64;
  cfg.k = 2;
  cfg.stages = 1;
  cfg.max_iter = 4000;
  cfg.seed = 5;
  run_segregate(cfg, d / "run");
  const auto sum = parse_summary(d / "run" / "summary");
  CHECK(sum.at("stages") == "1");
  // reproduce the seeded initialization and run minimize_stage directly
  const Grid1D g(cfg.x_left, cfg.x_right, cfg.n);
  DensityVector u0 = default_initialization(g, cfg.k);
  std::mt19937_64 rng(cfg.seed);
  std::uniform_real_distribution<double> eta(-1.0, 1.0);
  for (int i = 0; i < cfg.k; ++i)
    for (int x = 0; x < g.n; ++x) u0.u[i][x] *= 1.0 + cfg.noise * eta(rng);
  u0 = project_spheres(u0);
  const StiffnessForm form = assemble_form(g, FracParams(cfg.s));
  const StageResult st = minimize_stage(u0, PenaltySpec(cfg.beta0, cfg.k),
                                        form, cfg.stage_tol, cfg.max_iter);
  CHECK(std::stod(sum.at("final_energy")) ==
        doctest::Approx(st.energy).epsilon(1e-14));  // same code path
}

TEST_CASE("cli: frequency builtin y^{1-a} field has N = 2s") {
  for (double s : {0.4, 0.6}) {
    const fs::path d = fresh_dir("freq_builtin");
    std::ostringstream cfg;
    cfg << "[domain]\ns = " << s << "\nn = 64\n[frequency]\nbuiltin = y1ma\n"
        << "radii_count = 12\n";
    write_text(d / "cfg", cfg.str());
    CHECK(run_cmd("--config " + (d / "cfg").string() + " --out " +
                  (d / "o").string() + " frequency") == 0);
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
    read_csv_raw(d / "o" / "frequency.csv", header, rows);
    REQUIRE(header.size() == 9);
    REQUIRE(rows.size() == 12);
    // closed-form oracle: N column constant 2s
    for (const auto& r : rows) {
      CHECK(std::abs(std::stod(r[4]) - 2.0 * s) <= 1e-3);
      CHECK(r[8] == "free_boundary");
    }
    // pohozaev.csv: residual column tiny on the closed-form field
    std::vector<std::vector<double>> poh;
    read_csv(d / "o" / "pohozaev.csv", header, poh);
    REQUIRE(header.size() == 9);
    for (const auto& r : poh) CHECK(std::abs(r[8]) <= 1e-8);
    CHECK(fs::exists(d / "o" / "morrey.csv"));
  }
}

TEST_CASE("cli: frequency auto mode and out-of-domain points") {
  const fs::path d = fresh_dir("freq_run");
  write_text(d / "cfg",
             "[domain]\nn = 64\nk = 2\n[continuation]\nstages = 6\n"
             "max_iter = 6000\n");
  REQUIRE(run_cmd("--config " + (d / "cfg").string() + " --out " +
                  (d / "run").string() + " segregate") == 0);
  // auto mode picks the detected interface
  write_text(d / "fcfg", "[frequency]\nangular = 16\nradial = 8\n"
                         "radii_count = 10\n");
  CHECK(run_cmd("--config " + (d / "fcfg").string() + " --out " +
                (d / "diag").string() + " frequency " +
                (d / "run").string()) == 0);
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  read_csv_raw(d / "diag" / "frequency.csv", header, rows);
  CHECK(rows.size() == 10);
  CHECK(std::abs(std::stod(rows[0][0])) < 0.1);  // interface near the center
  // requesting a point outside Omega -> data error
  write_text(d / "bad", "[frequency]\npoints = 3.5\n");
  CHECK(run_cmd("--config " + (d / "bad").string() + " --out " +
                (d / "diag2").string() + " frequency " +
                (d / "run").string()) == 3);
}

TEST_CASE("cli: report is idempotent") {
  const fs::path d = fresh_dir("report");
  write_text(d / "cfg",
             "[domain]\nn = 64\nk = 2\n[continuation]\nstages = 6\n"
             "max_iter = 6000\n");
  REQUIRE(run_cmd("--config " + (d / "cfg").string() + " --out " +
                  (d / "run").string() + " segregate") == 0);
  write_text(d / "rcfg", "[frequency]\nangular = 16\nradial = 8\n");
  const std::string cmd = "--config " + (d / "rcfg").string() + " report " +
                          (d / "run").string();
  CHECK(run_cmd(cmd) == 0);
  const std::string rep1 = read_file(d / "run" / "report");
  const std::string gp1 = read_file(d / "run" / "gamma_points.csv");
  CHECK(rep1.find("partition report") != std::string::npos);
  CHECK(rep1.find("two_density") != std::string::npos);
  CHECK(run_cmd(cmd) == 0);  // idempotent across invocations
  CHECK(read_file(d / "run" / "report") == rep1);
  CHECK(read_file(d / "run" / "gamma_points.csv") == gp1);
}
