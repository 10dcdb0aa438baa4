// fracseg: numerical toolchain for segregated limit profiles of
// fractional-Laplacian competition systems.
//
// Commands: eig, segregate, frequency, report.
// Exit codes: 0 success, 2 usage error, 3 data error, 4 numerical failure.

#include <CLI11.hpp>
#include <cstdio>
#include <exception>
#include <string>

#include "fracseg/commands.hpp"

namespace {

struct GlobalOpts {
  std::string config;
  std::string out = "run";
  std::string cache_dir;
  std::string run_dir;  // frequency/report input (defaults to --out)
  bool seed_set = false;
  unsigned long long seed = 0;
  bool threads_set = false;
  int threads = 1;
};

fracseg::RunConfig load_config(const GlobalOpts& g) {
  fracseg::RunConfig cfg;
  if (!g.config.empty()) cfg = fracseg::RunConfig::from_file(g.config);
  if (g.seed_set) cfg.seed = g.seed;
  if (g.threads_set) cfg.threads = g.threads;
  cfg.validate();
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "fracseg: segregated limit profiles of fractional competition systems"};
  app.require_subcommand(1);
  GlobalOpts g;
  app.add_option("--config", g.config, "Path to a key = value config file");
  app.add_option("--out", g.out, "Output run directory");
  auto* seed_opt =
      app.add_option("--seed", g.seed, "Seed for the initialization");
  auto* threads_opt =
      app.add_option("--threads", g.threads, "Worker threads (>= 1)");
  app.add_option("--cache-dir", g.cache_dir,
                 "Directory for cached stiffness forms");

  auto* eig = app.add_subcommand("eig", "Principal eigenpair of Omega/mask");
  auto* seg = app.add_subcommand("segregate", "Full beta-continuation run");
  auto* freq = app.add_subcommand(
      "frequency", "Frequency/Pohozaev/Morrey diagnostics at Gamma points");
  auto* rep = app.add_subcommand("report", "Assemble the partition report");
  freq->add_option("run_dir", g.run_dir,
                   "Run directory holding densities.csv (default: --out)");
  rep->add_option("run_dir", g.run_dir,
                  "Run directory holding densities.csv (default: --out)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    g.seed_set = seed_opt->count() > 0;
    g.threads_set = threads_opt->count() > 0;
    const fracseg::RunConfig cfg = load_config(g);
    const std::string run = g.run_dir.empty() ? g.out : g.run_dir;
    if (eig->parsed()) {
      fracseg::run_eig(cfg, g.out, g.cache_dir);
    } else if (seg->parsed()) {
      fracseg::run_segregate(cfg, g.out, g.cache_dir);
    } else if (freq->parsed()) {
      fracseg::run_frequency(cfg, run, g.out, g.cache_dir);
    } else if (rep->parsed()) {
      fracseg::run_report(cfg, run, g.cache_dir);
    }
  } catch (const fracseg::UsageError& e) {
    std::fprintf(stderr, "usage error: %s\n", e.what());
    return 2;
  } catch (const fracseg::DataError& e) {
    std::fprintf(stderr, "data error: %s\n", e.what());
    return 3;
  } catch (const fracseg::NumericalError& e) {
    std::fprintf(stderr, "numerical error: %s\n", e.what());
    return 4;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 4;
  }
  return 0;
}
