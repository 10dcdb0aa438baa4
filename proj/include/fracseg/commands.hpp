#pragma once
// Run orchestration shared by the command-line tool and the test suite:
// each command reads a RunConfig, executes the corresponding pipeline, and
// persists plot-ready artifacts into a self-describing run directory.

#include <filesystem>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "analysis.hpp"
#include "extension.hpp"
#include "fields.hpp"
#include "fraclap.hpp"
#include "io.hpp"
#include "segregation.hpp"

namespace fracseg {

namespace cmd_detail {

inline StiffnessForm make_form(const RunConfig& cfg,
                               const std::filesystem::path& cache_dir) {
  const Grid1D g(cfg.x_left, cfg.x_right, cfg.n);
  const FracParams p(cfg.s);
  return assemble_form_cached(g, p, cache_dir);
}

inline void write_config(const RunConfig& cfg,
                         const std::filesystem::path& out) {
  write_atomic(out / "config", cfg.to_text());
}

// Final configuration persisted by `segregate`; `frequency`/`report` reload
// it from here.
inline DensityVector load_densities(const Grid1D& g, int k,
                                    const std::filesystem::path& run) {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;
  read_csv(run / "densities.csv", header, rows);
  if (static_cast<int>(rows.size()) != g.n ||
      static_cast<int>(header.size()) != k + 1)
    throw DataError("densities.csv does not match the run config dimensions");
  std::vector<std::vector<double>> comps(k, std::vector<double>(g.n));
  for (int x = 0; x < g.n; ++x)
    for (int i = 0; i < k; ++i) comps[i][x] = rows[x][i + 1];
  return DensityVector(g, std::move(comps));
}

inline void write_densities(const std::filesystem::path& path,
                            const DensityVector& u) {
  std::vector<std::string> header{"x"};
  for (int i = 0; i < u.k(); ++i)
    header.push_back("u" + std::to_string(i + 1));
  std::vector<std::vector<std::string>> rows;
  for (int x = 0; x < u.grid.n; ++x) {
    std::vector<std::string> row{format_g17(u.grid.node(x))};
    for (int i = 0; i < u.k(); ++i) row.push_back(format_g17(u.u[i][x]));
    rows.push_back(std::move(row));
  }
  write_csv(path, header, rows);
}

inline const char* verdict_name(Verdict v) {
  switch (v) {
    case Verdict::two_density: return "two_density";
    case Verdict::self_segregated: return "self_segregated";
    default: return "undetermined";
  }
}

}  // namespace cmd_detail

// ---------------------------------------------------------------------------
// eig: principal eigenpair of Omega or of a 0/1 mask file.

inline void run_eig(const RunConfig& cfg, const std::filesystem::path& out,
                    const std::filesystem::path& cache_dir = {}) {
  cfg.validate();
  const Grid1D g(cfg.x_left, cfg.x_right, cfg.n);
  const StiffnessForm form = cmd_detail::make_form(cfg, cache_dir);
  std::vector<bool> mask(g.n, true);
  if (!cfg.mask.empty()) {
    std::istringstream in(read_file(cfg.mask));
    std::string line;
    int i = 0, set = 0;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      if (i >= g.n) throw DataError("mask file has more lines than nodes");
      if (line != "0" && line != "1")
        throw DataError("mask file entries must be 0 or 1");
      mask[i] = (line == "1");
      set += mask[i];
      ++i;
    }
    if (i != g.n) throw DataError("mask file has fewer lines than nodes");
    if (set == 0) throw DataError("mask selects the empty set");
  }
  const EigenResult eig = smallest_eigenpair(form, mask);
  if (!eig.converged)
    throw NumericalError("eigen solver did not converge");
  std::filesystem::create_directories(out);
  cmd_detail::write_config(cfg, out);
  std::vector<std::vector<std::string>> rows;
  for (int x = 0; x < g.n; ++x)
    rows.push_back({format_g17(g.node(x)), format_g17(eig.phi[x])});
  write_csv(out / "eig.csv", {"x", "phi"}, rows);
  std::ostringstream sum;
  sum << "command = eig\n";
  sum << "lambda = " << format_g17(eig.lambda) << "\n";
  sum << "residual_norm = " << format_g17(eig.residual_norm) << "\n";
  sum << "iterations = " << eig.iterations << "\n";
  sum << "converged = true\n";
  write_atomic(out / "summary", sum.str());
}

// ---------------------------------------------------------------------------
// segregate: full beta-continuation from a seeded initialization.

inline void run_segregate(const RunConfig& cfg,
                          const std::filesystem::path& out,
                          const std::filesystem::path& cache_dir = {}) {
  cfg.validate();
  const Grid1D g(cfg.x_left, cfg.x_right, cfg.n);
  const StiffnessForm form = cmd_detail::make_form(cfg, cache_dir);
  DensityVector u0 = default_initialization(g, cfg.k);
  if (cfg.noise > 0.0) {
    // Multiplicative perturbation keeps supports and positivity; the run is
    // a deterministic function of the seed.
    std::mt19937_64 rng(cfg.seed);
    std::uniform_real_distribution<double> eta(-1.0, 1.0);
    for (int i = 0; i < cfg.k; ++i)
      for (int x = 0; x < g.n; ++x)
        u0.u[i][x] *= 1.0 + cfg.noise * eta(rng);
    u0 = project_spheres(u0);
  }
  PenaltySpec spec(cfg.beta0, cfg.k);
  for (int i = 0; i < cfg.k; ++i)
    for (int j = 0; j < cfg.k; ++j)
      if (i != j) spec.a[i][j] = cfg.coupling;
  if (!cfg.m.empty()) spec.m = cfg.m;
  const DensityVector anchor_copy = u0;
  if (cfg.anchored) spec.anchor = &anchor_copy;
  spec.validate();
  ContinuationSchedule sched =
      ContinuationSchedule::geometric(cfg.beta0, cfg.ratio, cfg.stages);
  sched.stage_tol = cfg.stage_tol;
  sched.max_iter = cfg.max_iter;
  const std::vector<ContinuationRecord> recs =
      beta_continuation(sched, spec, form, u0);
  std::filesystem::create_directories(out);
  cmd_detail::write_config(cfg, out);
  std::vector<std::vector<std::string>> trace_rows;
  for (size_t j = 0; j < recs.size(); ++j) {
    cmd_detail::write_densities(
        out / ("densities_stage" + std::to_string(j) + ".csv"),
        recs[j].stage.u);
    for (size_t it = 0; it < recs[j].stage.trace.size(); ++it) {
      const IterRecord& rec = recs[j].stage.trace[it];
      trace_rows.push_back({std::to_string(j), std::to_string(it),
                            format_g17(rec.energy), format_g17(rec.overlap),
                            format_g17(rec.grad_norm)});
    }
  }
  write_csv(out / "trace.csv",
            {"stage", "iter", "energy", "overlap", "grad_norm"}, trace_rows);
  const StageResult& fin = recs.back().stage;
  cmd_detail::write_densities(out / "densities.csv", fin.u);
  PenaltySpec final_spec = spec;
  final_spec.beta = recs.back().beta;
  std::ostringstream sum;
  sum << "command = segregate\n";
  sum << "k = " << cfg.k << "\n";
  sum << "s = " << format_g17(cfg.s) << "\n";
  sum << "n = " << cfg.n << "\n";
  sum << "seed = " << cfg.seed << "\n";
  sum << "stages = " << recs.size() << "\n";
  sum << "final_beta = " << format_g17(recs.back().beta) << "\n";
  bool all_conv = true;
  for (const auto& r : recs) all_conv = all_conv && r.stage.converged;
  sum << "all_converged = " << (all_conv ? "true" : "false") << "\n";
  sum << "final_energy = " << format_g17(fin.energy) << "\n";
  sum << "final_overlap = " << format_g17(overlap(fin.u, final_spec)) << "\n";
  sum << "final_grad_norm = " << format_g17(fin.grad_norm) << "\n";
  for (size_t i = 0; i < fin.lambda.size(); ++i)
    sum << "lambda_" << (i + 1) << " = " << format_g17(fin.lambda[i]) << "\n";
  write_atomic(out / "summary", sum.str());
  if (!all_conv)
    throw NumericalError("segregate: a continuation stage did not converge "
                         "(artifacts were written)");
}

// ---------------------------------------------------------------------------
// frequency: Almgren/Pohozaev/Morrey diagnostics at listed or auto-detected
// free-boundary points, or on the built-in y^{1-a} test field.

inline void run_frequency(const RunConfig& cfg,
                          const std::filesystem::path& run_dir,
                          const std::filesystem::path& out,
                          const std::filesystem::path& cache_dir = {}) {
  cfg.validate();
  const std::vector<std::string> freq_header{
      "x0", "r", "E", "H", "N", "psi", "Psi", "corrected", "mode"};
  const std::vector<std::string> poh_header{
      "x0",         "r",   "t_bulk",   "t_arc_grad", "t_trace_F",
      "t_endpoint", "rhs", "residual", "normalized"};
  std::vector<std::vector<std::string>> freq_rows, poh_rows, mor_rows;
  std::ostringstream sum;
  sum << "command = frequency\n";

  if (cfg.builtin == "y1ma") {
    const Grid1D g(cfg.x_left, cfg.x_right, cfg.n);
    const FracParams p(cfg.s);
    const Y1maField field(p);
    const FieldSet fields{&field};
    const double x0 = 0.5 * (cfg.x_left + cfg.x_right);
    const std::vector<double> radii =
        default_radius_grid(g.h(), g.length(), cfg.radii_count);
    const QuadSpec q{cfg.angular, cfg.radial};
    const FrequencyProfile prof = frequency_profile(
        fields, p, x0, radii, {0.0}, FrequencyMode::free_boundary, q);
    const MonotoneCResult mc = min_monotone_C(prof);
    const double C = mc.ok ? mc.C : 0.0;
    const std::vector<double> corr = corrected_frequency(prof, C);
    for (size_t i = 0; i < prof.r.size(); ++i)
      freq_rows.push_back({format_g17(x0), format_g17(prof.r[i]),
                           format_g17(prof.E[i]), format_g17(prof.H[i]),
                           format_g17(prof.N[i]), format_g17(prof.psi[i]),
                           format_g17(prof.Psi[i]), format_g17(corr[i]),
                           "free_boundary"});
    for (double r : radii) {
      const PohozaevReport rep = pohozaev_residual(fields, p, x0, r, {0.0}, q);
      poh_rows.push_back(
          {format_g17(x0), format_g17(r), format_g17(rep.t_bulk),
           format_g17(rep.t_arc_grad), format_g17(rep.t_trace_F),
           format_g17(rep.t_endpoint), format_g17(rep.rhs),
           format_g17(rep.residual), format_g17(rep.normalized)});
      mor_rows.push_back({format_g17(x0), format_g17(r),
                          format_g17(morrey_quotient(fields, p, x0, 0.0, r, q))});
    }
    sum << "builtin = y1ma\n";
    sum << "points = " << format_g17(x0) << "\n";
    sum << "C_1 = " << format_g17(C) << "\n";
  } else {
    if (!std::filesystem::exists(run_dir / "config"))
      throw DataError("frequency: run directory has no config: " +
                      run_dir.string());
    const RunConfig rc = RunConfig::from_file(run_dir / "config");
    const Grid1D g(rc.x_left, rc.x_right, rc.n);
    const FracParams p(rc.s);
    const DensityVector u = cmd_detail::load_densities(g, rc.k, run_dir);
    std::vector<double> points;
    if (cfg.points == "auto") {
      const FreeBoundary fb = extract_free_boundary(u, cfg.eps_rel);
      for (const GammaPoint& gp : fb.points) points.push_back(gp.mid());
      if (points.empty())
        throw DataError("frequency: no free-boundary point detected");
    } else {
      points = io_detail::to_list("frequency.points", cfg.points);
      if (points.empty())
        throw UsageError("frequency: empty point list");
      for (double x0 : points)
        if (!(x0 > g.x_left) || !(x0 < g.x_right))
          throw DataError("frequency: point outside the domain");
    }
    const StiffnessForm form = assemble_form_cached(g, p, cache_dir);
    const double kappa = conormal_calibration(g, p);
    std::vector<ExtensionEvaluator> evs;
    std::vector<double> lam(rc.k);
    evs.reserve(rc.k);
    FieldSet fields;
    for (int i = 0; i < rc.k; ++i) {
      evs.emplace_back(g, p, u.u[i]);
      lam[i] = kappa * rayleigh(form, u.u[i]);
    }
    for (int i = 0; i < rc.k; ++i) fields.push_back(&evs[i]);
    const QuadSpec q{cfg.angular, cfg.radial};
    std::ostringstream pts;
    for (size_t pi = 0; pi < points.size(); ++pi) {
      const double x0 = points[pi];
      const double dist = 2.0 * std::min(x0 - g.x_left, g.x_right - x0);
      const std::vector<double> radii =
          default_radius_grid(g.h(), dist, cfg.radii_count);
      const FrequencyProfile prof = frequency_profile(
          fields, p, x0, radii, lam, FrequencyMode::free_boundary, q);
      const MonotoneCResult mc = min_monotone_C(prof);
      const double C = mc.ok ? mc.C : 0.0;
      const std::vector<double> corr = corrected_frequency(prof, C);
      for (size_t i = 0; i < prof.r.size(); ++i)
        freq_rows.push_back({format_g17(x0), format_g17(prof.r[i]),
                             format_g17(prof.E[i]), format_g17(prof.H[i]),
                             format_g17(prof.N[i]), format_g17(prof.psi[i]),
                             format_g17(prof.Psi[i]), format_g17(corr[i]),
                             "free_boundary"});
      for (double r : radii) {
        const PohozaevReport rep = pohozaev_residual(fields, p, x0, r, lam, q);
        poh_rows.push_back(
            {format_g17(x0), format_g17(r), format_g17(rep.t_bulk),
             format_g17(rep.t_arc_grad), format_g17(rep.t_trace_F),
             format_g17(rep.t_endpoint), format_g17(rep.rhs),
             format_g17(rep.residual), format_g17(rep.normalized)});
        mor_rows.push_back(
            {format_g17(x0), format_g17(r),
             format_g17(morrey_quotient(fields, p, x0, 0.0, r, q))});
      }
      pts << (pi ? "," : "") << format_g17(x0);
      sum << "C_" << (pi + 1) << " = " << format_g17(C) << "\n";
    }
    sum << "points = " << pts.str() << "\n";
  }
  std::filesystem::create_directories(out);
  cmd_detail::write_config(cfg, out);
  write_csv(out / "frequency.csv", freq_header, freq_rows);
  write_csv(out / "pohozaev.csv", poh_header, poh_rows);
  write_csv(out / "morrey.csv", {"x0", "r", "quotient"}, mor_rows);
  write_atomic(out / "summary", sum.str());
}

// ---------------------------------------------------------------------------
// report: assemble the PartitionResult and the human-readable report.

inline void run_report(const RunConfig& cfg,
                       const std::filesystem::path& run_dir,
                       const std::filesystem::path& cache_dir = {}) {
  cfg.validate();
  if (!std::filesystem::exists(run_dir / "config"))
    throw DataError("report: run directory has no config: " +
                    run_dir.string());
  const RunConfig rc = RunConfig::from_file(run_dir / "config");
  const Grid1D g(rc.x_left, rc.x_right, rc.n);
  const FracParams p(rc.s);
  const DensityVector u = cmd_detail::load_densities(g, rc.k, run_dir);
  const StiffnessForm form = assemble_form_cached(g, p, cache_dir);
  const PartitionResult res =
      partition_report(u, form, p, cfg.eps_rel, cfg.with_frequency,
                       QuadSpec{cfg.angular, cfg.radial});
  std::vector<std::vector<std::string>> rows;
  for (size_t i = 0; i < res.gamma.points.size(); ++i) {
    const GammaPoint& gp = res.gamma.points[i];
    const bool diag = i < res.verdicts.size();
    rows.push_back(
        {format_g17(gp.x), format_g17(gp.is_interval ? gp.x_right : gp.x),
         gp.is_interval ? "1" : "0", std::to_string(gp.left_label),
         std::to_string(gp.right_label),
         diag ? format_g17(res.holder[i].alpha) : "nan",
         diag ? format_g17(res.holder[i].r2) : "nan",
         diag ? format_g17(res.verdicts[i].N0) : "nan",
         diag ? cmd_detail::verdict_name(res.verdicts[i].verdict) : "none"});
  }
  write_csv(run_dir / "gamma_points.csv",
            {"x", "x_right", "is_interval", "left_label", "right_label",
             "alpha", "r2", "N0", "verdict"},
            rows);
  std::ostringstream rep;
  rep << "partition report\n";
  rep << "================\n";
  rep << "k = " << rc.k << ", s = " << format_g17(rc.s) << ", n = " << rc.n
      << "\n";
  rep << "I (sum of mask eigenvalues) = " << format_g17(res.I) << "\n";
  rep << "J (sum of Rayleigh quotients) = " << format_g17(res.J) << "\n";
  rep << "equivalence |J-I|/I <= 2%: "
      << (res.equivalence_ok ? "pass" : "FAIL") << "\n";
  for (size_t i = 0; i < res.lambda1.size(); ++i)
    rep << "lambda_1(omega_" << (i + 1)
        << ") = " << format_g17(res.lambda1[i]) << "\n";
  rep << "gamma points: " << res.gamma.points.size() << "\n";
  for (size_t i = 0; i < res.gamma.points.size(); ++i) {
    const GammaPoint& gp = res.gamma.points[i];
    rep << "  [" << (i + 1) << "] x = " << format_g17(gp.x);
    if (gp.is_interval) rep << " .. " << format_g17(gp.x_right);
    rep << " labels (" << gp.left_label << "," << gp.right_label << ")";
    if (i < res.verdicts.size()) {
      rep << " alpha = " << format_g17(res.holder[i].alpha)
          << " (R2 = " << format_g17(res.holder[i].r2) << ")"
          << " N0 = " << format_g17(res.verdicts[i].N0) << " verdict = "
          << cmd_detail::verdict_name(res.verdicts[i].verdict)
          << (res.verdicts[i].consistent ? "" : " [inconsistent]");
    }
    rep << "\n";
  }
  write_atomic(run_dir / "report", rep.str());
}

}  // namespace fracseg
