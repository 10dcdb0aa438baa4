#pragma once
// Penalized segregation functional
//   J_beta(u) = sum_i [u_i]^2  (+ anchor sum_i h sum e(u_i - ubar_i))
//             + beta sum_{i<j} a_ij h sum u_i^2 u_j^2
//             + sum_i m_i h sum u_i^3,      e(t) = sqrt(1 + t^2),
// minimized over k densities with discrete L2 norm 1 (h-weighted) by
// projected gradient descent with Armijo backtracking, and the geometric
// beta-continuation toward the segregated limit.
//
// Reflection equivariance: every per-component reduction uses the
// palindromic pairing sym_dot, and the Toeplitz matvec sums offsets in
// symmetric pairs, so mirror-symmetric iterates stay bitwise symmetric.

#include <cmath>
#include <limits>
#include <vector>

#include "fraclap.hpp"
#include "params.hpp"

namespace fracseg {

constexpr double kSegregationTol = 1e-6;  // j_value feasibility
constexpr double kConstraintTol = 1e-9;   // sphere-constraint slack

// Reflection-invariant dot product: pairs entry i with entry n-1-i so the
// result is computed identically for a vector and its mirror image.
inline double sym_dot(const std::vector<double>& x, const std::vector<double>& y) {
  const int n = static_cast<int>(x.size());
  if (y.size() != x.size()) throw DataError("sym_dot: dimension mismatch");
  double acc = 0.0;
  for (int i = 0; i < n / 2; ++i)
    acc += x[i] * y[i] + x[n - 1 - i] * y[n - 1 - i];
  if (n % 2 == 1) acc += x[n / 2] * y[n / 2];
  return acc;
}

struct DensityVector {
  Grid1D grid;
  std::vector<std::vector<double>> u;

  DensityVector(Grid1D g, std::vector<std::vector<double>> comps)
      : grid(g), u(std::move(comps)) {
    if (u.size() < 1) throw DataError("DensityVector: needs at least 1 component");
    for (const auto& v : u)
      if (static_cast<int>(v.size()) != grid.n)
        throw DataError("DensityVector: component dimension mismatch");
  }
  int k() const { return static_cast<int>(u.size()); }
  double norm(int i) const { return std::sqrt(grid.h() * sym_dot(u[i], u[i])); }
  bool feasible(double tol = kConstraintTol) const {
    for (int i = 0; i < k(); ++i)
      if (std::abs(norm(i) - 1.0) > tol) return false;
    return true;
  }
};

struct PenaltySpec {
  double beta;
  std::vector<std::vector<double>> a;  // symmetric, zero-diagonal coupling
  std::vector<double> m;               // cubic weights >= 0
  const DensityVector* anchor = nullptr;

  PenaltySpec(double beta_, int k)
      : beta(beta_), a(k, std::vector<double>(k, 1.0)), m(k, 0.0) {
    for (int i = 0; i < k; ++i) a[i][i] = 0.0;
    validate();
  }
  int k() const { return static_cast<int>(m.size()); }
  void validate() const {
    if (!(beta > 0.0)) throw UsageError("PenaltySpec: beta must be positive");
    const int kk = k();
    if (static_cast<int>(a.size()) != kk)
      throw DataError("PenaltySpec: coupling dimension mismatch");
    for (int i = 0; i < kk; ++i) {
      if (static_cast<int>(a[i].size()) != kk)
        throw DataError("PenaltySpec: coupling dimension mismatch");
      if (a[i][i] != 0.0)
        throw DataError("PenaltySpec: coupling diagonal must vanish");
      if (m[i] < 0.0) throw DataError("PenaltySpec: cubic weights must be >= 0");
      for (int j = 0; j < kk; ++j) {
        if (a[i][j] < 0.0)
          throw DataError("PenaltySpec: coupling must be nonnegative");
        if (a[i][j] != a[j][i])
          throw DataError("PenaltySpec: coupling must be symmetric");
      }
    }
  }
};

struct ContinuationSchedule {
  std::vector<double> betas;
  double stage_tol = 1e-6;  // baseline projected-gradient tolerance
  // Per-stage gradient tolerances; when empty, stage j uses
  // stage_tol * sqrt(beta_j / beta_0) (the penalty gradient stiffens with
  // beta, so a fixed absolute tolerance over-iterates late stages).
  std::vector<double> stage_tols;
  int max_iter = 5000;

  static ContinuationSchedule geometric(double beta0 = 1.0, double ratio = 4.0,
                                        int stages = 10) {
    if (!(beta0 > 0.0) || !(ratio > 1.0) || stages < 1)
      throw UsageError("ContinuationSchedule: beta0 > 0, ratio > 1, stages >= 1");
    ContinuationSchedule s;
    s.betas.resize(stages);
    double b = beta0;
    for (int j = 0; j < stages; ++j, b *= ratio) s.betas[j] = b;
    return s;
  }
  double tol_for_stage(size_t j) const {
    if (!stage_tols.empty()) return stage_tols[j];
    return stage_tol * std::sqrt(betas[j] / betas.front());
  }
  void validate() const {
    if (betas.empty()) throw UsageError("ContinuationSchedule: empty schedule");
    for (size_t j = 0; j + 1 < betas.size(); ++j)
      if (!(betas[j] < betas[j + 1]))
        throw UsageError("ContinuationSchedule: betas must strictly increase");
    if (!(betas.front() > 0.0))
      throw UsageError("ContinuationSchedule: betas must be positive");
    if (!stage_tols.empty() && stage_tols.size() != betas.size())
      throw UsageError("ContinuationSchedule: stage_tols size mismatch");
  }
};

// Penalty overlap sum_{i<j} a_ij h sum u_i^2 u_j^2 (without the beta factor).
inline double overlap(const DensityVector& u, const PenaltySpec& spec) {
  if (spec.k() != u.k()) throw DataError("overlap: component count mismatch");
  const double h = u.grid.h();
  double acc = 0.0;
  for (int i = 0; i < u.k(); ++i)
    for (int j = i + 1; j < u.k(); ++j) {
      if (spec.a[i][j] == 0.0) continue;
      std::vector<double> prod(u.grid.n);
      for (int x = 0; x < u.grid.n; ++x)
        prod[x] = u.u[i][x] * u.u[i][x] * u.u[j][x] * u.u[j][x];
      std::vector<double> ones(u.grid.n, 1.0);
      acc += spec.a[i][j] * h * sym_dot(prod, ones);
    }
  return acc;
}

inline double j_beta_value(const DensityVector& u, const PenaltySpec& spec,
                           const StiffnessForm& form) {
  if (!(u.grid == form.grid))
    throw DataError("j_beta_value: grid mismatch with form");
  if (spec.k() != u.k()) throw DataError("j_beta_value: component count mismatch");
  if (spec.anchor && (spec.anchor->k() != u.k() || !(spec.anchor->grid == u.grid)))
    throw DataError("j_beta_value: anchor mismatch");
  if (!u.feasible()) return std::numeric_limits<double>::infinity();
  const double h = u.grid.h();
  const int n = u.grid.n;
  double acc = 0.0;
  const std::vector<double> ones(n, 1.0);
  for (int i = 0; i < u.k(); ++i) {
    const std::vector<double> au = toeplitz_apply(form, u.u[i]);
    acc += sym_dot(u.u[i], au);
    if (spec.anchor) {
      std::vector<double> e(n);
      for (int x = 0; x < n; ++x) {
        const double d = u.u[i][x] - spec.anchor->u[i][x];
        e[x] = std::sqrt(1.0 + d * d);
      }
      acc += h * sym_dot(e, ones);
    }
    if (spec.m[i] != 0.0) {
      std::vector<double> cu(n);
      for (int x = 0; x < n; ++x) cu[x] = u.u[i][x] * u.u[i][x] * u.u[i][x];
      acc += spec.m[i] * h * sym_dot(cu, ones);
    }
  }
  acc += spec.beta * overlap(u, spec);
  return acc;
}

// Hard-constraint functional: sum_i [u_i]^2 when ||u_i u_j||_{L1} = delta_ij
// within segregation_tol, +inf sentinel otherwise.
inline double j_value(const DensityVector& u, const StiffnessForm& form,
                      double segregation_tol = kSegregationTol) {
  if (!(u.grid == form.grid)) throw DataError("j_value: grid mismatch with form");
  const double h = u.grid.h();
  const int n = u.grid.n;
  const std::vector<double> ones(n, 1.0);
  for (int i = 0; i < u.k(); ++i) {
    for (int j = i; j < u.k(); ++j) {
      std::vector<double> prod(n);
      for (int x = 0; x < n; ++x) prod[x] = std::abs(u.u[i][x] * u.u[j][x]);
      const double l1 = h * sym_dot(prod, ones);
      const double target = (i == j) ? 1.0 : 0.0;
      if (std::abs(l1 - target) > segregation_tol)
        return std::numeric_limits<double>::infinity();
    }
  }
  double acc = 0.0;
  for (int i = 0; i < u.k(); ++i)
    acc += sym_dot(u.u[i], toeplitz_apply(form, u.u[i]));
  return acc;
}

// Clamp nonnegative, then rescale each component to unit h-weighted L2 norm.
inline DensityVector project_spheres(DensityVector u) {
  const double h = u.grid.h();
  for (int i = 0; i < u.k(); ++i) {
    for (double& v : u.u[i]) v = std::max(0.0, v);
    const double nrm = std::sqrt(h * sym_dot(u.u[i], u.u[i]));
    if (!(nrm > 0.0))
      throw NumericalError("project_spheres: component identically <= 0");
    for (double& v : u.u[i]) v /= nrm;
  }
  return u;
}

// Euclidean gradient of J_beta in the raw nodal coordinates:
//   grad_i = 2 A u_i + 2 beta h sum_j a_ij u_i u_j^2 + 3 h m_i u_i^2
//            + h (u_i - ubar_i)/e(u_i - ubar_i).
inline std::vector<std::vector<double>> j_beta_gradient(
    const DensityVector& u, const PenaltySpec& spec, const StiffnessForm& form) {
  if (!(u.grid == form.grid))
    throw DataError("j_beta_gradient: grid mismatch with form");
  if (spec.k() != u.k())
    throw DataError("j_beta_gradient: component count mismatch");
  const double h = u.grid.h();
  const int n = u.grid.n;
  std::vector<std::vector<double>> g(u.k());
  for (int i = 0; i < u.k(); ++i) {
    g[i] = toeplitz_apply(form, u.u[i]);
    for (double& v : g[i]) v *= 2.0;
    for (int j = 0; j < u.k(); ++j) {
      if (j == i || spec.a[i][j] == 0.0) continue;
      const double c = 2.0 * spec.beta * spec.a[i][j] * h;
      for (int x = 0; x < n; ++x)
        g[i][x] += c * u.u[i][x] * u.u[j][x] * u.u[j][x];
    }
    if (spec.m[i] != 0.0)
      for (int x = 0; x < n; ++x)
        g[i][x] += 3.0 * spec.m[i] * h * u.u[i][x] * u.u[i][x];
    if (spec.anchor)
      for (int x = 0; x < n; ++x) {
        const double d = u.u[i][x] - spec.anchor->u[i][x];
        g[i][x] += h * d / std::sqrt(1.0 + d * d);
      }
  }
  return g;
}

struct IterRecord {
  double energy;
  double overlap;
  double grad_norm;
};

struct StageResult {
  explicit StageResult(DensityVector u_) : u(std::move(u_)) {}
  DensityVector u;
  std::vector<double> lambda;  // sphere-constraint multipliers
  double energy = 0.0;
  double grad_norm = 0.0;
  int iterations = 0;
  bool converged = false;
  bool line_search_failed = false;
  std::vector<IterRecord> trace;
};

// Projected gradient descent with Armijo backtracking on J_beta over the
// product of unit spheres (clamp at 0 + renormalize).  Stops on the
// h-weighted norm of the projected gradient.
inline StageResult minimize_stage(const DensityVector& u0,
                                  const PenaltySpec& spec,
                                  const StiffnessForm& form, double tol = 1e-6,
                                  int max_iter = 5000) {
  if (!u0.feasible())
    throw DataError("minimize_stage: initial iterate is not feasible");
  const double h = u0.grid.h();
  const int n = u0.grid.n;
  StageResult res{u0};
  double E = j_beta_value(res.u, spec, form);
  double alpha = 1.0;
  std::vector<std::vector<double>> g;
  for (int it = 0; it < max_iter; ++it) {
    g = j_beta_gradient(res.u, spec, form);
    // Tangent projection per component, with active-set treatment of the
    // nonnegativity bound: entries pinned at 0 cannot move against it.
    std::vector<std::vector<double>> pg(res.u.k());
    double gnorm2 = 0.0;
    for (int i = 0; i < res.u.k(); ++i) {
      const double mult = h * sym_dot(g[i], res.u.u[i]);
      pg[i].resize(n);
      for (int x = 0; x < n; ++x) {
        double v = g[i][x] - mult * res.u.u[i][x];
        if (res.u.u[i][x] == 0.0 && v > 0.0) v = 0.0;
        pg[i][x] = v;
      }
      gnorm2 += h * sym_dot(pg[i], pg[i]);
    }
    res.grad_norm = std::sqrt(gnorm2);
    res.trace.push_back({E, overlap(res.u, spec), res.grad_norm});
    res.iterations = it;
    if (res.grad_norm <= tol) {
      res.converged = true;
      break;
    }
    // Armijo backtracking from a slowly re-expanding step.
    alpha = std::min(alpha * 2.0, 1.0);
    bool accepted = false;
    while (alpha >= 1e-18) {
      DensityVector trial = res.u;
      for (int i = 0; i < trial.k(); ++i)
        for (int x = 0; x < n; ++x) trial.u[i][x] -= alpha * pg[i][x];
      bool degenerate = false;
      DensityVector proj = trial;
      try {
        proj = project_spheres(trial);
      } catch (const NumericalError&) {
        degenerate = true;
      }
      if (!degenerate) {
        const double Enew = j_beta_value(proj, spec, form);
        if (Enew <= E - 1e-4 * alpha * gnorm2) {
          res.u = proj;
          E = Enew;
          accepted = true;
          break;
        }
      }
      alpha *= 0.5;
    }
    if (!accepted) {
      res.line_search_failed = true;
      break;
    }
  }
  res.energy = E;
  // Lagrange multipliers lambda_i = <u_i, grad_i>/2 (so that
  // apply(form, u_i) + penalty-grad/(2h) = lambda_i u_i at stationarity).
  g = j_beta_gradient(res.u, spec, form);
  res.lambda.resize(res.u.k());
  for (int i = 0; i < res.u.k(); ++i)
    res.lambda[i] = 0.5 * sym_dot(res.u.u[i], g[i]);
  return res;
}

// Deterministic initialization: k Gaussian bumps with centers equi-spaced in
// Omega and width |Omega|/(3k), constructed in mirror pairs so the result is
// exactly reflection symmetric, then projected to the spheres.
inline DensityVector default_initialization(const Grid1D& grid, int k) {
  if (k < 1) throw UsageError("default_initialization: k must be >= 1");
  const int n = grid.n;
  const double L = grid.length();
  const double w = L / (3.0 * k);
  std::vector<std::vector<double>> comps(k, std::vector<double>(n, 0.0));
  auto bump = [&](int i, int x) {
    const double c = grid.x_left + L * (i + 1.0) / (k + 1.0);
    const double t = (grid.node(x) - c) / w;
    return std::exp(-t * t);
  };
  for (int i = 0; i < k; ++i) {
    const int im = k - 1 - i;
    if (i < im) {
      for (int x = 0; x < n; ++x) comps[i][x] = bump(i, x);
      for (int x = 0; x < n; ++x) comps[im][x] = comps[i][n - 1 - x];
    } else if (i == im) {
      // middle component: symmetrize explicitly
      for (int x = 0; x < n; ++x) comps[i][x] = bump(i, x);
      for (int x = 0; x < n / 2; ++x) {
        const double avg = 0.5 * (comps[i][x] + comps[i][n - 1 - x]);
        comps[i][x] = comps[i][n - 1 - x] = avg;
      }
    }
  }
  return project_spheres(DensityVector(grid, std::move(comps)));
}

struct ContinuationRecord {
  ContinuationRecord(double beta_, StageResult stage_)
      : beta(beta_), stage(std::move(stage_)) {}
  double beta;
  StageResult stage;
};

// Warm-started minimization along the beta schedule.
inline std::vector<ContinuationRecord> beta_continuation(
    const ContinuationSchedule& schedule, PenaltySpec spec,
    const StiffnessForm& form, DensityVector u) {
  schedule.validate();
  if (!u.feasible())
    throw DataError("beta_continuation: initial iterate is not feasible");
  std::vector<ContinuationRecord> out;
  out.reserve(schedule.betas.size());
  for (size_t j = 0; j < schedule.betas.size(); ++j) {
    const double beta = schedule.betas[j];
    spec.beta = beta;
    ContinuationRecord rec(beta, minimize_stage(u, spec, form,
                                                schedule.tol_for_stage(j),
                                                schedule.max_iter));
    u = rec.stage.u;
    out.push_back(std::move(rec));
  }
  return out;
}

}  // namespace fracseg
