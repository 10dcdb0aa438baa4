#pragma once
// Post-processing of converged configurations: free-boundary extraction with
// sub-grid interpolation, Holder-exponent fits of H(r), the self-segregation
// dichotomy detector, and the optimal-partition report.

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "almgren.hpp"
#include "extension.hpp"
#include "fraclap.hpp"
#include "segregation.hpp"

namespace fracseg {

// ---------------------------------------------------------------------------
// Free boundary.

struct GammaPoint {
  double x = 0.0;            // location (left end when interval)
  bool is_interval = false;  // dead zone reported as an interval
  double x_right = 0.0;      // right end when is_interval
  int left_label = -1;       // adjacent density index on the left (-1: none)
  int right_label = -1;
  double mid() const { return is_interval ? 0.5 * (x + x_right) : x; }
};

struct FreeBoundary {
  std::vector<GammaPoint> points;
  double eps = 0.0;  // absolute threshold actually used
};

// Trace points where every density falls below eps = eps_rel * max |u|.
// Sharp interfaces (no dead node) are located by interpolating the crossing
// of the two adjacent dominant densities; dead zones are delimited by
// interpolated eps-crossings of the bounding densities and reported as an
// interval when wider than 3h, as a midpoint otherwise.  Dead zones touching
// the domain boundary are not free-boundary interfaces and are dropped.
inline FreeBoundary extract_free_boundary(const DensityVector& u,
                                          double eps_rel = 1e-3) {
  const Grid1D& g = u.grid;
  const int n = g.n, k = u.k();
  const double h = g.h();
  double umax = 0.0;
  for (int i = 0; i < k; ++i)
    for (double v : u.u[i]) umax = std::max(umax, std::abs(v));
  if (umax == 0.0) throw DataError("extract_free_boundary: zero configuration");
  FreeBoundary fb;
  fb.eps = eps_rel * umax;
  auto dominant = [&](int x) {
    int best = 0;
    for (int i = 1; i < k; ++i)
      if (u.u[i][x] > u.u[best][x]) best = i;
    return best;
  };
  auto dead = [&](int x) {
    for (int i = 0; i < k; ++i)
      if (u.u[i][x] >= fb.eps) return false;
    return true;
  };
  // eps-crossing of density i between nodes x (alive) and x+1 (dead side),
  // by linear interpolation; direction handled by the caller's ordering.
  auto eps_cross = [&](int i, int xa, int xb) {
    const double va = u.u[i][xa], vb = u.u[i][xb];
    if (va == vb) return 0.5 * (g.node(xa) + g.node(xb));
    double t = (va - fb.eps) / (va - vb);
    t = std::min(1.0, std::max(0.0, t));
    return g.node(xa) + t * (g.node(xb) - g.node(xa));
  };
  int x = 0;
  while (x < n) {
    if (dead(x)) {
      const int start = x;
      while (x < n && dead(x)) ++x;
      const int end = x;  // dead run [start, end)
      if (start == 0 || end == n) continue;  // touches the domain boundary
      GammaPoint gp;
      gp.left_label = dominant(start - 1);
      gp.right_label = dominant(end);
      const double xl = eps_cross(gp.left_label, start - 1, start);
      const double xr = eps_cross(gp.right_label, end, end - 1);
      if (xr - xl > 3.0 * h) {
        gp.is_interval = true;
        gp.x = xl;
        gp.x_right = xr;
      } else {
        gp.x = 0.5 * (xl + xr);
      }
      fb.points.push_back(gp);
    } else {
      // sharp interface: dominant index changes between alive neighbors
      if (x + 1 < n && !dead(x + 1)) {
        const int di = dominant(x), dj = dominant(x + 1);
        if (di != dj) {
          GammaPoint gp;
          gp.left_label = di;
          gp.right_label = dj;
          // crossing of u_di - u_dj between the two nodes
          const double fa = u.u[di][x] - u.u[dj][x];
          const double fb2 = u.u[di][x + 1] - u.u[dj][x + 1];
          double t = (fa == fb2) ? 0.5 : fa / (fa - fb2);
          t = std::min(1.0, std::max(0.0, t));
          gp.x = g.node(x) + t * h;
          fb.points.push_back(gp);
        }
      }
      ++x;
    }
  }
  if (k >= 2 && fb.points.empty())
    throw DataError("extract_free_boundary: no free-boundary point found "
                    "(failed segregation)");
  return fb;
}

// ---------------------------------------------------------------------------
// Holder fit.

struct HolderFit {
  double alpha = 0.0;  // fitted exponent (slope of log H vs log r over 2)
  double r2 = 0.0;     // coefficient of determination on the fitted window
  int w_begin = 0, w_end = 0;  // window [w_begin, w_end) into the radius grid
  bool ok = false;             // R^2 >= 0.98 on the window
};

// Least-squares slope of log H against log r over the best contiguous window
// (longest window with R^2 >= 0.98, else the max-R^2 window, flagged).
inline HolderFit holder_fit(const std::vector<double>& radii,
                            const std::vector<double>& H) {
  if (radii.size() != H.size()) throw DataError("holder_fit: size mismatch");
  std::vector<double> lr, lh;
  std::vector<int> idx;
  for (size_t i = 0; i < H.size(); ++i)
    if (H[i] > kHFloor) {
      lr.push_back(std::log(radii[i]));
      lh.push_back(std::log(H[i]));
      idx.push_back(static_cast<int>(i));
    }
  const int m = static_cast<int>(lr.size());
  if (m < 8) throw DataError("holder_fit: need >= 8 radii with H above floor");
  auto fit_window = [&](int b, int e, double& slope, double& r2) {
    double sx = 0, sy = 0, sxx = 0, sxy = 0, syy = 0;
    const int len = e - b;
    for (int i = b; i < e; ++i) {
      sx += lr[i];
      sy += lh[i];
      sxx += lr[i] * lr[i];
      sxy += lr[i] * lh[i];
      syy += lh[i] * lh[i];
    }
    const double vx = sxx - sx * sx / len;
    const double vy = syy - sy * sy / len;
    const double cxy = sxy - sx * sy / len;
    slope = cxy / vx;
    r2 = (vy > 0.0) ? cxy * cxy / (vx * vy) : 1.0;
  };
  HolderFit best;
  double best_r2 = -1.0;
  int best_len = 0;
  bool found_good = false;
  const int min_len = 6;
  for (int b = 0; b + min_len <= m; ++b)
    for (int e = b + min_len; e <= m; ++e) {
      double slope, r2;
      fit_window(b, e, slope, r2);
      const int len = e - b;
      const bool good = r2 >= 0.98;
      const bool better = found_good
                              ? (good && (len > best_len ||
                                          (len == best_len && r2 > best_r2)))
                              : (good || r2 > best_r2);
      if (better) {
        best.alpha = 0.5 * slope;
        best.r2 = r2;
        best.w_begin = idx[b];
        best.w_end = idx[e - 1] + 1;
        best_r2 = r2;
        best_len = len;
        found_good = found_good || good;
      }
    }
  best.ok = best.r2 >= 0.98;
  return best;
}

// ---------------------------------------------------------------------------
// Self-segregation detector.

struct N0Fit {
  double N0 = std::numeric_limits<double>::quiet_NaN();
  double slope = 0.0;  // d(corrected)/dr of the fitted line
  double C = 0.0;      // monotonicity constant used for the correction
  bool ok = false;
};

// N(0+) by linear extrapolation (in r) of the corrected frequency
// e^{C Psi}(N + 1) over the 5 smallest radii with defined N.  Profiles
// without Psi samples use C = 0 (corrected = N + 1).
inline N0Fit extrapolate_N0(const FrequencyProfile& prof) {
  N0Fit out;
  const bool has_psi = prof.Psi.size() == prof.r.size();
  bool has_nan = false;
  for (double v : prof.N) has_nan = has_nan || std::isnan(v);
  if (has_psi && !has_nan) {
    const MonotoneCResult mc = min_monotone_C(prof);
    if (mc.ok) out.C = mc.C;
  }
  std::vector<size_t> keep;
  for (size_t i = 0; i < prof.r.size() && keep.size() < 5; ++i)
    if (!std::isnan(prof.N[i])) keep.push_back(i);
  // The monotonicity correction is a small-radius factor e^{C Psi} -> 1; when
  // C Psi is O(1) on the fitted radii the exponential dominates the data and
  // the extrapolation is meaningless, so fall back to the raw frequency.
  if (!keep.empty() && has_psi && out.C * prof.Psi[keep.back()] > 0.5)
    out.C = 0.0;
  std::vector<double> rs, cs;
  for (size_t i : keep) {
    const double corr =
        (has_psi ? std::exp(out.C * prof.Psi[i]) : 1.0) * (prof.N[i] + 1.0);
    rs.push_back(prof.r[i]);
    cs.push_back(corr);
  }
  if (rs.size() < 2) return out;
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  const int m = static_cast<int>(rs.size());
  for (int i = 0; i < m; ++i) {
    sx += rs[i];
    sy += cs[i];
    sxx += rs[i] * rs[i];
    sxy += rs[i] * cs[i];
  }
  const double denom = m * sxx - sx * sx;
  if (denom == 0.0) return out;
  out.slope = (m * sxy - sx * sy) / denom;
  out.N0 = (sy - out.slope * sx) / m - 1.0;
  out.ok = true;
  return out;
}

enum class Verdict { two_density, self_segregated, undetermined };

struct SegregationVerdict {
  Verdict verdict = Verdict::undetermined;
  double N0 = std::numeric_limits<double>::quiet_NaN();
  bool consistent = false;  // verdict agrees with the N(0+) dichotomy band
};

// Dichotomy at a free-boundary point: different adjacent densities =>
// two_density (requires N(0+) >= s - 0.05); the same density on both sides
// => self_segregated (requires s > 1/2 and N(0+) = 2s-1 +/- 0.05).
inline SegregationVerdict classify_gamma_point(const GammaPoint& gp,
                                               const FrequencyProfile& prof,
                                               const FracParams& p) {
  SegregationVerdict v;
  const N0Fit fit = extrapolate_N0(prof);
  v.N0 = fit.N0;
  if (gp.left_label < 0 || gp.right_label < 0) {
    v.verdict = Verdict::undetermined;
    v.consistent = true;
    return v;
  }
  if (gp.left_label != gp.right_label) {
    v.verdict = Verdict::two_density;
    v.consistent = fit.ok && fit.N0 >= p.s - 0.05;
  } else {
    v.verdict = Verdict::self_segregated;
    v.consistent = fit.ok && p.s > 0.5 &&
                   std::abs(fit.N0 - (2.0 * p.s - 1.0)) <= 0.05;
  }
  return v;
}

// ---------------------------------------------------------------------------
// Partition report.

struct PartitionResult {
  std::vector<std::vector<bool>> supports;  // pairwise disjoint masks
  std::vector<double> lambda1;              // lambda_{1,s}(omega_i) on masks
  double I = 0.0;                           // sum of mask eigenvalues
  double J = 0.0;                           // sum of Rayleigh energies
  bool equivalence_ok = false;              // |J - I| / I <= 0.02
  FreeBoundary gamma;
  std::vector<FrequencyProfile> profiles;   // per gamma point
  std::vector<HolderFit> holder;            // per gamma point
  std::vector<SegregationVerdict> verdicts; // per gamma point
};

// Assemble the optimal-partition diagnostics for a converged configuration:
// disjoint supports by dominant density above eps, mask eigenvalues via
// fraclap, the I(omega) = J(u) equivalence check, and per-gamma-point
// frequency profile, Holder fit, and dichotomy verdict.
inline PartitionResult partition_report(const DensityVector& u,
                                        const StiffnessForm& form,
                                        const FracParams& p,
                                        double eps_rel = 1e-3,
                                        bool with_frequency = true,
                                        const QuadSpec& q = {32, 16}) {
  if (!(u.grid == form.grid))
    throw DataError("partition_report: grid mismatch with form");
  const Grid1D& g = u.grid;
  const int n = g.n, k = u.k();
  PartitionResult res;
  double umax = 0.0;
  for (int i = 0; i < k; ++i)
    for (double v : u.u[i]) umax = std::max(umax, std::abs(v));
  const double eps = eps_rel * umax;
  res.supports.assign(k, std::vector<bool>(n, false));
  for (int x = 0; x < n; ++x) {
    int best = -1;
    for (int i = 0; i < k; ++i)
      if (u.u[i][x] >= eps && (best < 0 || u.u[i][x] > u.u[best][x])) best = i;
    if (best >= 0) res.supports[best][x] = true;
  }
  res.lambda1.resize(k);
  res.J = 0.0;
  for (int i = 0; i < k; ++i) {
    const EigenResult eig = smallest_eigenpair(form, res.supports[i]);
    if (!eig.converged)
      throw NumericalError("partition_report: mask eigenpair did not converge");
    res.lambda1[i] = eig.lambda;
    res.I += eig.lambda;
    res.J += rayleigh(form, u.u[i]);
  }
  res.equivalence_ok = std::abs(res.J - res.I) <= 0.02 * std::abs(res.I);
  if (k >= 2) {
    res.gamma = extract_free_boundary(u, eps_rel);
  } else {
    res.gamma.eps = eps;
  }
  if (with_frequency && !res.gamma.points.empty()) {
    // Extensions of every density; linear reaction lambda_i in extension
    // normalization (conormal calibration times the discrete Rayleigh
    // quotient).
    const double kappa = conormal_calibration(g, p);
    std::vector<ExtensionEvaluator> evs;
    evs.reserve(k);
    std::vector<double> lam(k);
    FieldSet fields;
    for (int i = 0; i < k; ++i) {
      evs.emplace_back(g, p, u.u[i]);
      lam[i] = kappa * rayleigh(form, u.u[i]);
    }
    for (int i = 0; i < k; ++i) fields.push_back(&evs[i]);
    for (const GammaPoint& gp : res.gamma.points) {
      const double x0 = gp.mid();
      const double dist =
          2.0 * std::min(x0 - g.x_left, g.x_right - x0);
      const std::vector<double> radii = default_radius_grid(g.h(), dist);
      FrequencyProfile prof = frequency_profile(
          fields, p, x0, radii, lam, FrequencyMode::free_boundary, q);
      res.holder.push_back(holder_fit(prof.r, prof.H));
      res.verdicts.push_back(classify_gamma_point(gp, prof, p));
      res.profiles.push_back(std::move(prof));
    }
  }
  return res;
}

}  // namespace fracseg
