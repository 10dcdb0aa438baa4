#pragma once
// Frequency-type diagnostics on extended profiles: Almgren energy E, height H,
// frequency N = E/H at trace points; the auxiliary psi/Psi pair and the
// corrected monotone quantity e^{C Psi}(N+1); interior, zero-trace, and
// Neumann-substituted frequencies; the Pohozaev residual; the Morrey
// quotient; Poincare-inequality ratio checks.
//
// All integrals live on (half-)disks about a base point X0 with the
// degenerate weight y^a = (rho sin theta)^a.  Quadrature is polar and split
// by weight: terms carrying y^a (x-derivative squared, u^2) use the angular
// rule with weight (sin theta)^a; terms carrying y^{-a} ((y^a u_y)^2) use
// (sin theta)^{-a}; mixed terms use the plain rule.  This absorbs the
// degenerate weight exactly instead of sampling it.

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "fields.hpp"
#include "params.hpp"
#include "quadrature.hpp"

namespace fracseg {

// H-positivity floor: frequencies at radii with H below it are undefined
// (reported as NaN), never clipped.
constexpr double kHFloor = 1e-14;
// Cap for the corrected-frequency constant search.
constexpr double kCMax = 1e3;

using FieldSet = std::vector<const Field*>;

struct QuadSpec {
  int angular = 64;  // angular nodes per rule
  int radial = 32;   // radial Gauss nodes per panel/annulus
};

enum class FrequencyMode { free_boundary, interior, zero_trace, neumann_w };

namespace almgren_detail {

struct Rules {
  AngularRule ang_a;   // weight (sin theta)^a on (0, pi)
  AngularRule ang_ma;  // weight (sin theta)^{-a}
  AngularRule ang_0;   // weight 1
  QuadRule gl;         // Gauss-Legendre on (-1, 1) for radial panels
  double a;
  Rules(const FracParams& p, const QuadSpec& q)
      : ang_a(angular_rule(q.angular, p.a())),
        ang_ma(angular_rule(q.angular, -p.a())),
        ang_0(angular_rule(q.angular, 0.0)),
        gl(gauss_legendre(q.radial)),
        a(p.a()) {}
};

// Angular density of the arc integral int y^a |grad u|^2 dtheta at radius rho
// about (x0, 0):  rho^a sum_a w (u_x)^2 + rho^{-a} sum_{-a} w (y^a u_y)^2.
inline double arc_grad2_density(const FieldSet& u, double x0, double rho,
                                const Rules& R) {
  double acc_x = 0.0, acc_y = 0.0;
  for (int k = 0; k < R.ang_a.size(); ++k) {
    const double x = x0 + rho * R.ang_a.cos_t[k];
    const double y = rho * R.ang_a.sin_t[k];
    for (const Field* f : u) {
      const double d = f->dx(x, y);
      acc_x += R.ang_a.w[k] * d * d;
    }
  }
  for (int k = 0; k < R.ang_ma.size(); ++k) {
    const double x = x0 + rho * R.ang_ma.cos_t[k];
    const double y = rho * R.ang_ma.sin_t[k];
    for (const Field* f : u) {
      const double d = f->yady(x, y);
      acc_y += R.ang_ma.w[k] * d * d;
    }
  }
  return std::pow(rho, R.a) * acc_x + std::pow(rho, -R.a) * acc_y;
}

// int_{annulus rho0..rho1} y^a |grad u|^2 dX about (x0, 0), upper half plane.
inline double halfdisk_grad2_annulus(const FieldSet& u, double x0, double rho0,
                                     double rho1, const Rules& R) {
  double acc = 0.0;
  for (int q = 0; q < R.gl.size(); ++q) {
    const double rho = 0.5 * (rho0 + rho1) + 0.5 * (rho1 - rho0) * R.gl.x[q];
    acc += 0.5 * (rho1 - rho0) * R.gl.w[q] * rho *
           arc_grad2_density(u, x0, rho, R);
  }
  return acc;
}

// int_{B_r^+} y^a |grad u|^2 with a geometric panel split toward rho = 0
// (the integrand behaves like rho^{1-a} there).
inline double halfdisk_grad2(const FieldSet& u, double x0, double r,
                             const Rules& R, int panels = 7) {
  double acc = 0.0;
  double hi = r;
  for (int k = 0; k < panels; ++k) {
    const double lo = (k + 1 == panels) ? 0.0 : hi * 0.5;
    acc += halfdisk_grad2_annulus(u, x0, lo, hi, R);
    hi = lo;
  }
  return acc;
}

// int_{arc rho} y^a sum u^2 dsigma  (dsigma = rho dtheta).
inline double arc_u2(const FieldSet& u, double x0, double rho, const Rules& R) {
  double acc = 0.0;
  for (int k = 0; k < R.ang_a.size(); ++k) {
    const double x = x0 + rho * R.ang_a.cos_t[k];
    const double y = rho * R.ang_a.sin_t[k];
    for (const Field* f : u) {
      const double v = f->value(x, y);
      acc += R.ang_a.w[k] * v * v;
    }
  }
  return std::pow(rho, 1.0 + R.a) * acc;
}

// int_{arc rho} y^a (d_r u)^2 dsigma, with
// y^a (d_r u)^2 = y^a c^2 u_x^2 + 2 c s u_x (y^a u_y) + y^{-a} s^2 (y^a u_y)^2.
inline double arc_dr2(const FieldSet& u, double x0, double rho, const Rules& R) {
  double acc_a = 0.0, acc_0 = 0.0, acc_ma = 0.0;
  for (int k = 0; k < R.ang_a.size(); ++k) {
    const double c = R.ang_a.cos_t[k], s = R.ang_a.sin_t[k];
    const double x = x0 + rho * c, y = rho * s;
    for (const Field* f : u) {
      const double d = f->dx(x, y);
      acc_a += R.ang_a.w[k] * c * c * d * d;
    }
  }
  for (int k = 0; k < R.ang_0.size(); ++k) {
    const double c = R.ang_0.cos_t[k], s = R.ang_0.sin_t[k];
    const double x = x0 + rho * c, y = rho * s;
    for (const Field* f : u)
      acc_0 += R.ang_0.w[k] * 2.0 * c * s * f->dx(x, y) * f->yady(x, y);
  }
  for (int k = 0; k < R.ang_ma.size(); ++k) {
    const double c = R.ang_ma.cos_t[k], s = R.ang_ma.sin_t[k];
    const double x = x0 + rho * c, y = rho * s;
    for (const Field* f : u) {
      const double d = f->yady(x, y);
      acc_ma += R.ang_ma.w[k] * s * s * d * d;
    }
  }
  return rho * (std::pow(rho, R.a) * acc_a + acc_0 +
                std::pow(rho, -R.a) * acc_ma);
}

// Composite Gauss over the trace segment [x0-r, x0+r] of a scalar function.
template <class F>
inline double trace_integral(double x0, double r, F&& fn, int panels = 8,
                             int order = 16) {
  const QuadRule gl = gauss_legendre(order);
  double acc = 0.0;
  for (int pnl = 0; pnl < panels; ++pnl) {
    const double xl = x0 - r + 2.0 * r * pnl / panels;
    const double xr = x0 - r + 2.0 * r * (pnl + 1) / panels;
    for (int q = 0; q < gl.size(); ++q) {
      const double x = 0.5 * (xl + xr) + 0.5 * (xr - xl) * gl.x[q];
      acc += 0.5 * (xr - xl) * gl.w[q] * fn(x);
    }
  }
  return acc;
}

}  // namespace almgren_detail

// ---------------------------------------------------------------------------
// E, H, N at trace-line base points (n = 1 throughout).

// E(X0, r) = r^{-a} [ int_{B_r^+} y^a |grad u|^2 - int_{x0-r}^{x0+r} <u, f(u)> ]
// with the linear reaction f_i(t) = lambda_i t.
inline double energy_E(const FieldSet& u, const FracParams& p, double x0,
                       double r, const std::vector<double>& lambda,
                       const QuadSpec& q = {}) {
  if (!(r > 0.0)) throw DataError("energy_E: requires r > 0");
  if (lambda.size() != u.size())
    throw DataError("energy_E: reaction size mismatch");
  const almgren_detail::Rules R(p, q);
  const double D = almgren_detail::halfdisk_grad2(u, x0, r, R);
  const double react = almgren_detail::trace_integral(x0, r, [&](double x) {
    double acc = 0.0;
    for (size_t i = 0; i < u.size(); ++i) {
      const double t = u[i]->trace_value(x);
      acc += lambda[i] * t * t;
    }
    return acc;
  });
  return std::pow(r, -p.a()) * (D - react);
}

// H(X0, r) = r^{-(1+a)} int_{arc r} y^a sum u^2 dsigma.
inline double height_H(const FieldSet& u, const FracParams& p, double x0,
                       double r, const QuadSpec& q = {}) {
  if (!(r > 0.0)) throw DataError("height_H: requires r > 0");
  const almgren_detail::Rules R(p, q);
  return std::pow(r, -(1.0 + p.a())) * almgren_detail::arc_u2(u, x0, r, R);
}

// N = E/H where H exceeds the floor; NaN marks "undefined".
inline double frequency_N(double E, double H) {
  if (!(H > kHFloor)) return std::numeric_limits<double>::quiet_NaN();
  return E / H;
}

// ---------------------------------------------------------------------------
// psi / Psi and the corrected frequency.

// Fritsch-Carlson monotone (shape-preserving) cubic Hermite slopes.
inline std::vector<double> pchip_slopes(const std::vector<double>& t,
                                        const std::vector<double>& y) {
  const int m = static_cast<int>(t.size());
  if (m < 2 || y.size() != t.size())
    throw DataError("pchip_slopes: need >= 2 knots and matching sizes");
  std::vector<double> h(m - 1), delta(m - 1), d(m, 0.0);
  for (int k = 0; k + 1 < m; ++k) {
    h[k] = t[k + 1] - t[k];
    if (!(h[k] > 0.0)) throw DataError("pchip_slopes: knots must increase");
    delta[k] = (y[k + 1] - y[k]) / h[k];
  }
  if (m == 2) {
    d[0] = d[1] = delta[0];
    return d;
  }
  for (int k = 1; k + 1 < m; ++k) {
    if (delta[k - 1] * delta[k] <= 0.0) {
      d[k] = 0.0;
    } else {
      const double w1 = 2.0 * h[k] + h[k - 1];
      const double w2 = h[k] + 2.0 * h[k - 1];
      d[k] = (w1 + w2) / (w1 / delta[k - 1] + w2 / delta[k]);
    }
  }
  auto end_slope = [](double h0, double h1, double d0, double d1) {
    double s = ((2.0 * h0 + h1) * d0 - h0 * d1) / (h0 + h1);
    if (s * d0 <= 0.0)
      s = 0.0;
    else if (d0 * d1 < 0.0 && std::abs(s) > 3.0 * std::abs(d0))
      s = 3.0 * d0;
    return s;
  };
  d[0] = end_slope(h[0], h[1], delta[0], delta[1]);
  d[m - 1] = end_slope(h[m - 2], h[m - 3], delta[m - 2], delta[m - 3]);
  return d;
}

struct PsiResult {
  std::vector<double> psi;  // per radius
  std::vector<double> Psi;  // per radius
  bool clamped = false;     // psi' went negative and was clamped at 0
};

// psi(r) = r ((1/r) int_{x0-r}^{x0+r} |u|^{2+tau} dx)^{tau/(2+tau)} and
// Psi(r) = int_0^r t^{-a} (1 + psi'(t)) dt, with psi' from the monotone
// cubic interpolant of the psi samples (knot at 0 with psi(0) = 0) and the
// t^{-a} weight integrated in closed form against the interpolant.
inline PsiResult psi_Psi(const FieldSet& u, const FracParams& p, double x0,
                         const std::vector<double>& radii, double tau = 1.0) {
  if (!(tau > 0.0)) throw UsageError("psi_Psi: requires tau > 0");
  const int m = static_cast<int>(radii.size());
  if (m < 2) throw DataError("psi_Psi: need at least 2 radii");
  PsiResult out;
  out.psi.resize(m);
  for (int k = 0; k < m; ++k) {
    const double r = radii[k];
    if (!(r > 0.0) || (k > 0 && !(r > radii[k - 1])))
      throw DataError("psi_Psi: radii must be positive increasing");
    const double integ = almgren_detail::trace_integral(x0, r, [&](double x) {
      double ssq = 0.0;
      for (const Field* f : u) {
        const double t = f->trace_value(x);
        ssq += t * t;
      }
      return std::pow(ssq, 0.5 * (2.0 + tau));
    });
    out.psi[k] = r * std::pow(integ / r, tau / (2.0 + tau));
  }
  // Knots 0 = t_0 < radii with psi(0) = 0.
  std::vector<double> t(m + 1, 0.0), y(m + 1, 0.0);
  for (int k = 0; k < m; ++k) {
    t[k + 1] = radii[k];
    y[k + 1] = out.psi[k];
  }
  const std::vector<double> d = pchip_slopes(t, y);
  const double a = p.a();
  out.Psi.resize(m);
  double acc = 0.0;
  const QuadRule gl20 = gauss_legendre(20);
  for (int k = 0; k < m; ++k) {
    const double t0 = t[k], t1 = t[k + 1], h = t1 - t0;
    const double delta = (y[k + 1] - y[k]) / h;
    // Hermite cubic in xi = t - t0:  psi' = d0 + 2 c2 xi + 3 c3 xi^2.
    const double c2 = (3.0 * delta - 2.0 * d[k] - d[k + 1]) / h;
    const double c3 = (d[k] + d[k + 1] - 2.0 * delta) / (h * h);
    auto dpsi = [&](double tt) {
      const double xi = tt - t0;
      return d[k] + 2.0 * c2 * xi + 3.0 * c3 * xi * xi;
    };
    // Minimum of the derivative over the interval (endpoints + vertex).
    double dmin = std::min(dpsi(t0), dpsi(t1));
    if (c3 != 0.0) {
      const double xis = -c2 / (3.0 * c3);
      if (xis > 0.0 && xis < h) dmin = std::min(dmin, dpsi(t0 + xis));
    }
    if (dmin < -1e-12 * std::max(1.0, std::abs(delta))) {
      // Non-monotone psi: clamp psi' at 0 inside the integral (flagged).
      out.clamped = true;
      auto integrand = [&](double tt) {
        return std::pow(tt, -a) * (1.0 + std::max(0.0, dpsi(tt)));
      };
      if (t0 == 0.0) {
        // Absorb the t^{-a} endpoint singularity with t = s^{1/(1-a)}.
        const double S = std::pow(t1, 1.0 - a);
        for (int qq = 0; qq < gl20.size(); ++qq) {
          const double s = 0.5 * S * (gl20.x[qq] + 1.0);
          const double tt = std::pow(s, 1.0 / (1.0 - a));
          acc += 0.5 * S * gl20.w[qq] / (1.0 - a) *
                 (1.0 + std::max(0.0, dpsi(tt)));
        }
      } else {
        for (int qq = 0; qq < gl20.size(); ++qq) {
          const double tt = 0.5 * (t0 + t1) + 0.5 * h * gl20.x[qq];
          acc += 0.5 * h * gl20.w[qq] * integrand(tt);
        }
      }
    } else {
      // Closed form: expand psi' in powers of t and integrate t^{m-a}.
      const double q2 = 3.0 * c3;
      const double q1 = 2.0 * c2 - 6.0 * c3 * t0;
      const double q0 = d[k] - 2.0 * c2 * t0 + 3.0 * c3 * t0 * t0;
      const double coef[3] = {1.0 + q0, q1, q2};
      for (int mm = 0; mm < 3; ++mm) {
        const double e = mm + 1.0 - a;
        acc += coef[mm] * (std::pow(t1, e) - std::pow(t0, e)) / e;
      }
    }
    out.Psi[k] = acc;
  }
  return out;
}

struct FrequencyProfile {
  double x0 = 0.0, y0 = 0.0;
  FrequencyMode mode = FrequencyMode::free_boundary;
  std::vector<double> r, E, H, N, psi, Psi;
};

// Geometric radius grid spanning [4h, dist/2] (m points).
inline std::vector<double> default_radius_grid(double h, double dist,
                                               int m = 24) {
  const double rmin = 4.0 * h, rmax = 0.5 * dist;
  if (!(rmax > rmin))
    throw DataError("default_radius_grid: domain margin smaller than 4h");
  std::vector<double> r(m);
  for (int k = 0; k < m; ++k)
    r[k] = rmin * std::pow(rmax / rmin, static_cast<double>(k) / (m - 1));
  return r;
}

// Full profile at a trace-line base point.  Bulk integrals accumulate over
// the annuli between consecutive radii so the cost is one sweep.
// mode free_boundary: E with reaction, psi/Psi attached.
// mode zero_trace: requires the trace of every component to vanish on the
// largest segment (within trace_tol); E without reaction.
inline FrequencyProfile frequency_profile(
    const FieldSet& u, const FracParams& p, double x0,
    const std::vector<double>& radii, const std::vector<double>& lambda,
    FrequencyMode mode = FrequencyMode::free_boundary, const QuadSpec& q = {},
    double tau = 1.0, double trace_tol = kHFloor) {
  const int m = static_cast<int>(radii.size());
  if (m < 1) throw DataError("frequency_profile: empty radius grid");
  for (int k = 0; k < m; ++k)
    if (!(radii[k] > 0.0) || (k > 0 && !(radii[k] > radii[k - 1])))
      throw DataError("frequency_profile: radii must be positive increasing");
  const bool with_reaction = (mode == FrequencyMode::free_boundary);
  if (with_reaction && lambda.size() != u.size())
    throw DataError("frequency_profile: reaction size mismatch");
  if (mode == FrequencyMode::zero_trace) {
    const double rmax = radii[m - 1];
    for (int k = 0; k <= 64; ++k) {
      const double x = x0 - rmax + 2.0 * rmax * k / 64.0;
      for (const Field* f : u)
        if (std::abs(f->trace_value(x)) > trace_tol)
          throw DataError("frequency_profile: trace does not vanish on the "
                          "zero_trace segment");
    }
  }
  const almgren_detail::Rules R(p, q);
  FrequencyProfile out;
  out.x0 = x0;
  out.mode = mode;
  out.r = radii;
  out.E.resize(m);
  out.H.resize(m);
  out.N.resize(m);
  double D = 0.0, lo = 0.0;
  for (int k = 0; k < m; ++k) {
    if (k == 0) {
      D += almgren_detail::halfdisk_grad2(u, x0, radii[0], R);
    } else {
      D += almgren_detail::halfdisk_grad2_annulus(u, x0, lo, radii[k], R);
    }
    lo = radii[k];
    double react = 0.0;
    if (with_reaction)
      react = almgren_detail::trace_integral(x0, radii[k], [&](double x) {
        double acc = 0.0;
        for (size_t i = 0; i < u.size(); ++i) {
          const double t = u[i]->trace_value(x);
          acc += lambda[i] * t * t;
        }
        return acc;
      });
    out.E[k] = std::pow(radii[k], -p.a()) * (D - react);
    out.H[k] = std::pow(radii[k], -(1.0 + p.a())) *
               almgren_detail::arc_u2(u, x0, radii[k], R);
    out.N[k] = frequency_N(out.E[k], out.H[k]);
  }
  if (mode == FrequencyMode::free_boundary && m >= 2) {
    const PsiResult pr = psi_Psi(u, p, x0, radii, tau);
    out.psi = pr.psi;
    out.Psi = pr.Psi;
  }
  return out;
}

// Corrected monotone quantity e^{C Psi(r)} (N(r) + 1) per radius.
inline std::vector<double> corrected_frequency(const FrequencyProfile& prof,
                                               double C) {
  if (prof.Psi.size() != prof.r.size())
    throw DataError("corrected_frequency: profile lacks Psi samples");
  std::vector<double> out(prof.r.size());
  for (size_t k = 0; k < prof.r.size(); ++k) {
    if (std::isnan(prof.N[k]))
      throw NumericalError("corrected_frequency: N undefined (H below floor)");
    out[k] = std::exp(C * prof.Psi[k]) * (prof.N[k] + 1.0);
  }
  return out;
}

struct MonotoneCResult {
  bool ok = false;
  double C = 0.0;
};

// Smallest C >= 0 (bisection to 1e-3) making the corrected sequence
// nondecreasing up to slack 1e-3; fails if no C <= C_max works.
inline MonotoneCResult min_monotone_C(const FrequencyProfile& prof,
                                      double c_max = kCMax) {
  auto monotone = [&](double C) {
    const std::vector<double> s = corrected_frequency(prof, C);
    for (size_t k = 0; k + 1 < s.size(); ++k)
      if (s[k + 1] < s[k] - 1e-3 * std::max(1.0, std::abs(s[k]))) return false;
    return true;
  };
  MonotoneCResult res;
  if (monotone(0.0)) {
    res.ok = true;
    res.C = 0.0;
    return res;
  }
  if (!monotone(c_max)) return res;  // failure report
  double lo = 0.0, hi = c_max;
  while (hi - lo > 1e-3) {
    const double mid = 0.5 * (lo + hi);
    (monotone(mid) ? hi : lo) = mid;
  }
  res.ok = true;
  res.C = hi;
  return res;
}

// ---------------------------------------------------------------------------
// Interior, zero-trace, and Neumann-substituted frequencies.

// Interior frequency about X0 = (x0, y0), y0 > 0:
//   N(r) = r int_{B_r} y^a |grad u|^2  /  int_{dB_r} y^a (u - u(X0))^2 dsigma
// on full disks (the weight is smooth there; plain Gauss in the angle).
inline double interior_frequency(const Field& u, const FracParams& p,
                                 double x0, double y0, double r,
                                 const QuadSpec& q = {}) {
  if (!(y0 > 0.0) || !(r > 0.0) || !(r < 0.5 * y0))
    throw DataError("interior_frequency: requires 0 < r < y0/2");
  const double a = p.a();
  const double u0 = u.value(x0, y0);
  const QuadRule ang = gauss_legendre_ab(2 * q.angular, 0.0, 2.0 * M_PI);
  const QuadRule gl = gauss_legendre(q.radial);
  // Bulk over [0, r] with a few geometric panels toward 0.
  double D = 0.0;
  double hi = r;
  for (int pnl = 0; pnl < 5; ++pnl) {
    const double lo = (pnl == 4) ? 0.0 : hi * 0.5;
    for (int qq = 0; qq < gl.size(); ++qq) {
      const double rho = 0.5 * (lo + hi) + 0.5 * (hi - lo) * gl.x[qq];
      double dens = 0.0;
      for (int k = 0; k < ang.size(); ++k) {
        const double x = x0 + rho * std::cos(ang.x[k]);
        const double y = y0 + rho * std::sin(ang.x[k]);
        const double ux = u.dx(x, y);
        const double uy = std::pow(y, -a) * u.yady(x, y);
        dens += ang.w[k] * std::pow(y, a) * (ux * ux + uy * uy);
      }
      D += 0.5 * (hi - lo) * gl.w[qq] * rho * dens;
    }
    hi = lo;
  }
  double B = 0.0;
  for (int k = 0; k < ang.size(); ++k) {
    const double x = x0 + r * std::cos(ang.x[k]);
    const double y = y0 + r * std::sin(ang.x[k]);
    const double v = u.value(x, y) - u0;
    B += ang.w[k] * std::pow(y, a) * v * v;
  }
  B *= r;  // dsigma = r dtheta
  if (!(B > kHFloor)) return std::numeric_limits<double>::quiet_NaN();
  return r * D / B;
}

// Zero-trace frequency: half-ball frequency without reaction at a point where
// every trace vanishes on [x0 - r, x0 + r].
inline double zero_trace_frequency(const FieldSet& u, const FracParams& p,
                                   double x0, double r, const QuadSpec& q = {},
                                   double trace_tol = kHFloor) {
  for (int k = 0; k <= 64; ++k) {
    const double x = x0 - r + 2.0 * r * k / 64.0;
    for (const Field* f : u)
      if (std::abs(f->trace_value(x)) > trace_tol)
        throw DataError("zero_trace_frequency: trace does not vanish on the "
                        "segment");
  }
  const almgren_detail::Rules R(p, q);
  const double E = std::pow(r, -p.a()) *
                   almgren_detail::halfdisk_grad2(u, x0, r, R);
  const double H = std::pow(r, -(1.0 + p.a())) *
                   almgren_detail::arc_u2(u, x0, r, R);
  return frequency_N(E, H);
}

// Neumann-substituted frequency at a point where the trace is strictly
// positive on the segment: w = u - u(X0) - y^{1-a} f(u(X0))/(1-a) with the
// linear reaction f(t) = lambda t, potential V == lambda, and
//   E_w = r^{-a} [ int y^a |grad w|^2 - int_{d^0} V w^2 ].
inline double neumann_frequency(const Field& u, const FracParams& p, double x0,
                                double r, double lambda,
                                const QuadSpec& q = {}) {
  for (int k = 0; k <= 64; ++k) {
    const double x = x0 - r + 2.0 * r * k / 64.0;
    if (!(u.trace_value(x) > 0.0))
      throw DataError("neumann_frequency: trace not strictly positive on the "
                      "segment");
  }
  const double u0 = u.trace_value(x0);
  const NeumannShiftField w(u, u0, lambda * u0, p);
  const almgren_detail::Rules R(p, q);
  const FieldSet ws{&w};
  const double D = almgren_detail::halfdisk_grad2(ws, x0, r, R);
  const double pot = almgren_detail::trace_integral(x0, r, [&](double x) {
    const double t = w.trace_value(x);
    return lambda * t * t;
  });
  const double E = std::pow(r, -p.a()) * (D - pot);
  const double H = std::pow(r, -(1.0 + p.a())) *
                   almgren_detail::arc_u2(ws, x0, r, R);
  return frequency_N(E, H);
}

// ---------------------------------------------------------------------------
// Pohozaev residual.

struct PohozaevReport {
  double x0 = 0.0, r = 0.0;
  // LHS terms of the identity
  //   (1-a-n) D + r int_{arc} y^a |grad u|^2 + 2n int_{d^0} sum F_i(u_i)
  //     - 2r sum F_i(u_i(x0 +/- r)) = 2r int_{arc} y^a (d_r u)^2,  n = 1.
  double t_bulk = 0.0;      // (1-a-n) int_{B_r^+} y^a |grad u|^2 = -a D
  double t_arc_grad = 0.0;  // r int_{arc} y^a |grad u|^2
  double t_trace_F = 0.0;   // 2 int_{d^0} sum F_i(u_i)
  double t_endpoint = 0.0;  // -2r sum_i [F_i(u_i(x0-r)) + F_i(u_i(x0+r))]
  double rhs = 0.0;         // 2r int_{arc} y^a (d_r u)^2
  double residual = 0.0;    // |LHS - RHS|
  double scale = 0.0;       // sum of term magnitudes
  double normalized = 0.0;  // residual / max(scale, tiny)
};

inline PohozaevReport pohozaev_residual(const FieldSet& u, const FracParams& p,
                                        double x0, double r,
                                        const std::vector<double>& lambda,
                                        const QuadSpec& q = {}) {
  if (lambda.size() != u.size())
    throw DataError("pohozaev_residual: reaction size mismatch");
  const almgren_detail::Rules R(p, q);
  PohozaevReport rep;
  rep.x0 = x0;
  rep.r = r;
  const double D = almgren_detail::halfdisk_grad2(u, x0, r, R);
  rep.t_bulk = -p.a() * D;
  rep.t_arc_grad = r * r * almgren_detail::arc_grad2_density(u, x0, r, R);
  // F_i(t) = lambda_i t^2 / 2.
  rep.t_trace_F = 2.0 * almgren_detail::trace_integral(x0, r, [&](double x) {
    double acc = 0.0;
    for (size_t i = 0; i < u.size(); ++i) {
      const double t = u[i]->trace_value(x);
      acc += 0.5 * lambda[i] * t * t;
    }
    return acc;
  });
  double endp = 0.0;
  for (size_t i = 0; i < u.size(); ++i) {
    const double tl = u[i]->trace_value(x0 - r);
    const double tr = u[i]->trace_value(x0 + r);
    endp += 0.5 * lambda[i] * (tl * tl + tr * tr);
  }
  rep.t_endpoint = -2.0 * r * endp;
  rep.rhs = 2.0 * r * almgren_detail::arc_dr2(u, x0, r, R);
  const double lhs =
      rep.t_bulk + rep.t_arc_grad + rep.t_trace_F + rep.t_endpoint;
  rep.residual = std::abs(lhs - rep.rhs);
  rep.scale = std::abs(rep.t_bulk) + std::abs(rep.t_arc_grad) +
              std::abs(rep.t_trace_F) + std::abs(rep.t_endpoint) +
              std::abs(rep.rhs);
  rep.normalized = rep.residual / std::max(rep.scale, 1e-300);
  return rep;
}

// ---------------------------------------------------------------------------
// Morrey quotient.

// Phi(X0, r) = (y0 + r)^{-a} r^{-2 alpha*} int_{B_r(X0)} |y|^a |grad u|^2,
// n = 1.  Trace-line centers use the even reflection across y = 0 (the
// kernel extension is even), so the full-ball integral is twice the
// half-ball one; interior centers need r < y0.
inline double morrey_quotient(const FieldSet& u, const FracParams& p,
                              double x0, double y0, double r,
                              const QuadSpec& q = {}) {
  if (!(r > 0.0)) throw DataError("morrey_quotient: requires r > 0");
  const double a = p.a();
  double bulk;
  if (y0 == 0.0) {
    const almgren_detail::Rules R(p, q);
    bulk = 2.0 * almgren_detail::halfdisk_grad2(u, x0, r, R);
  } else if (r < y0) {
    const QuadRule ang = gauss_legendre_ab(2 * q.angular, 0.0, 2.0 * M_PI);
    const QuadRule gl = gauss_legendre(q.radial);
    bulk = 0.0;
    double hi = r;
    for (int pnl = 0; pnl < 5; ++pnl) {
      const double lo = (pnl == 4) ? 0.0 : hi * 0.5;
      for (int qq = 0; qq < gl.size(); ++qq) {
        const double rho = 0.5 * (lo + hi) + 0.5 * (hi - lo) * gl.x[qq];
        double dens = 0.0;
        for (int k = 0; k < ang.size(); ++k) {
          const double x = x0 + rho * std::cos(ang.x[k]);
          const double y = y0 + rho * std::sin(ang.x[k]);
          for (const Field* f : u) {
            const double ux = f->dx(x, y);
            const double uy = std::pow(y, -a) * f->yady(x, y);
            dens += ang.w[k] * std::pow(y, a) * (ux * ux + uy * uy);
          }
        }
        bulk += 0.5 * (hi - lo) * gl.w[qq] * rho * dens;
      }
      hi = lo;
    }
  } else {
    throw DataError("morrey_quotient: interior center requires r < y0");
  }
  return std::pow(y0 + r, -a) * std::pow(r, -2.0 * p.alpha_star()) * bulk;
}

// ---------------------------------------------------------------------------
// Poincare-inequality checks.

// Critical trace exponent for n = 1: 2/(1-2s) for s < 1/2, capped at 10
// otherwise (no finite critical exponent).
inline double sobolev_pstar(const FracParams& p) {
  return p.s < 0.5 ? std::min(10.0, 2.0 / (1.0 - 2.0 * p.s)) : 10.0;
}

struct PoincareReport {
  // max over samples of LHS/RHS for the trace-Lp bound
  //   (r^{-1} int_{d^0} |u|^p)^{2/p} <= C [ r^{-a} int y^a |grad u|^2
  //                                       + r^{-(1+a)} int_{arc} y^a u^2 ]
  double max_ratio_trace = 0.0;
  // max over samples for the reverse (arc-term) bound
  //   r^{-(1+a)} int_{arc} y^a u^2 <= C [ r^{-a} int y^a |grad u|^2
  //                                     + (r^{-1} int_{d^0} |u|^p)^{2/p} ]
  double max_ratio_arc = 0.0;
  int evaluated = 0;
  int skipped = 0;  // samples with vanishing right-hand sides
};

inline PoincareReport poincare_check(const std::vector<const Field*>& samples,
                                     const FracParams& p, double x0, double r,
                                     double pexp, const QuadSpec& q = {}) {
  if (!(pexp >= 2.0) || pexp > sobolev_pstar(p) + 1e-12)
    throw UsageError("poincare_check: p outside [2, p*]");
  const almgren_detail::Rules R(p, q);
  PoincareReport rep;
  for (const Field* f : samples) {
    const FieldSet one{f};
    const double bulk = std::pow(r, -p.a()) *
                        almgren_detail::halfdisk_grad2(one, x0, r, R);
    const double arc = std::pow(r, -(1.0 + p.a())) *
                       almgren_detail::arc_u2(one, x0, r, R);
    const double lp = almgren_detail::trace_integral(x0, r, [&](double x) {
      return std::pow(std::abs(f->trace_value(x)), pexp);
    });
    const double lhs = std::pow(lp / r, 2.0 / pexp);
    const double tiny = 1e-14;
    if (bulk + arc > tiny) {
      rep.max_ratio_trace = std::max(rep.max_ratio_trace, lhs / (bulk + arc));
      ++rep.evaluated;
    } else {
      ++rep.skipped;
    }
    if (bulk + lhs > tiny)
      rep.max_ratio_arc = std::max(rep.max_ratio_arc, arc / (bulk + lhs));
  }
  return rep;
}

}  // namespace fracseg
