#pragma once
// Core parameter and grid types shared by every fracseg module.

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

namespace fracseg {

// Error hierarchy mapped to CLI exit codes (usage=2, data=3, numerical=4).
struct Error : std::runtime_error {
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};
struct UsageError : Error {
  explicit UsageError(const std::string& msg) : Error(msg) {}
};
struct DataError : Error {
  explicit DataError(const std::string& msg) : Error(msg) {}
};
struct NumericalError : Error {
  explicit NumericalError(const std::string& msg) : Error(msg) {}
};

// Fractional order s in (0,1), extension weight exponent a = 1-2s, and the
// baseline regularity exponent alpha* = s for s <= 1/2, 2s-1 for s > 1/2.
// a and alpha_star are always derived from s, never stored independently.
struct FracParams {
  double s;
  double c_gagliardo;

  explicit FracParams(double s_, double c_gagliardo_ = 1.0)
      : s(s_), c_gagliardo(c_gagliardo_) {
    if (!(s > 0.0 && s < 1.0))
      throw UsageError("FracParams: s must lie in (0,1), got " + std::to_string(s_));
    if (!(c_gagliardo > 0.0))
      throw UsageError("FracParams: c_gagliardo must be positive");
  }

  double a() const { return 1.0 - 2.0 * s; }
  double alpha_star() const { return s <= 0.5 ? s : 2.0 * s - 1.0; }
};

// Uniform grid of n interior nodes on (x_left, x_right); functions on the grid
// are piecewise linear between nodes and identically zero outside the interval
// (the exterior condition u == 0 on R \ Omega).
struct Grid1D {
  double x_left;
  double x_right;
  int n;

  Grid1D(double xl, double xr, int n_) : x_left(xl), x_right(xr), n(n_) {
    if (!(x_left < x_right)) throw UsageError("Grid1D: requires x_left < x_right");
    if (n < 8) throw UsageError("Grid1D: n must be >= 8, got " + std::to_string(n_));
  }

  double h() const { return (x_right - x_left) / (n + 1); }
  // Interior node coordinate, i in [0, n).
  double node(int i) const { return x_left + (i + 1) * h(); }
  std::vector<double> nodes() const {
    std::vector<double> xs(n);
    for (int i = 0; i < n; ++i) xs[i] = node(i);
    return xs;
  }
  double length() const { return x_right - x_left; }
  bool operator==(const Grid1D& o) const {
    return x_left == o.x_left && x_right == o.x_right && n == o.n;
  }
};

// Evaluate the piecewise-linear interpolant of interior nodal values u
// (zero-extended) at an arbitrary point x.
inline double pw_linear_eval(const Grid1D& g, const std::vector<double>& u, double x) {
  const double h = g.h();
  if (x <= g.x_left || x >= g.x_right) return 0.0;
  // Node index convention: node(-1) = x_left (value 0), node(n) = x_right (value 0).
  const double tpos = (x - g.x_left) / h - 1.0;  // position in node index space
  const int j = static_cast<int>(std::floor(tpos));
  const double frac = tpos - j;
  const double ul = (j >= 0 && j < g.n) ? u[j] : 0.0;
  const double ur = (j + 1 >= 0 && j + 1 < g.n) ? u[j + 1] : 0.0;
  return ul + frac * (ur - ul);
}

}  // namespace fracseg
