#pragma once
// Gagliardo quadratic form of the restricted fractional Laplacian on a uniform
// 1-D grid with exterior-zero condition, and principal eigenpairs on masked
// subdomains.
//
// For the P1 hat basis on a uniform grid, the full double integral
//   B[u,v] = c_g \iint (u(x)-u(y))(v(x)-v(y)) / |x-y|^{1+2s} dx dy
// of the zero-extended piecewise-linear interpolants has a closed form.
// Writing B via two antiderivatives of the kernel, B[f,g] = \iint f'(x) g'(y)
// W(x-y) with W(z) = |z|^{1-2s}/(s(2s-1)); the remaining correlation of hat
// slopes is a fourth difference, under which all polynomial ambiguities of the
// antiderivatives cancel.  The result is the symmetric Toeplitz matrix
//   A_{kl} = -c_g h^{1-2s} [delta^4 Qhat](|k-l|),
//   Qhat(z) = |z|^{3-2s} / [s(2s-1)(2-2s)(3-2s)]   (s != 1/2),
//   Qhat(z) = -z^2 ln|z|                            (s = 1/2 limit),
// where delta^4 q(m) = q(m+2) - 4q(m+1) + 6q(m) - 4q(m-1) + q(m-2).
// This is exact for the element space (it includes the exterior "killing"
// contribution of the zero extension automatically); unit tests cross-check it
// against an independent autocorrelation-based oracle.

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <vector>

#include "params.hpp"

namespace fracseg {

struct StiffnessForm {
  Grid1D grid;
  FracParams params;
  // First "column" of the symmetric Toeplitz matrix: coeff[m] = A_{k,k+m}.
  std::vector<double> coeff;

  double entry(int k, int l) const { return coeff[std::abs(k - l)]; }

  Eigen::MatrixXd dense() const {
    const int n = grid.n;
    Eigen::MatrixXd A(n, n);
    for (int k = 0; k < n; ++k)
      for (int l = 0; l < n; ++l) A(k, l) = coeff[std::abs(k - l)];
    return A;
  }
};

namespace detail {
// Second antiderivative pair Qhat of the slope-correlation weight (see header
// comment); defined up to a cubic polynomial which cancels under delta^4.
inline double qhat(double z, double s) {
  z = std::abs(z);
  if (z == 0.0) return 0.0;
  if (s == 0.5) return -z * z * std::log(z);
  const double den = s * (2.0 * s - 1.0) * (2.0 - 2.0 * s) * (3.0 - 2.0 * s);
  return std::pow(z, 3.0 - 2.0 * s) / den;
}
}  // namespace detail

inline StiffnessForm assemble_form(const Grid1D& grid, const FracParams& params) {
  const int n = grid.n;
  const double s = params.s;
  const double h = grid.h();
  std::vector<double> coeff(n);
  for (int m = 0; m < n; ++m) {
    const double d4 = detail::qhat(m + 2, s) - 4.0 * detail::qhat(m + 1, s) +
                      6.0 * detail::qhat(m, s) - 4.0 * detail::qhat(m - 1, s) +
                      detail::qhat(m - 2, s);
    coeff[m] = -params.c_gagliardo * std::pow(h, 1.0 - 2.0 * s) * d4;
  }
  return StiffnessForm{grid, params, std::move(coeff)};
}

// Symmetric Toeplitz matrix-vector product.  Offsets are accumulated in fixed
// distance order, pairing u_{k-d} + u_{k+d} first, so that reflecting the input
// vector reflects the output bitwise (segregation's symmetry tie-breaking).
inline std::vector<double> toeplitz_apply(const StiffnessForm& form,
                                          const std::vector<double>& u) {
  const int n = form.grid.n;
  if (static_cast<int>(u.size()) != n)
    throw DataError("toeplitz_apply: dimension mismatch");
  std::vector<double> out(n);
  for (int k = 0; k < n; ++k) {
    double acc = form.coeff[0] * u[k];
    const int dmax = std::max(k, n - 1 - k);
    for (int d = 1; d <= dmax; ++d) {
      const double lo = (k - d >= 0) ? u[k - d] : 0.0;
      const double hi = (k + d < n) ? u[k + d] : 0.0;
      acc += form.coeff[d] * (lo + hi);
    }
    out[k] = acc;
  }
  return out;
}

// A u rescaled by 1/h: pointwise approximation of c_g-normalized (-Delta)^s u
// at interior nodes.
inline std::vector<double> apply(const StiffnessForm& form,
                                 const std::vector<double>& u) {
  std::vector<double> out = toeplitz_apply(form, u);
  const double inv_h = 1.0 / form.grid.h();
  for (double& v : out) v *= inv_h;
  return out;
}

inline double dot(const std::vector<double>& a, const std::vector<double>& b) {
  double acc = 0.0;
  for (size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
  return acc;
}

inline double rayleigh(const StiffnessForm& form, const std::vector<double>& u) {
  const double uu = dot(u, u);
  if (uu == 0.0) throw DataError("rayleigh: zero vector");
  const std::vector<double> au = toeplitz_apply(form, u);
  return dot(u, au) / (form.grid.h() * uu);
}

struct EigenResult {
  double lambda;
  std::vector<double> phi;  // discrete L2 norm 1 (h-weighted), nonnegative
  double residual_norm;
  int iterations;
  bool converged;
};

// Principal eigenpair of A restricted to the masked node set, for the
// h-weighted identity mass: A_mask phi = lambda h phi.  Inverse iteration with
// a dense LDLT factorization (the shift is 0: A is positive definite).
inline EigenResult smallest_eigenpair(const StiffnessForm& form,
                                      const std::vector<bool>& mask,
                                      double tol = 1e-10,
                                      int max_iter = 10000) {
  const int n = form.grid.n;
  if (static_cast<int>(mask.size()) != n)
    throw DataError("smallest_eigenpair: mask dimension mismatch");
  std::vector<int> idx;
  for (int i = 0; i < n; ++i)
    if (mask[i]) idx.push_back(i);
  const int m = static_cast<int>(idx.size());
  if (m == 0) throw DataError("smallest_eigenpair: empty mask");
  const double h = form.grid.h();

  Eigen::MatrixXd A(m, m);
  for (int k = 0; k < m; ++k)
    for (int l = 0; l < m; ++l) A(k, l) = form.coeff[std::abs(idx[k] - idx[l])];

  Eigen::LDLT<Eigen::MatrixXd> ldlt(A);
  if (ldlt.info() != Eigen::Success)
    throw NumericalError("smallest_eigenpair: factorization failed");

  Eigen::VectorXd v = Eigen::VectorXd::Ones(m);
  v /= std::sqrt(h * v.squaredNorm());
  double lambda = 0.0, resid = std::numeric_limits<double>::infinity();
  int it = 0;
  bool converged = false;
  for (; it < max_iter; ++it) {
    Eigen::VectorXd w = ldlt.solve(h * v);
    const double nrm = std::sqrt(h * w.squaredNorm());
    if (!(nrm > 0.0) || !std::isfinite(nrm))
      throw NumericalError("smallest_eigenpair: iteration degenerated");
    w /= nrm;
    if (w.sum() < 0.0) w = -w;  // principal eigenvector sign convention
    Eigen::VectorXd Aw = A * w;
    lambda = w.dot(Aw) / (h * w.squaredNorm());
    resid = (Aw - lambda * h * w).norm();
    v = w;
    if (resid <= tol) {
      converged = true;
      ++it;
      break;
    }
  }

  EigenResult res;
  res.lambda = lambda;
  res.phi.assign(n, 0.0);
  for (int k = 0; k < m; ++k) res.phi[idx[k]] = std::max(0.0, v(k));
  // Renormalize after the nonnegative clamp (clamping only zeroes noise-level
  // negative entries of the principal eigenvector).
  double nrm2 = 0.0;
  for (double x : res.phi) nrm2 += x * x;
  const double nrm = std::sqrt(h * nrm2);
  if (nrm > 0.0)
    for (double& x : res.phi) x /= nrm;
  res.residual_norm = resid;
  res.iterations = it;
  res.converged = converged;
  return res;
}

inline EigenResult smallest_eigenpair_all(const StiffnessForm& form,
                                          double tol = 1e-10) {
  return smallest_eigenpair(form, std::vector<bool>(form.grid.n, true), tol);
}

// ---------------------------------------------------------------------------
// Binary cache of assembled forms keyed by (s, n, interval, c_gagliardo).
// Format: magic "FSEG0001", then s, c_gagliardo, x_left, x_right as doubles,
// n as int64, then n Toeplitz coefficients.

namespace detail {
inline std::string cache_key(const Grid1D& g, const FracParams& p) {
  char buf[160];
  std::snprintf(buf, sizeof(buf), "form_s%.17g_n%d_l%.17g_r%.17g_c%.17g.bin",
                p.s, g.n, g.x_left, g.x_right, p.c_gagliardo);
  std::string key(buf);
  for (char& c : key)
    if (c == '+' || c == '/' || c == ' ') c = '_';
  return key;
}
}  // namespace detail

inline void save_form(const StiffnessForm& form, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  const auto path = dir / detail::cache_key(form.grid, form.params);
  const auto tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    out.write("FSEG0001", 8);
    const double header[4] = {form.params.s, form.params.c_gagliardo,
                              form.grid.x_left, form.grid.x_right};
    out.write(reinterpret_cast<const char*>(header), sizeof(header));
    const std::int64_t n = form.grid.n;
    out.write(reinterpret_cast<const char*>(&n), sizeof(n));
    out.write(reinterpret_cast<const char*>(form.coeff.data()),
              static_cast<std::streamsize>(form.coeff.size() * sizeof(double)));
    if (!out) throw DataError("save_form: write failed: " + tmp);
  }
  std::filesystem::rename(tmp, path);
}

inline std::optional<StiffnessForm> load_form(const Grid1D& grid,
                                              const FracParams& params,
                                              const std::filesystem::path& dir) {
  const auto path = dir / detail::cache_key(grid, params);
  std::ifstream in(path, std::ios::binary);
  if (!in) return std::nullopt;
  char magic[8];
  in.read(magic, 8);
  if (!in || std::string(magic, 8) != "FSEG0001") return std::nullopt;
  double header[4];
  in.read(reinterpret_cast<char*>(header), sizeof(header));
  std::int64_t n = 0;
  in.read(reinterpret_cast<char*>(&n), sizeof(n));
  if (!in || header[0] != params.s || header[1] != params.c_gagliardo ||
      header[2] != grid.x_left || header[3] != grid.x_right || n != grid.n)
    return std::nullopt;
  std::vector<double> coeff(static_cast<size_t>(n));
  in.read(reinterpret_cast<char*>(coeff.data()),
          static_cast<std::streamsize>(coeff.size() * sizeof(double)));
  if (!in) return std::nullopt;
  return StiffnessForm{grid, params, std::move(coeff)};
}

// Assemble, consulting/populating the cache directory when given.
inline StiffnessForm assemble_form_cached(const Grid1D& grid,
                                          const FracParams& params,
                                          const std::filesystem::path& cache_dir) {
  if (!cache_dir.empty()) {
    if (auto cached = load_form(grid, params, cache_dir)) return *cached;
  }
  StiffnessForm form = assemble_form(grid, params);
  if (!cache_dir.empty()) save_form(form, cache_dir);
  return form;
}

}  // namespace fracseg
