#pragma once
// Gauss quadrature rules: Gauss-Legendre and Gauss-Jacobi via Golub-Welsch,
// plus the angular rules on (0, pi) with weight (sin theta)^gamma used by the
// frequency-function integrals.

#include <Eigen/Dense>
#include <cmath>
#include <vector>

#include "params.hpp"

namespace fracseg {

struct QuadRule {
  std::vector<double> x;  // nodes
  std::vector<double> w;  // weights
  int size() const { return static_cast<int>(x.size()); }
};

namespace detail {
inline double beta_fn(double p, double q) {
  return std::exp(std::lgamma(p) + std::lgamma(q) - std::lgamma(p + q));
}
}  // namespace detail

// Gauss-Jacobi rule: integrates f(xi) (1-xi)^alpha (1+xi)^beta exactly on
// (-1,1) for polynomials f up to degree 2n-1.  Golub-Welsch on the symmetric
// tridiagonal Jacobi matrix of the monic recurrence.
inline QuadRule gauss_jacobi(int n, double alpha, double beta) {
  if (n < 1 || alpha <= -1.0 || beta <= -1.0)
    throw UsageError("gauss_jacobi: need n >= 1 and alpha, beta > -1");
  Eigen::VectorXd diag(n), sub(n > 1 ? n - 1 : 1);
  const double ab = alpha + beta;
  for (int k = 0; k < n; ++k) {
    if (k == 0) {
      diag(0) = (beta - alpha) / (ab + 2.0);
    } else {
      const double d = 2.0 * k + ab;
      diag(k) = (beta * beta - alpha * alpha) / (d * (d + 2.0));
    }
  }
  for (int k = 1; k < n; ++k) {
    double b2;
    if (k == 1) {
      b2 = 4.0 * (1.0 + alpha) * (1.0 + beta) /
           ((2.0 + ab) * (2.0 + ab) * (3.0 + ab));
    } else {
      const double d = 2.0 * k + ab;
      b2 = 4.0 * k * (k + alpha) * (k + beta) * (k + ab) /
           (d * d * (d + 1.0) * (d - 1.0));
    }
    sub(k - 1) = std::sqrt(b2);
  }
  Eigen::MatrixXd J = Eigen::MatrixXd::Zero(n, n);
  for (int k = 0; k < n; ++k) J(k, k) = diag(k);
  for (int k = 1; k < n; ++k) J(k, k - 1) = J(k - 1, k) = sub(k - 1);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(J);
  const double mu0 =
      std::pow(2.0, ab + 1.0) * detail::beta_fn(alpha + 1.0, beta + 1.0);
  QuadRule r;
  r.x.resize(n);
  r.w.resize(n);
  for (int k = 0; k < n; ++k) {
    r.x[k] = es.eigenvalues()(k);
    const double v = es.eigenvectors()(0, k);
    r.w[k] = mu0 * v * v;
  }
  return r;
}

// Gauss-Legendre on (-1,1).
inline QuadRule gauss_legendre(int n) { return gauss_jacobi(n, 0.0, 0.0); }

// Gauss-Legendre mapped to (a, b).
inline QuadRule gauss_legendre_ab(int n, double a, double b) {
  QuadRule r = gauss_legendre(n);
  const double mid = 0.5 * (a + b), half = 0.5 * (b - a);
  for (int k = 0; k < n; ++k) {
    r.x[k] = mid + half * r.x[k];
    r.w[k] *= half;
  }
  return r;
}

// Angular rule on (0, pi) for integrals of the form
//   int_0^pi f(theta) (sin theta)^gamma dtheta,  gamma > -1,
// with f smooth in cos(theta).  Substituting xi = cos theta gives the Jacobi
// weight (1-xi^2)^{(gamma-1)/2}, i.e. alpha = beta = (gamma-1)/2.
struct AngularRule {
  std::vector<double> theta;
  std::vector<double> cos_t;
  std::vector<double> sin_t;
  std::vector<double> w;  // integrates f against (sin)^gamma when summed
  int size() const { return static_cast<int>(theta.size()); }
};

inline AngularRule angular_rule(int n, double gamma) {
  const QuadRule gj = gauss_jacobi(n, 0.5 * (gamma - 1.0), 0.5 * (gamma - 1.0));
  AngularRule r;
  r.theta.resize(n);
  r.cos_t.resize(n);
  r.sin_t.resize(n);
  r.w.resize(n);
  for (int k = 0; k < n; ++k) {
    const double xi = gj.x[k];
    r.theta[k] = std::acos(xi);
    r.cos_t[k] = xi;
    r.sin_t[k] = std::sqrt(std::max(0.0, 1.0 - xi * xi));
    r.w[k] = gj.w[k];
  }
  return r;
}

}  // namespace fracseg
