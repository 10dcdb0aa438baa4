#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>
#include <filesystem>

#include "fracseg/fraclap.hpp"
#include "fracseg/quadrature.hpp"
#include "oracles.hpp"

using namespace fracseg;

TEST_CASE("gauss_legendre integrates polynomials exactly") {
  const QuadRule r = gauss_legendre(8);
  // int_{-1}^{1} x^p dx = 2/(p+1) for even p, 0 for odd p; exact up to p=15.
  for (int p = 0; p <= 15; ++p) {
    double acc = 0.0;
    for (int k = 0; k < r.size(); ++k) acc += r.w[k] * std::pow(r.x[k], p);
    const double exact = (p % 2 == 0) ? 2.0 / (p + 1) : 0.0;
    CHECK(acc == doctest::Approx(exact).epsilon(1e-13).scale(1.0));
  }
}

TEST_CASE("gauss_jacobi moments match beta-function values") {
  for (double alpha : {-0.25, 0.0, 0.75}) {
    for (double beta : {-0.25, 0.0, 0.75}) {
      const QuadRule r = gauss_jacobi(10, alpha, beta);
      // \int_{-1}^1 (1-x)^alpha (1+x)^beta x^p dx via the substitution
      // x = 2t-1 and the beta integral (computed here independently with
      // lgamma); checked for p = 0, 1, 2.
      auto moment = [&](int p) {
        // expand x^p = (2t-1)^p and use \int t^{beta+j}(1-t)^alpha 2^{...}
        double acc = 0.0;
        for (int j = 0; j <= p; ++j) {
          const double binom = std::round(std::exp(
              std::lgamma(p + 1.0) - std::lgamma(j + 1.0) - std::lgamma(p - j + 1.0)));
          const double B = std::exp(std::lgamma(beta + 1.0 + j) + std::lgamma(alpha + 1.0) -
                                    std::lgamma(alpha + beta + 2.0 + j));
          acc += binom * std::pow(2.0, j) * std::pow(-1.0, p - j) *
                 std::pow(2.0, alpha + beta + 1.0) * B;
        }
        return acc;
      };
      for (int p = 0; p <= 2; ++p) {
        double acc = 0.0;
        for (int k = 0; k < r.size(); ++k) acc += r.w[k] * std::pow(r.x[k], p);
        CHECK(acc == doctest::Approx(moment(p)).epsilon(1e-12));
      }
    }
  }
}

TEST_CASE("angular rule integrates sin powers") {
  // \int_0^pi cos^2(theta) sin^gamma(theta) dtheta against the closed form
  // B((gamma+1)/2, 3/2) (independent lgamma evaluation).
  for (double gamma : {-0.5, 0.0, 0.5}) {
    const AngularRule ar = angular_rule(24, gamma);
    double acc = 0.0;
    for (int k = 0; k < ar.size(); ++k) acc += ar.w[k] * ar.cos_t[k] * ar.cos_t[k];
    const double exact = std::exp(std::lgamma(0.5 * (gamma + 1.0)) + std::lgamma(1.5) -
                                  std::lgamma(0.5 * gamma + 2.0));
    CHECK(acc == doctest::Approx(exact).epsilon(1e-12));
  }
}

TEST_CASE("form structure: symmetry, positivity, sign pattern") {
  for (double s : {0.25, 0.5, 0.75}) {
    const Grid1D g(-1.0, 1.0, 32);
    const StiffnessForm A = assemble_form(g, FracParams(s));
    CHECK(A.coeff[0] > 0.0);
    for (int m = 1; m < g.n; ++m) CHECK(A.coeff[m] <= 0.0);
    // hat function: positive energy
    std::vector<double> hat(g.n, 0.0);
    hat[g.n / 2] = 1.0;
    CHECK(dot(hat, toeplitz_apply(A, hat)) > 0.0);
    // zero vector: zero energy
    std::vector<double> zero(g.n, 0.0);
    CHECK(dot(zero, toeplitz_apply(A, zero)) == 0.0);
    // positive definiteness on a random vector
    oracles::Rng rng(7);
    std::vector<double> u(g.n);
    for (double& x : u) x = rng.uniform(-1.0, 1.0);
    CHECK(dot(u, toeplitz_apply(A, u)) > 0.0);
  }
}

TEST_CASE("closed-form entries match the autocorrelation oracle") {
  oracles::Rng rng(42);
  for (double s : {0.25, 0.5, 0.6, 0.75}) {
    const Grid1D g(-1.0, 1.5, 24);
    const StiffnessForm A = assemble_form(g, FracParams(s));
    for (int trial = 0; trial < 4; ++trial) {
      std::vector<double> u(g.n);
      for (double& x : u) x = rng.uniform(-1.0, 1.0);
      const double form_val = dot(u, toeplitz_apply(A, u));
      const double oracle = oracles::gagliardo_sq(g, u, s);
      CHECK(form_val == doctest::Approx(oracle).epsilon(1e-9));
    }
  }
}

TEST_CASE("apply: linearity and energy identity") {
  const Grid1D g(-1.0, 1.0, 64);
  const StiffnessForm A = assemble_form(g, FracParams(0.5));
  oracles::Rng rng(3);
  std::vector<double> u(g.n), v(g.n);
  for (double& x : u) x = rng.uniform(-1.0, 1.0);
  for (double& x : v) x = rng.uniform(-1.0, 1.0);
  const double al = 1.7, be = -0.3;
  std::vector<double> uv(g.n);
  for (int i = 0; i < g.n; ++i) uv[i] = al * u[i] + be * v[i];
  const auto Auv = fracseg::apply(A, uv);
  const auto Au = fracseg::apply(A, u);
  const auto Av = fracseg::apply(A, v);
  double max_err = 0.0, scale = 0.0;
  for (int i = 0; i < g.n; ++i) {
    max_err = std::max(max_err, std::abs(Auv[i] - al * Au[i] - be * Av[i]));
    scale = std::max(scale, std::abs(Auv[i]));
  }
  CHECK(max_err <= 1e-12 * scale);
  // <apply(u), u> * h equals u^T A u to 1e-12 relative
  const double lhs = dot(Au, u) * g.h();
  const double rhs = dot(u, toeplitz_apply(A, u));
  CHECK(lhs == doctest::Approx(rhs).epsilon(1e-12));
}

TEST_CASE("smallest_eigenpair vs dense oracle at n = 64") {
  for (double s : {0.3, 0.5, 0.75}) {
    const Grid1D g(-1.0, 1.0, 64);
    const StiffnessForm A = assemble_form(g, FracParams(s));
    const EigenResult er = smallest_eigenpair_all(A);
    CHECK(er.converged);
    Eigen::MatrixXd Ad = A.dense();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(Ad);
    const double lam_oracle = es.eigenvalues()(0) / g.h();
    CHECK(std::abs(er.lambda - lam_oracle) <= 1e-9 * lam_oracle);
    for (double x : er.phi) CHECK(x >= 0.0);
    // residual bound invariant
    CHECK(std::abs(rayleigh(A, er.phi) - er.lambda) <= er.residual_norm + 1e-12);
  }
}

TEST_CASE("mask semantics: consistency, reflection, monotonicity") {
  const Grid1D g(-1.0, 1.0, 64);
  const StiffnessForm A = assemble_form(g, FracParams(0.5));
  // full mask == full-interval eigenvalue
  const EigenResult full = smallest_eigenpair_all(A);
  const EigenResult full2 = smallest_eigenpair(A, std::vector<bool>(g.n, true));
  CHECK(full.lambda == doctest::Approx(full2.lambda).epsilon(1e-14));
  // left half vs right half of a symmetric interval
  std::vector<bool> left(g.n, false), right(g.n, false);
  for (int i = 0; i < g.n / 2; ++i) left[i] = true;
  for (int i = g.n / 2; i < g.n; ++i) right[i] = true;
  const double ll = smallest_eigenpair(A, left).lambda;
  const double lr = smallest_eigenpair(A, right).lambda;
  CHECK(std::abs(ll - lr) <= 1e-10 * ll);
  // empty mask rejected
  CHECK_THROWS_AS(smallest_eigenpair(A, std::vector<bool>(g.n, false)), DataError);
  // domain monotonicity over random nested mask pairs (dense oracle scale n=64)
  oracles::Rng rng(11);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<bool> small(g.n, false), big(g.n, false);
    const int a = static_cast<int>(rng.uniform(0, g.n - 16));
    const int len_small = 8 + static_cast<int>(rng.uniform(0, g.n - a - 8));
    const int grow = static_cast<int>(rng.uniform(0, g.n - a - len_small + 1));
    for (int i = a; i < a + len_small; ++i) small[i] = big[i] = true;
    for (int i = a + len_small; i < std::min(g.n, a + len_small + grow); ++i)
      big[i] = true;
    const double ls = smallest_eigenpair(A, small).lambda;
    const double lb = smallest_eigenpair(A, big).lambda;
    CHECK(ls >= lb - 1e-9);
  }
}

TEST_CASE("variational principle: rayleigh >= lambda1 on masked vectors") {
  const Grid1D g(-1.0, 1.0, 64);
  const StiffnessForm A = assemble_form(g, FracParams(0.4));
  std::vector<bool> mask(g.n, false);
  for (int i = 10; i < 50; ++i) mask[i] = true;
  const double lam = smallest_eigenpair(A, mask).lambda;
  oracles::Rng rng(5);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> u(g.n, 0.0);
    for (int i = 0; i < g.n; ++i)
      if (mask[i]) u[i] = rng.uniform(-1.0, 1.0);
    CHECK(rayleigh(A, u) >= lam - 1e-9);
  }
  // scale invariance of rayleigh
  std::vector<double> u(g.n, 0.0);
  for (int i = 0; i < g.n; ++i)
    if (mask[i]) u[i] = rng.uniform(0.1, 1.0);
  std::vector<double> cu(g.n);
  for (int i = 0; i < g.n; ++i) cu[i] = -3.7 * u[i];
  CHECK(rayleigh(A, u) == doctest::Approx(rayleigh(A, cu)).epsilon(1e-12));
  CHECK_THROWS_AS(rayleigh(A, std::vector<double>(g.n, 0.0)), DataError);
}

TEST_CASE("refinement: lambda1 Cauchy under doubling, factor >= 1.5") {
  // Richardson-refinement oracle: gaps between successive Rayleigh values of
  // the principal pair shrink by >= 1.5 per grid doubling (s = 0.5, (-1,1)).
  // The extrapolated value is this repo's own reference constant.
  std::vector<double> lam;
  for (int n : {128, 256, 512}) {
    const Grid1D g(-1.0, 1.0, n);
    lam.push_back(smallest_eigenpair_all(assemble_form(g, FracParams(0.5))).lambda);
  }
  const double gap1 = std::abs(lam[1] - lam[0]);
  const double gap2 = std::abs(lam[2] - lam[1]);
  CHECK(gap2 * 1.5 <= gap1);
  // Reference constant from a pre-recorded refinement study of this solver
  // (Richardson extrapolation of the n = 512/1024/2048 sequence).
  const double lambda1_ref = 7.27453;
  CHECK(std::abs(lam[2] - lambda1_ref) < 5e-3);
}

TEST_CASE("parameter validation") {
  CHECK_THROWS_AS(FracParams(1.5), UsageError);
  CHECK_THROWS_AS(FracParams(0.0), UsageError);
  CHECK_THROWS_AS(Grid1D(-1.0, 1.0, 4), UsageError);
  CHECK_THROWS_AS(Grid1D(1.0, -1.0, 32), UsageError);
  const FracParams p(0.75);
  CHECK(p.a() == doctest::Approx(-0.5));
  CHECK(p.alpha_star() == doctest::Approx(0.5));
  CHECK(FracParams(0.3).alpha_star() == doctest::Approx(0.3));
}

TEST_CASE("binary cache round-trip") {
  namespace fs = std::filesystem;
  const fs::path dir = fs::temp_directory_path() / "fracseg_cache_test";
  fs::remove_all(dir);
  const Grid1D g(-1.0, 1.0, 32);
  const FracParams p(0.6);
  const StiffnessForm A = assemble_form_cached(g, p, dir);
  const auto loaded = load_form(g, p, dir);
  REQUIRE(loaded.has_value());
  CHECK(loaded->coeff == A.coeff);
  // different key -> miss
  CHECK(!load_form(g, FracParams(0.61), dir).has_value());
  CHECK(!load_form(Grid1D(-1.0, 1.0, 33), p, dir).has_value());
  fs::remove_all(dir);
}
