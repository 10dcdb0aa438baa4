#pragma once
// Half-plane field abstraction consumed by the frequency-function quadratures.
//
// The natural derivative pair near the degenerate line y = 0 is
//   dx  = \partial_x u            (smooth up to y = 0)
//   yady = y^a \partial_y u       (the conormal-regularized derivative; smooth
//                                  up to y = 0 even when \partial_y u blows up
//                                  like y^{-a})
// so fields expose exactly these; plain gradients are recovered by y^{-a}.

#include <cmath>
#include <memory>
#include <vector>

#include "params.hpp"

namespace fracseg {

struct Field {
  virtual ~Field() = default;
  virtual double value(double x, double y) const = 0;
  virtual double dx(double x, double y) const = 0;
  virtual double yady(double x, double y) const = 0;  // y^a * du/dy
  // Boundary value on the trace line y = 0.  Overridden by evaluators whose
  // value() is only defined for y > 0.
  virtual double trace_value(double x) const { return value(x, 0.0); }
};

// The entire L_a-harmonic function y^{1-a} (zero trace, constant conormal
// derivative); homogeneous of degree 1-a = 2s about any trace point.
struct Y1maField : Field {
  double a;
  explicit Y1maField(const FracParams& p) : a(p.a()) {}
  double value(double, double y) const override { return std::pow(y, 1.0 - a); }
  double dx(double, double) const override { return 0.0; }
  double yady(double, double) const override { return 1.0 - a; }
};

// |X - X0|^kappa with kappa = 2s-1 = -a (radial about a trace point X0).
// For n = 1 this is exactly L_a-harmonic in the whole plane when kappa = -a:
// div(y^a grad rho^kappa) = kappa (kappa + a + n - 1) y^a rho^{kappa-2} = 0.
struct RadialPowField : Field {
  double x0, kappa, a;
  RadialPowField(double x0_, const FracParams& p) : x0(x0_), kappa(-p.a()), a(p.a()) {}
  double value(double x, double y) const override {
    return std::pow(std::hypot(x - x0, y), kappa);
  }
  double dx(double x, double y) const override {
    const double rho = std::hypot(x - x0, y);
    return kappa * std::pow(rho, kappa - 2.0) * (x - x0);
  }
  double yady(double x, double y) const override {
    const double rho = std::hypot(x - x0, y);
    return std::pow(y, a) * kappa * std::pow(rho, kappa - 2.0) * y;
  }
};

// c0 + c1 * inner field.
struct AffineOfField : Field {
  const Field& f;
  double c0, c1;
  AffineOfField(const Field& f_, double c0_, double c1_) : f(f_), c0(c0_), c1(c1_) {}
  double value(double x, double y) const override { return c0 + c1 * f.value(x, y); }
  double dx(double x, double y) const override { return c1 * f.dx(x, y); }
  double yady(double x, double y) const override { return c1 * f.yady(x, y); }
  double trace_value(double x) const override { return c0 + c1 * f.trace_value(x); }
};

// Spatially rescaled field u(lambda (X - X0) + X0) about a trace point x0.
struct ScaledField : Field {
  const Field& f;
  double x0, lambda, a;
  ScaledField(const Field& f_, double x0_, double lambda_, const FracParams& p)
      : f(f_), x0(x0_), lambda(lambda_), a(p.a()) {}
  double value(double x, double y) const override {
    return f.value(x0 + lambda * (x - x0), lambda * y);
  }
  double dx(double x, double y) const override {
    return lambda * f.dx(x0 + lambda * (x - x0), lambda * y);
  }
  double yady(double x, double y) const override {
    // y^a d/dy [u(.., lambda y)] = lambda y^a (du/dy)(lambda y)
    //   = lambda^{1-a} (lambda y)^a (du/dy)(lambda y)
    return std::pow(lambda, 1.0 - a) * f.yady(x0 + lambda * (x - x0), lambda * y);
  }
  double trace_value(double x) const override {
    return f.trace_value(x0 + lambda * (x - x0));
  }
};

// Neumann-frequency substitution w = u - u(X0) - y^{1-a} f(u(X0)) / (1-a).
struct NeumannShiftField : Field {
  const Field& f;
  double u0, f0, a;
  NeumannShiftField(const Field& f_, double u0_, double f0_, const FracParams& p)
      : f(f_), u0(u0_), f0(f0_), a(p.a()) {}
  double value(double x, double y) const override {
    return f.value(x, y) - u0 - std::pow(y, 1.0 - a) * f0 / (1.0 - a);
  }
  double dx(double x, double y) const override { return f.dx(x, y); }
  double yady(double x, double y) const override { return f.yady(x, y) - f0; }
  double trace_value(double x) const override { return f.trace_value(x) - u0; }
};

}  // namespace fracseg
