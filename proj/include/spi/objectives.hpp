// Closed-form 2D benchmark functions with analytic gradients and known
// optima, plus a configurable strongly convex quadratic family.
#pragma once

#include <array>
#include <cmath>
#include <functional>
#include <numbers>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "spi/types.hpp"

namespace spi {

// Evaluation contract: loss and gradient at a point, with curvature constants
// and a known optimum where applicable.  Objectives are immutable and freely
// shareable across concurrent runs.
struct Objective {
  std::string name;
  std::size_t dimension = 2;
  std::function<EvalResult(const ParamVector&)> eval;
  std::optional<ParamVector> optimum;
  std::optional<double> strong_convexity_mu;  // mu > 0 where known
  std::optional<double> smoothness_L;         // L >= mu where known
  // Plotting/benchmark window {xmin, xmax, ymin, ymax}; 2D objectives only.
  std::optional<std::array<double, 4>> plot_domain;
};

// Diagonal quadratic f(theta) = sum_i a_i (theta_i - c_i)^2 with exact
// mu = 2 min a_i and L = 2 max a_i.
struct QuadraticSpec {
  ParamVector diag;    // the a_i, all > 0
  ParamVector center;  // the optimum c
};

// f1: elongated quadratic bowl, loss = x^2 + 50 y^2.
inline const Objective& f1() {
  static const Objective obj{
      "f1",
      2,
      [](const ParamVector& t) -> EvalResult {
        const double x = t[0], y = t[1];
        return {x * x + 50.0 * y * y, {2.0 * x, 100.0 * y}};
      },
      ParamVector{0.0, 0.0},
      2.0,
      100.0,
      std::array<double, 4>{-3.0, 3.0, -3.0, 3.0}};
  return obj;
}

// f2: McCormick, sin(x+y) + (x-y)^2 - 1.5 x + 2.5 y + 1.
// Critical points satisfy x - y = 1 and cos(x+y) = -1/2; the global minimum
// takes the x+y = -2*pi/3 branch, giving (1/2 - pi/3, -1/2 - pi/3).
inline const Objective& f2() {
  constexpr double pi = std::numbers::pi;
  static const Objective obj{
      "f2",
      2,
      [](const ParamVector& t) -> EvalResult {
        const double x = t[0], y = t[1];
        const double c = std::cos(x + y);
        const double loss =
            std::sin(x + y) + (x - y) * (x - y) - 1.5 * x + 2.5 * y + 1.0;
        return {loss, {c + 2.0 * (x - y) - 1.5, c - 2.0 * (x - y) + 2.5}};
      },
      ParamVector{0.5 - pi / 3.0, -0.5 - pi / 3.0},
      std::nullopt,
      std::nullopt,
      std::array<double, 4>{-3.0, 5.0, -4.0, 7.0}};
  return obj;
}

// f3: Rosenbrock, (1-x)^2 + 100 (y - x^2)^2.
inline const Objective& f3() {
  static const Objective obj{
      "f3",
      2,
      [](const ParamVector& t) -> EvalResult {
        const double x = t[0], y = t[1];
        const double u = 1.0 - x, w = y - x * x;
        return {u * u + 100.0 * w * w,
                {-2.0 * u - 400.0 * x * w, 200.0 * w}};
      },
      ParamVector{1.0, 1.0},
      std::nullopt,
      std::nullopt,
      std::array<double, 4>{-2.0, 5.0, -3.0, 5.0}};
  return obj;
}

// f4: Goldstein-Price, the classic two-factor polynomial with minimum 3 at
// (0, -1).  Gradient by the product rule.
inline const Objective& f4() {
  static const Objective obj{
      "f4",
      2,
      [](const ParamVector& t) -> EvalResult {
        const double x = t[0], y = t[1];
        const double w1 = x + y + 1.0;
        const double ain = 19.0 - 14.0 * x + 3.0 * x * x - 14.0 * y +
                           6.0 * x * y + 3.0 * y * y;
        const double A = 1.0 + w1 * w1 * ain;
        const double dain = -14.0 + 6.0 * x + 6.0 * y;  // same for x and y
        const double dAx = 2.0 * w1 * ain + w1 * w1 * dain;
        const double dAy = dAx;
        const double w2 = 2.0 * x - 3.0 * y;
        const double bin = 18.0 - 32.0 * x + 12.0 * x * x + 48.0 * y -
                           36.0 * x * y + 27.0 * y * y;
        const double B = 30.0 + w2 * w2 * bin;
        const double dBx =
            4.0 * w2 * bin + w2 * w2 * (-32.0 + 24.0 * x - 36.0 * y);
        const double dBy =
            -6.0 * w2 * bin + w2 * w2 * (48.0 - 36.0 * x + 54.0 * y);
        return {A * B, {dAx * B + A * dBx, dAy * B + A * dBy}};
      },
      ParamVector{0.0, -1.0},
      std::nullopt,
      std::nullopt,
      std::array<double, 4>{-5.0, 5.0, -5.0, 5.0}};
  return obj;
}

// f5: product of cosine bumps, -(cos x + 1)(cos 2y + 1), minimum -4 at the
// origin.
inline const Objective& f5() {
  static const Objective obj{
      "f5",
      2,
      [](const ParamVector& t) -> EvalResult {
        const double x = t[0], y = t[1];
        const double cx = std::cos(x) + 1.0, cy = std::cos(2.0 * y) + 1.0;
        return {-cx * cy,
                {std::sin(x) * cy, cx * 2.0 * std::sin(2.0 * y)}};
      },
      ParamVector{0.0, 0.0},
      std::nullopt,
      std::nullopt,
      std::array<double, 4>{-3.0, 3.0, -3.0, 3.0}};
  return obj;
}

// Builds the diagonal quadratic objective for a spec; throws on a_i <= 0 or
// shape mismatch.
inline Objective quadratic(const QuadraticSpec& spec) {
  if (spec.diag.empty() || spec.diag.size() != spec.center.size())
    throw ConfigError("quadratic: diag and center must be non-empty and of equal size");
  double lo = spec.diag[0], hi = spec.diag[0];
  for (double a : spec.diag) {
    if (!(a > 0.0)) throw ConfigError("quadratic: all diagonal entries must be > 0");
    lo = std::min(lo, a);
    hi = std::max(hi, a);
  }
  Objective obj;
  obj.name = "quadratic";
  obj.dimension = spec.diag.size();
  obj.optimum = spec.center;
  obj.strong_convexity_mu = 2.0 * lo;
  obj.smoothness_L = 2.0 * hi;
  if (spec.diag.size() == 2)
    obj.plot_domain = std::array<double, 4>{
        spec.center[0] - 3.0, spec.center[0] + 3.0, spec.center[1] - 3.0,
        spec.center[1] + 3.0};
  obj.eval = [diag = spec.diag, center = spec.center](const ParamVector& t) -> EvalResult {
    EvalResult r;
    r.gradient.resize(t.size());
    for (std::size_t i = 0; i < t.size(); ++i) {
      const double e = t[i] - center[i];
      r.loss += diag[i] * e * e;
      r.gradient[i] = 2.0 * diag[i] * e;
    }
    return r;
  };
  return obj;
}

// Central-difference gradient, (f(theta + h e_i) - f(theta - h e_i)) / 2h.
inline ParamVector finite_diff_grad(const Objective& obj, const ParamVector& theta,
                                    double h) {
  ParamVector g(theta.size());
  ParamVector probe = theta;
  for (std::size_t i = 0; i < theta.size(); ++i) {
    probe[i] = theta[i] + h;
    const double fp = obj.eval(probe).loss;
    probe[i] = theta[i] - h;
    const double fm = obj.eval(probe).loss;
    probe[i] = theta[i];
    g[i] = (fp - fm) / (2.0 * h);
  }
  return g;
}

inline const std::vector<std::string>& objective_names() {
  static const std::vector<std::string> names{"f1", "f2", "f3", "f4", "f5"};
  return names;
}

inline const Objective& objective_by_name(const std::string& name) {
  if (name == "f1") return f1();
  if (name == "f2") return f2();
  if (name == "f3") return f3();
  if (name == "f4") return f4();
  if (name == "f5") return f5();
  throw ConfigError("unknown objective '" + name + "'");
}

}  // namespace spi
