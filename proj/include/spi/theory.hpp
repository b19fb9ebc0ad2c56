// Convergence guarantee for the sign-gated momentum update on strongly
// convex smooth objectives: the admissible (r, alpha) region, the constants
// p, q, m, n, z, and an empirical checker for the exponential bound
//   ||theta_k - theta*||^2 <= z^k (1 + z - m) ||theta_0 - theta*||^2.
#pragma once

#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <string>

#include "spi/core.hpp"
#include "spi/metrics.hpp"
#include "spi/objectives.hpp"
#include "spi/optimizers.hpp"
#include "spi/types.hpp"

namespace spi {

struct TheoremParams {
  double mu = 0, L = 0, r = 0, alpha = 0;
  double p = 0;  // 4 + 4r + rL^2
  double q = 0;  // 2r mu - r^2 L^2, > 0 inside the region
  double m = 0;  // 1 + 3a + 2ra + 2a^2 + raL^2 + r^2L^2 - 2r mu
  double n = 0;  // a + 2ra + 2a^2
  double z = 0;  // positive root of x^2 - m x - n = 0, < 1 inside the region
};

namespace detail {

// Region membership uses strict inequalities with a relative guard band so
// boundary round-off cannot flip the verdict.
constexpr double kRegionGuard = 1e-9;

inline void validate_curvature(double mu, double L) {
  if (!(mu > 0.0) || !(L >= mu))
    throw ConfigError("admissible region requires 0 < mu <= L");
}

}  // namespace detail

struct AdmissibleRegion {
  double mu = 0, L = 0;
  double r_max = 0;  // 2 mu / L^2

  // Momentum ceiling (-p + sqrt(p^2 + 16 q)) / 8 at learning rate r; positive
  // over the open interval (0, r_max) and -> 0 as r -> r_max.
  double alpha_max(double r) const {
    if (!(r > 0.0) || !(r < r_max))
      throw RegionViolation("alpha_max: r must lie in (0, 2*mu/L^2)");
    const double p = 4.0 + 4.0 * r + r * L * L;
    const double q = 2.0 * r * mu - r * r * L * L;
    return (-p + std::sqrt(p * p + 16.0 * q)) / 8.0;
  }
};

inline AdmissibleRegion admissible_region(double mu, double L) {
  detail::validate_curvature(mu, L);
  return {mu, L, 2.0 * mu / (L * L)};
}

// Evaluates all constants for (r, alpha) strictly inside the region; throws
// RegionViolation naming the violated constraint otherwise.  Also asserts the
// consequences the bound relies on: z < 1, 1 + z - m > 0, and m + n < 1.
inline TheoremParams theorem_constants(double mu, double L, double r,
                                       double alpha) {
  const AdmissibleRegion region = admissible_region(mu, L);
  if (!(r > 0.0)) throw RegionViolation("r must be > 0");
  if (!(r < region.r_max * (1.0 - detail::kRegionGuard)))
    throw RegionViolation("r must be < 2*mu/L^2");
  const double amax = region.alpha_max(r);
  if (!(alpha > 0.0)) throw RegionViolation("alpha must be > 0");
  if (!(alpha < amax * (1.0 - detail::kRegionGuard)))
    throw RegionViolation("alpha must be < alpha_max(r)");

  TheoremParams tp;
  tp.mu = mu;
  tp.L = L;
  tp.r = r;
  tp.alpha = alpha;
  tp.p = 4.0 + 4.0 * r + r * L * L;
  tp.q = 2.0 * r * mu - r * r * L * L;
  tp.m = 1.0 + 3.0 * alpha + 2.0 * r * alpha + 2.0 * alpha * alpha +
         r * alpha * L * L + r * r * L * L - 2.0 * r * mu;
  tp.n = alpha + 2.0 * r * alpha + 2.0 * alpha * alpha;
  tp.z = (tp.m + std::sqrt(tp.m * tp.m + 4.0 * tp.n)) / 2.0;
  if (!(tp.q > 0.0)) throw RegionViolation("q = 2*r*mu - r^2*L^2 must be > 0");
  if (!(tp.m + tp.n < 1.0))
    throw RegionViolation("m + n must be < 1 inside the region");
  if (!(tp.z < 1.0)) throw RegionViolation("z must be < 1 inside the region");
  if (!(1.0 + tp.z - tp.m > 0.0))
    throw RegionViolation("bound prefactor 1 + z - m must be > 0");
  return tp;
}

struct BoundCheck {
  bool holds = false;
  double worst_margin = 0.0;  // min over k of bound_k - actual_k (raw)
};

// Runs the sign-gated momentum update for K steps on a strongly convex
// quadratic and compares the squared residual against the theoretical
// envelope at every step.
//
// Once the iterate parks within a few ulps of theta* the measured residual
// reflects float quantization rather than the dynamics, while the envelope
// keeps shrinking geometrically; residuals below that resolution floor are
// therefore accepted regardless of the envelope.  worst_margin stays raw, so
// a floor-rescued step shows up as a slightly negative margin.
inline BoundCheck check_bound(const Objective& objective, double r, double alpha,
                              const ParamVector& theta0, long K) {
  if (!objective.strong_convexity_mu || !objective.smoothness_L ||
      !objective.optimum)
    throw ConfigError("check_bound requires an objective with mu, L and a known optimum");
  if (objective.optimum->size() != theta0.size())
    throw ConfigError("check_bound: theta0 dimension mismatch");
  const TheoremParams tp = theorem_constants(*objective.strong_convexity_mu,
                                             *objective.smoothness_L, r, alpha);
  const ParamVector& opt = *objective.optimum;

  double scale = 1.0;
  for (std::size_t i = 0; i < theta0.size(); ++i)
    scale = std::max({scale, std::fabs(opt[i]), std::fabs(theta0[i])});
  const double ulp = 16.0 * std::numeric_limits<double>::epsilon() * scale;
  const double quantization_floor = static_cast<double>(theta0.size()) * ulp * ulp;

  OptimizerState state = make_state(OptimizerKind::SPI, theta0.size(),
                                    {{"r", r}, {"alpha", alpha}});
  ParamVector theta = theta0;
  const double a0 = dist2(theta0, opt) * dist2(theta0, opt);
  const double prefactor = (1.0 + tp.z - tp.m) * a0;
  BoundCheck out{true, std::numeric_limits<double>::infinity()};
  double zk = 1.0;
  for (long k = 1; k <= K; ++k) {
    const ParamVector g = objective.eval(theta).gradient;
    spi_step(state, theta, g);
    const double res = dist2(theta, opt);
    const double actual = res * res;
    zk *= tp.z;
    const double bound = zk * prefactor;
    out.worst_margin = std::min(out.worst_margin, bound - actual);
    if (actual > bound && actual > quantization_floor) out.holds = false;
  }
  return out;
}

struct RateComparison {
  std::optional<long> spi_hit;
  std::optional<long> mom_hit;
};

// First-hit steps (tol 1e-5) of the sign-gated update vs plain momentum
// under identical (r, alpha, theta0).  Measures only; callers assert on
// curated instances.
inline RateComparison compare_rate_vs_mom(const Objective& objective, double r,
                                          double alpha, const ParamVector& theta0,
                                          long K) {
  if (!objective.optimum)
    throw ConfigError("compare_rate_vs_mom requires a known optimum");
  RunConfig cfg;
  cfg.hyperparams = {{"r", r}, {"alpha", alpha}};
  cfg.theta0 = theta0;
  cfg.max_steps = K;
  cfg.optimizer = OptimizerKind::SPI;
  const Trajectory spi = run(objective, cfg);
  cfg.optimizer = OptimizerKind::MOM;
  const Trajectory mom = run(objective, cfg);
  return {first_hit(spi, *objective.optimum, 1e-5),
          first_hit(mom, *objective.optimum, 1e-5)};
}

}  // namespace spi
