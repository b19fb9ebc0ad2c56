// Deterministic run loop: drives one optimizer over one objective and
// records the trajectory.  A run is single-threaded and owns its state;
// distinct runs may execute in parallel.  Trajectories are immutable after
// production.
#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "spi/objectives.hpp"
#include "spi/optimizers.hpp"
#include "spi/types.hpp"

namespace spi {

struct TrajectoryPoint {
  long step = 0;
  ParamVector theta;
  // |f(theta) - f(theta*)| when the optimum is known, raw f(theta) otherwise.
  double loss = 0.0;
  // ||theta - theta*||_2, NaN when the optimum is unknown.
  double residual_norm = std::numeric_limits<double>::quiet_NaN();
  double state_delay = 0.0;
  std::vector<std::uint8_t> gate_mask;  // all-ones for non-gating optimizers
};

struct Trajectory {
  std::vector<TrajectoryPoint> points;
  bool diverged = false;
  std::optional<long> diverged_at;
};

struct RunConfig {
  OptimizerKind optimizer = OptimizerKind::SGD;
  std::map<std::string, double> hyperparams;
  ParamVector theta0;
  long max_steps = 100;
  double divergence_threshold = 1e12;
  std::uint64_t seed = 0;  // unused by the deterministic 2D runs; kept for parity with stochastic training
};

namespace detail {

inline bool exceeds_threshold(const ParamVector& theta, double threshold) {
  for (double x : theta)
    if (!std::isfinite(x) || std::fabs(x) > threshold) return true;
  return false;
}

}  // namespace detail

// Runs `config.max_steps` updates from theta0, recording point 0 before any
// update.  Two invocations with the same inputs produce bit-identical
// trajectories.  Stops early, with diverged = true and the diverging point
// recorded, at the first step whose loss or parameter is non-finite or
// whose |theta_i| exceeds divergence_threshold.
inline Trajectory run(const Objective& objective, const RunConfig& config) {
  if (objective.dimension != config.theta0.size())
    throw ConfigError("theta0 dimension " + std::to_string(config.theta0.size()) +
                      " does not match objective dimension " +
                      std::to_string(objective.dimension));
  if (config.max_steps < 1) throw ConfigError("max_steps must be >= 1");
  if (!(config.divergence_threshold > 0.0))
    throw ConfigError("divergence_threshold must be > 0");
  OptimizerState state =
      make_state(config.optimizer, config.theta0.size(), config.hyperparams);

  const bool have_opt = objective.optimum.has_value();
  const double f_star = have_opt ? objective.eval(*objective.optimum).loss : 0.0;
  const auto display_loss = [&](double raw) {
    return have_opt ? std::fabs(raw - f_star) : raw;
  };
  const auto residual = [&](const ParamVector& theta) {
    return have_opt ? dist2(theta, *objective.optimum)
                    : std::numeric_limits<double>::quiet_NaN();
  };
  const GradFn oracle = [&](const ParamVector& at) {
    return objective.eval(at).gradient;
  };

  Trajectory traj;
  traj.points.reserve(static_cast<std::size_t>(config.max_steps) + 1);
  ParamVector theta = config.theta0;
  EvalResult cur = objective.eval(theta);
  traj.points.push_back({0, theta, display_loss(cur.loss), residual(theta), 0.0,
                         std::vector<std::uint8_t>(theta.size(), 1)});

  for (long t = 1; t <= config.max_steps; ++t) {
    StepDiagnostics dg = state.kind == OptimizerKind::NAG
                             ? nag_step(state, theta, oracle)
                             : step(state, theta, cur.gradient);
    cur = objective.eval(theta);
    traj.points.push_back({t, theta, display_loss(cur.loss), residual(theta),
                           dg.state_delay, dg.gate_mask});
    if (!std::isfinite(cur.loss) ||
        detail::exceeds_threshold(theta, config.divergence_threshold)) {
      traj.diverged = true;
      traj.diverged_at = t;
      break;
    }
  }
  return traj;
}

}  // namespace spi
