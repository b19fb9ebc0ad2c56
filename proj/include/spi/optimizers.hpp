// The nine update rules raced by the harness: SGD, MOM, NAG, CI, SPI, PID,
// Adam, RMSprop, AddSign.  Step functions are deterministic functions of
// (state, theta, grad): no global state, same inputs give bitwise-identical
// outputs.  One state is exclusively owned by one run.
#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "spi/types.hpp"

namespace spi {

enum class OptimizerKind { SGD, MOM, NAG, CI, SPI, PID, ADAM, RMSPROP, ADDSIGN };

inline const char* kind_name(OptimizerKind k) {
  switch (k) {
    case OptimizerKind::SGD: return "sgd";
    case OptimizerKind::MOM: return "mom";
    case OptimizerKind::NAG: return "nag";
    case OptimizerKind::CI: return "ci";
    case OptimizerKind::SPI: return "spi";
    case OptimizerKind::PID: return "pid";
    case OptimizerKind::ADAM: return "adam";
    case OptimizerKind::RMSPROP: return "rmsprop";
    case OptimizerKind::ADDSIGN: return "addsign";
  }
  return "?";
}

inline OptimizerKind parse_kind(const std::string& s) {
  if (s == "sgd" || s == "gd") return OptimizerKind::SGD;
  if (s == "mom") return OptimizerKind::MOM;
  if (s == "nag") return OptimizerKind::NAG;
  if (s == "ci") return OptimizerKind::CI;
  if (s == "spi") return OptimizerKind::SPI;
  if (s == "pid") return OptimizerKind::PID;
  if (s == "adam") return OptimizerKind::ADAM;
  if (s == "rmsprop") return OptimizerKind::RMSPROP;
  if (s == "addsign") return OptimizerKind::ADDSIGN;
  throw ConfigError("unknown optimizer '" + s + "'");
}

struct HyperParams {
  double r = 0.0;         // learning rate, > 0
  double alpha = 0.0;     // momentum coefficient, in [0, 1)
  double beta = 0.0;      // CI gradient-magnitude threshold, >= 0 or +inf
  double kd = 0.0;        // PID derivative gain
  double beta1 = 0.9;     // Adam first-moment decay
  double beta2 = 0.999;   // Adam second-moment decay / RMSprop rho
  double epsilon = 1e-8;  // denominator guard for Adam/RMSprop
};

struct OptimizerState {
  OptimizerKind kind = OptimizerKind::SGD;
  HyperParams hyper;
  ParamVector v;          // velocity (descent step, subtracted from theta)
  ParamVector d;          // PID derivative buffer
  ParamVector prev_grad;  // PID previous gradient
  ParamVector m1;         // first-moment accumulator (Adam/AddSign)
  ParamVector m2;         // second-moment accumulator (Adam/RMSprop)
  long t = 0;             // completed steps
};

struct StepDiagnostics {
  // Per-dimension momentum-kept indicator; all-ones for every kind except SPI
  // and CI.
  std::vector<std::uint8_t> gate_mask;
  // State delay: distance between the new iterate and the point whose
  // gradient drove the step.  Scalar L2 norm plus the per-dimension vector.
  double state_delay = 0.0;
  ParamVector state_delay_dims;
  // theta_t - theta_{t+1}.
  ParamVector raw_update;
};

using GradFn = std::function<ParamVector(const ParamVector&)>;

namespace detail {

inline StepDiagnostics blank_diag(std::size_t n) {
  StepDiagnostics dg;
  dg.gate_mask.assign(n, 1);
  dg.state_delay_dims.assign(n, 0.0);
  dg.raw_update.assign(n, 0.0);
  return dg;
}

inline void finish_delay(StepDiagnostics& dg) {
  double s = 0.0;
  for (double x : dg.state_delay_dims) s += x * x;
  dg.state_delay = std::sqrt(s);
}

}  // namespace detail

// theta' = theta - r g.  A pure P controller; delay |r g|.
inline StepDiagnostics sgd_step(OptimizerState& s, ParamVector& theta,
                                const ParamVector& grad) {
  const double r = s.hyper.r;
  StepDiagnostics dg = detail::blank_diag(theta.size());
  for (std::size_t i = 0; i < theta.size(); ++i) {
    s.v[i] = r * grad[i];
    theta[i] -= s.v[i];
    dg.raw_update[i] = s.v[i];
    dg.state_delay_dims[i] = std::fabs(r * grad[i]);
  }
  detail::finish_delay(dg);
  ++s.t;
  return dg;
}

// v' = alpha v + r g; theta' = theta - v'.  Delay |alpha v + r g|.
inline StepDiagnostics mom_step(OptimizerState& s, ParamVector& theta,
                                const ParamVector& grad) {
  const double r = s.hyper.r, a = s.hyper.alpha;
  StepDiagnostics dg = detail::blank_diag(theta.size());
  for (std::size_t i = 0; i < theta.size(); ++i) {
    s.v[i] = a * s.v[i] + r * grad[i];
    theta[i] -= s.v[i];
    dg.raw_update[i] = s.v[i];
    dg.state_delay_dims[i] = std::fabs(s.v[i]);
  }
  detail::finish_delay(dg);
  ++s.t;
  return dg;
}

// Nesterov: gradient taken at the lookahead point theta - alpha v.  Consumes
// a gradient oracle instead of a precomputed gradient.
inline StepDiagnostics nag_step(OptimizerState& s, ParamVector& theta,
                                const GradFn& grad_at) {
  const double r = s.hyper.r, a = s.hyper.alpha;
  ParamVector look(theta.size());
  for (std::size_t i = 0; i < theta.size(); ++i) look[i] = theta[i] - a * s.v[i];
  const ParamVector g = grad_at(look);
  StepDiagnostics dg = detail::blank_diag(theta.size());
  for (std::size_t i = 0; i < theta.size(); ++i) {
    s.v[i] = a * s.v[i] + r * g[i];
    theta[i] -= s.v[i];
    dg.raw_update[i] = s.v[i];
    dg.state_delay_dims[i] = std::fabs(r * g[i]);
  }
  detail::finish_delay(dg);
  ++s.t;
  return dg;
}

// Conditional integration: momentum is kept in dimension i only while
// |grad_i| < beta.  beta = 0 reduces to SGD, beta = +inf to MOM, bitwise:
// the kept branch is written exactly like mom_step's expression and the
// dropped branch exactly like sgd_step's.
inline StepDiagnostics ci_step(OptimizerState& s, ParamVector& theta,
                               const ParamVector& grad) {
  const double r = s.hyper.r, a = s.hyper.alpha, b = s.hyper.beta;
  StepDiagnostics dg = detail::blank_diag(theta.size());
  for (std::size_t i = 0; i < theta.size(); ++i) {
    const bool keep = std::fabs(grad[i]) < b;
    s.v[i] = keep ? a * s.v[i] + r * grad[i] : r * grad[i];
    theta[i] -= s.v[i];
    dg.gate_mask[i] = keep ? 1 : 0;
    dg.raw_update[i] = s.v[i];
    dg.state_delay_dims[i] = std::fabs(s.v[i]);
  }
  detail::finish_delay(dg);
  ++s.t;
  return dg;
}

// Integral separation: momentum is dropped in dimension i exactly when the
// current gradient and the velocity point in strictly opposite directions,
// sgn(grad_i) * sgn(v_i) = -1.  sgn(0) = 0, so a zero gradient or zero
// velocity keeps the momentum term; with v_i = 0 the kept term is zero
// anyway, so gate-before-decay and decay-before-gate coincide.  When any
// gate fired this step the delay is reported as |r g| (the separated update
// degenerates to a P step there), otherwise |alpha v + r g|.
inline StepDiagnostics spi_step(OptimizerState& s, ParamVector& theta,
                                const ParamVector& grad) {
  const double r = s.hyper.r, a = s.hyper.alpha;
  StepDiagnostics dg = detail::blank_diag(theta.size());
  bool any_fired = false;
  for (std::size_t i = 0; i < theta.size(); ++i) {
    const bool keep = sgn(grad[i]) * sgn(s.v[i]) != -1.0;
    s.v[i] = keep ? a * s.v[i] + r * grad[i] : r * grad[i];
    theta[i] -= s.v[i];
    dg.gate_mask[i] = keep ? 1 : 0;
    dg.raw_update[i] = s.v[i];
    any_fired = any_fired || !keep;
  }
  for (std::size_t i = 0; i < theta.size(); ++i)
    dg.state_delay_dims[i] =
        any_fired ? std::fabs(r * grad[i]) : std::fabs(s.v[i]);
  detail::finish_delay(dg);
  ++s.t;
  return dg;
}

// Momentum plus an exponentially smoothed gradient-difference (derivative)
// term with gain kd.  On the very first step the previous gradient is taken
// equal to the current one, so the derivative term starts at zero.
inline StepDiagnostics pid_step(OptimizerState& s, ParamVector& theta,
                                const ParamVector& grad) {
  const double r = s.hyper.r, a = s.hyper.alpha, kd = s.hyper.kd;
  if (s.t == 0) s.prev_grad = grad;
  StepDiagnostics dg = detail::blank_diag(theta.size());
  for (std::size_t i = 0; i < theta.size(); ++i) {
    s.v[i] = a * s.v[i] + r * grad[i];
    s.d[i] = a * s.d[i] + (1.0 - a) * (grad[i] - s.prev_grad[i]);
    const double before = theta[i];
    theta[i] = theta[i] - s.v[i] - kd * s.d[i];
    dg.raw_update[i] = before - theta[i];
    dg.state_delay_dims[i] = std::fabs(dg.raw_update[i]);
  }
  s.prev_grad = grad;
  detail::finish_delay(dg);
  ++s.t;
  return dg;
}

// Bias-corrected adaptive moments.
inline StepDiagnostics adam_step(OptimizerState& s, ParamVector& theta,
                                 const ParamVector& grad) {
  const double r = s.hyper.r, b1 = s.hyper.beta1, b2 = s.hyper.beta2,
               eps = s.hyper.epsilon;
  ++s.t;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(s.t));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(s.t));
  StepDiagnostics dg = detail::blank_diag(theta.size());
  for (std::size_t i = 0; i < theta.size(); ++i) {
    s.m1[i] = b1 * s.m1[i] + (1.0 - b1) * grad[i];
    s.m2[i] = b2 * s.m2[i] + (1.0 - b2) * grad[i] * grad[i];
    const double mhat = s.m1[i] / c1;
    const double uhat = s.m2[i] / c2;
    const double upd = r * mhat / (std::sqrt(uhat) + eps);
    theta[i] -= upd;
    dg.raw_update[i] = upd;
    dg.state_delay_dims[i] = std::fabs(upd);
  }
  detail::finish_delay(dg);
  return dg;
}

// Running mean of squared gradients (no bias correction); decay rho lives in
// the beta2 slot.
inline StepDiagnostics rmsprop_step(OptimizerState& s, ParamVector& theta,
                                    const ParamVector& grad) {
  const double r = s.hyper.r, rho = s.hyper.beta2, eps = s.hyper.epsilon;
  StepDiagnostics dg = detail::blank_diag(theta.size());
  for (std::size_t i = 0; i < theta.size(); ++i) {
    s.m2[i] = rho * s.m2[i] + (1.0 - rho) * grad[i] * grad[i];
    const double upd = r * grad[i] / (std::sqrt(s.m2[i]) + eps);
    theta[i] -= upd;
    dg.raw_update[i] = upd;
    dg.state_delay_dims[i] = std::fabs(upd);
  }
  detail::finish_delay(dg);
  ++s.t;
  return dg;
}

// Step magnitude scaled by 1 + sign agreement between the gradient and the
// smoothed gradient: agreeing dimensions move at 2 r g, conflicting ones
// stand still.
inline StepDiagnostics addsign_step(OptimizerState& s, ParamVector& theta,
                                    const ParamVector& grad) {
  const double r = s.hyper.r, a = s.hyper.alpha;
  StepDiagnostics dg = detail::blank_diag(theta.size());
  for (std::size_t i = 0; i < theta.size(); ++i) {
    s.m1[i] = a * s.m1[i] + (1.0 - a) * grad[i];
    const double upd = r * (1.0 + sgn(grad[i]) * sgn(s.m1[i])) * grad[i];
    theta[i] -= upd;
    dg.raw_update[i] = upd;
    dg.state_delay_dims[i] = std::fabs(upd);
  }
  detail::finish_delay(dg);
  ++s.t;
  return dg;
}

// Dispatch for the gradient-consuming kinds; NAG needs the oracle overload.
inline StepDiagnostics step(OptimizerState& s, ParamVector& theta,
                            const ParamVector& grad) {
  switch (s.kind) {
    case OptimizerKind::SGD: return sgd_step(s, theta, grad);
    case OptimizerKind::MOM: return mom_step(s, theta, grad);
    case OptimizerKind::CI: return ci_step(s, theta, grad);
    case OptimizerKind::SPI: return spi_step(s, theta, grad);
    case OptimizerKind::PID: return pid_step(s, theta, grad);
    case OptimizerKind::ADAM: return adam_step(s, theta, grad);
    case OptimizerKind::RMSPROP: return rmsprop_step(s, theta, grad);
    case OptimizerKind::ADDSIGN: return addsign_step(s, theta, grad);
    case OptimizerKind::NAG:
      throw ConfigError("nag requires a gradient oracle; use step(state, theta, grad_at)");
  }
  throw ConfigError("unknown optimizer kind");
}

inline StepDiagnostics step(OptimizerState& s, ParamVector& theta,
                            const GradFn& grad_at) {
  if (s.kind == OptimizerKind::NAG) return nag_step(s, theta, grad_at);
  return step(s, theta, grad_at(theta));
}

// Zeroes velocity and every accumulator; hyperparameters survive.
inline void reset(OptimizerState& s) {
  const std::size_t n = s.v.size();
  s.v.assign(n, 0.0);
  s.d.assign(n, 0.0);
  s.prev_grad.assign(n, 0.0);
  s.m1.assign(n, 0.0);
  s.m2.assign(n, 0.0);
  s.t = 0;
}

namespace detail {

struct HyperKey {
  const char* name;
  double HyperParams::*slot;
  bool required;
};

// Accepted hyperparameters per kind.  Anything else in the map is rejected,
// as is a missing required key.
inline const std::vector<HyperKey>& hyper_keys(OptimizerKind k) {
  static const std::vector<HyperKey> sgd{{"r", &HyperParams::r, true}};
  static const std::vector<HyperKey> momentum{{"r", &HyperParams::r, true},
                                             {"alpha", &HyperParams::alpha, true}};
  static const std::vector<HyperKey> ci{{"r", &HyperParams::r, true},
                                        {"alpha", &HyperParams::alpha, true},
                                        {"beta", &HyperParams::beta, true}};
  static const std::vector<HyperKey> pid{{"r", &HyperParams::r, true},
                                         {"alpha", &HyperParams::alpha, true},
                                         {"kd", &HyperParams::kd, true}};
  static const std::vector<HyperKey> adam{{"r", &HyperParams::r, true},
                                          {"beta1", &HyperParams::beta1, false},
                                          {"beta2", &HyperParams::beta2, false},
                                          {"epsilon", &HyperParams::epsilon, false}};
  static const std::vector<HyperKey> rmsprop{{"r", &HyperParams::r, true},
                                             {"beta2", &HyperParams::beta2, false},
                                             {"epsilon", &HyperParams::epsilon, false}};
  static const std::vector<HyperKey> addsign{{"r", &HyperParams::r, true},
                                             {"alpha", &HyperParams::alpha, false}};
  switch (k) {
    case OptimizerKind::SGD: return sgd;
    case OptimizerKind::MOM:
    case OptimizerKind::NAG:
    case OptimizerKind::SPI: return momentum;
    case OptimizerKind::CI: return ci;
    case OptimizerKind::PID: return pid;
    case OptimizerKind::ADAM: return adam;
    case OptimizerKind::RMSPROP: return rmsprop;
    case OptimizerKind::ADDSIGN: return addsign;
  }
  return sgd;
}

}  // namespace detail

// Builds a zero-initialized state for `kind` at dimension `dim`, validating
// the hyperparameter map: required keys present, no unknown keys, values in
// range.  Throws ConfigError naming the offending key.
inline OptimizerState make_state(OptimizerKind kind, std::size_t dim,
                                 const std::map<std::string, double>& hyper) {
  if (dim < 1) throw ConfigError("dimension must be >= 1");
  OptimizerState s;
  s.kind = kind;
  if (kind == OptimizerKind::ADDSIGN) s.hyper.alpha = 0.9;  // conventional default
  const auto& keys = detail::hyper_keys(kind);
  for (const auto& [name, value] : hyper) {
    bool known = false;
    for (const auto& key : keys)
      if (name == key.name) {
        s.hyper.*key.slot = value;
        known = true;
        break;
      }
    if (!known)
      throw ConfigError(std::string("optimizer '") + kind_name(kind) +
                        "' does not accept hyperparameter '" + name + "'");
  }
  for (const auto& key : keys)
    if (key.required && !hyper.count(key.name))
      throw ConfigError(std::string("optimizer '") + kind_name(kind) +
                        "' requires hyperparameter '" + key.name + "'");
  const HyperParams& h = s.hyper;
  if (!(h.r > 0.0)) throw ConfigError("hyperparameter 'r' must be > 0");
  if (h.alpha < 0.0 || h.alpha >= 1.0 || !std::isfinite(h.alpha))
    throw ConfigError("hyperparameter 'alpha' must be in [0, 1)");
  if (kind == OptimizerKind::CI && (std::isnan(h.beta) || h.beta < 0.0))
    throw ConfigError("hyperparameter 'beta' must be >= 0 (or +inf)");
  if (kind == OptimizerKind::PID && !std::isfinite(h.kd))
    throw ConfigError("hyperparameter 'kd' must be finite");
  if (kind == OptimizerKind::ADAM &&
      (h.beta1 <= 0.0 || h.beta1 >= 1.0 || h.beta2 <= 0.0 || h.beta2 >= 1.0))
    throw ConfigError("hyperparameters 'beta1'/'beta2' must be in (0, 1)");
  if (kind == OptimizerKind::RMSPROP && (h.beta2 <= 0.0 || h.beta2 >= 1.0))
    throw ConfigError("hyperparameter 'beta2' must be in (0, 1)");
  if ((kind == OptimizerKind::ADAM || kind == OptimizerKind::RMSPROP) &&
      !(h.epsilon > 0.0))
    throw ConfigError("hyperparameter 'epsilon' must be > 0");
  s.v.assign(dim, 0.0);
  s.d.assign(dim, 0.0);
  s.prev_grad.assign(dim, 0.0);
  s.m1.assign(dim, 0.0);
  s.m2.assign(dim, 0.0);
  s.t = 0;
  return s;
}

}  // namespace spi
