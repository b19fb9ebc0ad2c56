// Basic vector/value types and error taxonomy shared by every module.
#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace spi {

// Parameter-space vector; holds iterates, gradients and velocities alike.
// Dimension is fixed for the lifetime of a run.
using ParamVector = std::vector<double>;

struct EvalResult {
  double loss = 0.0;
  ParamVector gradient;
};

// Invalid run/optimizer/objective configuration (bad hyperparameter, unknown
// name, dimension mismatch, ...).
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// File ingestion payload does not match the documented format.
struct FormatError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// (r, alpha) fall outside the guaranteed-convergence region; the message names
// the violated constraint.
struct RegionViolation : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// A ratio was requested against an absent measurement (e.g. a run that never
// reached the threshold).
struct UndefinedComparison : std::runtime_error {
  using std::runtime_error::runtime_error;
};

inline double sgn(double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); }

inline double norm2(const ParamVector& x) {
  double s = 0.0;
  for (double xi : x) s += xi * xi;
  return std::sqrt(s);
}

inline double dist2(const ParamVector& a, const ParamVector& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return std::sqrt(s);
}

inline bool all_finite(const ParamVector& x) {
  for (double xi : x)
    if (!std::isfinite(xi)) return false;
  return true;
}

}  // namespace spi
