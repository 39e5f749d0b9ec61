#pragma once

// Anything that supplies dy/dt: a trained network or a ground-truth system.
// Also hosts the comparisons between them (coefficient recovery, vector-field
// error, limit-cycle behaviour).

#include "polyode/models.hpp"
#include "polyode/ode.hpp"
#include "polyode/poly.hpp"
#include "polyode/systems.hpp"

#include <variant>

namespace polyode {

using DynamicsModel = std::variant<PiNetV1, MlpNet, AnalyticSystem>;

DynamicsModel as_dynamics(const Network& net);
std::size_t state_dim(const DynamicsModel& model);

/// Autonomous right-hand side on plain vectors.
PlainRhs plain_rhs(const DynamicsModel& model);
/// Differentiable right-hand side for a network bound to `params`.
TensorRhs tensor_rhs(const Network& net, const TrackedParams& params);
/// Untracked right-hand side for any model.
TensorRhs tensor_rhs(const DynamicsModel& model);

// ---------------------------------------------------------------------------
// Coefficient recovery.

/// floor(-log10(|recovered - truth| / |truth|)), clamped to [0, 16]; 16 for an exact match.
int significant_digits(double recovered, double truth);

struct TermRecovery {
  std::size_t component = 0;
  Exponents monomial;
  double truth = 0.0;
  double recovered = 0.0;
  int digits = 0;
};

struct SpuriousTerm {
  std::size_t component = 0;
  Exponents monomial;
  double value = 0.0;
};

struct CoefficientReport {
  std::vector<std::string> var_names;
  std::vector<TermRecovery> terms;
  std::vector<SpuriousTerm> spurious;

  int min_digits() const;
  double max_spurious() const;
  std::string to_json() const;
  std::string to_text() const;
};

CoefficientReport coefficient_report(const PolyVector& recovered, const PolyVector& truth);

// ---------------------------------------------------------------------------
// Vector fields.

struct Box {
  double x_min = 0.0, x_max = 1.0, y_min = 0.0, y_max = 1.0;
  /// Same centre, each side multiplied by `factor`.
  Box expanded(double factor) const;
};

/// Bounding box of the first two state columns.
Box bounding_box(const Trajectory& traj);

struct VectorField {
  std::size_t n = 0;
  std::vector<double> x, y, dxdt, dydt;  // n*n samples, x varying fastest
  std::string to_csv() const;
};

VectorField vector_field_grid(const DynamicsModel& model, const Box& box, std::size_t n);
/// sqrt(mean over nodes and both components of squared differences).
double field_rms_error(const VectorField& a, const VectorField& b);

// ---------------------------------------------------------------------------
// Limit cycles.

enum class CycleVerdict { converged, absent, integration_failed };
std::string to_string(CycleVerdict v);

struct LimitCycleResult {
  CycleVerdict verdict = CycleVerdict::absent;
  Trajectory trajectory;
  double tail_max_abs_x = 0.0;
  std::string message;
};

inline constexpr double kCycleAmplitudeLow = 1.5;
inline constexpr double kCycleAmplitudeHigh = 2.5;

/// Integrates from y0 to `horizon`; "converged" when max |x| over the last
/// quarter of the horizon falls inside [1.5, 2.5].
LimitCycleResult limit_cycle_check(const DynamicsModel& model, std::vector<double> y0 = {4.0, 4.0},
                                   double horizon = 80.0, const AdaptiveOptions& options = {});

}  // namespace polyode
