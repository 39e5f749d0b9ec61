#pragma once

// Ground-truth benchmark systems and the datasets built from them.

#include "polyode/ode.hpp"
#include "polyode/poly.hpp"

#include <map>
#include <optional>
#include <string>
#include <vector>

namespace polyode {

enum class SystemId { quartic_static, lotka_volterra, damped_oscillator, van_der_pol, sincos };

std::string to_string(SystemId id);
SystemId parse_system(const std::string& name);
const std::vector<SystemId>& all_systems();

struct AnalyticSystem {
  SystemId id = SystemId::lotka_volterra;
  std::map<std::string, double> params;  // e.g. {"mu", 5}

  static AnalyticSystem make(SystemId id);
  std::size_t dim() const { return 2 - (id == SystemId::quartic_static); }
  std::vector<std::string> var_names() const;
  /// Static regression target rather than a time derivative.
  bool is_static() const { return id == SystemId::quartic_static; }
  double param(const std::string& name) const;
};

/// Closed-form right-hand side.  Time is accepted and ignored.
std::vector<double> rhs(const AnalyticSystem& sys, double t, std::span<const double> y);
void rhs(const AnalyticSystem& sys, double t, std::span<const double> y, std::span<double> dydt);

/// The governing polynomial, when there is one.
std::optional<PolyVector> truth_poly(const AnalyticSystem& sys);

struct ExperimentSpec {
  AnalyticSystem system;
  std::vector<double> y0;
  double t0 = 0.0;
  double t1 = 10.0;
  std::size_t num_points = 200;
  std::vector<std::size_t> degrees;
  std::vector<std::size_t> mlp_widths;
  double horizon = 0.0;  // prediction horizon for comparison rollouts
  double rtol = 1e-7;
  double atol = 1e-9;

  static ExperimentSpec standard(SystemId id);
  void validate() const;
};

/// Uniformly sampled truth trajectory; for the static quartic, a table of
/// (x, f(x)) with x in place of time.
Trajectory generate_dataset(const ExperimentSpec& spec);

}  // namespace polyode
