#include "polyode/systems.hpp"

#include <cmath>
#include <stdexcept>

namespace polyode {

std::string to_string(SystemId id) {
  switch (id) {
    case SystemId::quartic_static: return "quartic_static";
    case SystemId::lotka_volterra: return "lotka_volterra";
    case SystemId::damped_oscillator: return "damped_oscillator";
    case SystemId::van_der_pol: return "van_der_pol";
    case SystemId::sincos: return "sincos";
  }
  return "unknown";
}

SystemId parse_system(const std::string& name) {
  if (name == "quartic" || name == "quartic_static") return SystemId::quartic_static;
  if (name == "lotka_volterra" || name == "lv") return SystemId::lotka_volterra;
  if (name == "damped_oscillator" || name == "damped") return SystemId::damped_oscillator;
  if (name == "van_der_pol" || name == "vdp") return SystemId::van_der_pol;
  if (name == "sincos") return SystemId::sincos;
  throw std::invalid_argument("unknown system '" + name + "'");
}

const std::vector<SystemId>& all_systems() {
  static const std::vector<SystemId> ids{SystemId::quartic_static, SystemId::lotka_volterra,
                                         SystemId::damped_oscillator, SystemId::van_der_pol, SystemId::sincos};
  return ids;
}

AnalyticSystem AnalyticSystem::make(SystemId id) {
  AnalyticSystem sys;
  sys.id = id;
  if (id == SystemId::van_der_pol) sys.params["mu"] = 5.0;
  return sys;
}

std::vector<std::string> AnalyticSystem::var_names() const {
  if (is_static()) return {"x"};
  return {"x", "y"};
}

double AnalyticSystem::param(const std::string& name) const {
  auto it = params.find(name);
  if (it == params.end()) throw std::out_of_range(to_string(id) + ": no parameter '" + name + "'");
  return it->second;
}

// Each expression sums its monomials in graded lexicographic order with the
// coefficient applied last, so it matches poly_eval of the truth polynomial
// operation for operation.
void rhs(const AnalyticSystem& sys, double, std::span<const double> y, std::span<double> dydt) {
  if (y.size() != sys.dim() || dydt.size() != sys.dim()) {
    throw std::invalid_argument(to_string(sys.id) + ": expected state of dimension " + std::to_string(sys.dim()));
  }
  const double x = y[0];
  switch (sys.id) {
    case SystemId::quartic_static:
      dydt[0] = 5.0 * (x * x) + 16.0 * (x * x * x) + 3.0 * (x * x * x * x);
      return;
    case SystemId::lotka_volterra: {
      const double v = y[1];
      dydt[0] = 1.5 * x - x * v;
      dydt[1] = -3.0 * v + x * v;
      return;
    }
    case SystemId::damped_oscillator: {
      const double v = y[1];
      dydt[0] = -0.1 * (x * x * x) - 2.0 * (v * v * v);
      dydt[1] = 2.0 * (x * x * x) - 0.1 * (v * v * v);
      return;
    }
    case SystemId::van_der_pol: {
      const double v = y[1];
      const double mu = sys.param("mu");
      dydt[0] = v;
      dydt[1] = (-x + mu * v) - mu * (x * x * v);
      return;
    }
    case SystemId::sincos: {
      dydt[0] = std::cos(y[1]);
      dydt[1] = -std::sin(x);
      return;
    }
  }
  throw std::invalid_argument("rhs: unknown system");
}

std::vector<double> rhs(const AnalyticSystem& sys, double t, std::span<const double> y) {
  std::vector<double> out(sys.dim());
  rhs(sys, t, y, out);
  return out;
}

std::optional<PolyVector> truth_poly(const AnalyticSystem& sys) {
  PolyVector pv;
  pv.var_names = sys.var_names();
  auto poly = [&](std::initializer_list<std::pair<Exponents, double>> terms) {
    MultiPoly p(pv.var_names.size());
    for (const auto& [e, c] : terms) p.add_term(e, c);
    return p;
  };
  switch (sys.id) {
    case SystemId::quartic_static:
      pv.components = {poly({{{2}, 5.0}, {{3}, 16.0}, {{4}, 3.0}})};
      return pv;
    case SystemId::lotka_volterra:
      pv.components = {poly({{{1, 0}, 1.5}, {{1, 1}, -1.0}}), poly({{{0, 1}, -3.0}, {{1, 1}, 1.0}})};
      return pv;
    case SystemId::damped_oscillator:
      pv.components = {poly({{{3, 0}, -0.1}, {{0, 3}, -2.0}}), poly({{{3, 0}, 2.0}, {{0, 3}, -0.1}})};
      return pv;
    case SystemId::van_der_pol: {
      const double mu = sys.param("mu");
      pv.components = {poly({{{0, 1}, 1.0}}), poly({{{1, 0}, -1.0}, {{0, 1}, mu}, {{2, 1}, -mu}})};
      return pv;
    }
    case SystemId::sincos:
      return std::nullopt;
  }
  return std::nullopt;
}

ExperimentSpec ExperimentSpec::standard(SystemId id) {
  ExperimentSpec spec;
  spec.system = AnalyticSystem::make(id);
  spec.mlp_widths = {2, 50, 50, 50, 2};
  switch (id) {
    case SystemId::quartic_static:
      spec.y0 = {};
      spec.t0 = -5.3;
      spec.t1 = 2.2;
      spec.num_points = 20;
      spec.degrees = {4};
      spec.mlp_widths = {1, 100, 100, 100, 1};
      break;
    case SystemId::lotka_volterra:
      spec.y0 = {1.0, 1.0};
      spec.t1 = 10.0;
      spec.num_points = 200;
      spec.degrees = {2, 3, 4};
      spec.horizon = 40.0;
      break;
    case SystemId::damped_oscillator:
      spec.y0 = {1.0, 1.0};
      spec.t1 = 25.0;
      spec.num_points = 100;
      spec.degrees = {3, 4};
      spec.horizon = 70.0;
      break;
    case SystemId::van_der_pol:
      spec.y0 = {2.0, 0.0};
      spec.t1 = 25.0;
      spec.num_points = 200;
      spec.degrees = {3, 4};
      spec.horizon = 80.0;
      break;
    case SystemId::sincos:
      spec.y0 = {0.5, 1.0};
      spec.t1 = 40.0;
      spec.num_points = 200;
      spec.degrees = {4, 5, 6, 15};
      spec.horizon = 40.0;
      break;
  }
  return spec;
}

void ExperimentSpec::validate() const {
  if (num_points < 2) throw std::invalid_argument("experiment: need at least 2 points");
  if (!(t1 > t0)) throw std::invalid_argument("experiment: t1 must exceed t0");
  if (!system.is_static() && y0.size() != system.dim()) {
    throw std::invalid_argument("experiment: initial state must have " + std::to_string(system.dim()) + " values");
  }
  if (!(rtol > 0.0) || !(atol > 0.0)) throw std::invalid_argument("experiment: tolerances must be positive");
}

Trajectory generate_dataset(const ExperimentSpec& spec) {
  spec.validate();
  const auto grid = linspace(spec.t0, spec.t1, spec.num_points);
  if (spec.system.is_static()) {
    Trajectory traj;
    traj.dim = 1;
    traj.time_name = "x";
    traj.names = {"f"};
    double f = 0.0;
    for (double x : grid) {
      rhs(spec.system, 0.0, std::span<const double>(&x, 1), std::span<double>(&f, 1));
      traj.push_back(x, std::span<const double>(&f, 1));
    }
    return traj;
  }
  const AnalyticSystem sys = spec.system;
  Trajectory traj = integrate_adaptive([sys](double t, std::span<const double> y,
                                            std::span<double> dydt) { rhs(sys, t, y, dydt); },
                                       spec.t0, spec.t1, spec.y0, grid, AdaptiveOptions{spec.rtol, spec.atol});
  traj.names = sys.var_names();
  return traj;
}

}  // namespace polyode
