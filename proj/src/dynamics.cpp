#include "polyode/dynamics.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <memory>
#include <sstream>

namespace polyode {

DynamicsModel as_dynamics(const Network& net) {
  return std::visit([](const auto& n) -> DynamicsModel { return n; }, net);
}

std::size_t state_dim(const DynamicsModel& model) {
  if (const auto* sys = std::get_if<AnalyticSystem>(&model)) return sys->dim();
  if (const auto* p = std::get_if<PiNetV1>(&model)) return p->input_dim;
  return std::get<MlpNet>(model).input_dim();
}

namespace {

// Network plus constant parameter tensors, built once per rhs closure.
struct FrozenNet {
  explicit FrozenNet(Network n) : net(std::move(n)), params(params_of(net), false) {}
  Network net;
  TrackedParams params;
};

std::shared_ptr<const FrozenNet> freeze(const DynamicsModel& model) {
  if (const auto* p = std::get_if<PiNetV1>(&model)) return std::make_shared<FrozenNet>(Network{*p});
  return std::make_shared<FrozenNet>(Network{std::get<MlpNet>(model)});
}

}  // namespace

PlainRhs plain_rhs(const DynamicsModel& model) {
  if (const auto* sys = std::get_if<AnalyticSystem>(&model)) {
    return [s = *sys](double t, std::span<const double> y, std::span<double> dydt) { rhs(s, t, y, dydt); };
  }
  auto frozen = freeze(model);
  return [frozen](double, std::span<const double> y, std::span<double> dydt) {
    Tensor out = forward(frozen->net, frozen->params, Tensor::constant({y.size()}, {y.begin(), y.end()}));
    std::copy(out.data().begin(), out.data().end(), dydt.begin());
  };
}

TensorRhs tensor_rhs(const Network& net, const TrackedParams& params) {
  return [&net, &params](std::span<const double>, const Tensor& y) { return forward(net, params, y); };
}

TensorRhs tensor_rhs(const DynamicsModel& model) {
  if (const auto* sys = std::get_if<AnalyticSystem>(&model)) {
    return [s = *sys](std::span<const double> t, const Tensor& y) {
      const std::size_t d = s.dim();
      std::vector<double> out(y.size());
      for (std::size_t r = 0; r < y.rows(); ++r) {
        rhs(s, t[r], y.data().subspan(r * d, d), std::span<double>(out).subspan(r * d, d));
      }
      return Tensor::constant(y.shape(), std::move(out));
    };
  }
  auto frozen = freeze(model);
  return [frozen](std::span<const double>, const Tensor& y) { return forward(frozen->net, frozen->params, y); };
}

// ---------------------------------------------------------------------------

int significant_digits(double recovered, double truth) {
  if (recovered == truth) return 16;
  if (truth == 0.0 || !std::isfinite(recovered)) return 0;
  const double rel = std::abs(recovered - truth) / std::abs(truth);
  const double digits = std::floor(-std::log10(rel));
  return static_cast<int>(std::clamp(digits, 0.0, 16.0));
}

CoefficientReport coefficient_report(const PolyVector& recovered, const PolyVector& truth) {
  if (recovered.num_vars() != truth.num_vars() || recovered.components.size() != truth.components.size()) {
    throw std::invalid_argument("coefficient_report: recovered and truth polynomials have different shapes");
  }
  CoefficientReport report;
  report.var_names = truth.var_names;
  for (std::size_t j = 0; j < truth.components.size(); ++j) {
    const auto& want = truth.components[j];
    const auto& got = recovered.components[j];
    for (const auto& [e, c] : want.terms()) {
      const double r = got.coeff(e);
      report.terms.push_back({j, e, c, r, got.terms().count(e) ? significant_digits(r, c) : 0});
    }
    for (const auto& [e, c] : got.terms()) {
      if (!want.terms().count(e)) report.spurious.push_back({j, e, c});
    }
  }
  return report;
}

int CoefficientReport::min_digits() const {
  int m = 16;
  for (const auto& t : terms) m = std::min(m, t.digits);
  return terms.empty() ? 0 : m;
}

double CoefficientReport::max_spurious() const {
  double m = 0.0;
  for (const auto& s : spurious) m = std::max(m, std::abs(s.value));
  return m;
}

std::string CoefficientReport::to_json() const {
  using nlohmann::json;
  json j = json::object();
  for (std::size_t c = 0; c < var_names.size(); ++c) {
    json rows = json::array();
    for (const auto& t : terms) {
      if (t.component != c) continue;
      rows.push_back({{"monomial", monomial_string(t.monomial, var_names, "*")},
                      {"truth", t.truth},
                      {"recovered", t.recovered},
                      {"digits", t.digits}});
    }
    j["d" + var_names[c] + "/dt"] = rows;
  }
  json sp = json::array();
  for (const auto& s : spurious) {
    sp.push_back({{"component", "d" + var_names[s.component] + "/dt"},
                  {"monomial", monomial_string(s.monomial, var_names, "*")},
                  {"value", s.value}});
  }
  j["spurious"] = sp;
  return j.dump(1) + "\n";
}

std::string CoefficientReport::to_text() const {
  std::ostringstream os;
  for (const auto& t : terms) {
    os << "d" << var_names[t.component] << "/dt  " << monomial_string(t.monomial, var_names, "*") << ": truth "
       << format_double(t.truth) << ", recovered " << format_double(t.recovered) << ", digits " << t.digits << "\n";
  }
  os << "spurious terms: " << spurious.size() << ", largest |coefficient| " << max_spurious() << "\n";
  for (const auto& s : spurious) {
    os << "  d" << var_names[s.component] << "/dt  " << monomial_string(s.monomial, var_names, "*") << ": "
       << format_double(s.value) << "\n";
  }
  return os.str();
}

// ---------------------------------------------------------------------------

Box Box::expanded(double factor) const {
  const double cx = 0.5 * (x_min + x_max);
  const double cy = 0.5 * (y_min + y_max);
  const double hx = 0.5 * (x_max - x_min) * factor;
  const double hy = 0.5 * (y_max - y_min) * factor;
  return {cx - hx, cx + hx, cy - hy, cy + hy};
}

Box bounding_box(const Trajectory& traj) {
  if (traj.dim < 2 || traj.size() == 0) throw std::invalid_argument("bounding_box: need a non-empty 2-state trajectory");
  Box b{traj.at(0, 0), traj.at(0, 0), traj.at(0, 1), traj.at(0, 1)};
  for (std::size_t i = 1; i < traj.size(); ++i) {
    b.x_min = std::min(b.x_min, traj.at(i, 0));
    b.x_max = std::max(b.x_max, traj.at(i, 0));
    b.y_min = std::min(b.y_min, traj.at(i, 1));
    b.y_max = std::max(b.y_max, traj.at(i, 1));
  }
  return b;
}

std::string VectorField::to_csv() const {
  std::string s = "x,y,dxdt,dydt\n";
  for (std::size_t i = 0; i < x.size(); ++i) {
    s += format_double(x[i]) + "," + format_double(y[i]) + "," + format_double(dxdt[i]) + "," +
         format_double(dydt[i]) + "\n";
  }
  return s;
}

VectorField vector_field_grid(const DynamicsModel& model, const Box& box, std::size_t n) {
  if (n < 2) throw std::invalid_argument("vector_field_grid: need n >= 2");
  if (state_dim(model) != 2) throw std::invalid_argument("vector_field_grid: model must have exactly 2 states");
  VectorField field;
  field.n = n;
  const auto xs = linspace(box.x_min, box.x_max, n);
  const auto ys = linspace(box.y_min, box.y_max, n);
  std::vector<double> points;
  points.reserve(2 * n * n);
  for (double yv : ys) {
    for (double xv : xs) {
      field.x.push_back(xv);
      field.y.push_back(yv);
      points.push_back(xv);
      points.push_back(yv);
    }
  }
  const std::vector<double> t(n * n, 0.0);
  const Tensor d = tensor_rhs(model)(t, Tensor::constant({n * n, 2}, std::move(points)));
  for (std::size_t i = 0; i < n * n; ++i) {
    field.dxdt.push_back(d.at(i, 0));
    field.dydt.push_back(d.at(i, 1));
  }
  return field;
}

double field_rms_error(const VectorField& a, const VectorField& b) {
  if (a.x.size() != b.x.size()) throw std::invalid_argument("field_rms_error: grids differ in size");
  double s = 0.0;
  for (std::size_t i = 0; i < a.x.size(); ++i) {
    if (a.x[i] != b.x[i] || a.y[i] != b.y[i]) throw std::invalid_argument("field_rms_error: grids differ");
    const double ex = a.dxdt[i] - b.dxdt[i];
    const double ey = a.dydt[i] - b.dydt[i];
    s += ex * ex + ey * ey;
  }
  return std::sqrt(s / (2.0 * static_cast<double>(a.x.size())));
}

// ---------------------------------------------------------------------------

std::string to_string(CycleVerdict v) {
  switch (v) {
    case CycleVerdict::converged: return "converged";
    case CycleVerdict::absent: return "absent";
    case CycleVerdict::integration_failed: return "integration failed";
  }
  return "unknown";
}

LimitCycleResult limit_cycle_check(const DynamicsModel& model, std::vector<double> y0, double horizon,
                                   const AdaptiveOptions& options) {
  if (state_dim(model) != 2 || y0.size() != 2) throw std::invalid_argument("limit_cycle_check: need a 2-state model");
  if (!(horizon > 0.0)) throw std::invalid_argument("limit_cycle_check: horizon must be positive");
  LimitCycleResult result;
  const auto t_eval = linspace(0.0, horizon, 4001);
  try {
    result.trajectory = integrate_adaptive(plain_rhs(model), 0.0, horizon, y0, t_eval, options);
  } catch (const IntegrationError& e) {
    result.verdict = CycleVerdict::integration_failed;
    result.message = e.what();
    return result;
  }
  result.trajectory.names = {"x", "y"};
  const double tail_start = 0.75 * horizon;
  for (std::size_t i = 0; i < result.trajectory.size(); ++i) {
    if (result.trajectory.times[i] >= tail_start) {
      result.tail_max_abs_x = std::max(result.tail_max_abs_x, std::abs(result.trajectory.at(i, 0)));
    }
  }
  const bool in_band =
      result.tail_max_abs_x >= kCycleAmplitudeLow && result.tail_max_abs_x <= kCycleAmplitudeHigh;
  result.verdict = in_band ? CycleVerdict::converged : CycleVerdict::absent;
  std::ostringstream os;
  os << "max |x| over final quarter = " << result.tail_max_abs_x;
  result.message = os.str();
  return result;
}

}  // namespace polyode
