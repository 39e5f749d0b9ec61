#include "polyode/bench.hpp"

#include <json.hpp>

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <limits>
#include <mutex>
#include <sstream>
#include <thread>

namespace polyode {

ExperimentSettings default_settings(SystemId id) {
  ExperimentSettings s;
  switch (id) {
    case SystemId::quartic_static:
      s.restarts = 5;
      break;
    case SystemId::damped_oscillator:
      s.train.substeps = 4;
      break;
    case SystemId::van_der_pol:
      s.train.substeps = 8;
      break;
    case SystemId::lotka_volterra:
    case SystemId::sincos:
      break;
  }
  return s;
}

double rhs_rms_error(const DynamicsModel& model, const DynamicsModel& truth, const Box& box, std::size_t n) {
  if (state_dim(model) != state_dim(truth)) throw std::invalid_argument("rhs_rms_error: state dimensions differ");
  if (state_dim(model) == 2) return field_rms_error(vector_field_grid(model, box, n), vector_field_grid(truth, box, n));
  if (state_dim(model) != 1) throw std::invalid_argument("rhs_rms_error: only 1 or 2 states are supported");
  const auto f = plain_rhs(model);
  const auto g = plain_rhs(truth);
  const auto xs = linspace(box.x_min, box.x_max, n * n);
  double s = 0.0;
  for (double x : xs) {
    double a = 0.0, b = 0.0;
    f(0.0, {&x, 1}, {&a, 1});
    g(0.0, {&x, 1}, {&b, 1});
    s += (a - b) * (a - b);
  }
  return std::sqrt(s / static_cast<double>(xs.size()));
}

namespace {

std::string model_label(const Network& net) {
  if (const auto* p = std::get_if<PiNetV1>(&net)) return "pinet-" + std::to_string(p->degree);
  const auto& m = std::get<MlpNet>(net);
  return "mlp-" + format_widths(m.widths) + "-" + to_string(m.activation);
}

TrainResult fit(const Network& net, const Trajectory& data, const ExperimentSpec& spec, const TrainConfig& cfg) {
  Network n = net;
  initialize(n, cfg);
  return spec.system.is_static() ? train_static(n, data, cfg) : train(n, data, cfg);
}

// The loss never moved measurably away from where it started.
bool stalled(const TrainResult& r) {
  return !r.history.empty() && r.best_loss > 0.5 * r.history.front().loss;
}

Box training_box(const ExperimentSpec& spec, const Trajectory& data) {
  if (spec.system.is_static()) return {spec.t0, spec.t1, 0.0, 0.0};
  return bounding_box(data);
}

}  // namespace

void evaluate_row(BenchRow& row, const ExperimentSpec& spec, const Trajectory& data, const Network& model,
                  const ExperimentSettings& settings) {
  const DynamicsModel m = as_dynamics(model);
  const DynamicsModel truth = spec.system;
  const auto names = spec.system.var_names();

  if (const auto* p = std::get_if<PiNetV1>(&model)) {
    const PolyVector pv = expand_pinet(*p, names);
    const std::vector<std::string> lhs =
        spec.system.is_static() ? std::vector<std::string>{"f"} : std::vector<std::string>{};
    row.equations = format_poly(pv, 8, 1e-2, lhs);
    if (const auto t = truth_poly(spec.system)) row.coefficients = coefficient_report(pv, *t);
  }

  const Box box = training_box(spec, data);
  row.rms_train = rhs_rms_error(m, truth, box, settings.field_grid);
  row.rms_outside = rhs_rms_error(m, truth, box.expanded(settings.outside_factor), settings.field_grid);
  if (spec.system.id == SystemId::damped_oscillator) {
    row.rms_wide = rhs_rms_error(m, truth, Box{-1000.0, 1000.0, -1000.0, 1000.0}, settings.field_grid);
  }

  if (spec.horizon > 0.0) {
    const auto t_eval = linspace(spec.t0, spec.horizon, settings.rollout_points);
    const AdaptiveOptions opts{spec.rtol, spec.atol};
    const Trajectory want = integrate_adaptive(plain_rhs(truth), spec.t0, spec.horizon, spec.y0, t_eval, opts);
    try {
      const Trajectory got = integrate_adaptive(plain_rhs(m), spec.t0, spec.horizon, spec.y0, t_eval, opts);
      double err = 0.0;
      for (std::size_t i = 0; i < got.states.size(); ++i) err = std::max(err, std::abs(got.states[i] - want.states[i]));
      row.rollout_error = err;
      row.rollout_status = "ok";
    } catch (const IntegrationError& e) {
      row.rollout_status = std::string("integration failed: ") + e.what();
    }
  }

  if (spec.system.id == SystemId::van_der_pol) row.cycle = limit_cycle_check(m).verdict;
}

BenchRow run_experiment(const ExperimentSpec& spec, const Network& net, const ExperimentSettings& settings) {
  BenchRow row;
  row.system = spec.system.id;
  row.model = model_label(net);
  if (const auto* p = std::get_if<PiNetV1>(&net)) row.degree = p->degree;
  const auto start = std::chrono::steady_clock::now();
  try {
    const Trajectory data = generate_dataset(spec);
    std::optional<TrainResult> best;
    std::string last_error;
    for (std::size_t r = 0; r < std::max<std::size_t>(settings.restarts, 1); ++r) {
      TrainConfig cfg = settings.train;
      cfg.seed = settings.train.seed + r;
      try {
        TrainResult res = fit(net, data, spec, cfg);
        cfg.init_std = cfg.init_std > 0.0 ? cfg.init_std : default_init_std(net);
        if (std::holds_alternative<MlpNet>(net) && settings.mlp_fallback_std > 0.0 && stalled(res) &&
            cfg.init_std != settings.mlp_fallback_std) {
          row.notes = "init std " + format_double(cfg.init_std) + " stalled at loss " + format_double(res.best_loss) +
                      "; retrained with " + format_double(settings.mlp_fallback_std);
          cfg.init_std = settings.mlp_fallback_std;
          res = fit(net, data, spec, cfg);
        }
        if (!best || res.best_loss < best->best_loss) {
          best = std::move(res);
          row.seed = cfg.seed;
          row.init_std = cfg.init_std;
        }
      } catch (const DivergenceError& e) {
        last_error = e.what();
      }
    }
    if (!best) throw std::runtime_error(last_error);
    row.best_loss = best->best_loss;
    row.epochs_run = best->epochs_run;
    row.history = best->history;
    row.model_params = best->model;
    evaluate_row(row, spec, data, best->model, settings);
    row.ok = true;
  } catch (const std::exception& e) {
    row.ok = false;
    row.error = e.what();
  }
  row.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return row;
}

BenchRow run_pinet_experiment(const ExperimentSpec& spec, std::size_t degree, const ExperimentSettings& settings) {
  const std::size_t d = spec.system.dim();
  const std::size_t in = spec.system.is_static() ? 1 : d;
  return run_experiment(spec, PiNetV1::zeros(in, d, degree), settings);
}

BenchRow run_mlp_experiment(const ExperimentSpec& spec, const ExperimentSettings& settings) {
  return run_experiment(spec, MlpNet::zeros(spec.mlp_widths, Activation::tanh), settings);
}

// ---------------------------------------------------------------------------

std::size_t BenchReport::failures() const {
  std::size_t n = 0;
  for (const auto& r : rows) n += !r.ok;
  return n;
}

namespace {

nlohmann::json opt(const std::optional<double>& v) {
  if (v && std::isfinite(*v)) return *v;
  return nullptr;
}

std::string cell(const std::optional<double>& v) {
  if (!v) return "-";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", *v);
  return buf;
}

}  // namespace

std::string BenchReport::to_json() const {
  using nlohmann::json;
  json out = json::array();
  for (const auto& r : rows) {
    json j;
    j["system"] = to_string(r.system);
    j["model"] = r.model;
    j["ok"] = r.ok;
    if (!r.ok) j["error"] = r.error;
    if (!r.notes.empty()) j["notes"] = r.notes;
    j["best_loss"] = r.best_loss;
    j["epochs_run"] = r.epochs_run;
    j["seed"] = r.seed;
    j["init_std"] = r.init_std;
    if (r.coefficients) {
      j["coefficients"] = json::parse(r.coefficients->to_json());
      j["min_digits"] = r.coefficients->min_digits();
      j["max_spurious"] = r.coefficients->max_spurious();
    }
    if (!r.equations.empty()) j["equations"] = r.equations;
    j["rms_train"] = opt(r.rms_train);
    j["rms_outside"] = opt(r.rms_outside);
    if (r.rms_wide) j["rms_wide"] = opt(r.rms_wide);
    if (!r.rollout_status.empty()) {
      j["rollout_error"] = opt(r.rollout_error);
      j["rollout_status"] = r.rollout_status;
    }
    if (r.cycle) j["limit_cycle"] = to_string(*r.cycle);
    out.push_back(std::move(j));
  }
  return out.dump(1) + "\n";
}

std::string BenchReport::to_markdown() const {
  std::ostringstream os;
  os << "| system | model | loss | epochs | min digits | max spurious | rms train | rms 3x | rollout err | cycle | "
        "time [s] | status |\n";
  os << "|---|---|---|---|---|---|---|---|---|---|---|---|\n";
  for (const auto& r : rows) {
    os << "| " << to_string(r.system) << " | " << r.model << " | " << cell(r.best_loss) << " | " << r.epochs_run
       << " | " << (r.coefficients ? std::to_string(r.coefficients->min_digits()) : "-") << " | "
       << (r.coefficients ? cell(r.coefficients->max_spurious()) : "-") << " | " << cell(r.rms_train) << " | "
       << cell(r.rms_outside) << " | "
       << (r.rollout_error ? cell(r.rollout_error) : (r.rollout_status.empty() ? "-" : "failed")) << " | "
       << (r.cycle ? to_string(*r.cycle) : "-") << " | " << cell(r.seconds) << " | "
       << (r.ok ? "ok" : "FAILED") << " |\n";
  }
  for (const auto& r : rows) {
    if (!r.ok) {
      os << "\n### " << to_string(r.system) << " / " << r.model << "\n\nfailed: " << r.error << "\n";
      continue;
    }
    if (r.equations.empty() && r.notes.empty()) continue;
    os << "\n### " << to_string(r.system) << " / " << r.model << "\n\n";
    if (!r.notes.empty()) os << r.notes << "\n\n";
    if (!r.equations.empty()) os << "```\n" << r.equations << "```\n";
    if (r.coefficients) {
      os << "\n| component | monomial | truth | recovered | digits |\n|---|---|---|---|---|\n";
      for (const auto& t : r.coefficients->terms) {
        os << "| " << r.coefficients->var_names[t.component] << " | "
           << monomial_string(t.monomial, r.coefficients->var_names, "*") << " | " << format_double(t.truth)
           << " | " << format_double(t.recovered) << " | " << t.digits << " |\n";
      }
    }
    if (r.rms_wide) os << "\nrms over [-1000, 1000]^2: " << cell(r.rms_wide) << "\n";
    if (!r.rollout_status.empty() && !r.rollout_error) os << "\nrollout: " << r.rollout_status << "\n";
  }
  return os.str();
}

BenchReport run_bench(const BenchOptions& options) {
  struct Job {
    ExperimentSpec spec;
    Network net;
    ExperimentSettings settings;
  };
  std::vector<Job> jobs;
  const auto& systems = options.systems.empty() ? all_systems() : options.systems;
  for (SystemId id : systems) {
    const ExperimentSpec spec = ExperimentSpec::standard(id);
    ExperimentSettings settings = default_settings(id);
    if (options.epochs) settings.train.epochs = *options.epochs;
    if (options.seed) settings.train.seed = *options.seed;
    const std::size_t d = spec.system.dim();
    const std::size_t in = spec.system.is_static() ? 1 : d;
    for (std::size_t degree : options.degrees.empty() ? spec.degrees : options.degrees) {
      jobs.push_back({spec, PiNetV1::zeros(in, d, degree), settings});
    }
    if (options.mlp) {
      ExperimentSettings mlp = settings;
      mlp.restarts = 1;
      jobs.push_back({spec, MlpNet::zeros(spec.mlp_widths, Activation::tanh), mlp});
    }
  }

  BenchReport report;
  report.rows.resize(jobs.size());
  std::atomic<std::size_t> next{0};
  std::mutex callback_mutex;
  auto worker = [&] {
    for (std::size_t i = next++; i < jobs.size(); i = next++) {
      report.rows[i] = run_experiment(jobs[i].spec, jobs[i].net, jobs[i].settings);
      if (options.on_row) {
        std::lock_guard lock(callback_mutex);
        options.on_row(report.rows[i]);
      }
    }
  };
  const std::size_t n_threads = std::clamp<std::size_t>(options.threads, 1, std::max<std::size_t>(jobs.size(), 1));
  std::vector<std::thread> pool;
  for (std::size_t t = 1; t < n_threads; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  return report;
}

}  // namespace polyode
