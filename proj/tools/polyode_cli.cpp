// polyode: generate data, train polynomial / MLP neural ODEs, extract
// equations, predict, export vector fields and run the benchmark matrix.
//
// Exit codes: 0 ok, 1 benchmark failures, 2 usage error, 3 numeric failure.

#include "polyode/bench.hpp"
#include "polyode/svg.hpp"
#include "polyode/version.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iostream>

using namespace polyode;
using nlohmann::json;

namespace {

constexpr int kOk = 0;
constexpr int kBenchFailed = 1;
constexpr int kUsage = 2;
constexpr int kNumeric = 3;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::string fnv1a_hex(const std::string& bytes) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

// "out/lv.csv" -> "out/lv" + suffix
std::string sidecar(const std::string& path, const std::string& suffix) {
  std::filesystem::path p(path);
  p.replace_extension();
  return p.string() + suffix;
}

std::optional<std::uint64_t> env_seed() {
  const char* s = std::getenv("POLYODE_SEED");
  if (!s || !*s) return std::nullopt;
  try {
    std::size_t used = 0;
    const auto v = std::stoull(s, &used);
    if (used != std::strlen(s)) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw UsageError(std::string("POLYODE_SEED must be a non-negative integer, got '") + s + "'");
  }
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// ---------------------------------------------------------------------------
// generate

struct GenerateArgs {
  std::string system;
  std::optional<std::size_t> points;
  std::optional<double> tmin, tmax;
  std::vector<double> y0;
  std::optional<double> mu;
  double rtol = 1e-7, atol = 1e-9;
  std::string out;
};

int cmd_generate(const GenerateArgs& a) {
  ExperimentSpec spec = ExperimentSpec::standard(parse_system(a.system));
  if (a.points) spec.num_points = *a.points;
  if (a.tmin) spec.t0 = *a.tmin;
  if (a.tmax) spec.t1 = *a.tmax;
  if (!a.y0.empty()) spec.y0 = a.y0;
  if (a.mu) {
    if (spec.system.id != SystemId::van_der_pol) throw UsageError("--mu only applies to van_der_pol");
    spec.system.params["mu"] = *a.mu;
  }
  spec.rtol = a.rtol;
  spec.atol = a.atol;
  try {
    spec.validate();
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }

  const Trajectory traj = generate_dataset(spec);
  const std::string out = a.out.empty() ? to_string(spec.system.id) + ".csv" : a.out;
  write_trajectory_csv(traj, out);

  json j;
  j["system"] = to_string(spec.system.id);
  j["params"] = spec.system.params;
  j["y0"] = spec.y0;
  j["t0"] = spec.t0;
  j["t1"] = spec.t1;
  j["points"] = spec.num_points;
  j["rtol"] = spec.rtol;
  j["atol"] = spec.atol;
  write_text_file(sidecar(out, ".spec.json"), j.dump(1) + "\n");
  std::cout << "wrote " << out << " (" << traj.size() << " rows)\n";
  return kOk;
}

// ---------------------------------------------------------------------------
// train

struct TrainArgs {
  std::string data;
  std::string arch = "pinet";
  std::size_t degree = 2;
  std::size_t hidden_width = 0;
  std::string widths;
  std::string activation = "tanh";
  bool is_static = false;
  std::string config;
  std::optional<std::size_t> epochs, substeps, log_every, patience;
  std::optional<double> lr, init_std, min_delta;
  std::optional<std::string> optimizer;
  std::optional<std::uint64_t> seed;
  bool no_early_stop = false;
  std::size_t restarts = 1;
  std::string out = "model.json";
};

Network build_network(const TrainArgs& a, std::size_t dim) {
  const std::size_t in = a.is_static ? 1 : dim;
  if (a.arch == "pinet") {
    if (a.degree < 1) throw UsageError("--degree must be at least 1");
    return PiNetV1::zeros(in, dim, a.degree, a.hidden_width);
  }
  if (a.arch == "mlp") {
    std::vector<std::size_t> widths;
    if (a.widths.empty()) {
      widths = a.is_static ? std::vector<std::size_t>{1, 100, 100, 100, dim}
                           : std::vector<std::size_t>{dim, 50, 50, 50, dim};
    } else {
      widths = parse_widths(a.widths);
    }
    if (widths.front() != in || widths.back() != dim) {
      throw UsageError("--widths " + format_widths(widths) + " does not map " + std::to_string(in) + " -> " +
                       std::to_string(dim) + " as the data requires");
    }
    return MlpNet::zeros(widths, parse_activation(a.activation));
  }
  throw UsageError("--arch must be pinet or mlp");
}

TrainConfig build_config(const TrainArgs& a) {
  TrainConfig c = a.config.empty() ? TrainConfig{} : TrainConfig::from_json(read_text_file(a.config));
  if (a.epochs) c.epochs = *a.epochs;
  if (a.substeps) c.substeps = *a.substeps;
  if (a.log_every) c.loss_log_every = *a.log_every;
  if (a.lr) c.learning_rate = *a.lr;
  if (a.init_std) c.init_std = *a.init_std;
  if (a.optimizer) c.optimizer = parse_optimizer(*a.optimizer);
  if (a.seed) c.seed = *a.seed;
  if (auto s = env_seed()) c.seed = *s;
  if (a.no_early_stop) {
    c.early_stop.reset();
  } else if (a.patience || a.min_delta) {
    EarlyStop es = c.early_stop.value_or(EarlyStop{});
    if (a.patience) es.patience = *a.patience;
    if (a.min_delta) es.min_delta = *a.min_delta;
    c.early_stop = es;
  }
  c.validate();
  return c;
}

int cmd_train(const TrainArgs& a) {
  const std::string bytes = read_text_file(a.data);
  const Trajectory data = trajectory_from_csv(bytes);
  TrainConfig cfg;
  Network arch;
  try {
    cfg = build_config(a);
    arch = build_network(a, data.dim);
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  if (a.restarts < 1) throw UsageError("--restarts must be at least 1");

  const auto t0 = std::chrono::steady_clock::now();
  std::optional<TrainResult> best;
  std::uint64_t best_seed = cfg.seed;
  for (std::size_t r = 0; r < a.restarts; ++r) {
    TrainConfig run = cfg;
    run.seed = cfg.seed + r;
    Network net = arch;
    initialize(net, run);
    TrainResult res = a.is_static ? train_static(net, data, run) : train(net, data, run);
    if (a.restarts > 1) std::cout << "restart " << r << " (seed " << run.seed << "): loss " << res.best_loss << "\n";
    if (!best || res.best_loss < best->best_loss) {
      best = std::move(res);
      best_seed = run.seed;
    }
  }
  const double secs = seconds_since(t0);

  save_checkpoint(best->model, a.out);
  const std::string loss_path = sidecar(a.out, ".loss.csv");
  write_text_file(loss_path, loss_history_csv(best->history));

  json m;
  m["tool_version"] = kVersion;
  m["command"] = "train";
  m["data"] = a.data;
  m["dataset_hash"] = "fnv1a64:" + fnv1a_hex(bytes);
  m["arch"] = arch_kind(arch);
  m["static"] = a.is_static;
  m["config"] = json::parse(cfg.to_json());
  m["restarts"] = a.restarts;
  m["seed"] = best_seed;
  m["checkpoint"] = a.out;
  m["loss_history"] = loss_path;
  m["metrics"] = {{"best_loss", best->best_loss}, {"best_epoch", best->best_epoch}, {"epochs_run", best->epochs_run}};
  write_text_file(sidecar(a.out, ".manifest.json"), m.dump(1) + "\n");

  std::printf("final loss %.6e (best epoch %zu of %zu), wall time %.2f s\n", best->best_loss, best->best_epoch,
              best->epochs_run, secs);
  std::cout << "wrote " << a.out << "\n";
  return kOk;
}

// ---------------------------------------------------------------------------
// extract

struct ExtractArgs {
  std::string checkpoint;
  int sigfigs = 8;
  double threshold = 1e-2;
  std::vector<std::string> vars;
  std::vector<std::string> lhs;
  std::string json_out;
  std::string truth;
};

int cmd_extract(const ExtractArgs& a) {
  const Network net = load_checkpoint(a.checkpoint);
  const auto* p = std::get_if<PiNetV1>(&net);
  if (!p) throw UsageError("architecture is not symbolically expandable (checkpoint holds an MLP)");
  if (a.sigfigs < 1 || a.sigfigs > 17) throw UsageError("--sigfigs must be in [1, 17]");
  if (a.threshold < 0.0) throw UsageError("--threshold must be non-negative");
  std::vector<std::string> vars = a.vars.empty() ? default_var_names(p->input_dim) : a.vars;
  if (vars.size() != p->input_dim) {
    throw UsageError("--vars needs " + std::to_string(p->input_dim) + " names");
  }
  const PolyVector pv = expand_pinet(*p, vars);
  std::vector<std::string> lhs = a.lhs;
  const bool static_truth = !a.truth.empty() && AnalyticSystem::make(parse_system(a.truth)).is_static();
  if (lhs.empty() && (p->input_dim != p->output_dim || static_truth)) {
    for (std::size_t j = 0; j < p->output_dim; ++j) lhs.push_back(p->output_dim == 1 ? "f" : "f" + std::to_string(j + 1));
  }
  std::cout << format_poly(pv, a.sigfigs, a.threshold, lhs);
  const std::string out = a.json_out.empty() ? sidecar(a.checkpoint, ".poly.json") : a.json_out;
  write_text_file(out, poly_to_json(pv));

  if (!a.truth.empty()) {
    const auto truth = truth_poly(AnalyticSystem::make(parse_system(a.truth)));
    if (!truth) throw UsageError("system '" + a.truth + "' has no polynomial form");
    PolyVector renamed = pv;
    renamed.var_names = truth->var_names;
    const CoefficientReport report = coefficient_report(renamed, *truth);
    std::cout << "\n" << report.to_text();
    write_text_file(sidecar(a.checkpoint, ".report.json"), report.to_json());
  }
  return kOk;
}

// ---------------------------------------------------------------------------
// predict

struct PredictArgs {
  std::string checkpoint;
  std::vector<double> y0;
  double t0 = 0.0, t1 = 10.0;
  std::size_t points = 401;
  double rtol = 1e-7, atol = 1e-9;
  std::string out = "prediction.csv";
  std::string plot;
  std::string truth;
};

int cmd_predict(const PredictArgs& a) {
  const Network net = load_checkpoint(a.checkpoint);
  const std::size_t d = input_dim(net);
  if (input_dim(net) != output_dim(net)) throw UsageError("predict needs a dynamics model (input and output sizes differ)");
  if (a.y0.size() != d) throw UsageError("--y0 needs " + std::to_string(d) + " values");
  if (a.t1 < a.t0) throw UsageError("--t1 must not be before --t0");
  if (a.points < 1) throw UsageError("--points must be positive");

  Trajectory traj;
  if (a.t1 == a.t0) {
    traj.dim = d;
    traj.push_back(a.t0, a.y0);
  } else {
    if (a.points < 2) throw UsageError("--points must be at least 2 for a non-empty span");
    const auto t_eval = linspace(a.t0, a.t1, a.points);
    try {
      traj = integrate_adaptive(plain_rhs(as_dynamics(net)), a.t0, a.t1, a.y0, t_eval, {a.rtol, a.atol});
    } catch (const IntegrationError& e) {
      std::cerr << "error: " << e.what()
                << "\n(trained networks, MLPs especially, can blow up when integrated outside the training region)\n";
      return kNumeric;
    }
  }
  traj.names = default_var_names(d);
  write_trajectory_csv(traj, a.out);
  std::cout << "wrote " << a.out << " (" << traj.size() << " rows)\n";

  std::optional<Trajectory> reference;
  if (!a.truth.empty() && traj.size() > 1) {
    const AnalyticSystem sys = AnalyticSystem::make(parse_system(a.truth));
    if (sys.dim() != d || sys.is_static()) throw UsageError("--truth system does not match the model's state size");
    reference = integrate_adaptive(plain_rhs(sys), a.t0, a.t1, a.y0, traj.times, {a.rtol, a.atol});
    double err = 0.0;
    for (std::size_t i = 0; i < traj.states.size(); ++i)
      err = std::max(err, std::abs(traj.states[i] - reference->states[i]));
    std::cout << "max |prediction - truth| = " << err << "\n";
  }
  if (d == 2 && traj.size() > 1) {
    const LimitCycleResult cycle = limit_cycle_check(as_dynamics(net), a.y0, a.t1 - a.t0, {a.rtol, a.atol});
    std::cout << "limit cycle: " << to_string(cycle.verdict) << " (" << cycle.message << ")\n";
  }
  if (!a.plot.empty()) {
    write_text_file(a.plot, svg_trajectory_plot(traj, a.checkpoint, reference ? &*reference : nullptr));
  }
  return kOk;
}

// ---------------------------------------------------------------------------
// field

struct FieldArgs {
  std::string checkpoint;
  std::string system;
  std::vector<double> box;
  std::string data;
  double expand = 1.0;
  std::size_t n = 30;
  std::string out = "field.csv";
  std::string plot;
  std::string truth;
};

int cmd_field(const FieldArgs& a) {
  if (a.checkpoint.empty() == a.system.empty()) throw UsageError("give exactly one of --model or --system");
  const DynamicsModel model =
      a.checkpoint.empty() ? DynamicsModel{AnalyticSystem::make(parse_system(a.system))}
                           : as_dynamics(load_checkpoint(a.checkpoint));
  if (state_dim(model) != 2) throw UsageError("vector fields need a 2-state model");
  Box box;
  if (!a.box.empty()) {
    if (a.box.size() != 4) throw UsageError("--box takes xmin,xmax,ymin,ymax");
    box = {a.box[0], a.box[1], a.box[2], a.box[3]};
  } else if (!a.data.empty()) {
    box = bounding_box(read_trajectory_csv(a.data));
  } else {
    throw UsageError("give --box or --data");
  }
  if (!(box.x_max > box.x_min) || !(box.y_max > box.y_min)) throw UsageError("empty box");
  if (!(a.expand > 0.0)) throw UsageError("--expand must be positive");
  box = box.expanded(a.expand);
  if (a.n < 2) throw UsageError("--n must be at least 2");

  const VectorField field = vector_field_grid(model, box, a.n);
  write_text_file(a.out, field.to_csv());
  std::cout << "wrote " << a.out << " (" << a.n << "x" << a.n << " grid)\n";
  if (!a.truth.empty()) {
    const DynamicsModel truth = AnalyticSystem::make(parse_system(a.truth));
    std::cout << "field rms error vs " << a.truth << ": " << field_rms_error(field, vector_field_grid(truth, box, a.n))
              << "\n";
  }
  if (!a.plot.empty()) write_text_file(a.plot, svg_quiver(field, a.out));
  return kOk;
}

// ---------------------------------------------------------------------------
// bench

struct BenchArgs {
  std::string suite = "paper";
  std::vector<std::string> only;
  std::vector<std::size_t> degrees;
  bool no_mlp = false;
  std::optional<std::size_t> epochs;
  std::optional<std::uint64_t> seed;
  std::size_t threads = 1;
  std::string out = "bench_out";
};

int cmd_bench(const BenchArgs& a) {
  BenchOptions opts;
  for (const auto& s : a.only) opts.systems.push_back(parse_system(s));
  opts.degrees = a.degrees;
  opts.mlp = !a.no_mlp;
  opts.epochs = a.epochs;
  if (a.suite == "quick") {
    if (!opts.epochs) opts.epochs = 200;
  } else if (a.suite != "paper") {
    throw UsageError("--suite must be paper or quick");
  }
  opts.seed = a.seed;
  if (auto s = env_seed()) opts.seed = *s;
  opts.threads = a.threads;
  opts.on_row = [](const BenchRow& r) {
    std::cout << to_string(r.system) << " / " << r.model << ": " << (r.ok ? "ok" : "FAILED: " + r.error) << " ("
              << r.seconds << " s)\n"
              << std::flush;
  };

  const BenchReport report = run_bench(opts);
  std::filesystem::create_directories(a.out);
  const std::string md = report.to_markdown();
  write_text_file((std::filesystem::path(a.out) / "bench.json").string(), report.to_json());
  write_text_file((std::filesystem::path(a.out) / "bench.md").string(), md);
  for (const auto& r : report.rows) {
    if (!r.model_params) continue;
    const auto stem = std::filesystem::path(a.out) / (to_string(r.system) + "_" + r.model);
    save_checkpoint(*r.model_params, stem.string() + ".json");
    write_text_file(stem.string() + ".loss.csv", loss_history_csv(r.history));
  }
  std::cout << "\n" << md;
  return report.failures() ? kBenchFailed : kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Polynomial neural ODEs: training, symbolic extraction and benchmarks"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);

  GenerateArgs gen;
  auto* g = app.add_subcommand("generate", "Integrate a benchmark system and write a trajectory CSV");
  g->add_option("system", gen.system, "quartic | lotka_volterra | damped_oscillator | van_der_pol | sincos")->required();
  g->add_option("--points", gen.points, "Number of samples");
  g->add_option("--tmin", gen.tmin, "Start of the time span (x range start for quartic)");
  g->add_option("--tmax", gen.tmax, "End of the time span (x range end for quartic)");
  g->add_option("--y0", gen.y0, "Initial state, comma separated")->delimiter(',');
  g->add_option("--mu", gen.mu, "Van der Pol damping parameter");
  g->add_option("--rtol", gen.rtol, "Relative tolerance");
  g->add_option("--atol", gen.atol, "Absolute tolerance");
  g->add_option("-o,--out", gen.out, "Output CSV (default <system>.csv)");

  TrainArgs tr;
  auto* t = app.add_subcommand("train", "Train a network on a trajectory CSV");
  t->add_option("data", tr.data, "Trajectory CSV")->required()->check(CLI::ExistingFile);
  t->add_option("--arch", tr.arch, "pinet | mlp")->check(CLI::IsMember({"pinet", "mlp"}));
  t->add_option("--degree", tr.degree, "pi-net polynomial degree");
  t->add_option("--hidden-width", tr.hidden_width, "pi-net hidden width (0: default)");
  t->add_option("--widths", tr.widths, "MLP layer widths, e.g. 2x50x50x50x2");
  t->add_option("--activation", tr.activation, "MLP activation: tanh | relu");
  t->add_flag("--static", tr.is_static, "Regress the state columns on the first column directly (no ODE solve)");
  t->add_option("--config", tr.config, "Training config JSON")->check(CLI::ExistingFile);
  t->add_option("--epochs", tr.epochs, "Maximum epochs");
  t->add_option("--lr", tr.lr, "Learning rate");
  t->add_option("--optimizer", tr.optimizer, "adam | sgd");
  t->add_option("--init-std", tr.init_std, "Initialisation std (default per architecture)");
  t->add_option("--substeps", tr.substeps, "Solver steps per observation interval");
  t->add_option("--seed", tr.seed, "Random seed (POLYODE_SEED overrides)");
  t->add_option("--log-every", tr.log_every, "Loss history interval");
  t->add_option("--patience", tr.patience, "Early-stop patience in epochs");
  t->add_option("--min-delta", tr.min_delta, "Early-stop minimum improvement");
  t->add_flag("--no-early-stop", tr.no_early_stop, "Always run every epoch");
  t->add_option("--restarts", tr.restarts, "Train with this many consecutive seeds and keep the best");
  t->add_option("-o,--out", tr.out, "Checkpoint path");

  ExtractArgs ex;
  auto* e = app.add_subcommand("extract", "Expand a pi-net checkpoint into polynomial equations");
  e->add_option("checkpoint", ex.checkpoint, "Checkpoint JSON")->required()->check(CLI::ExistingFile);
  e->add_option("--sigfigs", ex.sigfigs, "Significant digits");
  e->add_option("--threshold", ex.threshold, "Relative threshold below which terms are listed as dropped");
  e->add_option("--vars", ex.vars, "Variable names, comma separated")->delimiter(',');
  e->add_option("--lhs", ex.lhs, "Left-hand labels, comma separated (default d<var>/dt)")->delimiter(',');
  e->add_option("--json", ex.json_out, "Polynomial JSON output (default <checkpoint>.poly.json)");
  e->add_option("--truth", ex.truth, "Compare against this system's coefficients");

  PredictArgs pr;
  auto* p = app.add_subcommand("predict", "Integrate a trained model from an initial state");
  p->add_option("checkpoint", pr.checkpoint, "Checkpoint JSON")->required()->check(CLI::ExistingFile);
  p->add_option("--y0", pr.y0, "Initial state, comma separated")->delimiter(',')->required();
  p->add_option("--t0", pr.t0, "Start time");
  p->add_option("--t1", pr.t1, "End time");
  p->add_option("--points", pr.points, "Output samples");
  p->add_option("--rtol", pr.rtol, "Relative tolerance");
  p->add_option("--atol", pr.atol, "Absolute tolerance");
  p->add_option("-o,--out", pr.out, "Output CSV");
  p->add_option("--plot", pr.plot, "Also write an SVG line plot");
  p->add_option("--truth", pr.truth, "Overlay and compare with this system");

  FieldArgs fa;
  auto* f = app.add_subcommand("field", "Sample a vector field on a grid");
  f->add_option("--model", fa.checkpoint, "Checkpoint JSON")->check(CLI::ExistingFile);
  f->add_option("--system", fa.system, "Benchmark system instead of a checkpoint");
  f->add_option("--box", fa.box, "xmin,xmax,ymin,ymax")->delimiter(',');
  f->add_option("--data", fa.data, "Use the bounding box of this trajectory CSV")->check(CLI::ExistingFile);
  f->add_option("--expand", fa.expand, "Scale the box about its centre");
  f->add_option("--n", fa.n, "Grid nodes per side");
  f->add_option("-o,--out", fa.out, "Output CSV");
  f->add_option("--plot", fa.plot, "Also write an SVG quiver plot");
  f->add_option("--truth", fa.truth, "Report the RMS error against this system");

  BenchArgs be;
  auto* b = app.add_subcommand("bench", "Run the experiment matrix and write a report");
  b->add_option("--suite", be.suite, "paper | quick (200 epochs)");
  b->add_option("--only", be.only, "Systems to run, comma separated")->delimiter(',');
  b->add_option("--degrees", be.degrees, "pi-net degrees, comma separated")->delimiter(',');
  b->add_flag("--no-mlp", be.no_mlp, "Skip the MLP baselines");
  b->add_option("--epochs", be.epochs, "Override epochs for every experiment");
  b->add_option("--seed", be.seed, "Base seed (POLYODE_SEED overrides)");
  b->add_option("--threads", be.threads, "Experiments to run in parallel");
  b->add_option("-o,--out", be.out, "Report directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& err) {
    const int code = app.exit(err);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (*g) return cmd_generate(gen);
    if (*t) return cmd_train(tr);
    if (*e) return cmd_extract(ex);
    if (*p) return cmd_predict(pr);
    if (*f) return cmd_field(fa);
    if (*b) return cmd_bench(be);
  } catch (const UsageError& err) {
    std::cerr << "error: " << err.what() << "\n";
    return kUsage;
  } catch (const DivergenceError& err) {
    std::cerr << "error: " << err.what() << "\n";
    return kNumeric;
  } catch (const IntegrationError& err) {
    std::cerr << "error: " << err.what() << "\n";
    return kNumeric;
  } catch (const std::exception& err) {
    std::cerr << "error: " << err.what() << "\n";
    return kUsage;
  }
  return kUsage;
}
