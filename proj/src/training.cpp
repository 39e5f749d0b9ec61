#include "polyode/training.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace polyode {

std::string to_string(OptimizerKind k) { return k == OptimizerKind::adam ? "adam" : "sgd"; }

OptimizerKind parse_optimizer(const std::string& s) {
  if (s == "adam") return OptimizerKind::adam;
  if (s == "sgd") return OptimizerKind::sgd;
  throw std::invalid_argument("unknown optimizer '" + s + "' (expected adam or sgd)");
}

void TrainConfig::validate() const {
  if (epochs < 1) throw std::invalid_argument("TrainConfig: epochs must be at least 1");
  if (!(learning_rate > 0.0)) throw std::invalid_argument("TrainConfig: learning_rate must be positive");
  if (init_std < 0.0) throw std::invalid_argument("TrainConfig: init_std must be non-negative");
  if (substeps < 1) throw std::invalid_argument("TrainConfig: substeps must be at least 1");
  if (loss_log_every < 1) throw std::invalid_argument("TrainConfig: loss_log_every must be at least 1");
}

std::string TrainConfig::to_json() const {
  nlohmann::json j;
  j["epochs"] = epochs;
  j["learning_rate"] = learning_rate;
  j["optimizer"] = to_string(optimizer);
  j["init_std"] = init_std;
  j["substeps"] = substeps;
  j["seed"] = seed;
  j["loss_log_every"] = loss_log_every;
  if (early_stop) {
    j["early_stop"] = {{"patience", early_stop->patience}, {"min_delta", early_stop->min_delta}};
  } else {
    j["early_stop"] = nullptr;
  }
  return j.dump(1) + "\n";
}

TrainConfig TrainConfig::from_json(const std::string& text) {
  const auto j = nlohmann::json::parse(text);
  TrainConfig c;
  c.epochs = j.value("epochs", c.epochs);
  c.learning_rate = j.value("learning_rate", c.learning_rate);
  if (j.contains("optimizer")) c.optimizer = parse_optimizer(j.at("optimizer").get<std::string>());
  c.init_std = j.value("init_std", c.init_std);
  c.substeps = j.value("substeps", c.substeps);
  c.seed = j.value("seed", c.seed);
  c.loss_log_every = j.value("loss_log_every", c.loss_log_every);
  if (j.contains("early_stop")) {
    const auto& es = j.at("early_stop");
    if (es.is_null()) {
      c.early_stop.reset();
    } else {
      EarlyStop e;
      e.patience = es.value("patience", e.patience);
      e.min_delta = es.value("min_delta", e.min_delta);
      c.early_stop = e;
    }
  }
  c.validate();
  return c;
}

void initialize(Network& net, const TrainConfig& config) {
  const double std = config.init_std > 0.0 ? config.init_std : default_init_std(net);
  init_params(params_of(net), std, config.seed);
}

std::vector<double> state_scale(const Trajectory& traj) {
  std::vector<double> scale(traj.dim);
  for (std::size_t j = 0; j < traj.dim; ++j) {
    double lo = traj.at(0, j), hi = traj.at(0, j);
    for (std::size_t i = 1; i < traj.size(); ++i) {
      lo = std::min(lo, traj.at(i, j));
      hi = std::max(hi, traj.at(i, j));
    }
    scale[j] = std::abs(hi - lo);
    if (scale[j] < 1e-12) {
      throw std::invalid_argument("constant state dimension " + std::to_string(j) +
                                  ": normalization scale is zero");
    }
  }
  return scale;
}

PairBatch make_pair_batch(const Trajectory& traj) {
  if (traj.size() < 2) throw std::invalid_argument("make_pair_batch: need at least 2 observations");
  PairBatch b;
  b.dim = traj.dim;
  b.y_scale = state_scale(traj);
  for (std::size_t i = 0; i + 1 < traj.size(); ++i) {
    b.t_start.push_back(traj.times[i]);
    b.t_end.push_back(traj.times[i + 1]);
    auto r0 = traj.row(i);
    auto r1 = traj.row(i + 1);
    b.y_start.insert(b.y_start.end(), r0.begin(), r0.end());
    b.y_target.insert(b.y_target.end(), r1.begin(), r1.end());
  }
  return b;
}

Tensor normalized_mse(const Tensor& y_pred, const Tensor& y_obs, std::span<const double> y_scale) {
  if (y_pred.shape() != y_obs.shape()) {
    throw ShapeError("normalized_mse: prediction " + shape_string(y_pred.shape()) + " vs observation " +
                     shape_string(y_obs.shape()));
  }
  if (y_scale.size() != y_pred.cols()) throw ShapeError("normalized_mse: need one scale per state column");
  std::vector<double> inv(y_scale.size());
  for (std::size_t j = 0; j < inv.size(); ++j) inv[j] = 1.0 / y_scale[j];
  const Shape shape{inv.size()};
  const Tensor residual = hadamard(sub(y_pred, y_obs), Tensor::constant(shape, std::move(inv)));
  return mean(square(residual));
}

void adam_update(ParamSet& params, const ParamSet& grads, AdamState& state, double lr, double beta1, double beta2,
                 double eps) {
  if (state.m.empty()) {
    for (const auto& p : params) {
      state.m.emplace_back(p.data.size(), 0.0);
      state.v.emplace_back(p.data.size(), 0.0);
    }
  }
  if (state.m.size() != params.size() || grads.size() != params.size()) {
    throw std::invalid_argument("adam_update: optimizer state does not match parameters");
  }
  ++state.step;
  const double c1 = 1.0 - std::pow(beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(beta2, static_cast<double>(state.step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& p = params[i].data;
    const auto& g = grads[i].data;
    auto& m = state.m[i];
    auto& v = state.v[i];
    for (std::size_t j = 0; j < p.size(); ++j) {
      m[j] = beta1 * m[j] + (1.0 - beta1) * g[j];
      v[j] = beta2 * v[j] + (1.0 - beta2) * g[j] * g[j];
      p[j] -= lr * (m[j] / c1) / (std::sqrt(v[j] / c2) + eps);
    }
  }
}

void sgd_update(ParamSet& params, const ParamSet& grads, double lr) {
  if (grads.size() != params.size()) throw std::invalid_argument("sgd_update: gradient does not match parameters");
  for (std::size_t i = 0; i < params.size(); ++i)
    for (std::size_t j = 0; j < params[i].data.size(); ++j) params[i].data[j] -= lr * grads[i].data[j];
}

DivergenceError::DivergenceError(std::size_t epoch, double last_finite_loss)
    : std::runtime_error([&] {
        std::ostringstream os;
        os << "training diverged at epoch " << epoch << " (last finite loss " << last_finite_loss
           << "); try a smaller learning rate";
        return os.str();
      }()),
      epoch_(epoch),
      last_finite_(last_finite_loss) {}

MinimizeResult minimize(const LossFn& loss_fn, ParamSet params, const TrainConfig& config) {
  config.validate();
  MinimizeResult out;
  out.best_loss = std::numeric_limits<double>::infinity();
  AdamState adam;
  double last_finite = std::numeric_limits<double>::quiet_NaN();
  double improvement_ref = std::numeric_limits<double>::infinity();
  std::size_t last_improvement = 0;

  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    const TrackedParams tracked(params);
    const Tensor loss = loss_fn(tracked);
    const double value = loss.item();
    if (!std::isfinite(value)) throw DivergenceError(epoch, last_finite);
    last_finite = value;

    const bool last_epoch = epoch + 1 == config.epochs;
    if (epoch % config.loss_log_every == 0 || last_epoch) out.history.push_back({epoch, value});

    if (value < out.best_loss) {
      out.best_loss = value;
      out.best_epoch = epoch;
      out.best_params = params;
    }
    if (!config.early_stop || value < improvement_ref - config.early_stop->min_delta) {
      improvement_ref = value;
      last_improvement = epoch;
    }

    const ParamSet grads = backward(loss, tracked);
    if (config.optimizer == OptimizerKind::adam) {
      adam_update(params, grads, adam, config.learning_rate);
    } else {
      sgd_update(params, grads, config.learning_rate);
    }
    out.epochs_run = epoch + 1;

    if (config.early_stop && epoch - last_improvement >= config.early_stop->patience) {
      if (!last_epoch) out.history.push_back({epoch, value});
      break;
    }
  }
  return out;
}

Tensor ode_pair_loss(const Network& net, const TrackedParams& params, const PairBatch& batch, std::size_t substeps) {
  const std::size_t n = batch.size();
  const Tensor start = Tensor::constant({n, batch.dim}, batch.y_start);
  const Tensor target = Tensor::constant({n, batch.dim}, batch.y_target);
  auto f = [&](std::span<const double>, const Tensor& y) { return forward(net, params, y); };
  const Tensor pred = batched_pair_step(f, batch.t_start, batch.t_end, start, substeps);
  return normalized_mse(pred, target, batch.y_scale);
}

namespace {

TrainResult finish(const Network& net, MinimizeResult r) {
  TrainResult out;
  out.model = net;
  params_of(out.model) = std::move(r.best_params);
  out.best_loss = r.best_loss;
  out.best_epoch = r.best_epoch;
  out.epochs_run = r.epochs_run;
  out.history = std::move(r.history);
  return out;
}

}  // namespace

TrainResult train(const Network& net, const Trajectory& traj, const TrainConfig& config) {
  if (output_dim(net) != traj.dim || input_dim(net) != traj.dim) {
    throw std::invalid_argument("train: model maps " + std::to_string(input_dim(net)) + " -> " +
                                std::to_string(output_dim(net)) + " states but the data has " +
                                std::to_string(traj.dim));
  }
  const PairBatch batch = make_pair_batch(traj);
  const std::size_t substeps = config.substeps;
  auto loss_fn = [&](const TrackedParams& p) { return ode_pair_loss(net, p, batch, substeps); };
  return finish(net, minimize(loss_fn, params_of(net), config));
}

TrainResult train_static(const Network& net, const Trajectory& table, const TrainConfig& config) {
  if (input_dim(net) != 1 || output_dim(net) != table.dim) {
    throw std::invalid_argument("train_static: model must map 1 input to " + std::to_string(table.dim) + " outputs");
  }
  const std::size_t n = table.size();
  const Tensor inputs = Tensor::constant({n, 1}, table.times);
  const Tensor targets = Tensor::constant({n, table.dim}, table.states);
  const auto scale = state_scale(table);
  auto loss_fn = [&](const TrackedParams& p) { return normalized_mse(forward(net, p, inputs), targets, scale); };
  return finish(net, minimize(loss_fn, params_of(net), config));
}

std::string loss_history_csv(const std::vector<LossRecord>& history) {
  std::string s = "epoch,loss\n";
  for (const auto& r : history) s += std::to_string(r.epoch) + "," + format_double(r.loss) + "\n";
  return s;
}

}  // namespace polyode
