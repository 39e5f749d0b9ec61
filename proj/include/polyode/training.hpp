#pragma once

#include "polyode/models.hpp"
#include "polyode/ode.hpp"

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace polyode {

enum class OptimizerKind { adam, sgd };
std::string to_string(OptimizerKind k);
OptimizerKind parse_optimizer(const std::string& s);

struct EarlyStop {
  std::size_t patience = 2000;
  double min_delta = 1e-12;
};

struct TrainConfig {
  std::size_t epochs = 20000;
  double learning_rate = 1e-3;
  OptimizerKind optimizer = OptimizerKind::adam;
  double init_std = 0.0;  // 0 selects the architecture default
  std::size_t substeps = 2;
  std::uint64_t seed = 0;
  std::size_t loss_log_every = 100;
  std::optional<EarlyStop> early_stop = EarlyStop{};

  void validate() const;
  std::string to_json() const;
  static TrainConfig from_json(const std::string& text);
};

/// Draws initial parameters using config.seed and config.init_std.
void initialize(Network& net, const TrainConfig& config);

/// Adjacent-observation initial value problems.
struct PairBatch {
  std::size_t dim = 0;
  std::vector<double> t_start, t_end;
  std::vector<double> y_start;   // [pairs, dim]
  std::vector<double> y_target;  // [pairs, dim]
  std::vector<double> y_scale;   // |max - min| per state column

  std::size_t size() const { return t_start.size(); }
};

PairBatch make_pair_batch(const Trajectory& traj);
/// |max - min| of each column; throws if any is below 1e-12.
std::vector<double> state_scale(const Trajectory& traj);

/// mean(((pred - obs) / y_scale)^2) with y_scale applied per column.
Tensor normalized_mse(const Tensor& y_pred, const Tensor& y_obs, std::span<const double> y_scale);

struct AdamState {
  std::vector<std::vector<double>> m, v;
  std::size_t step = 0;
};

void adam_update(ParamSet& params, const ParamSet& grads, AdamState& state, double lr, double beta1 = 0.9,
                 double beta2 = 0.999, double eps = 1e-8);
void sgd_update(ParamSet& params, const ParamSet& grads, double lr);

struct LossRecord {
  std::size_t epoch = 0;
  double loss = 0.0;
};

class DivergenceError : public std::runtime_error {
 public:
  DivergenceError(std::size_t epoch, double last_finite_loss);
  std::size_t epoch() const { return epoch_; }
  double last_finite_loss() const { return last_finite_; }

 private:
  std::size_t epoch_;
  double last_finite_;
};

struct MinimizeResult {
  ParamSet best_params;
  double best_loss = 0.0;
  std::size_t best_epoch = 0;
  std::size_t epochs_run = 0;
  std::vector<LossRecord> history;
};

/// Gradient-based minimisation of an arbitrary differentiable loss, keeping the
/// parameters with the lowest loss seen.
MinimizeResult minimize(const LossFn& loss_fn, ParamSet params, const TrainConfig& config);

struct TrainResult {
  Network model;  // best-loss parameters
  double best_loss = 0.0;
  std::size_t best_epoch = 0;
  std::size_t epochs_run = 0;
  std::vector<LossRecord> history;
};

/// Loss of `net` on the pair batch: every pair integrated with fixed
/// fourth-order Fehlberg steps in one record.
Tensor ode_pair_loss(const Network& net, const TrackedParams& params, const PairBatch& batch, std::size_t substeps);

/// Neural ODE training on adjacent pairs of the trajectory.  Uses the
/// network's current parameters as the starting point.
TrainResult train(const Network& net, const Trajectory& traj, const TrainConfig& config);

/// Direct regression of the state columns on the time column (no ODE solve).
TrainResult train_static(const Network& net, const Trajectory& table, const TrainConfig& config);

std::string loss_history_csv(const std::vector<LossRecord>& history);

}  // namespace polyode
