#pragma once

// The benchmark matrix: every experiment trains a model on its dataset and
// scores it against the ground-truth system.

#include "polyode/dynamics.hpp"
#include "polyode/training.hpp"

#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace polyode {

struct ExperimentSettings {
  TrainConfig train;
  std::size_t restarts = 1;       // seeds train.seed, train.seed + 1, ...
  std::size_t field_grid = 30;    // nodes per side for vector-field errors
  double outside_factor = 3.0;    // box expansion for the extrapolation error
  std::size_t rollout_points = 1001;
  /// MLP only: init std to fall back to when the default std never leaves
  /// the starting plateau.  0 disables the retry.
  double mlp_fallback_std = 0.01;
};

/// Per-system defaults.  Stiffer systems get more substeps per interval.
ExperimentSettings default_settings(SystemId id);

struct BenchRow {
  SystemId system = SystemId::lotka_volterra;
  std::string model;  // "pinet-3", "mlp-2x50x50x50x2-tanh"
  std::size_t degree = 0;  // 0 for MLPs
  bool ok = false;
  std::string error;
  std::string notes;

  double best_loss = 0.0;
  std::size_t epochs_run = 0;
  std::uint64_t seed = 0;
  double init_std = 0.0;
  double seconds = 0.0;

  std::optional<CoefficientReport> coefficients;
  std::string equations;

  // RMS of (model - truth) rhs over the training box, the expanded box and,
  // for the damped oscillator, the [-1000, 1000]^2 square.
  std::optional<double> rms_train, rms_outside, rms_wide;

  // Max absolute rollout error from y0 up to the comparison horizon.
  std::optional<double> rollout_error;
  std::string rollout_status;

  std::optional<CycleVerdict> cycle;

  std::optional<Network> model_params;
  std::vector<LossRecord> history;
};

/// Trains one model on the experiment's dataset and evaluates it.
/// `net` supplies the architecture; its parameters are re-initialised per
/// restart.  Exceptions are captured in the row.
BenchRow run_experiment(const ExperimentSpec& spec, const Network& net, const ExperimentSettings& settings);

BenchRow run_pinet_experiment(const ExperimentSpec& spec, std::size_t degree, const ExperimentSettings& settings);
BenchRow run_mlp_experiment(const ExperimentSpec& spec, const ExperimentSettings& settings);

/// Evaluation only; `model` must already be trained.
void evaluate_row(BenchRow& row, const ExperimentSpec& spec, const Trajectory& data, const Network& model,
                  const ExperimentSettings& settings);

/// RMS of the rhs difference over a box (2 states) or interval (1 state).
double rhs_rms_error(const DynamicsModel& model, const DynamicsModel& truth, const Box& box, std::size_t n);

struct BenchOptions {
  std::vector<SystemId> systems;                // empty: all
  std::vector<std::size_t> degrees;             // empty: the standard degrees per system
  bool mlp = true;
  std::optional<std::size_t> epochs;            // overrides every experiment
  std::optional<std::uint64_t> seed;
  std::size_t threads = 1;
  std::function<void(const BenchRow&)> on_row;  // progress callback
};

struct BenchReport {
  std::vector<BenchRow> rows;

  std::size_t failures() const;
  /// Deterministic for fixed seeds: runtimes are left out.
  std::string to_json() const;
  std::string to_markdown() const;
};

BenchReport run_bench(const BenchOptions& options);

}  // namespace polyode
