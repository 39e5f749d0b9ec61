#pragma once

#include "polyode/tensor.hpp"

#include <functional>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace polyode {

/// Time grid plus a row-major [T, dim] state matrix.
struct Trajectory {
  std::vector<double> times;
  std::vector<double> states;
  std::size_t dim = 0;
  std::string time_name = "t";
  std::vector<std::string> names;  // one per state column

  std::size_t size() const { return times.size(); }
  std::span<const double> row(std::size_t i) const { return {states.data() + i * dim, dim}; }
  double at(std::size_t i, std::size_t j) const { return states[i * dim + j]; }
  void push_back(double t, std::span<const double> y);
  /// Throws unless times are strictly increasing and states finite.
  void validate() const;
};

std::string trajectory_to_csv(const Trajectory& traj);
Trajectory trajectory_from_csv(const std::string& text);
void write_trajectory_csv(const Trajectory& traj, const std::string& path);
Trajectory read_trajectory_csv(const std::string& path);

void write_text_file(const std::string& path, const std::string& text);
std::string read_text_file(const std::string& path);

/// Shortest text that parses back to the same double.
std::string format_double(double v);

std::vector<double> linspace(double a, double b, std::size_t n);

struct ButcherTableau {
  std::string name;
  std::vector<double> c;
  std::vector<std::vector<double>> a;  // row i holds a[i][0..i-1]
  std::vector<double> b;               // propagated solution
  std::vector<double> b_hat;           // embedded solution; empty if none
  std::size_t stages() const { return c.size(); }
};

/// Fehlberg 4(5); b holds the fourth-order weights.
const ButcherTableau& fehlberg45();
/// Dormand-Prince 5(4); b holds the fifth-order weights.
const ButcherTableau& dormand_prince54();

class IntegrationError : public std::runtime_error {
 public:
  IntegrationError(const std::string& what, double t) : std::runtime_error(what), t_(t) {}
  double t() const { return t_; }

 private:
  double t_;
};

/// Right-hand side on tensors.  `y` is [d] or [batch, d]; `t` carries one time
/// per row.
using TensorRhs = std::function<Tensor(std::span<const double> t, const Tensor& y)>;

struct StepResult {
  Tensor y_next;
  /// |sum_i (b_i - b_hat_i) k_i| * h per entry of y, when requested and available.
  std::optional<std::vector<double>> error;
};

StepResult rk_step(const TensorRhs& f, double t, const Tensor& y, double h, const ButcherTableau& tableau,
                   bool estimate_error = true);

/// One explicit step on a batch where row r starts at t[r] with step h[r].
Tensor rk_step_rows(const TensorRhs& f, std::span<const double> t, const Tensor& y, std::span<const double> h,
                    const ButcherTableau& tableau);

struct FixedRollout {
  std::vector<double> times;
  std::vector<Tensor> states;
  Trajectory to_trajectory() const;
};

/// `substeps` equal fourth-order Fehlberg steps between consecutive grid points.
FixedRollout integrate_fixed(const TensorRhs& f, std::span<const double> t_grid, const Tensor& y0,
                             std::size_t substeps);

/// Advances row r of y_start from t_start[r] to t_end[r] in `substeps` equal
/// steps, all rows inside one computation record.  Returns [pairs, d].
Tensor batched_pair_step(const TensorRhs& f, std::span<const double> t_start, std::span<const double> t_end,
                         const Tensor& y_start, std::size_t substeps);

using PlainRhs = std::function<void(double t, std::span<const double> y, std::span<double> dydt)>;

struct AdaptiveOptions {
  double rtol = 1e-7;
  double atol = 1e-9;
  std::size_t max_steps = 1'000'000;
};

struct AdaptiveStats {
  std::size_t accepted = 0;
  std::size_t rejected = 0;
  std::size_t evaluations = 0;
};

/// Dormand-Prince 5(4) with step-size control and dense output at t_eval.
Trajectory integrate_adaptive(const PlainRhs& f, double t0, double t1, std::span<const double> y0,
                              std::span<const double> t_eval, const AdaptiveOptions& options = {},
                              AdaptiveStats* stats = nullptr);

}  // namespace polyode
