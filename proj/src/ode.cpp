#include "polyode/ode.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace polyode {

const ButcherTableau& fehlberg45() {
  static const ButcherTableau tableau{
      "fehlberg45",
      {0.0, 1.0 / 4.0, 3.0 / 8.0, 12.0 / 13.0, 1.0, 1.0 / 2.0},
      {{},
       {1.0 / 4.0},
       {3.0 / 32.0, 9.0 / 32.0},
       {1932.0 / 2197.0, -7200.0 / 2197.0, 7296.0 / 2197.0},
       {439.0 / 216.0, -8.0, 3680.0 / 513.0, -845.0 / 4104.0},
       {-8.0 / 27.0, 2.0, -3544.0 / 2565.0, 1859.0 / 4104.0, -11.0 / 40.0}},
      {25.0 / 216.0, 0.0, 1408.0 / 2565.0, 2197.0 / 4104.0, -1.0 / 5.0, 0.0},
      {16.0 / 135.0, 0.0, 6656.0 / 12825.0, 28561.0 / 56430.0, -9.0 / 50.0, 2.0 / 55.0},
  };
  return tableau;
}

const ButcherTableau& dormand_prince54() {
  static const ButcherTableau tableau{
      "dormand_prince54",
      {0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0},
      {{},
       {1.0 / 5.0},
       {3.0 / 40.0, 9.0 / 40.0},
       {44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0},
       {19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0},
       {9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0},
       {35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0}},
      {35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0, 0.0},
      {5179.0 / 57600.0, 0.0, 7571.0 / 16695.0, 393.0 / 640.0, -92097.0 / 339200.0, 187.0 / 2100.0, 1.0 / 40.0},
  };
  return tableau;
}

namespace {

// sum_j w[j] * k[j] over nonzero weights; nullopt when every weight is zero.
std::optional<Tensor> combine(std::span<const double> w, const std::vector<Tensor>& k) {
  std::optional<Tensor> acc;
  for (std::size_t j = 0; j < w.size() && j < k.size(); ++j) {
    if (w[j] == 0.0) continue;
    Tensor term = w[j] == 1.0 ? k[j] : scale(k[j], w[j]);
    acc = acc ? add(*acc, term) : term;
  }
  return acc;
}

void check_finite(const Tensor& k, double t, std::size_t stage) {
  auto v = k.data();
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (!std::isfinite(v[i])) {
      std::ostringstream os;
      os << "non-finite value in Runge-Kutta stage " << stage + 1 << " at t=" << t << ", component " << i;
      throw IntegrationError(os.str(), t);
    }
  }
}

// Number of leading stages needed to form the requested combinations.
std::size_t stages_needed(const ButcherTableau& tab, bool with_embedded) {
  std::size_t last = 0;
  for (std::size_t i = 0; i < tab.b.size(); ++i)
    if (tab.b[i] != 0.0) last = i + 1;
  if (with_embedded)
    for (std::size_t i = 0; i < tab.b_hat.size(); ++i)
      if (tab.b_hat[i] != tab.b[i]) last = std::max(last, i + 1);
  return last;
}

std::vector<Tensor> compute_stages(const TensorRhs& f, std::span<const double> t, const Tensor& y,
                                   std::span<const double> h, const ButcherTableau& tab, std::size_t count) {
  std::vector<Tensor> k;
  k.reserve(count);
  std::vector<double> ts(t.size());
  for (std::size_t i = 0; i < count; ++i) {
    for (std::size_t r = 0; r < t.size(); ++r) ts[r] = t[r] + tab.c[i] * h[r];
    auto incr = combine(tab.a[i], k);
    Tensor arg = incr ? add(y, scale_rows(*incr, h)) : y;
    Tensor ki = f(ts, arg);
    if (ki.shape() != y.shape()) {
      throw ShapeError("rk_step: right-hand side returned shape " + shape_string(ki.shape()) + " for state " +
                       shape_string(y.shape()));
    }
    check_finite(ki, ts[0], i);
    k.push_back(std::move(ki));
  }
  return k;
}

}  // namespace

StepResult rk_step(const TensorRhs& f, double t, const Tensor& y, double h, const ButcherTableau& tableau,
                   bool estimate_error) {
  if (!(h > 0.0)) throw std::invalid_argument("rk_step: step size must be positive");
  for (double v : y.data())
    if (!std::isfinite(v)) throw IntegrationError("rk_step: non-finite state at t=" + std::to_string(t), t);

  const bool want_error = estimate_error && !tableau.b_hat.empty();
  const std::vector<double> ts(y.rows(), t);
  const std::vector<double> hs(y.rows(), h);
  const auto k = compute_stages(f, ts, y, hs, tableau, stages_needed(tableau, want_error));

  StepResult out;
  auto incr = combine(tableau.b, k);
  out.y_next = incr ? add(y, scale(*incr, h)) : y;
  if (want_error) {
    std::vector<double> err(y.size(), 0.0);
    for (std::size_t j = 0; j < k.size(); ++j) {
      const double w = tableau.b[j] - tableau.b_hat[j];
      if (w == 0.0) continue;
      auto kj = k[j].data();
      for (std::size_t i = 0; i < err.size(); ++i) err[i] += w * kj[i];
    }
    for (double& e : err) e = std::abs(e) * h;
    out.error = std::move(err);
  }
  return out;
}

Tensor rk_step_rows(const TensorRhs& f, std::span<const double> t, const Tensor& y, std::span<const double> h,
                    const ButcherTableau& tableau) {
  if (t.size() != y.rows() || h.size() != y.rows()) {
    throw ShapeError("rk_step_rows: need one time and one step per row of " + shape_string(y.shape()));
  }
  const auto k = compute_stages(f, t, y, h, tableau, stages_needed(tableau, false));
  auto incr = combine(tableau.b, k);
  return incr ? add(y, scale_rows(*incr, h)) : y;
}

Trajectory FixedRollout::to_trajectory() const {
  Trajectory traj;
  traj.dim = states.empty() ? 0 : states.front().size();
  for (std::size_t i = 0; i < times.size(); ++i) traj.push_back(times[i], states[i].data());
  return traj;
}

FixedRollout integrate_fixed(const TensorRhs& f, std::span<const double> t_grid, const Tensor& y0,
                             std::size_t substeps) {
  if (substeps < 1) throw std::invalid_argument("integrate_fixed: substeps must be at least 1");
  if (t_grid.empty()) throw std::invalid_argument("integrate_fixed: empty time grid");
  for (std::size_t i = 1; i < t_grid.size(); ++i)
    if (!(t_grid[i] > t_grid[i - 1])) throw std::invalid_argument("integrate_fixed: time grid must increase");

  const auto& tab = fehlberg45();
  FixedRollout out;
  out.times.assign(t_grid.begin(), t_grid.end());
  out.states.push_back(y0);
  Tensor y = y0;
  std::vector<double> ts(y0.rows());
  std::vector<double> hs(y0.rows());
  for (std::size_t i = 1; i < t_grid.size(); ++i) {
    const double h = (t_grid[i] - t_grid[i - 1]) / static_cast<double>(substeps);
    std::fill(hs.begin(), hs.end(), h);
    for (std::size_t s = 0; s < substeps; ++s) {
      std::fill(ts.begin(), ts.end(), t_grid[i - 1] + static_cast<double>(s) * h);
      y = rk_step_rows(f, ts, y, hs, tab);
    }
    out.states.push_back(y);
  }
  return out;
}

Tensor batched_pair_step(const TensorRhs& f, std::span<const double> t_start, std::span<const double> t_end,
                         const Tensor& y_start, std::size_t substeps) {
  if (substeps < 1) throw std::invalid_argument("batched_pair_step: substeps must be at least 1");
  if (y_start.rank() != 2 || t_start.size() != y_start.rows() || t_end.size() != y_start.rows()) {
    throw ShapeError("batched_pair_step: expected [pairs, d] start states with one time span per pair, got " +
                     shape_string(y_start.shape()));
  }
  const std::size_t n = y_start.rows();
  std::vector<double> h(n);
  for (std::size_t r = 0; r < n; ++r) {
    if (!(t_end[r] > t_start[r])) throw std::invalid_argument("batched_pair_step: each pair needs t_end > t_start");
    h[r] = (t_end[r] - t_start[r]) / static_cast<double>(substeps);
  }
  const auto& tab = fehlberg45();
  Tensor y = y_start;
  std::vector<double> ts(n);
  for (std::size_t s = 0; s < substeps; ++s) {
    for (std::size_t r = 0; r < n; ++r) ts[r] = t_start[r] + static_cast<double>(s) * h[r];
    y = rk_step_rows(f, ts, y, h, tab);
  }
  return y;
}

// ---------------------------------------------------------------------------
// Adaptive Dormand-Prince 5(4).

namespace {

// Continuous extension coefficients for fourth-order dense output.
constexpr double kD1 = -12715105075.0 / 11282082432.0;
constexpr double kD3 = 87487479700.0 / 32700410799.0;
constexpr double kD4 = -10690763975.0 / 1880347072.0;
constexpr double kD5 = 701980252875.0 / 199316789632.0;
constexpr double kD6 = -1453857185.0 / 822651844.0;
constexpr double kD7 = 69997945.0 / 29380423.0;

double rms_norm(std::span<const double> v, std::span<const double> scale) {
  double s = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    const double r = v[i] / scale[i];
    s += r * r;
  }
  return v.empty() ? 0.0 : std::sqrt(s / static_cast<double>(v.size()));
}

void require_finite(std::span<const double> v, double t) {
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (!std::isfinite(v[i])) {
      throw IntegrationError("integrate_adaptive: non-finite state component " + std::to_string(i) +
                                 " at t=" + format_double(t),
                             t);
    }
  }
}

}  // namespace

Trajectory integrate_adaptive(const PlainRhs& f, double t0, double t1, std::span<const double> y0,
                              std::span<const double> t_eval, const AdaptiveOptions& opt, AdaptiveStats* stats) {
  if (!(opt.rtol > 0.0) || !(opt.atol > 0.0)) throw std::invalid_argument("integrate_adaptive: tolerances must be positive");
  if (!(t1 >= t0)) throw std::invalid_argument("integrate_adaptive: t_span must not run backwards");
  for (std::size_t i = 0; i < t_eval.size(); ++i) {
    if (t_eval[i] < t0 || t_eval[i] > t1) throw std::invalid_argument("integrate_adaptive: t_eval outside t_span");
    if (i > 0 && !(t_eval[i] > t_eval[i - 1])) {
      throw std::invalid_argument("integrate_adaptive: t_eval must be strictly increasing");
    }
  }

  const std::size_t d = y0.size();
  AdaptiveStats local;
  AdaptiveStats& st = stats ? *stats : local;
  Trajectory out;
  out.dim = d;

  std::vector<double> y(y0.begin(), y0.end());
  require_finite(y, t0);
  std::size_t next_eval = 0;
  while (next_eval < t_eval.size() && t_eval[next_eval] == t0) out.push_back(t_eval[next_eval++], y);
  if (next_eval == t_eval.size() || t1 == t0) return out;

  const auto& tab = dormand_prince54();
  const double span = t1 - t0;
  std::vector<std::vector<double>> k(7, std::vector<double>(d));
  std::vector<double> tmp(d), y_new(d), err(d), sc(d);
  auto eval = [&](double t, std::span<const double> state, std::vector<double>& dydt) {
    f(t, state, dydt);
    ++st.evaluations;
    require_finite(dydt, t);
  };

  double t = t0;
  eval(t, y, k[0]);

  // Initial step guess from the local scale of y and f.
  double h;
  {
    for (std::size_t i = 0; i < d; ++i) sc[i] = opt.atol + opt.rtol * std::abs(y[i]);
    const double d0 = rms_norm(y, sc);
    const double d1 = rms_norm(k[0], sc);
    double h0 = (d0 < 1e-5 || d1 < 1e-5) ? 1e-6 : 0.01 * d0 / d1;
    h0 = std::min(h0, span);
    for (std::size_t i = 0; i < d; ++i) tmp[i] = y[i] + h0 * k[0][i];
    eval(t + h0, tmp, k[1]);
    for (std::size_t i = 0; i < d; ++i) err[i] = k[1][i] - k[0][i];
    const double d2 = rms_norm(err, sc) / h0;
    const double dmax = std::max(d1, d2);
    const double h1 = dmax <= 1e-15 ? std::max(1e-6, h0 * 1e-3) : std::pow(0.01 / dmax, 1.0 / 5.0);
    h = std::min({100.0 * h0, h1, span});
  }

  bool last_rejected = false;
  std::size_t steps = 0;
  while (t < t1) {
    if (++steps > opt.max_steps) {
      throw IntegrationError("integrate_adaptive: exceeded " + std::to_string(opt.max_steps) + " steps at t=" +
                                 format_double(t),
                             t);
    }
    if (h < 1e-14 * span) {
      throw IntegrationError("integrate_adaptive: step size underflow at t=" + format_double(t) +
                                 " (problem may be stiff or the solution may blow up)",
                             t);
    }
    const bool final_step = t + h >= t1;
    if (final_step) h = t1 - t;

    for (std::size_t s = 1; s < 7; ++s) {
      for (std::size_t i = 0; i < d; ++i) {
        double acc = 0.0;
        for (std::size_t j = 0; j < s; ++j) acc += tab.a[s][j] * k[j][i];
        tmp[i] = y[i] + h * acc;
      }
      if (s == 6) y_new = tmp;
      eval(s == 6 ? t + h : t + tab.c[s] * h, tmp, k[s]);
    }

    for (std::size_t i = 0; i < d; ++i) {
      double e = 0.0;
      for (std::size_t j = 0; j < 7; ++j) e += (tab.b[j] - tab.b_hat[j]) * k[j][i];
      err[i] = h * e;
      sc[i] = opt.atol + opt.rtol * std::max(std::abs(y[i]), std::abs(y_new[i]));
    }
    const double err_norm = rms_norm(err, sc);
    double factor = err_norm == 0.0 ? 10.0 : 0.9 * std::pow(err_norm, -1.0 / 5.0);
    factor = std::clamp(factor, 0.2, 10.0);

    if (err_norm <= 1.0) {
      ++st.accepted;
      const double t_new = final_step ? t1 : t + h;
      while (next_eval < t_eval.size() && t_eval[next_eval] <= t_new) {
        const double te = t_eval[next_eval++];
        if (te == t_new) {
          out.push_back(te, y_new);
          continue;
        }
        const double theta = (te - t) / h;
        const double theta1 = 1.0 - theta;
        for (std::size_t i = 0; i < d; ++i) {
          const double dy = y_new[i] - y[i];
          const double p2 = h * k[0][i] - dy;
          const double p3 = -h * k[6][i] + dy - p2;
          const double p4 = h * (kD1 * k[0][i] + kD3 * k[2][i] + kD4 * k[3][i] + kD5 * k[4][i] + kD6 * k[5][i] +
                                 kD7 * k[6][i]);
          tmp[i] = y[i] + theta * (dy + theta1 * (p2 + theta * (p3 + theta1 * p4)));
        }
        out.push_back(te, tmp);
      }
      t = t_new;
      y.swap(y_new);
      k[0].swap(k[6]);
      if (last_rejected) factor = std::min(factor, 1.0);
      last_rejected = false;
      if (next_eval == t_eval.size()) break;
    } else {
      ++st.rejected;
      factor = std::min(factor, 1.0);
      last_rejected = true;
    }
    h *= factor;
  }
  return out;
}

}  // namespace polyode
