#include "polyode/dynamics.hpp"

#include <doctest.h>

#include <cmath>
#include <limits>

using namespace polyode;

namespace {

// dy/dt = A y, applied row-wise
TensorRhs linear_rhs(std::vector<double> a) {
  return [a](std::span<const double>, const Tensor& y) {
    const Tensor A = Tensor::constant({2, 2}, a);
    return y.rank() == 1 ? matmul(A, y) : matmul(y, transpose(A));
  };
}

const TensorRhs decay = [](std::span<const double>, const Tensor& y) { return scale(y, -1.0); };
const TensorRhs zero_rhs = [](std::span<const double>, const Tensor& y) { return scale(y, 0.0); };

double fixed_error_decay(double h) {
  const auto grid = linspace(0.0, 1.0, static_cast<std::size_t>(std::llround(1.0 / h)) + 1);
  const FixedRollout r = integrate_fixed(decay, grid, Tensor::constant({1}, {1.0}), 1);
  return std::abs(r.states.back().item() - std::exp(-1.0));
}

}  // namespace

TEST_CASE("tableau consistency") {
  for (const ButcherTableau* tab : {&fehlberg45(), &dormand_prince54()}) {
    CAPTURE(tab->name);
    double sb = 0.0, sbh = 0.0;
    for (double v : tab->b) sb += v;
    for (double v : tab->b_hat) sbh += v;
    CHECK(std::abs(sb - 1.0) < 1e-14);
    CHECK(std::abs(sbh - 1.0) < 1e-14);
    for (std::size_t i = 0; i < tab->stages(); ++i) {
      double row = 0.0;
      for (double v : tab->a[i]) row += v;
      CHECK(tab->a[i].size() == i);
      CHECK(std::abs(row - tab->c[i]) < 1e-14);
    }
  }
}

TEST_CASE("single steps") {
  const Tensor y = Tensor::constant({2}, {1.0, -2.0});
  const StepResult s0 = rk_step(zero_rhs, 0.0, y, 0.1, fehlberg45());
  CHECK(s0.y_next.data()[0] == 1.0);
  CHECK(s0.y_next.data()[1] == -2.0);
  REQUIRE(s0.error);
  CHECK((*s0.error)[0] == 0.0);

  const TensorRhs one = [](std::span<const double>, const Tensor& v) {
    return Tensor::constant(v.shape(), std::vector<double>(v.size(), 1.0));
  };
  for (const ButcherTableau* tab : {&fehlberg45(), &dormand_prince54()}) {
    const StepResult s = rk_step(one, 0.0, y, 0.25, *tab);
    CHECK(s.y_next.data()[0] == doctest::Approx(1.25).epsilon(1e-15));
    CHECK(s.y_next.data()[1] == doctest::Approx(-1.75).epsilon(1e-15));
  }

  const StepResult e = rk_step(decay, 0.0, Tensor::constant({1}, {1.0}), 0.1, fehlberg45());
  CHECK(std::abs(e.y_next.item() - std::exp(-0.1)) < 1e-7);
  REQUIRE(e.error);
  CHECK((*e.error)[0] > 0.0);
  CHECK((*e.error)[0] < 1e-6);

  CHECK_THROWS(rk_step(decay, 0.0, y, 0.0, fehlberg45()));
}

TEST_CASE("non-finite stages are reported with the time") {
  const TensorRhs bad = [](std::span<const double>, const Tensor& v) {
    return Tensor::constant(v.shape(), std::vector<double>(v.size(), std::numeric_limits<double>::infinity()));
  };
  try {
    (void)rk_step(bad, 2.5, Tensor::constant({1}, {1.0}), 0.1, fehlberg45());
    FAIL("expected IntegrationError");
  } catch (const IntegrationError& e) {
    CHECK(e.t() == doctest::Approx(2.5));
  }
}

TEST_CASE("fixed-step convergence order") {
  const double e1 = fixed_error_decay(0.2), e2 = fixed_error_decay(0.1), e3 = fixed_error_decay(0.05);
  const double order1 = std::log2(e1 / e2), order2 = std::log2(e2 / e3);
  CHECK(order1 >= 3.8);
  CHECK(order2 >= 3.8);
}

TEST_CASE("fixed-step linear system against the matrix exponential") {
  // A = [[0, 1], [-1, 0]]: rotation, exp(At) y0 known in closed form
  const auto f = linear_rhs({0, 1, -1, 0});
  const std::vector<double> y0{1.0, 0.5};
  auto max_err = [&](std::size_t substeps) {
    const auto grid = linspace(0.0, 1.0, 5);
    const FixedRollout r = integrate_fixed(f, grid, Tensor::constant({2}, y0), substeps);
    double err = 0.0;
    for (std::size_t i = 0; i < grid.size(); ++i) {
      const double t = grid[i];
      err = std::max(err, std::abs(r.states[i].data()[0] - (y0[0] * std::cos(t) + y0[1] * std::sin(t))));
      err = std::max(err, std::abs(r.states[i].data()[1] - (-y0[0] * std::sin(t) + y0[1] * std::cos(t))));
    }
    return err;
  };
  const double e1 = max_err(2), e2 = max_err(4);
  CHECK(e1 < 1e-6);
  CHECK(e1 / e2 == doctest::Approx(16.0).epsilon(0.15));

  const FixedRollout flat = integrate_fixed(zero_rhs, linspace(0, 3, 7), Tensor::constant({2}, y0), 2);
  for (const auto& s : flat.states) CHECK(std::vector<double>(s.data().begin(), s.data().end()) == y0);
  const Trajectory tr = flat.to_trajectory();
  CHECK(tr.size() == 7);
  CHECK(tr.dim == 2);
}

TEST_CASE("batched pair steps match per-pair rollouts") {
  const auto f = linear_rhs({-0.3, 1.2, -0.8, 0.1});
  const std::vector<double> t0{0.0, 0.4, 1.3}, t1{0.25, 0.5, 2.0};
  const std::vector<double> ys{1.0, 0.0, -0.5, 2.0, 0.3, 0.3};
  const Tensor batch = batched_pair_step(f, t0, t1, Tensor::constant({3, 2}, ys), 3);
  for (std::size_t r = 0; r < 3; ++r) {
    const std::vector<double> grid{t0[r], t1[r]};
    const FixedRollout one = integrate_fixed(f, grid, Tensor::constant({2}, {ys[2 * r], ys[2 * r + 1]}), 3);
    for (std::size_t j = 0; j < 2; ++j) CHECK(std::abs(batch.at(r, j) - one.states.back().at(j)) <= 1e-14);
  }
  const Tensor still = batched_pair_step(zero_rhs, t0, t1, Tensor::constant({3, 2}, ys), 2);
  CHECK(std::vector<double>(still.data().begin(), still.data().end()) == ys);
  CHECK_THROWS(batched_pair_step(f, t1, t0, Tensor::constant({3, 2}, ys), 2));
}

TEST_CASE("gradients through a 3-step rollout") {
  PiNetV1 net = PiNetV1::zeros(2, 2, 2);
  init_params(net.params, 0.3, 4);
  const Network n{net};
  const std::vector<double> grid{0.0, 0.1, 0.2, 0.3};
  auto loss = [&](const TrackedParams& p) {
    const TensorRhs f = tensor_rhs(n, p);
    const FixedRollout r = integrate_fixed(f, grid, Tensor::constant({2}, {0.5, -0.4}), 1);
    return mean(square(r.states.back()));
  };
  CHECK(finite_diff_check(loss, net.params, 1e-5) < 1e-4);
}

TEST_CASE("adaptive integration") {
  const PlainRhs dec = [](double, std::span<const double> y, std::span<double> d) { d[0] = -y[0]; };
  const std::vector<double> one{1.0};
  const std::vector<double> t_eval{0.0, 0.5, 1.0};
  AdaptiveStats stats;
  const Trajectory tr = integrate_adaptive(dec, 0.0, 1.0, one, t_eval, {1e-7, 1e-9}, &stats);
  CHECK(std::abs(tr.at(2, 0) - 0.36787944) < 1e-6);
  CHECK(std::abs(tr.at(1, 0) - std::exp(-0.5)) < 1e-6);
  CHECK(stats.accepted > 0);

  // harmonic oscillator over one period
  const PlainRhs osc = [](double, std::span<const double> y, std::span<double> d) {
    d[0] = y[1];
    d[1] = -y[0];
  };
  const double period = 2.0 * M_PI;
  const std::vector<double> y0{1.0, 0.0};
  const std::vector<double> ends{0.0, period};
  const Trajectory h = integrate_adaptive(osc, 0.0, period, y0, ends);
  CHECK(std::abs(h.at(1, 0) - 1.0) < 1e-5);
  CHECK(std::abs(h.at(1, 1)) < 1e-5);

  CHECK_THROWS(integrate_adaptive(dec, 0.0, 1.0, one, std::vector<double>{0.5, 0.2}));
  CHECK_THROWS(integrate_adaptive(dec, 0.0, 1.0, one, std::vector<double>{0.5, 2.0}));
  CHECK_THROWS(integrate_adaptive(dec, 0.0, 1.0, one, t_eval, {0.0, 1e-9}));
}

TEST_CASE("adaptive failures") {
  // y' = y^2 from 1 blows up at t = 1
  const PlainRhs blow = [](double, std::span<const double> y, std::span<double> d) { d[0] = y[0] * y[0]; };
  const std::vector<double> one{1.0};
  CHECK_THROWS_AS(integrate_adaptive(blow, 0.0, 2.0, one, std::vector<double>{2.0}), IntegrationError);
  AdaptiveOptions few;
  few.max_steps = 5;
  const PlainRhs osc = [](double, std::span<const double> y, std::span<double> d) { d[0] = std::cos(50 * y[0]); };
  CHECK_THROWS_AS(integrate_adaptive(osc, 0.0, 100.0, one, std::vector<double>{100.0}, few), IntegrationError);
}

TEST_CASE("adaptive agrees with fine fixed steps on Lotka-Volterra") {
  const AnalyticSystem lv = AnalyticSystem::make(SystemId::lotka_volterra);
  const auto grid = linspace(0.0, 10.0, 200);
  const std::vector<double> y0{1.0, 1.0};
  const Trajectory a = integrate_adaptive(plain_rhs(lv), 0.0, 10.0, y0, grid, {1e-10, 1e-12});
  const FixedRollout f = integrate_fixed(tensor_rhs(DynamicsModel{lv}), grid, Tensor::constant({2}, y0), 64);
  double err = 0.0;
  for (std::size_t i = 0; i < grid.size(); ++i)
    for (std::size_t j = 0; j < 2; ++j) err = std::max(err, std::abs(a.at(i, j) - f.states[i].at(j)));
  CHECK(err < 1e-6);
}

TEST_CASE("trajectory CSV") {
  Trajectory t;
  t.dim = 2;
  t.names = {"x", "y"};
  t.push_back(0.0, std::vector<double>{1.0, 0.1});
  t.push_back(0.1, std::vector<double>{1.0 / 3.0, -2e-300});
  const std::string csv = trajectory_to_csv(t);
  CHECK(csv.rfind("t,x,y\n", 0) == 0);
  const Trajectory back = trajectory_from_csv(csv);
  CHECK(back.states == t.states);
  CHECK(back.times == t.times);
  CHECK(trajectory_to_csv(back) == csv);
  CHECK_THROWS(trajectory_from_csv("t,x\n0,1\n0,2\n"));     // not increasing
  CHECK_THROWS(trajectory_from_csv("t,x\n0,1,2\n"));        // ragged
  CHECK_THROWS(trajectory_from_csv("t,x\n0,abc\n"));        // not a number
  CHECK(format_double(0.1) == "0.1");
  CHECK(linspace(0, 1, 3) == std::vector<double>{0, 0.5, 1});
}
