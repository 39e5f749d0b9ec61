#include "polyode/models.hpp"

#include <doctest.h>

#include <cmath>
#include <limits>

using namespace polyode;

namespace {

std::vector<double> values(const Tensor& t) { return {t.data().begin(), t.data().end()}; }

}  // namespace

TEST_CASE("elementwise and matrix primitives") {
  const Tensor a = Tensor::constant({2}, {1, 2});
  const Tensor b = Tensor::constant({2}, {3, 4});
  CHECK(values(hadamard(a, b)) == std::vector<double>{3, 8});
  CHECK(values(add(a, b)) == std::vector<double>{4, 6});
  CHECK(values(sub(a, b)) == std::vector<double>{-2, -2});
  CHECK(values(scale(a, 2.5)) == std::vector<double>{2.5, 5});
  CHECK(values(square(b)) == std::vector<double>{9, 16});
  CHECK(sum(b).item() == 7);
  CHECK(mean(b).item() == 3.5);
  CHECK(values(tanh(Tensor::constant({1}, {0.0}))) == std::vector<double>{0.0});
  CHECK(values(relu(Tensor::constant({3}, {-1, 0, 2}))) == std::vector<double>{0, 0, 2});

  const Tensor eye = Tensor::constant({2, 2}, {1, 0, 0, 1});
  CHECK(values(matmul(eye, Tensor::constant({2}, {5, 7}))) == std::vector<double>{5, 7});

  const Tensor m = Tensor::constant({2, 3}, {1, 2, 3, 4, 5, 6});
  const Tensor mt = transpose(m);
  CHECK(mt.shape() == Shape{3, 2});
  CHECK(values(mt) == std::vector<double>{1, 4, 2, 5, 3, 6});
  CHECK(values(matmul(m, mt)) == std::vector<double>{14, 32, 32, 77});

  // row broadcasting
  CHECK(values(add(m, Tensor::constant({3}, {10, 20, 30}))) == std::vector<double>{11, 22, 33, 14, 25, 36});
  CHECK(values(scale_rows(m, std::vector<double>{2, -1})) == std::vector<double>{2, 4, 6, -4, -5, -6});

  // x W^T + b on a batch
  const Tensor w = Tensor::constant({1, 3}, {1, 1, 1});
  CHECK(values(affine(m, w, Tensor::constant({1}, {0.5}))) == std::vector<double>{6.5, 15.5});
}

TEST_CASE("shape errors name the operation and both shapes") {
  const Tensor a = Tensor::constant({2}, {1, 2});
  const Tensor b = Tensor::constant({3}, {1, 2, 3});
  try {
    (void)hadamard(a, b);
    FAIL("expected ShapeError");
  } catch (const ShapeError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("hadamard") != std::string::npos);
    CHECK(msg.find("[2]") != std::string::npos);
    CHECK(msg.find("[3]") != std::string::npos);
  }
  CHECK_THROWS_AS(matmul(Tensor::zeros({2, 3}), Tensor::zeros({2, 3})), ShapeError);
  CHECK_THROWS_AS(Tensor::constant({2, 2}, {1, 2, 3}), ShapeError);
}

TEST_CASE("backward of simple expressions") {
  ParamSet ps;
  ps.add("w", {1}, {3});
  ps.add("unused", {2}, {1, 1});
  const TrackedParams p(ps);
  const ParamSet g = backward(sum(hadamard(p["w"], p["w"])), p);
  CHECK(g.get("w").data == std::vector<double>{6});
  CHECK(g.get("unused").data == std::vector<double>{0, 0});
  CHECK(g.get("unused").shape == Shape{2});

  // non-scalar loss
  CHECK_THROWS_AS(backward(add(p["unused"], p["unused"]), p), ShapeError);
}

TEST_CASE("relu gradient at zero is zero") {
  ParamSet ps;
  ps.add("x", {3}, {-1, 0, 2});
  const TrackedParams p(ps);
  const ParamSet g = backward(sum(relu(p["x"])), p);
  CHECK(g.get("x").data == std::vector<double>{0, 0, 1});
}

TEST_CASE("least-squares gradient matches the closed form") {
  // loss = mean((W x - y)^2) over the 2 outputs; dL/dW_ij = r_i x_j, dL/db_i = r_i
  const std::vector<double> W{0.5, -1.25, 2.0, 0.75};
  const std::vector<double> bias{0.1, -0.3};
  const std::vector<double> x{1.5, -2.0};
  const std::vector<double> y{0.25, 1.0};
  ParamSet ps;
  ps.add("W", {2, 2}, W);
  ps.add("b", {2}, bias);
  const TrackedParams p(ps);
  const Tensor pred = affine(Tensor::constant({2}, x), p["W"], p["b"]);
  const ParamSet g = backward(mean(square(sub(pred, Tensor::constant({2}, y)))), p);

  double r[2];
  for (int i = 0; i < 2; ++i) r[i] = W[2 * i] * x[0] + W[2 * i + 1] * x[1] + bias[i] - y[i];
  for (int i = 0; i < 2; ++i) {
    for (int j = 0; j < 2; ++j) CHECK(g.get("W").data[2 * i + j] == doctest::Approx(r[i] * x[j]).epsilon(1e-14));
    CHECK(g.get("b").data[i] == doctest::Approx(r[i]).epsilon(1e-14));
  }
}

TEST_CASE("finite-difference checks") {
  SUBCASE("quadratic") {
    ParamSet ps;
    ps.add("a", {3}, {0.3, -1.2, 2.0});
    ps.add("B", {2, 3}, {1, 2, 3, -1, 0.5, 0.25});
    const LossFn loss = [](const TrackedParams& p) {
      return sum(square(add(matmul(p["B"], p["a"]), Tensor::constant({2}, {1, -1}))));
    };
    CHECK(finite_diff_check(loss, ps, 1e-5) < 1e-6);
  }
  SUBCASE("no parameters") {
    const LossFn loss = [](const TrackedParams&) { return Tensor::scalar(4.0); };
    CHECK(finite_diff_check(loss, ParamSet{}, 1e-5) == 0.0);
  }
  SUBCASE("broadcast ops, tanh and row scaling") {
    ParamSet ps;
    ps.add("M", {3, 2}, {0.1, -0.4, 0.7, 0.2, -0.3, 0.9});
    ps.add("v", {2}, {0.5, -0.6});
    const LossFn loss = [](const TrackedParams& p) {
      const Tensor h = tanh(hadamard(add(p["M"], p["v"]), p["M"]));
      return mean(square(scale_rows(sub(h, p["v"]), std::vector<double>{1.0, -2.0, 0.5})));
    };
    CHECK(finite_diff_check(loss, ps, 1e-5) < 1e-6);
  }
  SUBCASE("non-finite perturbed loss names the parameter") {
    ParamSet ps;
    ps.add("w", {1}, {1.0});
    const LossFn loss = [](const TrackedParams& p) {
      const double nan = std::numeric_limits<double>::quiet_NaN();
      return add(sum(square(p["w"])), Tensor::scalar(p["w"].at(0) == 1.0 ? 0.0 : nan));
    };
    try {
      (void)finite_diff_check(loss, ps, 1e-5);
      FAIL("expected an error");
    } catch (const std::runtime_error& e) {
      CHECK(std::string(e.what()).find("w") != std::string::npos);
    }
  }
}

TEST_CASE("backward is linear in the loss") {
  ParamSet ps;
  ps.add("w", {2, 2}, {0.3, -0.7, 1.1, 0.4});
  ps.add("b", {2}, {0.2, -0.1});
  const Tensor x = Tensor::constant({3, 2}, {1, 2, -1, 0.5, 0.3, -0.8});
  auto l1 = [&](const TrackedParams& p) { return mean(square(tanh(affine(x, p["w"], p["b"])))); };
  auto l2 = [&](const TrackedParams& p) { return sum(hadamard(affine(x, p["w"], p["b"]), affine(x, p["w"], p["b"]))); };
  const double a = 0.7, b = -2.3;
  const TrackedParams p1(ps), p2(ps), p3(ps);
  const ParamSet g1 = backward(l1(p1), p1);
  const ParamSet g2 = backward(l2(p2), p2);
  const ParamSet g = backward(add(scale(l1(p3), a), scale(l2(p3), b)), p3);
  for (std::size_t i = 0; i < g.size(); ++i) {
    for (std::size_t j = 0; j < g[i].data.size(); ++j) {
      const double want = a * g1[i].data[j] + b * g2[i].data[j];
      CHECK(std::abs(g[i].data[j] - want) <= 1e-12 * std::max(1.0, std::abs(want)));
    }
  }
}

TEST_CASE("repeated evaluation is bitwise identical") {
  PiNetV1 net = PiNetV1::zeros(2, 2, 3);
  init_params(net.params, 0.3, 7);
  const Tensor x = Tensor::constant({4, 2}, {0.1, 0.2, -0.5, 1.0, 0.7, -0.3, 1.5, 1.1});
  auto run = [&] {
    const TrackedParams p(net.params);
    const Tensor loss = mean(square(pinet_forward(net, p, x)));
    return std::make_pair(loss.item(), backward(loss, p));
  };
  const auto [l1, g1] = run();
  const auto [l2, g2] = run();
  CHECK(l1 == l2);
  CHECK(g1 == g2);
}

TEST_CASE("ParamSet keeps order and rejects duplicate names") {
  ParamSet ps;
  ps.add("b", {1}, {1});
  ps.add("a", {2}, {1, 2});
  CHECK(ps[0].name == "b");
  CHECK(ps[1].name == "a");
  CHECK(ps.scalar_count() == 3);
  CHECK_THROWS(ps.add("a", {1}, {0}));
  CHECK_THROWS(ps.add("c", {2}, {0}));
  CHECK(ps.find("zz") == nullptr);
  CHECK_THROWS(ps.get("zz"));
}

TEST_CASE("untracked tensors carry no record") {
  ParamSet ps;
  ps.add("w", {2}, {1, 2});
  const TrackedParams frozen(ps, false);
  CHECK_FALSE(frozen["w"].tracked());
  const TrackedParams live(ps);
  CHECK(live["w"].tracked());
  CHECK_FALSE(hadamard(live["w"], live["w"]).detach().tracked());
}
