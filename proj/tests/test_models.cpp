#include "polyode/models.hpp"

#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <random>

using namespace polyode;

namespace {

void set(ParamSet& ps, const std::string& name, std::vector<double> v) { ps.get(name).data = std::move(v); }

double fwd1(const Network& net, double x) { return forward(net, std::vector<double>{x})[0]; }

}  // namespace

TEST_CASE("pi-net recurrence on hand-set weights") {
  PiNetV1 net = PiNetV1::zeros(1, 1, 2, 1);
  set(net.params, "stage1.weight", {1});
  set(net.params, "stage2.weight", {1});
  set(net.params, "out.weight", {1});
  for (double x : {-2.0, -0.5, 0.0, 0.3, 1.7}) CHECK(fwd1(net, x) == doctest::Approx(x * x + x).epsilon(1e-15));
}

TEST_CASE("degree-1 pi-net is affine") {
  PiNetV1 net = PiNetV1::zeros(2, 1, 1, 2);
  set(net.params, "stage1.weight", {1, 2, 3, 4});
  set(net.params, "stage1.bias", {0.5, -1});
  set(net.params, "out.weight", {2, -1});
  set(net.params, "out.bias", {0.25});
  const auto y = forward(Network{net}, std::vector<double>{0.3, -0.7});
  // C (W x + b) + beta
  const double h0 = 1 * 0.3 + 2 * -0.7 + 0.5, h1 = 3 * 0.3 + 4 * -0.7 - 1;
  CHECK(y[0] == doctest::Approx(2 * h0 - h1 + 0.25).epsilon(1e-15));
}

TEST_CASE("zero-weight networks return the output bias") {
  PiNetV1 pn = PiNetV1::zeros(2, 2, 4);
  set(pn.params, "out.bias", {1.5, -2});
  MlpNet mlp = MlpNet::zeros({2, 5, 5, 2}, Activation::tanh);
  set(mlp.params, "layer3.bias", {0.25, 4});
  init_params(mlp.params, 0.5, 3);
  set(mlp.params, "layer3.weight", std::vector<double>(10, 0.0));
  set(mlp.params, "layer3.bias", {0.25, 4});
  for (auto x : {std::vector<double>{0, 0}, {1.5, -3}, {-10, 7}}) {
    CHECK(forward(Network{pn}, x) == std::vector<double>{1.5, -2});
    CHECK(forward(Network{mlp}, x) == std::vector<double>{0.25, 4});
  }
  const MlpNet zero = MlpNet::zeros({2, 5, 2}, Activation::tanh);
  CHECK(forward(Network{zero}, std::vector<double>{3, -1}) == std::vector<double>{0, 0});
}

TEST_CASE("1x2x1 tanh MLP by hand") {
  MlpNet net = MlpNet::zeros({1, 2, 1}, Activation::tanh);
  set(net.params, "layer1.weight", {0.5, -1.5});
  set(net.params, "layer1.bias", {0.1, 0.2});
  set(net.params, "layer2.weight", {2, 3});
  set(net.params, "layer2.bias", {-0.4});
  const double x = 0.8;
  const double want = 2 * std::tanh(0.5 * x + 0.1) + 3 * std::tanh(-1.5 * x + 0.2) - 0.4;
  CHECK(fwd1(net, x) == doctest::Approx(want).epsilon(1e-15));

  net.activation = Activation::relu;
  CHECK(fwd1(net, x) == doctest::Approx(2 * (0.5 * x + 0.1) - 0.4).epsilon(1e-15));
}

TEST_CASE("batched forward equals per-row forward") {
  PiNetV1 net = PiNetV1::zeros(2, 2, 3);
  init_params(net.params, 0.4, 11);
  const std::vector<double> xs{0.1, 0.2, -1.0, 0.5, 2.0, -0.3};
  const Tensor batch = pinet_forward(net, Tensor::constant({3, 2}, xs));
  for (std::size_t r = 0; r < 3; ++r) {
    const auto y = forward(Network{net}, std::vector<double>{xs[2 * r], xs[2 * r + 1]});
    CHECK(batch.at(r, 0) == y[0]);
    CHECK(batch.at(r, 1) == y[1]);
  }
}

TEST_CASE("forward gradients pass finite differences") {
  const Tensor x = Tensor::constant({3, 2}, {0.4, -0.9, 1.2, 0.3, -0.6, 0.8});
  SUBCASE("pi-net degree 4") {
    PiNetV1 net = PiNetV1::zeros(2, 2, 4);
    init_params(net.params, 0.3, 5);
    auto loss = [&](const TrackedParams& p) { return mean(square(pinet_forward(net, p, x))); };
    CHECK(finite_diff_check(loss, net.params, 1e-5) < 1e-4);
  }
  SUBCASE("tanh MLP") {
    MlpNet net = MlpNet::zeros({2, 6, 6, 2}, Activation::tanh);
    init_params(net.params, 0.5, 5);
    auto loss = [&](const TrackedParams& p) { return mean(square(mlp_forward(net, p, x))); };
    CHECK(finite_diff_check(loss, net.params, 1e-5) < 1e-4);
  }
  SUBCASE("relu MLP") {
    MlpNet net = MlpNet::zeros({2, 6, 2}, Activation::relu);
    init_params(net.params, 0.5, 6);
    auto loss = [&](const TrackedParams& p) { return mean(square(mlp_forward(net, p, x))); };
    CHECK(finite_diff_check(loss, net.params, 1e-5) < 1e-4);
  }
}

TEST_CASE("initialisation") {
  CHECK(kPiNetInitStd == 0.01);
  CHECK(kMlpInitStd == 0.00005);
  CHECK(default_init_std(Network{PiNetV1::zeros(2, 2, 2)}) == 0.01);
  CHECK(default_init_std(Network{MlpNet::zeros({2, 3, 2}, Activation::tanh)}) == 0.00005);

  PiNetV1 a = PiNetV1::zeros(2, 2, 3), b = PiNetV1::zeros(2, 2, 3);
  init_params(a.params, 0.01, 42);
  init_params(b.params, 0.01, 42);
  CHECK(a.params == b.params);
  init_params(b.params, 0.01, 43);
  CHECK_FALSE(a.params == b.params);

  // sample std of many draws is close to the requested one
  MlpNet big = MlpNet::zeros({2, 200, 200, 2}, Activation::tanh);
  init_params(big.params, 0.01, 1);
  double s2 = 0.0;
  for (const auto& p : big.params)
    for (double v : p.data) s2 += v * v;
  CHECK(std::sqrt(s2 / static_cast<double>(big.params.scalar_count())) == doctest::Approx(0.01).epsilon(0.02));
  CHECK_THROWS(init_params(big.params, 0.0, 1));
}

TEST_CASE("architecture helpers") {
  CHECK(PiNetV1::default_hidden_width(2, 3) == 8);
  CHECK(PiNetV1::default_hidden_width(2, 6) == 14);
  CHECK(PiNetV1::default_hidden_width(1, 4) == 8);
  const PiNetV1 net = PiNetV1::zeros(2, 3, 2);
  CHECK(net.hidden_width == 8);
  CHECK(net.params.get("stage2.weight").shape == Shape{8, 2});
  CHECK(net.params.get("out.weight").shape == Shape{3, 8});
  CHECK(parse_widths("2x50x50x50x2") == std::vector<std::size_t>{2, 50, 50, 50, 2});
  CHECK(format_widths({1, 100, 1}) == "1x100x1");
  CHECK_THROWS(parse_widths("2x"));
  CHECK_THROWS(parse_widths("2"));
  CHECK(parse_activation("relu") == Activation::relu);
  CHECK_THROWS(parse_activation("sigmoid"));
  CHECK_THROWS(PiNetV1::zeros(2, 2, 0));
  CHECK_THROWS(forward(Network{net}, std::vector<double>{1, 2, 3}));
}

TEST_CASE("checkpoint round trip is byte exact") {
  PiNetV1 pn = PiNetV1::zeros(2, 2, 3);
  init_params(pn.params, 0.01, 9);
  MlpNet mlp = MlpNet::zeros({2, 7, 2}, Activation::relu);
  init_params(mlp.params, 0.3, 9);
  for (const Network& net : {Network{pn}, Network{mlp}}) {
    const std::string a = checkpoint_to_json(net);
    const Network back = checkpoint_from_json(a);
    CHECK(checkpoint_to_json(back) == a);
    CHECK(params_of(back) == params_of(net));
    CHECK(arch_kind(back) == arch_kind(net));
  }
  const auto path = (std::filesystem::temp_directory_path() / "polyode_ckpt_test.json").string();
  save_checkpoint(Network{pn}, path);
  CHECK(checkpoint_to_json(load_checkpoint(path)) == checkpoint_to_json(Network{pn}));
  std::remove(path.c_str());

  CHECK_THROWS(checkpoint_from_json("{\"arch_kind\": \"cnn\"}"));
  CHECK_THROWS(checkpoint_from_json("not json"));
}
