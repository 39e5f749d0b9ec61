#include "polyode/models.hpp"

#include <algorithm>
#include <random>
#include <sstream>
#include <stdexcept>

namespace polyode {

std::size_t PiNetV1::default_hidden_width(std::size_t input_dim, std::size_t degree) {
  return std::max<std::size_t>(input_dim * (degree + 1), 8);
}

PiNetV1 PiNetV1::zeros(std::size_t input_dim, std::size_t output_dim, std::size_t degree,
                       std::size_t hidden_width) {
  if (degree < 1) throw std::invalid_argument("PiNetV1: degree must be at least 1");
  if (input_dim == 0 || output_dim == 0) throw std::invalid_argument("PiNetV1: dimensions must be positive");
  PiNetV1 net;
  net.input_dim = input_dim;
  net.output_dim = output_dim;
  net.degree = degree;
  net.hidden_width = hidden_width ? hidden_width : default_hidden_width(input_dim, degree);
  const std::size_t k = net.hidden_width;
  for (std::size_t n = 1; n <= degree; ++n) {
    net.params.add(stage_weight(n), {k, input_dim}, std::vector<double>(k * input_dim, 0.0));
    net.params.add(stage_bias(n), {k}, std::vector<double>(k, 0.0));
  }
  net.params.add(kOutWeight, {output_dim, k}, std::vector<double>(output_dim * k, 0.0));
  net.params.add(kOutBias, {output_dim}, std::vector<double>(output_dim, 0.0));
  return net;
}

void PiNetV1::validate() const {
  if (degree < 1) throw std::invalid_argument("PiNetV1: degree must be at least 1");
  const std::size_t k = hidden_width;
  auto expect = [&](const std::string& name, const Shape& shape) {
    const Param* p = params.find(name);
    if (!p) throw std::invalid_argument("PiNetV1: missing parameter " + name);
    if (p->shape != shape) {
      throw ShapeError("PiNetV1: parameter " + name + " has shape " + shape_string(p->shape) + ", expected " +
                       shape_string(shape));
    }
  };
  for (std::size_t n = 1; n <= degree; ++n) {
    expect(stage_weight(n), {k, input_dim});
    expect(stage_bias(n), {k});
  }
  expect(kOutWeight, {output_dim, k});
  expect(kOutBias, {output_dim});
  if (params.size() != 2 * degree + 2) throw std::invalid_argument("PiNetV1: unexpected extra parameters");
}

std::string to_string(Activation a) { return a == Activation::tanh ? "tanh" : "relu"; }

Activation parse_activation(const std::string& s) {
  if (s == "tanh") return Activation::tanh;
  if (s == "relu") return Activation::relu;
  throw std::invalid_argument("unknown activation '" + s + "' (expected tanh or relu)");
}

MlpNet MlpNet::zeros(std::vector<std::size_t> widths, Activation activation) {
  if (widths.size() < 2) throw std::invalid_argument("MlpNet: need at least input and output widths");
  for (auto w : widths)
    if (w == 0) throw std::invalid_argument("MlpNet: widths must be positive");
  MlpNet net;
  net.widths = std::move(widths);
  net.activation = activation;
  for (std::size_t i = 1; i < net.widths.size(); ++i) {
    const auto in = net.widths[i - 1];
    const auto out = net.widths[i];
    net.params.add(layer_weight(i), {out, in}, std::vector<double>(out * in, 0.0));
    net.params.add(layer_bias(i), {out}, std::vector<double>(out, 0.0));
  }
  return net;
}

void MlpNet::validate() const {
  if (widths.size() < 2) throw std::invalid_argument("MlpNet: need at least input and output widths");
  if (params.size() != 2 * (widths.size() - 1)) throw std::invalid_argument("MlpNet: parameter count mismatch");
  for (std::size_t i = 1; i < widths.size(); ++i) {
    if (params.get(layer_weight(i)).shape != Shape{widths[i], widths[i - 1]} ||
        params.get(layer_bias(i)).shape != Shape{widths[i]}) {
      throw ShapeError("MlpNet: layer " + std::to_string(i) + " shapes do not match widths");
    }
  }
}

std::vector<std::size_t> parse_widths(const std::string& s) {
  std::vector<std::size_t> out;
  std::stringstream ss(s);
  std::string part;
  while (std::getline(ss, part, 'x')) {
    if (part.empty() || part.find_first_not_of("0123456789") != std::string::npos) {
      throw std::invalid_argument("bad widths '" + s + "' (expected e.g. 2x50x50x2)");
    }
    out.push_back(std::stoul(part));
  }
  if (out.size() < 2) throw std::invalid_argument("bad widths '" + s + "' (need at least two layers)");
  return out;
}

std::string format_widths(const std::vector<std::size_t>& widths) {
  std::string s;
  for (std::size_t i = 0; i < widths.size(); ++i) s += (i ? "x" : "") + std::to_string(widths[i]);
  return s;
}

const ParamSet& params_of(const Network& net) {
  return std::visit([](const auto& n) -> const ParamSet& { return n.params; }, net);
}

ParamSet& params_of(Network& net) {
  return std::visit([](auto& n) -> ParamSet& { return n.params; }, net);
}

std::size_t input_dim(const Network& net) {
  if (const auto* p = std::get_if<PiNetV1>(&net)) return p->input_dim;
  return std::get<MlpNet>(net).input_dim();
}

std::size_t output_dim(const Network& net) {
  if (const auto* p = std::get_if<PiNetV1>(&net)) return p->output_dim;
  return std::get<MlpNet>(net).output_dim();
}

std::string arch_kind(const Network& net) { return std::holds_alternative<PiNetV1>(net) ? "pinet" : "mlp"; }

namespace {

void check_input(const char* what, const Tensor& x, std::size_t d) {
  if ((x.rank() != 1 && x.rank() != 2) || x.cols() != d) {
    throw ShapeError(std::string(what) + ": input of shape " + shape_string(x.shape()) + " does not have " +
                     std::to_string(d) + " features");
  }
}

}  // namespace

Tensor pinet_forward(const PiNetV1& net, const TrackedParams& p, const Tensor& x) {
  check_input("pinet_forward", x, net.input_dim);
  Tensor h = affine(x, p[PiNetV1::stage_weight(1)], p[PiNetV1::stage_bias(1)]);
  for (std::size_t n = 2; n <= net.degree; ++n) {
    Tensor z = affine(x, p[PiNetV1::stage_weight(n)], p[PiNetV1::stage_bias(n)]);
    h = add(hadamard(z, h), h);
  }
  return affine(h, p[PiNetV1::kOutWeight], p[PiNetV1::kOutBias]);
}

Tensor pinet_forward(const PiNetV1& net, const Tensor& x) {
  return pinet_forward(net, TrackedParams(net.params, false), x);
}

Tensor mlp_forward(const MlpNet& net, const TrackedParams& p, const Tensor& x) {
  check_input("mlp_forward", x, net.input_dim());
  Tensor h = x;
  const std::size_t layers = net.widths.size() - 1;
  for (std::size_t i = 1; i <= layers; ++i) {
    h = affine(h, p[MlpNet::layer_weight(i)], p[MlpNet::layer_bias(i)]);
    if (i < layers) h = net.activation == Activation::tanh ? tanh(h) : relu(h);
  }
  return h;
}

Tensor mlp_forward(const MlpNet& net, const Tensor& x) {
  return mlp_forward(net, TrackedParams(net.params, false), x);
}

Tensor forward(const Network& net, const TrackedParams& params, const Tensor& x) {
  if (const auto* p = std::get_if<PiNetV1>(&net)) return pinet_forward(*p, params, x);
  return mlp_forward(std::get<MlpNet>(net), params, x);
}

Tensor forward(const Network& net, const Tensor& x) {
  return forward(net, TrackedParams(params_of(net), /*track=*/false), x);
}

std::vector<double> forward(const Network& net, std::span<const double> x) {
  Tensor y = forward(net, Tensor::constant({x.size()}, {x.begin(), x.end()}));
  return {y.data().begin(), y.data().end()};
}

void init_params(ParamSet& params, double std, std::uint64_t seed) {
  if (!(std > 0.0)) throw std::invalid_argument("init_params: std must be positive");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, std);
  for (auto& p : params)
    for (double& v : p.data) v = normal(rng);
}

double default_init_std(const Network& net) {
  return std::holds_alternative<PiNetV1>(net) ? kPiNetInitStd : kMlpInitStd;
}

}  // namespace polyode
