#pragma once

#include "polyode/tensor.hpp"

#include <cstdint>
#include <string>
#include <variant>
#include <vector>

namespace polyode {

inline constexpr double kPiNetInitStd = 0.01;
inline constexpr double kMlpInitStd = 0.00005;

/// Polynomial network built from affine stages joined by Hadamard products
/// with skip connections:
///
///   h1 = W1 x + b1
///   hn = (Wn x + bn) * h(n-1) + h(n-1)      n = 2..N
///   y  = C hN + beta
///
/// so y is a polynomial of total degree <= N in x.
struct PiNetV1 {
  std::size_t input_dim = 0;
  std::size_t output_dim = 0;
  std::size_t degree = 1;
  std::size_t hidden_width = 0;
  ParamSet params;

  static std::size_t default_hidden_width(std::size_t input_dim, std::size_t degree);

  /// Architecture with all parameters zero.
  static PiNetV1 zeros(std::size_t input_dim, std::size_t output_dim, std::size_t degree,
                       std::size_t hidden_width = 0);

  static std::string stage_weight(std::size_t n) { return "stage" + std::to_string(n) + ".weight"; }
  static std::string stage_bias(std::size_t n) { return "stage" + std::to_string(n) + ".bias"; }
  static constexpr const char* kOutWeight = "out.weight";
  static constexpr const char* kOutBias = "out.bias";

  void validate() const;
};

enum class Activation { tanh, relu };

std::string to_string(Activation a);
Activation parse_activation(const std::string& s);

/// Feedforward network; every layer but the last applies the activation.
struct MlpNet {
  std::vector<std::size_t> widths;  // e.g. {2, 50, 50, 50, 2}
  Activation activation = Activation::tanh;
  ParamSet params;

  static MlpNet zeros(std::vector<std::size_t> widths, Activation activation);
  static std::string layer_weight(std::size_t i) { return "layer" + std::to_string(i) + ".weight"; }
  static std::string layer_bias(std::size_t i) { return "layer" + std::to_string(i) + ".bias"; }

  std::size_t input_dim() const { return widths.front(); }
  std::size_t output_dim() const { return widths.back(); }
  void validate() const;
};

/// Parses "2x50x50x2".
std::vector<std::size_t> parse_widths(const std::string& s);
std::string format_widths(const std::vector<std::size_t>& widths);

using Network = std::variant<PiNetV1, MlpNet>;

const ParamSet& params_of(const Network& net);
ParamSet& params_of(Network& net);
std::size_t input_dim(const Network& net);
std::size_t output_dim(const Network& net);
std::string arch_kind(const Network& net);

// x is [d] or [batch, d]; the result has the matching [m] or [batch, m] shape.
Tensor pinet_forward(const PiNetV1& net, const TrackedParams& params, const Tensor& x);
Tensor pinet_forward(const PiNetV1& net, const Tensor& x);
Tensor mlp_forward(const MlpNet& net, const TrackedParams& params, const Tensor& x);
Tensor mlp_forward(const MlpNet& net, const Tensor& x);
Tensor forward(const Network& net, const TrackedParams& params, const Tensor& x);
Tensor forward(const Network& net, const Tensor& x);
std::vector<double> forward(const Network& net, std::span<const double> x);

/// Redraws every weight and bias from Normal(0, std^2) with a seeded generator.
void init_params(ParamSet& params, double std, std::uint64_t seed);
double default_init_std(const Network& net);

/// Canonical JSON checkpoint.  Writing what was read reproduces the same bytes.
std::string checkpoint_to_json(const Network& net);
Network checkpoint_from_json(const std::string& text);
void save_checkpoint(const Network& net, const std::string& path);
Network load_checkpoint(const std::string& path);

}  // namespace polyode
