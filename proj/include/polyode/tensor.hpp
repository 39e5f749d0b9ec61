#pragma once

// Dense 64-bit tensors with a reverse-mode computation record.
//
// A Tensor is an immutable handle onto a node.  Nodes created from tracked
// operands remember how they were computed; calling backward() on a scalar
// walks that record once and accumulates gradients into the tracked leaves.
// The record is owned by the tensors themselves and disappears with them, so
// every loss evaluation builds a fresh one.

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace polyode {

using Shape = std::vector<std::size_t>;

std::size_t shape_size(const Shape& shape);
std::string shape_string(const Shape& shape);

class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

namespace detail {
struct Node;
}

class Tensor {
 public:
  Tensor();

  /// Untracked value; participates in forward math only.
  static Tensor constant(Shape shape, std::vector<double> data);
  static Tensor scalar(double value);
  static Tensor zeros(Shape shape);
  /// Tracked leaf.  Gradients flowing into it are reported under `name`.
  static Tensor leaf(std::string name, Shape shape, std::vector<double> data);

  const Shape& shape() const;
  std::span<const double> data() const;
  std::size_t size() const;
  std::size_t rank() const { return shape().size(); }
  std::size_t rows() const;
  std::size_t cols() const;
  double item() const;
  double at(std::size_t i) const { return data()[i]; }
  double at(std::size_t r, std::size_t c) const { return data()[r * cols() + c]; }

  /// True when gradients can flow back through this tensor.
  bool tracked() const;
  /// Same values, record dropped.
  Tensor detach() const;

  const detail::Node* node() const { return node_.get(); }

 private:
  explicit Tensor(std::shared_ptr<detail::Node> node);
  std::shared_ptr<detail::Node> node_;

  friend struct TensorAccess;
};

// Elementwise ops accept equal shapes, or a matrix [r, c] paired with a vector
// [c] which is applied to every row.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor hadamard(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double s);
/// Multiplies row i of a matrix by factors[i].  For a vector, factors has one entry.
Tensor scale_rows(const Tensor& a, std::span<const double> factors);
/// [m,k]x[k,n] -> [m,n] and [m,k]x[k] -> [m].
Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);
Tensor tanh(const Tensor& a);
Tensor relu(const Tensor& a);
Tensor square(const Tensor& a);
Tensor sum(const Tensor& a);
Tensor mean(const Tensor& a);

/// x W^T + b with x shaped [in] or [batch, in], W [out, in], b [out].
Tensor affine(const Tensor& x, const Tensor& weight, const Tensor& bias);

inline Tensor operator+(const Tensor& a, const Tensor& b) { return add(a, b); }
inline Tensor operator-(const Tensor& a, const Tensor& b) { return sub(a, b); }
inline Tensor operator*(double s, const Tensor& a) { return scale(a, s); }

/// Named dense array; the storage behind a model's weights and biases.
struct Param {
  std::string name;
  Shape shape;
  std::vector<double> data;

  bool operator==(const Param&) const = default;
};

/// Ordered, uniquely named parameters.
class ParamSet {
 public:
  void add(std::string name, Shape shape, std::vector<double> data);
  void add(Param p) { add(std::move(p.name), std::move(p.shape), std::move(p.data)); }

  const Param& operator[](std::size_t i) const { return entries_[i]; }
  Param& operator[](std::size_t i) { return entries_[i]; }
  const Param& get(const std::string& name) const;
  Param& get(const std::string& name);
  const Param* find(const std::string& name) const;

  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }
  std::size_t scalar_count() const;
  auto begin() const { return entries_.begin(); }
  auto end() const { return entries_.end(); }
  auto begin() { return entries_.begin(); }
  auto end() { return entries_.end(); }

  ParamSet zeros_like() const;
  bool operator==(const ParamSet&) const = default;

 private:
  std::vector<Param> entries_;
};

/// Leaf tensors bound to a ParamSet for one loss evaluation.  With
/// track=false the leaves are plain constants (inference).
class TrackedParams {
 public:
  explicit TrackedParams(const ParamSet& params, bool track = true);
  const Tensor& operator[](const std::string& name) const;
  const Tensor& at(std::size_t i) const { return leaves_[i]; }
  std::size_t size() const { return leaves_.size(); }
  const ParamSet& source() const { return *source_; }

 private:
  const ParamSet* source_;
  std::vector<Tensor> leaves_;
};

/// Gradients of a scalar loss with respect to every tracked parameter, in
/// parameter order.  Parameters the loss does not touch get zeros.
ParamSet backward(const Tensor& loss, const TrackedParams& params);

using LossFn = std::function<Tensor(const TrackedParams&)>;

/// Largest relative disagreement between backward() and central differences,
/// |analytic - numeric| / max(|analytic|, |numeric|, 1e-12).
double finite_diff_check(const LossFn& loss_fn, const ParamSet& params, double epsilon);

}  // namespace polyode
