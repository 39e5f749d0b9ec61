#include "polyode/tensor.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cassert>
#include <cmath>
#include <sstream>
#include <unordered_set>
#include <utility>

namespace polyode {

namespace detail {

struct Node {
  Shape shape;
  std::vector<double> value;
  bool requires_grad = false;
  std::string name;  // set on leaves only
  std::vector<std::shared_ptr<Node>> inputs;
  // Reads this->grad and accumulates into the inputs' grad buffers.
  std::function<void(Node&)> propagate;
  std::vector<double> grad;
};

}  // namespace detail

using detail::Node;
using NodePtr = std::shared_ptr<Node>;

struct TensorAccess {
  static const NodePtr& ptr(const Tensor& t) { return t.node_; }
  static Tensor wrap(NodePtr n) { return Tensor(std::move(n)); }
};

namespace {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const RowMatrix>;
using MutMap = Eigen::Map<RowMatrix>;

const NodePtr& P(const Tensor& t) { return TensorAccess::ptr(t); }

// Result node; gradient-carrying only when some operand is tracked.
NodePtr make_result(Shape shape, std::vector<double> value, std::initializer_list<const Tensor*> operands) {
  auto n = std::make_shared<Node>();
  n->shape = std::move(shape);
  n->value = std::move(value);
  for (const Tensor* op : operands) {
    if (op->tracked()) n->requires_grad = true;
  }
  if (n->requires_grad) {
    for (const Tensor* op : operands) n->inputs.push_back(P(*op));
  }
  return n;
}

std::vector<double>& grad_of(const NodePtr& n) { return n->grad; }

[[noreturn]] void shape_fail(const char* op, const Tensor& a, const Tensor& b) {
  throw ShapeError(std::string(op) + ": incompatible shapes " + shape_string(a.shape()) + " and " +
                   shape_string(b.shape()));
}

enum class Broadcast { same, rows_b, rows_a };

Broadcast broadcast_kind(const char* op, const Tensor& a, const Tensor& b) {
  if (a.shape() == b.shape()) return Broadcast::same;
  if (a.rank() == 2 && b.rank() == 1 && a.shape()[1] == b.shape()[0]) return Broadcast::rows_b;
  if (b.rank() == 2 && a.rank() == 1 && b.shape()[1] == a.shape()[0]) return Broadcast::rows_a;
  shape_fail(op, a, b);
}

// Visits every output index of a (possibly row-broadcast) elementwise op as
// fn(out_index, a_index, b_index).
template <class Fn>
void for_each_pair(Broadcast kind, std::size_t n, std::size_t cols, Fn fn) {
  switch (kind) {
    case Broadcast::same:
      for (std::size_t i = 0; i < n; ++i) fn(i, i, i);
      return;
    case Broadcast::rows_b:
      for (std::size_t i = 0; i < n; i += cols)
        for (std::size_t c = 0; c < cols; ++c) fn(i + c, i + c, c);
      return;
    case Broadcast::rows_a:
      for (std::size_t i = 0; i < n; i += cols)
        for (std::size_t c = 0; c < cols; ++c) fn(i + c, c, i + c);
      return;
  }
}

// Elementwise binary op with row broadcasting.  `fwd(x, y)` computes the value;
// `da(x, y)` / `db(x, y)` are the partial derivatives.
template <class Fwd, class Da, class Db>
Tensor binary(const char* op, const Tensor& a, const Tensor& b, Fwd fwd, Da da, Db db) {
  const Broadcast kind = broadcast_kind(op, a, b);
  const Shape& out_shape = kind == Broadcast::rows_a ? b.shape() : a.shape();
  const std::size_t n = shape_size(out_shape);
  const std::size_t cols = out_shape.empty() ? 1 : out_shape.back();
  const double* av = a.data().data();
  const double* bv = b.data().data();
  std::vector<double> out(n);
  double* o = out.data();
  for_each_pair(kind, n, cols, [&](std::size_t i, std::size_t ia, std::size_t ib) { o[i] = fwd(av[ia], bv[ib]); });
  auto node = make_result(out_shape, std::move(out), {&a, &b});
  if (node->requires_grad) {
    node->propagate = [da, db, kind, n, cols](Node& self) {
      const NodePtr& na = self.inputs[0];
      const NodePtr& nb = self.inputs[1];
      const double* x = na->value.data();
      const double* y = nb->value.data();
      const double* g = self.grad.data();
      if (na->requires_grad) {
        double* ga = grad_of(na).data();
        for_each_pair(kind, n, cols,
                      [&](std::size_t i, std::size_t ia, std::size_t ib) { ga[ia] += g[i] * da(x[ia], y[ib]); });
      }
      if (nb->requires_grad) {
        double* gb = grad_of(nb).data();
        for_each_pair(kind, n, cols,
                      [&](std::size_t i, std::size_t ia, std::size_t ib) { gb[ib] += g[i] * db(x[ia], y[ib]); });
      }
    };
  }
  return TensorAccess::wrap(std::move(node));
}

template <class Fwd, class Deriv>
Tensor unary(const Tensor& a, Fwd fwd, Deriv deriv) {
  auto av = a.data();
  std::vector<double> out(av.size());
  for (std::size_t i = 0; i < av.size(); ++i) out[i] = fwd(av[i]);
  auto node = make_result(a.shape(), std::move(out), {&a});
  if (node->requires_grad) {
    // deriv(x, y) where y = fwd(x)
    node->propagate = [deriv](Node& self) {
      const NodePtr& in = self.inputs[0];
      auto& g = grad_of(in);
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * deriv(in->value[i], self.value[i]);
    };
  }
  return TensorAccess::wrap(std::move(node));
}

}  // namespace

std::size_t shape_size(const Shape& shape) {
  std::size_t n = 1;
  for (auto s : shape) n *= s;
  return n;
}

std::string shape_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
  os << ']';
  return os.str();
}

Tensor::Tensor() : Tensor(std::make_shared<Node>()) { node_->value = {0.0}; }

Tensor::Tensor(std::shared_ptr<detail::Node> node) : node_(std::move(node)) {}

Tensor Tensor::constant(Shape shape, std::vector<double> data) {
  if (shape_size(shape) != data.size()) {
    throw ShapeError("constant: shape " + shape_string(shape) + " does not match " + std::to_string(data.size()) +
                     " values");
  }
  auto n = std::make_shared<Node>();
  n->shape = std::move(shape);
  n->value = std::move(data);
  return Tensor(std::move(n));
}

Tensor Tensor::scalar(double value) { return constant({}, {value}); }

Tensor Tensor::zeros(Shape shape) {
  const auto n = shape_size(shape);
  return constant(std::move(shape), std::vector<double>(n, 0.0));
}

Tensor Tensor::leaf(std::string name, Shape shape, std::vector<double> data) {
  Tensor t = constant(std::move(shape), std::move(data));
  t.node_->requires_grad = true;
  t.node_->name = std::move(name);
  return t;
}

const Shape& Tensor::shape() const { return node_->shape; }
std::span<const double> Tensor::data() const { return node_->value; }
std::size_t Tensor::size() const { return node_->value.size(); }

std::size_t Tensor::rows() const { return rank() == 2 ? shape()[0] : 1; }

std::size_t Tensor::cols() const {
  if (rank() == 2) return shape()[1];
  if (rank() == 1) return shape()[0];
  return 1;
}

double Tensor::item() const {
  if (size() != 1) throw ShapeError("item: tensor of shape " + shape_string(shape()) + " is not a scalar");
  return node_->value[0];
}

bool Tensor::tracked() const { return node_->requires_grad; }

Tensor Tensor::detach() const { return constant(shape(), node_->value); }

Tensor add(const Tensor& a, const Tensor& b) {
  return binary(
      "add", a, b, [](double x, double y) { return x + y; }, [](double, double) { return 1.0; },
      [](double, double) { return 1.0; });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  return binary(
      "sub", a, b, [](double x, double y) { return x - y; }, [](double, double) { return 1.0; },
      [](double, double) { return -1.0; });
}

Tensor hadamard(const Tensor& a, const Tensor& b) {
  return binary(
      "hadamard", a, b, [](double x, double y) { return x * y; }, [](double, double y) { return y; },
      [](double x, double) { return x; });
}

Tensor scale(const Tensor& a, double s) {
  return unary(a, [s](double x) { return s * x; }, [s](double, double) { return s; });
}

Tensor scale_rows(const Tensor& a, std::span<const double> factors) {
  const std::size_t rows = a.rows();
  const std::size_t cols = a.cols();
  if (factors.size() != rows) {
    throw ShapeError("scale_rows: " + std::to_string(factors.size()) + " factors for tensor of shape " +
                     shape_string(a.shape()));
  }
  std::vector<double> f(factors.begin(), factors.end());
  auto av = a.data();
  std::vector<double> out(av.size());
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < cols; ++c) out[r * cols + c] = f[r] * av[r * cols + c];
  auto node = make_result(a.shape(), std::move(out), {&a});
  if (node->requires_grad) {
    node->propagate = [f = std::move(f), cols](Node& self) {
      auto& g = grad_of(self.inputs[0]);
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += f[i / cols] * self.grad[i];
    };
  }
  return TensorAccess::wrap(std::move(node));
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || (b.rank() != 1 && b.rank() != 2) || a.shape()[1] != b.shape()[0]) {
    shape_fail("matmul", a, b);
  }
  const auto m = static_cast<Eigen::Index>(a.shape()[0]);
  const auto k = static_cast<Eigen::Index>(a.shape()[1]);
  const auto n = static_cast<Eigen::Index>(b.rank() == 2 ? b.shape()[1] : 1);
  Shape out_shape = b.rank() == 2 ? Shape{a.shape()[0], b.shape()[1]} : Shape{a.shape()[0]};
  std::vector<double> out(static_cast<std::size_t>(m * n));
  MutMap(out.data(), m, n).noalias() = ConstMap(a.data().data(), m, k) * ConstMap(b.data().data(), k, n);
  auto node = make_result(std::move(out_shape), std::move(out), {&a, &b});
  if (node->requires_grad) {
    node->propagate = [m, k, n](Node& self) {
      const NodePtr& na = self.inputs[0];
      const NodePtr& nb = self.inputs[1];
      ConstMap g(self.grad.data(), m, n);
      if (na->requires_grad) {
        MutMap(grad_of(na).data(), m, k).noalias() += g * ConstMap(nb->value.data(), k, n).transpose();
      }
      if (nb->requires_grad) {
        MutMap(grad_of(nb).data(), k, n).noalias() += ConstMap(na->value.data(), m, k).transpose() * g;
      }
    };
  }
  return TensorAccess::wrap(std::move(node));
}

Tensor transpose(const Tensor& a) {
  if (a.rank() != 2) throw ShapeError("transpose: expected a matrix, got " + shape_string(a.shape()));
  const auto r = static_cast<Eigen::Index>(a.shape()[0]);
  const auto c = static_cast<Eigen::Index>(a.shape()[1]);
  std::vector<double> out(a.size());
  MutMap(out.data(), c, r) = ConstMap(a.data().data(), r, c).transpose();
  auto node = make_result({a.shape()[1], a.shape()[0]}, std::move(out), {&a});
  if (node->requires_grad) {
    node->propagate = [r, c](Node& self) {
      MutMap(grad_of(self.inputs[0]).data(), r, c) += ConstMap(self.grad.data(), c, r).transpose();
    };
  }
  return TensorAccess::wrap(std::move(node));
}

Tensor tanh(const Tensor& a) {
  return unary(a, [](double x) { return std::tanh(x); }, [](double, double y) { return 1.0 - y * y; });
}

Tensor relu(const Tensor& a) {
  return unary(a, [](double x) { return x > 0.0 ? x : 0.0; }, [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

Tensor square(const Tensor& a) {
  return unary(a, [](double x) { return x * x; }, [](double x, double) { return 2.0 * x; });
}

namespace {

Tensor reduce(const Tensor& a, double factor) {
  double total = 0.0;
  for (double v : a.data()) total += v;
  auto node = make_result({}, {factor * total}, {&a});
  if (node->requires_grad) {
    node->propagate = [factor](Node& self) {
      const double g = factor * self.grad[0];
      for (double& gi : grad_of(self.inputs[0])) gi += g;
    };
  }
  return TensorAccess::wrap(std::move(node));
}

}  // namespace

Tensor sum(const Tensor& a) { return reduce(a, 1.0); }

Tensor mean(const Tensor& a) {
  if (a.size() == 0) throw ShapeError("mean: empty tensor");
  return reduce(a, 1.0 / static_cast<double>(a.size()));
}

Tensor affine(const Tensor& x, const Tensor& weight, const Tensor& bias) {
  if (weight.rank() != 2 || bias.rank() != 1 || bias.shape()[0] != weight.shape()[0]) {
    shape_fail("affine", weight, bias);
  }
  if (x.rank() == 1) return add(matmul(weight, x), bias);
  return add(matmul(x, transpose(weight)), bias);
}

// ---------------------------------------------------------------------------

void ParamSet::add(std::string name, Shape shape, std::vector<double> data) {
  if (find(name)) throw std::invalid_argument("ParamSet: duplicate parameter '" + name + "'");
  if (shape_size(shape) != data.size()) {
    throw ShapeError("ParamSet: parameter '" + name + "' shape " + shape_string(shape) + " does not match " +
                     std::to_string(data.size()) + " values");
  }
  entries_.push_back(Param{std::move(name), std::move(shape), std::move(data)});
}

const Param* ParamSet::find(const std::string& name) const {
  for (const auto& p : entries_)
    if (p.name == name) return &p;
  return nullptr;
}

const Param& ParamSet::get(const std::string& name) const {
  if (const Param* p = find(name)) return *p;
  throw std::out_of_range("ParamSet: no parameter named '" + name + "'");
}

Param& ParamSet::get(const std::string& name) {
  return const_cast<Param&>(static_cast<const ParamSet&>(*this).get(name));
}

std::size_t ParamSet::scalar_count() const {
  std::size_t n = 0;
  for (const auto& p : entries_) n += p.data.size();
  return n;
}

ParamSet ParamSet::zeros_like() const {
  ParamSet z;
  for (const auto& p : entries_) z.add(p.name, p.shape, std::vector<double>(p.data.size(), 0.0));
  return z;
}

TrackedParams::TrackedParams(const ParamSet& params, bool track) : source_(&params) {
  leaves_.reserve(params.size());
  for (const auto& p : params) {
    leaves_.push_back(track ? Tensor::leaf(p.name, p.shape, p.data) : Tensor::constant(p.shape, p.data));
  }
}

const Tensor& TrackedParams::operator[](const std::string& name) const {
  for (std::size_t i = 0; i < leaves_.size(); ++i)
    if ((*source_)[i].name == name) return leaves_[i];
  throw std::out_of_range("TrackedParams: no parameter named '" + name + "'");
}

ParamSet backward(const Tensor& loss, const TrackedParams& params) {
  if (loss.size() != 1) throw ShapeError("backward: loss must be a scalar, got shape " + shape_string(loss.shape()));

  ParamSet grads = params.source().zeros_like();
  const NodePtr& root = P(loss);
  if (!root->requires_grad) return grads;

  // Iterative post-order DFS gives a topological order of the record.
  std::vector<Node*> order;
  std::unordered_set<Node*> visited;
  std::vector<std::pair<Node*, std::size_t>> stack{{root.get(), 0}};
  visited.insert(root.get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->inputs.size()) {
      Node* child = node->inputs[next++].get();
      if (child->requires_grad && visited.insert(child).second) stack.emplace_back(child, 0);
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  for (Node* n : order) n->grad.assign(n->value.size(), 0.0);
  root->grad[0] = 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* n = *it;
    if (n->propagate) n->propagate(*n);
  }

  for (std::size_t i = 0; i < params.size(); ++i) {
    Node* leaf = P(params.at(i)).get();
    if (visited.count(leaf)) grads[i].data = leaf->grad;
  }
  for (Node* n : order) {
    n->grad.clear();
    n->grad.shrink_to_fit();
  }
  return grads;
}

double finite_diff_check(const LossFn& loss_fn, const ParamSet& params, double epsilon) {
  if (!(epsilon > 0.0)) throw std::invalid_argument("finite_diff_check: epsilon must be positive");
  const TrackedParams tracked(params);
  const ParamSet analytic = backward(loss_fn(tracked), tracked);

  ParamSet probe = params;
  double worst = 0.0;
  for (std::size_t i = 0; i < probe.size(); ++i) {
    auto& values = probe[i].data;
    for (std::size_t j = 0; j < values.size(); ++j) {
      const double saved = values[j];
      values[j] = saved + epsilon;
      const double up = loss_fn(TrackedParams(probe, false)).item();
      values[j] = saved - epsilon;
      const double down = loss_fn(TrackedParams(probe, false)).item();
      values[j] = saved;
      if (!std::isfinite(up) || !std::isfinite(down)) {
        throw std::runtime_error("finite_diff_check: non-finite loss when perturbing " + probe[i].name + "[" +
                                 std::to_string(j) + "]");
      }
      const double numeric = (up - down) / (2.0 * epsilon);
      const double exact = analytic[i].data[j];
      const double denom = std::max({std::abs(exact), std::abs(numeric), 1e-12});
      worst = std::max(worst, std::abs(exact - numeric) / denom);
    }
  }
  return worst;
}

}  // namespace polyode
