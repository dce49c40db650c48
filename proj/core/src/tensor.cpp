#include "agrn/tensor.hpp"

#include <algorithm>
#include <atomic>
#include <iterator>
#include <memory>
#include <sstream>
#include <stdexcept>
#include <unordered_set>

namespace agrn {
namespace {

thread_local Precision tls_precision = Precision::f64;
thread_local bool tls_grad_enabled = true;

std::atomic<std::uint64_t> next_sequence{1};

void round_to_precision(std::vector<double>& values) {
  if (tls_precision == Precision::f32)
    for (double& v : values) v = static_cast<double>(static_cast<float>(v));
}

}  // namespace

std::size_t numel(const Shape& shape) {
  std::size_t n = 1;
  for (std::size_t d : shape) n *= d;
  return n;
}

std::string to_string(const Shape& shape) {
  std::ostringstream out;
  out << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) out << (i ? "x" : "") << shape[i];
  out << ']';
  return out.str();
}

Precision current_precision() { return tls_precision; }

PrecisionScope::PrecisionScope(Precision p) : previous_(tls_precision) { tls_precision = p; }
PrecisionScope::~PrecisionScope() { tls_precision = previous_; }

NoGradScope::NoGradScope() : previous_(tls_grad_enabled) { tls_grad_enabled = false; }
NoGradScope::~NoGradScope() { tls_grad_enabled = previous_; }

bool grad_enabled() { return tls_grad_enabled; }

std::vector<double>& detail::Node::ensure_grad() {
  if (grad.size() != value.size()) grad.assign(value.size(), 0.0);
  return grad;
}

Tensor::Tensor(Shape shape, bool requires_grad) {
  node_ = std::make_shared<detail::Node>();
  node_->value.assign(agrn::numel(shape), 0.0);
  node_->shape = std::move(shape);
  node_->requires_grad = requires_grad;
  node_->sequence = next_sequence++;
}

Tensor::Tensor(Shape shape, std::vector<double> values, bool requires_grad) {
  if (values.size() != agrn::numel(shape)) {
    throw std::invalid_argument("Tensor: " + std::to_string(values.size()) +
                                " values for shape " + to_string(shape));
  }
  node_ = std::make_shared<detail::Node>();
  node_->shape = std::move(shape);
  node_->value = std::move(values);
  node_->requires_grad = requires_grad;
  node_->sequence = next_sequence++;
}

Tensor Tensor::scalar(double value, bool requires_grad) {
  return Tensor(Shape{}, std::vector<double>{value}, requires_grad);
}

detail::Node& Tensor::node() const {
  if (!node_) throw std::logic_error("Tensor: use of an undefined tensor");
  return *node_;
}

const Shape& Tensor::shape() const { return node().shape; }

std::size_t Tensor::dim(std::size_t axis) const {
  const Shape& s = shape();
  if (axis >= s.size()) {
    throw std::out_of_range("Tensor::dim: axis " + std::to_string(axis) + " of shape " + to_string(s));
  }
  return s[axis];
}

std::size_t Tensor::numel() const { return node().value.size(); }

std::span<const double> Tensor::values() const { return node().value; }
std::span<double> Tensor::mutable_values() { return node().value; }
std::span<const double> Tensor::grad() const { return node().grad; }
std::span<double> Tensor::mutable_grad() { return node().ensure_grad(); }

bool Tensor::requires_grad() const { return node().requires_grad; }
void Tensor::set_requires_grad(bool flag) { node().requires_grad = flag; }

void Tensor::zero_grad() {
  auto& g = node().grad;
  std::fill(g.begin(), g.end(), 0.0);
}

double Tensor::item() const {
  if (numel() != 1) throw std::invalid_argument("Tensor::item: tensor of shape " + to_string(shape()));
  return node().value[0];
}

Tensor Tensor::detach() const { return Tensor(shape(), node().value, false); }

Tensor Tensor::make_result(Shape shape, std::vector<double> values, std::vector<Tensor> inputs,
                           BackwardFn backward) {
  round_to_precision(values);
  Tensor out(std::move(shape), std::move(values), false);
  if (!tls_grad_enabled) return out;
  const bool needs_grad =
      std::any_of(inputs.begin(), inputs.end(), [](const Tensor& t) { return t.requires_grad(); });
  if (!needs_grad) return out;
  auto& n = *out.node_;
  n.requires_grad = true;
  for (auto& t : inputs) {
    if (t.node().consumed) throw std::logic_error("op input belongs to a consumed tape");
    n.inputs.push_back(t.node_);
  }
  n.backward = std::move(backward);
  return out;
}

void Tensor::backward() const {
  detail::Node& root = node();
  if (root.consumed) throw std::logic_error("backward: tape already consumed");
  if (root.value.size() != 1) {
    throw std::invalid_argument("backward: loss must be a scalar, got shape " + to_string(root.shape));
  }
  if (!root.requires_grad) throw std::logic_error("backward: loss does not depend on any parameter");

  std::vector<detail::Node*> tape;
  std::unordered_set<detail::Node*> seen;
  std::vector<detail::Node*> stack{&root};
  while (!stack.empty()) {
    detail::Node* n = stack.back();
    stack.pop_back();
    if (!seen.insert(n).second) continue;
    tape.push_back(n);
    for (auto& in : n->inputs)
      if (in->requires_grad) stack.push_back(in.get());
  }
  // Every node is created after its inputs, so descending sequence numbers
  // visit consumers before producers.
  std::sort(tape.begin(), tape.end(),
            [](const detail::Node* a, const detail::Node* b) { return a->sequence > b->sequence; });

  root.ensure_grad()[0] = 1.0;
  for (detail::Node* n : tape) {
    if (!n->backward) continue;
    n->ensure_grad();
    for (auto& in : n->inputs)
      if (in->requires_grad) in->ensure_grad();
    n->backward(*n);
  }
  // Released only after the loop: dropping an edge may free a node that is
  // still on the tape.
  std::vector<std::shared_ptr<detail::Node>> released;
  for (detail::Node* n : tape) {
    if (!n->backward) continue;
    n->backward = nullptr;
    std::move(n->inputs.begin(), n->inputs.end(), std::back_inserter(released));
    n->inputs.clear();
    n->grad.clear();
    n->grad.shrink_to_fit();
    n->consumed = true;
  }
}

}  // namespace agrn
