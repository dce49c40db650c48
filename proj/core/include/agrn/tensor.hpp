#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace agrn {

using Shape = std::vector<std::size_t>;

std::size_t numel(const Shape& shape);
std::string to_string(const Shape& shape);

/// Storage precision for op results. Values are always held as doubles; in
/// f32 mode every op output (and every optimizer update) is rounded to the
/// nearest float, which reproduces single-precision numerics.
enum class Precision { f64, f32 };

Precision current_precision();

/// RAII switch for the calling thread's precision.
class PrecisionScope {
 public:
  explicit PrecisionScope(Precision p);
  ~PrecisionScope();
  PrecisionScope(const PrecisionScope&) = delete;
  PrecisionScope& operator=(const PrecisionScope&) = delete;

 private:
  Precision previous_;
};

/// Disables graph recording on the calling thread (inference).
class NoGradScope {
 public:
  NoGradScope();
  ~NoGradScope();
  NoGradScope(const NoGradScope&) = delete;
  NoGradScope& operator=(const NoGradScope&) = delete;

 private:
  bool previous_;
};

bool grad_enabled();

namespace detail {

struct Node {
  Shape shape;
  std::vector<double> value;
  std::vector<double> grad;
  bool requires_grad = false;
  bool consumed = false;
  std::uint64_t sequence = 0;
  std::vector<std::shared_ptr<Node>> inputs;
  // Reads this node's grad and accumulates into the inputs' grads.
  std::function<void(Node&)> backward;

  std::vector<double>& ensure_grad();
};

}  // namespace detail

/// Handle to a node of the computation graph. Copies share storage; ops
/// produce fresh nodes that remember their inputs while any input requires
/// a gradient. backward() walks those nodes in reverse creation order, which
/// is a topological order of the tape.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, bool requires_grad = false);
  Tensor(Shape shape, std::vector<double> values, bool requires_grad = false);

  static Tensor scalar(double value, bool requires_grad = false);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const;
  std::size_t rank() const { return shape().size(); }
  std::size_t dim(std::size_t axis) const;
  std::size_t numel() const;

  std::span<const double> values() const;
  /// In-place access for parameter updates and initialisation. Mutating a
  /// tensor that a live tape still references corrupts that tape.
  std::span<double> mutable_values();

  /// Empty until a backward pass reaches this tensor.
  std::span<const double> grad() const;
  std::span<double> mutable_grad();

  bool requires_grad() const;
  void set_requires_grad(bool flag);
  void zero_grad();

  double item() const;

  /// Reverse pass from a scalar. Consumes the tape: intermediate nodes drop
  /// their inputs and a second call throws.
  void backward() const;

  /// Value copy without history.
  Tensor detach() const;

  // Used by op implementations.
  using BackwardFn = std::function<void(detail::Node&)>;
  static Tensor make_result(Shape shape, std::vector<double> values,
                            std::vector<Tensor> inputs, BackwardFn backward);
  detail::Node& node() const;

 private:
  explicit Tensor(std::shared_ptr<detail::Node> node) : node_(std::move(node)) {}
  std::shared_ptr<detail::Node> node_;
};

}  // namespace agrn
