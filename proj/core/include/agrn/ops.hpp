#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "agrn/matrix.hpp"
#include "agrn/tensor.hpp"

namespace agrn {

/// Per-position fake flags (nonzero = fake / excluded).
using MaskView = std::span<const std::uint8_t>;

// Differentiable operations. Every op throws std::invalid_argument naming
// both shapes when they are incompatible.

/// (..., k) x (k, n) -> (..., n). Leading axes of `a` are treated as rows.
Tensor matmul(const Tensor& a, const Tensor& b);

/// Elementwise a + b, a - b, a * b. `b` may have the shape of `a` or of a
/// trailing suffix of it (broadcast over the leading axes).
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);

/// Multiplies `a` by `s`, where s.shape() is a leading prefix of a.shape()
/// (broadcast over the trailing axes). Used for per-node attention scaling.
Tensor scale_by(const Tensor& a, const Tensor& s);

Tensor scalar_mul(const Tensor& a, double c);
Tensor tanh(const Tensor& a);
Tensor leaky_relu(const Tensor& a, double slope = 0.01);

/// Softmax along `axis` with max subtraction. Positions flagged in `mask`
/// (indexed along `axis`) are excluded and get probability 0; if every
/// position is masked the whole slice is 0.
Tensor softmax(const Tensor& a, std::size_t axis, MaskView mask = {});

Tensor sum(const Tensor& a);
Tensor mean(const Tensor& a);
Tensor reshape(const Tensor& a, Shape shape);
Tensor concat(std::span<const Tensor> parts, std::size_t axis);

/// Applies a constant matrix along the node axis: out[b] = m * x[b] for
/// x of shape (batch, n, features).
Tensor node_mix(const Matrix& m, const Tensor& x);

/// Running statistics for batch normalisation, shaped like the feature
/// axes (everything after the batch axis).
struct BatchNormState {
  std::vector<double> running_mean;
  std::vector<double> running_var;

  static BatchNormState fresh(std::size_t features);
};

struct BatchNormOptions {
  bool training = true;
  double momentum = 0.9;
  double eps = 1e-5;
};

/// Normalises every feature position over the batch axis (axis 0), then
/// applies gamma * xhat + beta. Training mode uses biased batch statistics
/// and folds them into `state` as running = momentum * running +
/// (1 - momentum) * batch; inference mode uses the running statistics.
Tensor batch_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                  BatchNormState& state, const BatchNormOptions& options);

/// (batch, 2m, f) -> (batch, m, f). Output j is the max over the non-fake
/// slots of {2j, 2j + 1}; 0 if both are fake. The gradient goes to the
/// winning slot, the lower index on ties.
Tensor masked_pair_max(const Tensor& x, MaskView fake);

/// Mean over the batch of -log softmax(logits)[label] for (batch, classes)
/// logits.
Tensor softmax_cross_entropy(const Tensor& logits, std::span<const int> labels);

}  // namespace agrn
