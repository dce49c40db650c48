#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "agrn/graph.hpp"
#include "agrn/ops.hpp"
#include "agrn/tensor.hpp"

namespace agrn {

inline constexpr std::size_t kMaxChebOrder = 16;

/// theta: (K, f_in, f_out) Chebyshev coefficients; bias: (f_out).
struct ChebConvParams {
  Tensor theta;
  Tensor bias;

  std::size_t order() const { return theta.dim(0); }
};

/// w: (f, f), b: (f), u_w: (f) context vector.
struct AttentionParams {
  Tensor w;
  Tensor b;
  Tensor u_w;
};

struct BatchNormParams {
  Tensor gamma;
  Tensor beta;
  BatchNormState state;
};

/// conv -> batch norm -> leaky ReLU -> node attention.
struct ConvUnitParams {
  ChebConvParams conv;
  BatchNormParams norm;
  AttentionParams attention;
};

struct ResidualBlockParams {
  std::vector<ConvUnitParams> units;
  /// (f_in, f_out) shortcut projection; undefined for an identity shortcut.
  Tensor projection;
};

struct LayerOptions {
  double leaky_slope = 0.01;
  BatchNormOptions norm;
};

/// sum_k T_k(L~) x theta_k + bias for x of shape (batch, nodes, f_in), with
/// T_0 = x, T_1 = L~x and T_k = 2 L~ T_{k-1} - T_{k-2}.
Tensor cheb_conv(const Tensor& x, const ScaledLaplacian& laplacian, const ChebConvParams& params);

/// Attention weights over the node axis for y of shape (batch, nodes, f):
/// softmax_i(tanh(y_i w + b) . u_w). Fake nodes get weight 0.
Tensor node_attention_weights(const Tensor& y, const AttentionParams& params,
                              MaskView fake = {});

/// y scaled row-wise by node_attention_weights.
Tensor node_attention(const Tensor& y, const AttentionParams& params, MaskView fake = {});

/// Attention over the feature axis of a flattened (batch, f) map: the
/// weights are softmax_j(tanh(y w + b)_j * u_w_j) and the output is the
/// elementwise product with y.
Tensor feature_attention_weights(const Tensor& y, const AttentionParams& params);
Tensor feature_attention(const Tensor& y, const AttentionParams& params);

Tensor conv_unit(const Tensor& x, const ScaledLaplacian& laplacian, ConvUnitParams& unit,
                 const LayerOptions& options, MaskView fake = {});

/// F(x) + shortcut(x), where F is the chain of conv units.
Tensor residual_block(const Tensor& x, const ScaledLaplacian& laplacian, ResidualBlockParams& block,
                      const LayerOptions& options, MaskView fake = {});

}  // namespace agrn
