#include "agrn/layers.hpp"

#include <stdexcept>
#include <string>

namespace agrn {

Tensor cheb_conv(const Tensor& x, const ScaledLaplacian& laplacian, const ChebConvParams& params) {
  if (params.theta.rank() != 3) {
    throw std::invalid_argument("cheb_conv: theta must be (K, f_in, f_out), got " +
                                to_string(params.theta.shape()));
  }
  const std::size_t order = params.theta.dim(0);
  const std::size_t f_in = params.theta.dim(1);
  const std::size_t f_out = params.theta.dim(2);
  if (order < 1 || order > kMaxChebOrder) {
    throw std::invalid_argument("cheb_conv: Chebyshev order " + std::to_string(order) +
                                " outside [1, " + std::to_string(kMaxChebOrder) + "]");
  }
  if (x.rank() != 3 || x.dim(2) != f_in) {
    throw std::invalid_argument("cheb_conv: input " + to_string(x.shape()) + " incompatible with theta " +
                                to_string(params.theta.shape()));
  }
  if (laplacian.matrix.rows() != x.dim(1)) {
    throw std::invalid_argument("cheb_conv: Laplacian of size " + std::to_string(laplacian.matrix.rows()) +
                                " for " + std::to_string(x.dim(1)) + " nodes");
  }

  std::vector<Tensor> terms{x};
  if (order > 1) terms.push_back(node_mix(laplacian.matrix, x));
  for (std::size_t k = 2; k < order; ++k) {
    terms.push_back(sub(scalar_mul(node_mix(laplacian.matrix, terms[k - 1]), 2.0), terms[k - 2]));
  }
  const Tensor stacked = order == 1 ? x : concat(terms, 2);
  const Tensor weights = reshape(params.theta, Shape{order * f_in, f_out});
  return add(matmul(stacked, weights), params.bias);
}

Tensor node_attention_weights(const Tensor& y, const AttentionParams& params, MaskView fake) {
  if (y.rank() != 3) throw std::invalid_argument("node_attention: expected (batch, nodes, f), got " + to_string(y.shape()));
  const std::size_t f = y.dim(2);
  const Tensor u = tanh(add(matmul(y, params.w), params.b));
  const Tensor scores = matmul(u, reshape(params.u_w, Shape{f, 1}));
  return softmax(reshape(scores, Shape{y.dim(0), y.dim(1)}), 1, fake);
}

Tensor node_attention(const Tensor& y, const AttentionParams& params, MaskView fake) {
  return scale_by(y, node_attention_weights(y, params, fake));
}

Tensor feature_attention_weights(const Tensor& y, const AttentionParams& params) {
  if (y.rank() != 2) throw std::invalid_argument("feature_attention: expected (batch, f), got " + to_string(y.shape()));
  const Tensor u = tanh(add(matmul(y, params.w), params.b));
  return softmax(mul(u, params.u_w), 1);
}

Tensor feature_attention(const Tensor& y, const AttentionParams& params) {
  return mul(feature_attention_weights(y, params), y);
}

Tensor conv_unit(const Tensor& x, const ScaledLaplacian& laplacian, ConvUnitParams& unit,
                 const LayerOptions& options, MaskView fake) {
  Tensor h = cheb_conv(x, laplacian, unit.conv);
  h = batch_norm(h, unit.norm.gamma, unit.norm.beta, unit.norm.state, options.norm);
  h = leaky_relu(h, options.leaky_slope);
  return node_attention(h, unit.attention, fake);
}

Tensor residual_block(const Tensor& x, const ScaledLaplacian& laplacian, ResidualBlockParams& block,
                      const LayerOptions& options, MaskView fake) {
  Tensor h = x;
  for (auto& unit : block.units) h = conv_unit(h, laplacian, unit, options, fake);
  const Tensor shortcut = block.projection.defined() ? matmul(x, block.projection) : x;
  return add(h, shortcut);
}

}  // namespace agrn
