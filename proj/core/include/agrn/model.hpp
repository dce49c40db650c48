#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "agrn/coarsening.hpp"
#include "agrn/layers.hpp"

namespace agrn {

/// Layer stack of the attention-based graph ResNet.
struct ModelConfig {
  std::size_t n_conv_layers = 12;
  /// 2 for the two-conv residual block variant, 3 for the three-conv one.
  std::size_t convs_per_block = 2;
  std::size_t cheb_order = 3;
  /// Output channels of block b is feature_widths[b].
  std::vector<std::size_t> feature_widths{16, 16, 32, 32, 64, 64};
  /// A pooling stage follows a block once this many convolutions have run
  /// since the previous pooling stage.
  std::size_t pool_after_every = 2;
  bool pooling = true;
  std::size_t n_classes = 4;
  std::size_t input_features = 1;
  double leaky_slope = 0.01;
  double bn_momentum = 0.9;
  double bn_eps = 1e-5;

  std::size_t n_blocks() const { return n_conv_layers / convs_per_block; }
  /// pools[b] is true when a pooling stage follows block b.
  std::vector<bool> pool_after_block() const;
  std::size_t n_pool_stages() const;

  /// Throws std::invalid_argument describing the first violated constraint.
  void validate() const;
};

/// Graph side of the model: one scaled Laplacian and fake-node mask per
/// padded level, plus the input permutation.
struct GraphPyramid {
  PoolLayout layout;
  std::vector<ScaledLaplacian> laplacians;

  std::size_t n_levels() const { return laplacians.size(); }
  std::size_t n_real_nodes() const { return layout.n_real(); }
  std::size_t padded_nodes(std::size_t level = 0) const { return layout.padded_size(level); }
  MaskView fake_mask(std::size_t level) const;

  /// Coarsens `graph` n_pool_levels times (no coarsening when 0) and scales
  /// every padded Laplacian with a power-iteration lambda_max.
  static GraphPyramid build(const ElectrodeGraph& graph, std::size_t n_pool_levels, std::uint64_t seed);
};

struct ModelParams {
  std::vector<ResidualBlockParams> blocks;
  /// Attention applied before each pooling stage.
  std::vector<AttentionParams> pool_attention;
  AttentionParams head_attention;
  Tensor fc_weight;
  Tensor fc_bias;
};

enum class ParamRole { weight, bias, norm };

struct NamedParam {
  std::string name;
  Tensor tensor;
  ParamRole role;
};

/// Every trainable tensor, each exactly once, in a fixed order.
std::vector<NamedParam> named_parameters(const ModelParams& params);

/// Batch-norm running statistics by name ("<unit>.norm.running_mean" / "_var").
std::vector<std::pair<std::string, BatchNormState*>> named_norm_states(ModelParams& params);

/// Glorot-uniform weights, zero biases, unit batch-norm scale.
ModelParams init_params(const ModelConfig& config, const GraphPyramid& graph, std::uint64_t seed);

/// Value copy with fresh storage; used to snapshot the best model.
ModelParams clone_params(const ModelParams& params);

/// Node feature map before flattening, shape (batch, nodes_at_last_level,
/// last_width). `x` is (batch, padded_nodes, input_features) in the
/// permuted order.
Tensor model_features(const ModelConfig& config, ModelParams& params, const GraphPyramid& graph,
                      const Tensor& x, bool training);

/// (batch, n_classes) logits.
Tensor model_forward(const ModelConfig& config, ModelParams& params, const GraphPyramid& graph,
                     const Tensor& x, bool training);

/// Permutes raw (batch, real_nodes) signals into the padded order and runs
/// model_forward.
Tensor model_forward_raw(const ModelConfig& config, ModelParams& params, const GraphPyramid& graph,
                         std::span<const double> raw, std::size_t batch, bool training);

/// Padded input tensor for raw (batch, real_nodes) signals.
Tensor permuted_input(const GraphPyramid& graph, std::span<const double> raw, std::size_t batch);

}  // namespace agrn
