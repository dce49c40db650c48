#include "agrn/model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <stdexcept>
#include <string>

#include "agrn/random.hpp"

namespace agrn {
namespace {

class GlorotInit {
 public:
  explicit GlorotInit(std::uint64_t seed) : rng_(mix_seed(seed, 0x1417)) {}

  Tensor operator()(Shape shape, std::size_t fan_in, std::size_t fan_out) {
    const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    std::vector<double> values(numel(shape));
    for (double& v : values) v = (2.0 * uniform_unit(rng_) - 1.0) * limit;
    return Tensor(std::move(shape), std::move(values), true);
  }

 private:
  std::mt19937_64 rng_;
};

Tensor zeros(Shape shape) { return Tensor(std::move(shape), true); }

Tensor filled(Shape shape, double value) {
  std::vector<double> values(numel(shape), value);
  return Tensor(std::move(shape), std::move(values), true);
}

AttentionParams init_attention(GlorotInit& glorot, std::size_t f) {
  return AttentionParams{glorot({f, f}, f, f), zeros({f}), glorot({f}, f, 1)};
}

Tensor clone(const Tensor& t) {
  if (!t.defined()) return {};
  Tensor copy = t.detach();
  copy.set_requires_grad(t.requires_grad());
  return copy;
}

AttentionParams clone(const AttentionParams& a) { return {clone(a.w), clone(a.b), clone(a.u_w)}; }

}  // namespace

std::vector<bool> ModelConfig::pool_after_block() const {
  std::vector<bool> pools(n_blocks(), false);
  if (!pooling) return pools;
  std::size_t since = 0;
  for (std::size_t b = 0; b < pools.size(); ++b) {
    since += convs_per_block;
    if (since >= pool_after_every) {
      pools[b] = true;
      since = 0;
    }
  }
  return pools;
}

std::size_t ModelConfig::n_pool_stages() const {
  const auto pools = pool_after_block();
  return static_cast<std::size_t>(std::count(pools.begin(), pools.end(), true));
}

void ModelConfig::validate() const {
  auto fail = [](const std::string& what) { throw std::invalid_argument("ModelConfig: " + what); };
  if (convs_per_block < 1) fail("convs_per_block must be at least 1");
  if (n_conv_layers < 1 || n_conv_layers % convs_per_block != 0) {
    fail("n_conv_layers (" + std::to_string(n_conv_layers) + ") must be a positive multiple of convs_per_block (" +
         std::to_string(convs_per_block) + ")");
  }
  if (cheb_order < 1 || cheb_order > kMaxChebOrder) fail("cheb_order must lie in [1, 16]");
  if (feature_widths.size() < n_blocks()) {
    fail("feature_widths lists " + std::to_string(feature_widths.size()) + " widths for " +
         std::to_string(n_blocks()) + " blocks");
  }
  for (std::size_t w : feature_widths)
    if (w == 0) fail("feature widths must be positive");
  if (pooling && pool_after_every < 1) fail("pool_after_every must be at least 1");
  if (n_classes < 2) fail("n_classes must be at least 2");
  if (input_features < 1) fail("input_features must be at least 1");
  if (!(leaky_slope >= 0.0)) fail("leaky_slope must be nonnegative");
  if (!(bn_momentum >= 0.0 && bn_momentum < 1.0)) fail("bn_momentum must lie in [0, 1)");
  if (!(bn_eps > 0.0)) fail("bn_eps must be positive");
}

MaskView GraphPyramid::fake_mask(std::size_t level) const { return layout.masks.at(level); }

GraphPyramid GraphPyramid::build(const ElectrodeGraph& graph, std::size_t n_pool_levels, std::uint64_t seed) {
  GraphPyramid pyramid;
  if (n_pool_levels == 0) {
    auto& slots = pyramid.layout.slots.emplace_back(graph.n_nodes());
    std::iota(slots.begin(), slots.end(), std::int64_t{0});
    pyramid.layout.masks.emplace_back(graph.n_nodes(), 0);
    pyramid.layout.n_fake_per_level.push_back(0);
    pyramid.laplacians.push_back(scaled_laplacian(graph.laplacian));
    return pyramid;
  }
  const CoarseningHierarchy hierarchy = graclus_coarsen(graph, n_pool_levels, seed);
  pyramid.layout = build_permutation(hierarchy);
  for (const auto& level : padded_graphs(hierarchy, pyramid.layout)) {
    pyramid.laplacians.push_back(scaled_laplacian(level.laplacian));
  }
  return pyramid;
}

std::vector<NamedParam> named_parameters(const ModelParams& params) {
  std::vector<NamedParam> out;
  for (std::size_t b = 0; b < params.blocks.size(); ++b) {
    const auto& block = params.blocks[b];
    const std::string bname = "block" + std::to_string(b);
    for (std::size_t u = 0; u < block.units.size(); ++u) {
      const auto& unit = block.units[u];
      const std::string un = bname + ".unit" + std::to_string(u);
      out.push_back({un + ".conv.theta", unit.conv.theta, ParamRole::weight});
      out.push_back({un + ".conv.bias", unit.conv.bias, ParamRole::bias});
      out.push_back({un + ".norm.gamma", unit.norm.gamma, ParamRole::norm});
      out.push_back({un + ".norm.beta", unit.norm.beta, ParamRole::norm});
      out.push_back({un + ".attention.w", unit.attention.w, ParamRole::weight});
      out.push_back({un + ".attention.b", unit.attention.b, ParamRole::bias});
      out.push_back({un + ".attention.u_w", unit.attention.u_w, ParamRole::weight});
    }
    if (block.projection.defined()) out.push_back({bname + ".projection", block.projection, ParamRole::weight});
  }
  for (std::size_t p = 0; p < params.pool_attention.size(); ++p) {
    const auto& a = params.pool_attention[p];
    const std::string pn = "pool" + std::to_string(p) + ".attention";
    out.push_back({pn + ".w", a.w, ParamRole::weight});
    out.push_back({pn + ".b", a.b, ParamRole::bias});
    out.push_back({pn + ".u_w", a.u_w, ParamRole::weight});
  }
  out.push_back({"head.attention.w", params.head_attention.w, ParamRole::weight});
  out.push_back({"head.attention.b", params.head_attention.b, ParamRole::bias});
  out.push_back({"head.attention.u_w", params.head_attention.u_w, ParamRole::weight});
  out.push_back({"head.fc.weight", params.fc_weight, ParamRole::weight});
  out.push_back({"head.fc.bias", params.fc_bias, ParamRole::bias});
  return out;
}

std::vector<std::pair<std::string, BatchNormState*>> named_norm_states(ModelParams& params) {
  std::vector<std::pair<std::string, BatchNormState*>> out;
  for (std::size_t b = 0; b < params.blocks.size(); ++b)
    for (std::size_t u = 0; u < params.blocks[b].units.size(); ++u)
      out.emplace_back("block" + std::to_string(b) + ".unit" + std::to_string(u) + ".norm",
                       &params.blocks[b].units[u].norm.state);
  return out;
}

ModelParams init_params(const ModelConfig& config, const GraphPyramid& graph, std::uint64_t seed) {
  config.validate();
  const std::size_t stages = config.n_pool_stages();
  if (graph.n_levels() < stages + 1) {
    throw std::invalid_argument("init_params: " + std::to_string(stages) + " pooling stages need " +
                                std::to_string(stages + 1) + " graph levels, pyramid has " +
                                std::to_string(graph.n_levels()));
  }
  GlorotInit glorot(seed);
  ModelParams params;
  const auto pools = config.pool_after_block();
  const std::size_t k = config.cheb_order;
  std::size_t width = config.input_features;
  std::size_t level = 0;
  for (std::size_t b = 0; b < config.n_blocks(); ++b) {
    const std::size_t out_width = config.feature_widths[b];
    const std::size_t nodes = graph.padded_nodes(level);
    ResidualBlockParams block;
    std::size_t in = width;
    for (std::size_t u = 0; u < config.convs_per_block; ++u) {
      ConvUnitParams unit;
      unit.conv.theta = glorot({k, in, out_width}, k * in, out_width);
      unit.conv.bias = zeros({out_width});
      unit.norm.gamma = filled({nodes, out_width}, 1.0);
      unit.norm.beta = zeros({nodes, out_width});
      unit.norm.state = BatchNormState::fresh(nodes * out_width);
      unit.attention = init_attention(glorot, out_width);
      block.units.push_back(std::move(unit));
      in = out_width;
    }
    if (width != out_width) block.projection = glorot({width, out_width}, width, out_width);
    params.blocks.push_back(std::move(block));
    width = out_width;
    if (pools[b]) {
      params.pool_attention.push_back(init_attention(glorot, width));
      ++level;
    }
  }
  const std::size_t flat = graph.padded_nodes(level) * width;
  params.head_attention = init_attention(glorot, flat);
  params.fc_weight = glorot({flat, config.n_classes}, flat, config.n_classes);
  params.fc_bias = zeros({config.n_classes});
  return params;
}

ModelParams clone_params(const ModelParams& params) {
  ModelParams out;
  for (const auto& block : params.blocks) {
    ResidualBlockParams copy;
    for (const auto& unit : block.units) {
      ConvUnitParams u;
      u.conv = {clone(unit.conv.theta), clone(unit.conv.bias)};
      u.norm = {clone(unit.norm.gamma), clone(unit.norm.beta), unit.norm.state};
      u.attention = clone(unit.attention);
      copy.units.push_back(std::move(u));
    }
    copy.projection = clone(block.projection);
    out.blocks.push_back(std::move(copy));
  }
  for (const auto& a : params.pool_attention) out.pool_attention.push_back(clone(a));
  out.head_attention = clone(params.head_attention);
  out.fc_weight = clone(params.fc_weight);
  out.fc_bias = clone(params.fc_bias);
  return out;
}

Tensor model_features(const ModelConfig& config, ModelParams& params, const GraphPyramid& graph,
                      const Tensor& x, bool training) {
  if (params.blocks.size() != config.n_blocks()) {
    throw std::invalid_argument("model_features: parameters hold " + std::to_string(params.blocks.size()) +
                                " blocks, config expects " + std::to_string(config.n_blocks()));
  }
  if (x.rank() != 3 || x.dim(1) != graph.padded_nodes(0) || x.dim(2) != config.input_features) {
    throw std::invalid_argument("model_features: input " + to_string(x.shape()) + " does not match " +
                                std::to_string(graph.padded_nodes(0)) + " padded nodes x " +
                                std::to_string(config.input_features) + " features");
  }
  const LayerOptions options{config.leaky_slope, BatchNormOptions{training, config.bn_momentum, config.bn_eps}};
  const auto pools = config.pool_after_block();
  Tensor h = x;
  std::size_t level = 0;
  std::size_t stage = 0;
  for (std::size_t b = 0; b < params.blocks.size(); ++b) {
    h = residual_block(h, graph.laplacians.at(level), params.blocks[b], options, graph.fake_mask(level));
    if (pools[b]) {
      h = node_attention(h, params.pool_attention.at(stage), graph.fake_mask(level));
      h = masked_pair_max(h, graph.fake_mask(level));
      ++level;
      ++stage;
    }
  }
  // Fake positions that were not pooled away still hold bias-driven values.
  const auto mask = graph.fake_mask(level);
  if (std::any_of(mask.begin(), mask.end(), [](std::uint8_t m) { return m != 0; })) {
    const std::size_t f = h.dim(2);
    std::vector<double> keep(mask.size() * f);
    for (std::size_t n = 0; n < mask.size(); ++n)
      for (std::size_t c = 0; c < f; ++c) keep[n * f + c] = mask[n] ? 0.0 : 1.0;
    h = mul(h, Tensor(Shape{mask.size(), f}, std::move(keep)));
  }
  return h;
}

Tensor model_forward(const ModelConfig& config, ModelParams& params, const GraphPyramid& graph,
                     const Tensor& x, bool training) {
  const Tensor features = model_features(config, params, graph, x, training);
  const std::size_t batch = features.dim(0);
  const Tensor flat = reshape(features, Shape{batch, features.dim(1) * features.dim(2)});
  const Tensor attended = feature_attention(flat, params.head_attention);
  return add(matmul(attended, params.fc_weight), params.fc_bias);
}

Tensor permuted_input(const GraphPyramid& graph, std::span<const double> raw, std::size_t batch) {
  const std::size_t n_real = graph.n_real_nodes();
  auto padded = permute_node_signals(raw, batch, n_real, graph.layout);
  return Tensor(Shape{batch, graph.padded_nodes(0), 1}, std::move(padded));
}

Tensor model_forward_raw(const ModelConfig& config, ModelParams& params, const GraphPyramid& graph,
                         std::span<const double> raw, std::size_t batch, bool training) {
  return model_forward(config, params, graph, permuted_input(graph, raw, batch), training);
}

}  // namespace agrn
