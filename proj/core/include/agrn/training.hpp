#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "agrn/model.hpp"

namespace agrn {

struct LossConfig {
  double l2_lambda = 0.001;
  std::size_t class_count = 4;
};

/// Weight tensors that carry the L2 penalty (biases and batch-norm
/// parameters are excluded).
std::vector<Tensor> l2_weights(const ModelParams& params);

/// mean_b(-log softmax(logits_b)[label_b]) + l2_lambda * sum ||W||^2.
Tensor cross_entropy_l2(const Tensor& logits, std::span<const int> labels, std::span<const Tensor> weights,
                        const LossConfig& config);
Tensor cross_entropy_l2(const Tensor& logits, std::span<const int> labels, const ModelParams& params,
                        const LossConfig& config);

struct AdamConfig {
  double learning_rate = 0.001;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamState {
  AdamConfig config;
  std::uint64_t step = 0;
  std::vector<std::vector<double>> m;
  std::vector<std::vector<double>> v;

  static AdamState for_params(std::span<const Tensor> params, const AdamConfig& config);
};

class NonFiniteGradient : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// One bias-corrected Adam update from the tensors' accumulated gradients.
/// A tensor without a gradient buffer counts as a zero gradient. Any
/// non-finite gradient aborts before anything is modified and throws
/// NonFiniteGradient naming the parameter (from `names` when given).
void adam_step(std::span<Tensor> params, AdamState& state, std::span<const std::string> names = {});

enum class TrainingScope { group, subject };

/// 0.001 for group-level runs, 0.0001 for subject-level runs.
double default_learning_rate(TrainingScope scope);

struct TrainConfig {
  std::size_t epochs = 100;
  std::size_t batch_size = 1024;
  AdamConfig adam;
  double l2_lambda = 0.001;
  /// Optimizer steps between evaluations.
  std::size_t eval_interval = 100;
  /// Evaluations without test-accuracy improvement before stopping; 0
  /// disables early stopping.
  std::size_t early_stop_patience = 20;
  Precision precision = Precision::f64;
};

/// Row-major (rows, n_nodes) node signals with one class label per row.
struct LabeledView {
  std::span<const float> features;
  std::span<const std::uint8_t> labels;
  std::size_t n_nodes = 0;

  std::size_t rows() const { return n_nodes == 0 ? 0 : features.size() / n_nodes; }
};

struct MetricsRow {
  std::size_t iteration = 0;
  double train_loss = 0.0;
  double train_acc = 0.0;
  double test_loss = 0.0;
  double test_acc = 0.0;
};

struct TrainResult {
  ModelParams params;
  std::vector<MetricsRow> log;
  std::size_t steps = 0;
  bool diverged = false;
  std::string message;
  double best_test_accuracy = 0.0;
};

using MetricsCallback = std::function<void(const MetricsRow&)>;

/// Shuffled mini-batch Adam training. Evaluates every eval_interval steps
/// and after the last step, and returns the parameters with the best test
/// accuracy (the final ones when there is no test set). A non-finite loss
/// or gradient stops training and returns the last good snapshot.
TrainResult train(const ModelConfig& model, const TrainConfig& config, const GraphPyramid& graph,
                  const LabeledView& data, std::span<const std::size_t> train_rows,
                  std::span<const std::size_t> test_rows, std::uint64_t seed,
                  const MetricsCallback& on_metrics = {});

struct Evaluation {
  double loss = 0.0;  // mean cross-entropy without the L2 term
  double accuracy = 0.0;
  std::vector<int> predictions;
};

/// Inference-mode pass over `rows`.
Evaluation evaluate(const ModelConfig& model, ModelParams& params, const GraphPyramid& graph,
                    const LabeledView& data, std::span<const std::size_t> rows, std::size_t batch_size);

/// Header "iteration,train_loss,train_acc,test_loss,test_acc".
void write_metrics_header(std::ostream& out);
void write_metrics_row(std::ostream& out, const MetricsRow& row);

}  // namespace agrn
