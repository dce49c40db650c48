#include "agrn/training.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>
#include <random>

#include "agrn/random.hpp"

namespace agrn {
namespace {

double mean_cross_entropy(std::span<const double> logits, std::span<const int> labels, std::size_t classes) {
  double total = 0.0;
  for (std::size_t b = 0; b < labels.size(); ++b) {
    const double* row = logits.data() + b * classes;
    const double peak = *std::max_element(row, row + classes);
    double z = 0.0;
    for (std::size_t c = 0; c < classes; ++c) z += std::exp(row[c] - peak);
    total += std::log(z) + peak - row[labels[b]];
  }
  return total / static_cast<double>(labels.size());
}

int argmax_row(std::span<const double> logits, std::size_t row, std::size_t classes) {
  const double* r = logits.data() + row * classes;
  return static_cast<int>(std::max_element(r, r + classes) - r);
}

struct Batch {
  std::vector<double> raw;
  std::vector<int> labels;
};

Batch gather(const LabeledView& data, std::span<const std::size_t> rows) {
  Batch batch;
  batch.raw.reserve(rows.size() * data.n_nodes);
  for (std::size_t r : rows) {
    if (r >= data.rows()) throw std::out_of_range("training: row " + std::to_string(r) + " out of range");
    const auto f = data.features.subspan(r * data.n_nodes, data.n_nodes);
    batch.raw.insert(batch.raw.end(), f.begin(), f.end());
    batch.labels.push_back(data.labels[r]);
  }
  return batch;
}

}  // namespace

std::vector<Tensor> l2_weights(const ModelParams& params) {
  std::vector<Tensor> out;
  for (const auto& p : named_parameters(params))
    if (p.role == ParamRole::weight) out.push_back(p.tensor);
  return out;
}

Tensor cross_entropy_l2(const Tensor& logits, std::span<const int> labels, std::span<const Tensor> weights,
                        const LossConfig& config) {
  if (!(config.l2_lambda >= 0.0)) throw std::invalid_argument("cross_entropy_l2: l2_lambda must be nonnegative");
  if (logits.rank() != 2 || logits.dim(1) != config.class_count) {
    throw std::invalid_argument("cross_entropy_l2: logits " + to_string(logits.shape()) + " for " +
                                std::to_string(config.class_count) + " classes");
  }
  Tensor loss = softmax_cross_entropy(logits, labels);
  if (config.l2_lambda == 0.0 || weights.empty()) return loss;
  Tensor penalty = sum(mul(weights[0], weights[0]));
  for (std::size_t i = 1; i < weights.size(); ++i) penalty = add(penalty, sum(mul(weights[i], weights[i])));
  return add(loss, scalar_mul(penalty, config.l2_lambda));
}

Tensor cross_entropy_l2(const Tensor& logits, std::span<const int> labels, const ModelParams& params,
                        const LossConfig& config) {
  const auto weights = l2_weights(params);
  return cross_entropy_l2(logits, labels, weights, config);
}

AdamState AdamState::for_params(std::span<const Tensor> params, const AdamConfig& config) {
  AdamState state;
  state.config = config;
  for (const Tensor& p : params) {
    state.m.emplace_back(p.numel(), 0.0);
    state.v.emplace_back(p.numel(), 0.0);
  }
  return state;
}

void adam_step(std::span<Tensor> params, AdamState& state, std::span<const std::string> names) {
  if (params.size() != state.m.size()) {
    throw std::invalid_argument("adam_step: optimizer state tracks " + std::to_string(state.m.size()) +
                                " tensors, got " + std::to_string(params.size()));
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (params[i].numel() != state.m[i].size()) {
      throw std::invalid_argument("adam_step: parameter " + std::to_string(i) + " changed size");
    }
    for (double g : params[i].grad()) {
      if (!std::isfinite(g)) {
        const std::string name = i < names.size() ? names[i] : "#" + std::to_string(i);
        throw NonFiniteGradient("adam_step: non-finite gradient in parameter " + name);
      }
    }
  }
  const AdamConfig& c = state.config;
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double correction1 = 1.0 - std::pow(c.beta1, t);
  const double correction2 = 1.0 - std::pow(c.beta2, t);
  const bool single = current_precision() == Precision::f32;
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto g = params[i].grad();
    auto p = params[i].mutable_values();
    auto& m = state.m[i];
    auto& v = state.v[i];
    for (std::size_t k = 0; k < p.size(); ++k) {
      const double gk = g.empty() ? 0.0 : g[k];
      m[k] = c.beta1 * m[k] + (1.0 - c.beta1) * gk;
      v[k] = c.beta2 * v[k] + (1.0 - c.beta2) * gk * gk;
      const double m_hat = m[k] / correction1;
      const double v_hat = v[k] / correction2;
      p[k] -= c.learning_rate * m_hat / (std::sqrt(v_hat) + c.eps);
      if (single) p[k] = static_cast<double>(static_cast<float>(p[k]));
    }
  }
}

double default_learning_rate(TrainingScope scope) {
  return scope == TrainingScope::group ? 0.001 : 0.0001;
}

Evaluation evaluate(const ModelConfig& model, ModelParams& params, const GraphPyramid& graph,
                    const LabeledView& data, std::span<const std::size_t> rows, std::size_t batch_size) {
  if (rows.empty()) throw std::invalid_argument("evaluate: no rows");
  if (batch_size == 0) throw std::invalid_argument("evaluate: batch_size must be positive");
  NoGradScope no_grad;
  Evaluation out;
  double loss_sum = 0.0;
  std::size_t correct = 0;
  for (std::size_t start = 0; start < rows.size(); start += batch_size) {
    const auto chunk = rows.subspan(start, std::min(batch_size, rows.size() - start));
    const Batch batch = gather(data, chunk);
    const Tensor logits = model_forward_raw(model, params, graph, batch.raw, chunk.size(), false);
    const auto values = logits.values();
    loss_sum += mean_cross_entropy(values, batch.labels, model.n_classes) * static_cast<double>(chunk.size());
    for (std::size_t b = 0; b < chunk.size(); ++b) {
      const int predicted = argmax_row(values, b, model.n_classes);
      out.predictions.push_back(predicted);
      correct += predicted == batch.labels[b];
    }
  }
  out.loss = loss_sum / static_cast<double>(rows.size());
  out.accuracy = static_cast<double>(correct) / static_cast<double>(rows.size());
  return out;
}

TrainResult train(const ModelConfig& model, const TrainConfig& config, const GraphPyramid& graph,
                  const LabeledView& data, std::span<const std::size_t> train_rows,
                  std::span<const std::size_t> test_rows, std::uint64_t seed, const MetricsCallback& on_metrics) {
  if (config.batch_size == 0) throw std::invalid_argument("train: batch_size must be positive");
  if (config.eval_interval == 0) throw std::invalid_argument("train: eval_interval must be positive");
  if (data.n_nodes != graph.n_real_nodes()) {
    throw std::invalid_argument("train: data has " + std::to_string(data.n_nodes) + " nodes, graph has " +
                                std::to_string(graph.n_real_nodes()));
  }
  PrecisionScope precision(config.precision);

  TrainResult result;
  result.params = init_params(model, graph, seed);
  if (config.epochs == 0 || train_rows.empty()) return result;

  const auto named = named_parameters(result.params);
  std::vector<Tensor> tensors;
  std::vector<std::string> names;
  for (const auto& p : named) {
    tensors.push_back(p.tensor);
    names.push_back(p.name);
  }
  const std::vector<Tensor> weights = l2_weights(result.params);
  const LossConfig loss_config{config.l2_lambda, model.n_classes};
  AdamState adam = AdamState::for_params(tensors, config.adam);

  std::mt19937_64 rng(mix_seed(seed, 0x5EED));
  std::vector<std::size_t> order(train_rows.begin(), train_rows.end());

  ModelParams last_good = clone_params(result.params);
  ModelParams best;
  bool have_best = false;
  std::size_t evals_since_best = 0;
  double window_loss = 0.0;
  std::size_t window_correct = 0, window_count = 0;
  std::size_t last_eval_step = 0;
  bool stop = false;

  auto run_evaluation = [&] {
    MetricsRow row;
    row.iteration = result.steps;
    row.train_loss = window_count ? window_loss / static_cast<double>(window_count) : 0.0;
    row.train_acc = window_count ? static_cast<double>(window_correct) / static_cast<double>(window_count) : 0.0;
    window_loss = 0.0;
    window_correct = window_count = 0;
    last_eval_step = result.steps;
    if (test_rows.empty()) {
      row.test_loss = row.test_acc = std::numeric_limits<double>::quiet_NaN();
      last_good = clone_params(result.params);
    } else {
      const Evaluation ev = evaluate(model, result.params, graph, data, test_rows, config.batch_size);
      row.test_loss = ev.loss;
      row.test_acc = ev.accuracy;
      if (std::isfinite(ev.loss)) last_good = clone_params(result.params);
      if (!have_best || ev.accuracy > result.best_test_accuracy) {
        have_best = true;
        result.best_test_accuracy = ev.accuracy;
        best = clone_params(result.params);
        evals_since_best = 0;
      } else if (config.early_stop_patience > 0 && ++evals_since_best >= config.early_stop_patience) {
        stop = true;
      }
    }
    result.log.push_back(row);
    if (on_metrics) on_metrics(row);
  };

  for (std::size_t epoch = 0; epoch < config.epochs && !stop && !result.diverged; ++epoch) {
    portable_shuffle(order, rng);
    for (std::size_t start = 0; start < order.size() && !stop; start += config.batch_size) {
      const std::span<const std::size_t> chunk(order.data() + start,
                                               std::min(config.batch_size, order.size() - start));
      const Batch batch = gather(data, chunk);
      const Tensor x = permuted_input(graph, batch.raw, chunk.size());
      const Tensor logits = model_forward(model, result.params, graph, x, true);
      const Tensor loss = cross_entropy_l2(logits, batch.labels, weights, loss_config);
      if (!std::isfinite(loss.item())) {
        result.diverged = true;
        result.message = "loss became non-finite at step " + std::to_string(result.steps + 1);
        break;
      }
      for (auto& t : tensors) t.zero_grad();
      loss.backward();
      try {
        adam_step(tensors, adam, names);
      } catch (const NonFiniteGradient& e) {
        result.diverged = true;
        result.message = e.what();
        break;
      }
      ++result.steps;
      const auto lv = logits.values();
      window_loss += mean_cross_entropy(lv, batch.labels, model.n_classes) * static_cast<double>(chunk.size());
      for (std::size_t b = 0; b < chunk.size(); ++b)
        window_correct += argmax_row(lv, b, model.n_classes) == batch.labels[b];
      window_count += chunk.size();
      if (result.steps % config.eval_interval == 0) run_evaluation();
    }
  }

  if (result.diverged) {
    result.params = have_best ? std::move(best) : std::move(last_good);
    return result;
  }
  if (result.steps != last_eval_step) run_evaluation();
  if (have_best) result.params = std::move(best);
  return result;
}

void write_metrics_header(std::ostream& out) { out << "iteration,train_loss,train_acc,test_loss,test_acc\n"; }

void write_metrics_row(std::ostream& out, const MetricsRow& row) {
  const auto old = out.precision(10);
  out << row.iteration << ',' << row.train_loss << ',' << row.train_acc << ',' << row.test_loss << ','
      << row.test_acc << '\n';
  out.precision(old);
}

}  // namespace agrn
