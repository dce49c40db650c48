#include "agrn/metrics.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>
#include <string>

namespace agrn {

std::uint64_t ConfusionMatrix::total() const {
  std::uint64_t n = 0;
  for (const auto& row : counts) n = std::accumulate(row.begin(), row.end(), n);
  return n;
}

std::uint64_t ConfusionMatrix::trace() const {
  std::uint64_t n = 0;
  for (std::size_t c = 0; c < kClassCount; ++c) n += counts[c][c];
  return n;
}

MetricsReport metrics_from_confusion(const ConfusionMatrix& confusion) {
  const std::uint64_t total = confusion.total();
  if (total == 0) throw std::invalid_argument("compute_metrics: no samples");
  MetricsReport r;
  r.confusion = confusion;
  r.accuracy = static_cast<double>(confusion.trace()) / static_cast<double>(total);
  auto ratio = [](std::uint64_t a, std::uint64_t b) { return b == 0 ? 0.0 : static_cast<double>(a) / static_cast<double>(b); };
  double f1_sum = 0.0;
  for (std::size_t c = 0; c < kClassCount; ++c) {
    std::uint64_t actual = 0, predicted = 0;
    for (std::size_t k = 0; k < kClassCount; ++k) {
      actual += confusion.counts[c][k];
      predicted += confusion.counts[k][c];
    }
    const std::uint64_t tp = confusion.counts[c][c];
    const double precision = ratio(tp, predicted);
    const double recall = ratio(tp, actual);
    r.per_class_accuracy[c] = recall;
    r.per_class_f1[c] = precision + recall == 0.0 ? 0.0 : 2.0 * precision * recall / (precision + recall);
    f1_sum += r.per_class_f1[c];
  }
  r.macro_f1 = f1_sum / static_cast<double>(kClassCount);
  return r;
}

MetricsReport compute_metrics(std::span<const int> predictions, std::span<const int> labels) {
  if (predictions.empty()) throw std::invalid_argument("compute_metrics: empty input");
  if (predictions.size() != labels.size()) {
    throw std::invalid_argument("compute_metrics: " + std::to_string(predictions.size()) + " predictions for " +
                                std::to_string(labels.size()) + " labels");
  }
  ConfusionMatrix m;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const int y = labels[i], p = predictions[i];
    if (y < 0 || y >= static_cast<int>(kClassCount) || p < 0 || p >= static_cast<int>(kClassCount)) {
      throw std::invalid_argument("compute_metrics: class index out of range at position " + std::to_string(i));
    }
    ++m.counts[static_cast<std::size_t>(y)][static_cast<std::size_t>(p)];
  }
  return metrics_from_confusion(m);
}

SummaryStats summarize(std::span<const double> values) {
  if (values.empty()) throw std::invalid_argument("summarize: no values");
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  const std::size_t n = sorted.size();
  SummaryStats s;
  s.median = n % 2 ? sorted[n / 2] : 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]);
  s.mean = std::accumulate(sorted.begin(), sorted.end(), 0.0) / static_cast<double>(n);
  s.min = sorted.front();
  s.max = sorted.back();
  return s;
}

}  // namespace agrn
