#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace agrn {

inline constexpr std::size_t kClassCount = 4;

/// counts[true][predicted], classes in L, R, B, F order.
struct ConfusionMatrix {
  std::array<std::array<std::uint64_t, kClassCount>, kClassCount> counts{};

  std::uint64_t total() const;
  std::uint64_t trace() const;
};

struct MetricsReport {
  double accuracy = 0.0;
  double macro_f1 = 0.0;
  /// Recall of each class; 0 for a class absent from the labels.
  std::array<double, kClassCount> per_class_accuracy{};
  std::array<double, kClassCount> per_class_f1{};
  ConfusionMatrix confusion;
};

/// Precision, recall and F1 of an undefined ratio (0/0) are taken as 0.
MetricsReport compute_metrics(std::span<const int> predictions, std::span<const int> labels);
MetricsReport metrics_from_confusion(const ConfusionMatrix& confusion);

struct SummaryStats {
  double median = 0.0;
  double mean = 0.0;
  double max = 0.0;
  double min = 0.0;
};

SummaryStats summarize(std::span<const double> values);

}  // namespace agrn
