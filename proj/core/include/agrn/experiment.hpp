#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "agrn/checkpoint.hpp"
#include "agrn/config.hpp"
#include "agrn/dataset.hpp"
#include "agrn/metrics.hpp"

namespace agrn {

/// Seed stream used for Graclus coarsening of an experiment seed.
std::uint64_t coarsening_seed(std::uint64_t seed);

/// Pooling levels the model needs (0 when pooling is disabled).
std::size_t pyramid_levels(const ModelConfig& model);

/// Pearson graph from the given rows only, so test rows never shape it.
ElectrodeGraph graph_from_rows(const SampleSet& samples, std::span<const std::size_t> rows);

struct RunOutcome {
  ElectrodeGraph graph;
  GraphPyramid pyramid;
  TrainResult training;
  Evaluation evaluation;
  MetricsReport report;
  bool has_test = false;
};

/// Graph, coarsening, training and test evaluation for one split.
RunOutcome run_experiment(const ExperimentConfig& config, const SampleSet& samples,
                          std::span<const std::size_t> train_rows, std::span<const std::size_t> test_rows,
                          std::uint64_t seed, const MetricsCallback& on_metrics = {});

/// Holdout or k-fold plan honouring data.per_trial_split.
SplitPlan plan_split(const ExperimentConfig& config, const SampleSet& samples, SplitMode mode,
                     std::size_t shard_count = kShardCount);

struct FoldResult {
  std::size_t fold = 0;
  bool failed = false;
  std::string message;
  std::size_t train_size = 0;
  std::size_t test_size = 0;
  std::size_t steps = 0;
  MetricsReport report;
};

struct CrossValidationResult {
  std::vector<FoldResult> folds;
  /// Over folds that did not fail.
  SummaryStats accuracy;
  SummaryStats macro_f1;
  ConfusionMatrix confusion;
  std::size_t n_failed = 0;
};

/// Trains one model per fold of a config.folds-way k-fold plan. A fold that
/// diverges or throws is marked failed with its message.
CrossValidationResult run_cross_validation(const ExperimentConfig& config, const SampleSet& samples,
                                           std::uint64_t seed);

/// Checkpoint archive: model tensors plus "graph.adjacency", the coarsening
/// seed and the experiment configuration text.
std::vector<NamedTensor> make_checkpoint(const ExperimentConfig& config, const ElectrodeGraph& graph,
                                         std::uint64_t coarsen_seed, ModelParams& params);
void save_checkpoint(const std::filesystem::path& path, std::span<const NamedTensor> archive);

struct LoadedModel {
  ExperimentConfig config;
  ElectrodeGraph graph;
  GraphPyramid pyramid;
  ModelParams params;
};

LoadedModel load_checkpoint(const std::filesystem::path& path);

void write_report(const std::filesystem::path& dir, const MetricsReport& report, std::size_t samples);
void write_cross_validation_report(const std::filesystem::path& dir, const CrossValidationResult& cv);

}  // namespace agrn
