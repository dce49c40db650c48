#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

#include "agrn/dataset.hpp"
#include "agrn/model.hpp"
#include "agrn/training.hpp"

namespace agrn {

struct ExperimentConfig {
  ModelConfig model;
  TrainConfig train;
  DataConfig data;
  std::uint64_t seed = 1;
  std::size_t folds = kShardCount;
};

/// Flat "key = value" text, one setting per line, '#' starts a comment.
/// Keys are the ones written by format_config; lists are comma separated.
/// "scope = subject" selects the subject-level learning rate unless
/// train.learning_rate is also given.
ExperimentConfig parse_config(std::string_view text, ExperimentConfig base = {});
ExperimentConfig load_config(const std::filesystem::path& path, ExperimentConfig base = {});

/// Applies one setting; throws std::invalid_argument naming the key.
void apply_setting(ExperimentConfig& config, std::string_view key, std::string_view value);

/// Every key with its current value; parse_config(format_config(c)) == c.
std::string format_config(const ExperimentConfig& config);

Precision parse_precision(std::string_view text);
std::string_view precision_name(Precision p);

}  // namespace agrn
