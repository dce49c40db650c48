#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "agrn/edf.hpp"
#include "agrn/training.hpp"

namespace agrn {

/// Class indices: L=0, R=1, B=2, F=3.
inline constexpr std::array<const char*, 4> kClassNames{"L", "R", "B", "F"};

/// One motor-imagery trial: channels x time physical samples, row-major.
struct TrialRecord {
  std::uint32_t subject = 0;
  std::uint32_t run = 0;
  std::uint8_t label = 0;
  std::size_t n_channels = 64;
  std::size_t n_times = 640;
  std::vector<float> signals;

  /// Throws std::invalid_argument unless shape and label are as required.
  void validate(std::size_t channels = 64, std::size_t times = 640) const;
};

/// One row per time point: the channel values at that instant.
struct SampleSet {
  std::size_t n_nodes = 0;
  std::vector<float> features;
  std::vector<std::uint8_t> labels;
  /// Per-row trial and subject index; empty when unknown (e.g. loaded from
  /// a sample cache).
  std::vector<std::uint32_t> trial;
  std::vector<std::uint32_t> subject;

  std::size_t size() const { return labels.size(); }
  LabeledView view() const { return {features, labels, n_nodes}; }
  void append(const SampleSet& other);
};

SampleSet extract_samples(std::span<const TrialRecord> trials, std::size_t channels = 64,
                          std::size_t times = 640);

/// Maps annotation codes of a run to class indices.
struct LabelRule {
  std::vector<std::uint32_t> runs;
  std::string first_code = "T1";
  std::uint8_t first_label = 0;
  std::string second_code = "T2";
  std::uint8_t second_label = 1;
};

struct DataConfig {
  /// Imagined left/right fist runs, then imagined both fists/both feet.
  std::vector<LabelRule> rules{{{4, 8, 12}, "T1", 0, "T2", 1}, {{6, 10, 14}, "T1", 2, "T2", 3}};
  std::size_t trials_per_label_per_run = 7;
  std::size_t channels = 64;
  std::size_t trial_length = 640;
  double sample_rate = 160.0;
  bool zscore = false;
  bool per_trial_split = false;
  std::vector<std::uint32_t> subjects{1};
};

/// Cuts labelled trials out of one run. The first trials_per_label_per_run
/// occurrences of each mapped code are kept, in onset order.
std::vector<TrialRecord> trials_from_edf(const EdfFile& file, std::uint32_t subject, std::uint32_t run,
                                         const DataConfig& config);

/// <dir>/S001/S001R04.edf for subject 1, run 4.
std::filesystem::path run_path(const std::filesystem::path& dataset_dir, std::uint32_t subject, std::uint32_t run);

std::vector<TrialRecord> load_subject(const std::filesystem::path& dataset_dir, std::uint32_t subject,
                                      const DataConfig& config);

/// All configured subjects, with optional per-channel z-scoring.
SampleSet load_dataset(const std::filesystem::path& dataset_dir, const DataConfig& config);

/// Standardises every channel over all rows in place. Constant channels are
/// centred only.
void zscore_channels(SampleSet& set);

enum class SplitMode { holdout, kfold };

struct SplitPlan {
  SplitMode mode = SplitMode::holdout;
  std::vector<std::size_t> permutation;
  /// Ten shards covering every index exactly once; sizes differ by at most 1.
  std::vector<std::vector<std::size_t>> shards;

  /// 1 for holdout, the shard count for kfold.
  std::size_t n_folds() const;
  /// Holdout tests on the last shard; fold f of kfold tests on shard f.
  std::size_t test_shard(std::size_t fold) const;
  std::vector<std::size_t> train_rows(std::size_t fold = 0) const;
  const std::vector<std::size_t>& test_rows(std::size_t fold = 0) const;
};

inline constexpr std::size_t kShardCount = 10;

/// Seeded per-sample split.
SplitPlan make_split(std::size_t sample_count, std::uint64_t seed, SplitMode mode,
                     std::size_t shard_count = kShardCount);

/// Shards whole trials so no trial contributes to both sides.
SplitPlan make_trial_split(std::span<const std::uint32_t> trial_of_row, std::uint64_t seed, SplitMode mode,
                           std::size_t shard_count = kShardCount);

/// Sample cache: "SMP1", u32 M, u32 N, M*N f32 features, M u8 labels.
void write_samples(std::ostream& out, const SampleSet& set);
SampleSet read_samples(std::istream& in);
void save_samples(const std::filesystem::path& path, const SampleSet& set);
SampleSet load_samples(const std::filesystem::path& path);

struct SyntheticConfig {
  std::size_t n_nodes = 8;
  std::size_t train_count = 512;
  std::size_t test_count = 128;
  double noise = 0.1;
};

/// Class c is the planted pattern cos(pi (c + 1) i / 4) over nodes i plus
/// Gaussian noise. Classes are balanced and rows are shuffled.
struct SyntheticData {
  SampleSet train;
  SampleSet test;
  std::vector<std::vector<double>> patterns;
};

SyntheticData make_synthetic(const SyntheticConfig& config, std::uint64_t seed);

/// Stacks train then test; rows [0, train.size()) are the training rows.
SampleSet concatenate(const SampleSet& first, const SampleSet& second);

}  // namespace agrn
