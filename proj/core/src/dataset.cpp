#include "agrn/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iterator>
#include <numbers>
#include <random>
#include <stdexcept>

#include "agrn/byte_io.hpp"
#include "agrn/log.hpp"
#include "agrn/random.hpp"

namespace agrn {

void TrialRecord::validate(std::size_t channels, std::size_t times) const {
  if (n_channels != channels || n_times != times) {
    throw std::invalid_argument("trial of subject " + std::to_string(subject) + " run " + std::to_string(run) +
                                " is " + std::to_string(n_channels) + "x" + std::to_string(n_times) +
                                ", expected " + std::to_string(channels) + "x" + std::to_string(times));
  }
  if (signals.size() != n_channels * n_times) throw std::invalid_argument("trial signal buffer has the wrong size");
  if (label >= kClassNames.size()) throw std::invalid_argument("trial label " + std::to_string(label) + " is invalid");
}

void SampleSet::append(const SampleSet& other) {
  if (other.size() == 0) return;
  if (size() == 0 && features.empty()) n_nodes = other.n_nodes;
  if (other.n_nodes != n_nodes) throw std::invalid_argument("SampleSet::append: node counts differ");
  const bool keep_provenance = (size() == 0 || !trial.empty()) && !other.trial.empty();
  features.insert(features.end(), other.features.begin(), other.features.end());
  labels.insert(labels.end(), other.labels.begin(), other.labels.end());
  if (keep_provenance) {
    trial.insert(trial.end(), other.trial.begin(), other.trial.end());
    subject.insert(subject.end(), other.subject.begin(), other.subject.end());
  } else {
    trial.clear();
    subject.clear();
  }
}

SampleSet extract_samples(std::span<const TrialRecord> trials, std::size_t channels, std::size_t times) {
  SampleSet set;
  set.n_nodes = channels;
  set.features.resize(trials.size() * times * channels);
  set.labels.reserve(trials.size() * times);
  set.trial.reserve(trials.size() * times);
  set.subject.reserve(trials.size() * times);
  std::size_t row = 0;
  for (std::size_t t = 0; t < trials.size(); ++t) {
    const TrialRecord& trial = trials[t];
    trial.validate(channels, times);
    for (std::size_t k = 0; k < times; ++k, ++row) {
      for (std::size_t c = 0; c < channels; ++c) set.features[row * channels + c] = trial.signals[c * times + k];
      set.labels.push_back(trial.label);
      set.trial.push_back(static_cast<std::uint32_t>(t));
      set.subject.push_back(trial.subject);
    }
  }
  return set;
}

std::vector<TrialRecord> trials_from_edf(const EdfFile& file, std::uint32_t subject, std::uint32_t run,
                                         const DataConfig& config) {
  const LabelRule* rule = nullptr;
  for (const auto& r : config.rules)
    if (std::find(r.runs.begin(), r.runs.end(), run) != r.runs.end()) rule = &r;
  if (!rule) throw std::invalid_argument("no label rule covers run " + std::to_string(run));

  const auto data = file.data_signals();
  if (data.size() != config.channels) {
    throw std::runtime_error("subject " + std::to_string(subject) + " run " + std::to_string(run) + " has " +
                             std::to_string(data.size()) + " data signals, expected " +
                             std::to_string(config.channels));
  }
  std::vector<std::vector<double>> physical;
  physical.reserve(data.size());
  for (std::size_t i : data) {
    if (std::abs(file.sample_rate(i) - config.sample_rate) > 1e-9) {
      throw std::runtime_error("signal '" + file.signals[i].name() + "' is sampled at " +
                               std::to_string(file.sample_rate(i)) + " Hz, expected " +
                               std::to_string(config.sample_rate));
    }
    physical.push_back(file.signals[i].physical());
  }
  const std::size_t length = physical.empty() ? 0 : physical.front().size();

  std::vector<TrialRecord> trials;
  std::size_t first_taken = 0, second_taken = 0;
  for (const auto& a : file.annotations) {
    const bool first = a.text == rule->first_code;
    const bool second = a.text == rule->second_code;
    if (!first && !second) continue;
    std::size_t& taken = first ? first_taken : second_taken;
    if (taken >= config.trials_per_label_per_run) continue;
    const auto start = static_cast<std::size_t>(std::llround(a.onset * config.sample_rate));
    if (a.onset < 0.0 || start + config.trial_length > length) {
      warn("subject " + std::to_string(subject) + " run " + std::to_string(run) + ": trial at " +
           std::to_string(a.onset) + " s runs past the end of the recording, skipped");
      continue;
    }
    TrialRecord t;
    t.subject = subject;
    t.run = run;
    t.label = first ? rule->first_label : rule->second_label;
    t.n_channels = config.channels;
    t.n_times = config.trial_length;
    t.signals.resize(t.n_channels * t.n_times);
    for (std::size_t c = 0; c < t.n_channels; ++c)
      for (std::size_t k = 0; k < t.n_times; ++k)
        t.signals[c * t.n_times + k] = static_cast<float>(physical[c][start + k]);
    trials.push_back(std::move(t));
    ++taken;
  }
  if (first_taken < config.trials_per_label_per_run || second_taken < config.trials_per_label_per_run) {
    warn("subject " + std::to_string(subject) + " run " + std::to_string(run) + ": found " +
         std::to_string(first_taken) + " '" + rule->first_code + "' and " + std::to_string(second_taken) + " '" +
         rule->second_code + "' trials, expected " + std::to_string(config.trials_per_label_per_run) + " each");
  }
  return trials;
}

std::filesystem::path run_path(const std::filesystem::path& dataset_dir, std::uint32_t subject, std::uint32_t run) {
  char dir[16], name[32];
  std::snprintf(dir, sizeof dir, "S%03u", subject);
  std::snprintf(name, sizeof name, "S%03uR%02u.edf", subject, run);
  return dataset_dir / dir / name;
}

std::vector<TrialRecord> load_subject(const std::filesystem::path& dataset_dir, std::uint32_t subject,
                                      const DataConfig& config) {
  std::vector<std::uint32_t> runs;
  for (const auto& r : config.rules) runs.insert(runs.end(), r.runs.begin(), r.runs.end());
  std::sort(runs.begin(), runs.end());
  std::vector<TrialRecord> trials;
  for (std::uint32_t run : runs) {
    auto part = trials_from_edf(read_edf(run_path(dataset_dir, subject, run)), subject, run, config);
    std::move(part.begin(), part.end(), std::back_inserter(trials));
  }
  return trials;
}

SampleSet load_dataset(const std::filesystem::path& dataset_dir, const DataConfig& config) {
  if (config.subjects.empty()) throw std::invalid_argument("load_dataset: no subjects configured");
  std::vector<TrialRecord> trials;
  for (std::uint32_t s : config.subjects) {
    auto part = load_subject(dataset_dir, s, config);
    std::move(part.begin(), part.end(), std::back_inserter(trials));
  }
  SampleSet set = extract_samples(trials, config.channels, config.trial_length);
  if (config.zscore) zscore_channels(set);
  return set;
}

void zscore_channels(SampleSet& set) {
  const std::size_t n = set.n_nodes, m = set.size();
  if (m == 0) return;
  for (std::size_t c = 0; c < n; ++c) {
    double mean = 0.0;
    for (std::size_t r = 0; r < m; ++r) mean += set.features[r * n + c];
    mean /= static_cast<double>(m);
    double var = 0.0;
    for (std::size_t r = 0; r < m; ++r) {
      const double d = set.features[r * n + c] - mean;
      var += d * d;
    }
    const double sd = std::sqrt(var / static_cast<double>(m));
    for (std::size_t r = 0; r < m; ++r) {
      const double centred = set.features[r * n + c] - mean;
      set.features[r * n + c] = static_cast<float>(sd > 0.0 ? centred / sd : centred);
    }
  }
}

std::size_t SplitPlan::n_folds() const { return mode == SplitMode::holdout ? 1 : shards.size(); }

std::size_t SplitPlan::test_shard(std::size_t fold) const {
  if (fold >= n_folds()) throw std::out_of_range("SplitPlan: fold " + std::to_string(fold) + " out of range");
  return mode == SplitMode::holdout ? shards.size() - 1 : fold;
}

std::vector<std::size_t> SplitPlan::train_rows(std::size_t fold) const {
  const std::size_t test = test_shard(fold);
  std::vector<std::size_t> rows;
  for (std::size_t s = 0; s < shards.size(); ++s)
    if (s != test) rows.insert(rows.end(), shards[s].begin(), shards[s].end());
  return rows;
}

const std::vector<std::size_t>& SplitPlan::test_rows(std::size_t fold) const { return shards[test_shard(fold)]; }

SplitPlan make_split(std::size_t sample_count, std::uint64_t seed, SplitMode mode, std::size_t shard_count) {
  if (shard_count < 2) throw std::invalid_argument("make_split: need at least 2 shards");
  if (sample_count < shard_count) {
    throw std::invalid_argument("make_split: " + std::to_string(sample_count) + " samples cannot fill " +
                                std::to_string(shard_count) + " shards");
  }
  SplitPlan plan;
  plan.mode = mode;
  std::mt19937_64 rng(mix_seed(seed, 0x5B11));
  plan.permutation = shuffled_indices(sample_count, rng);
  plan.shards.resize(shard_count);
  for (std::size_t s = 0; s < shard_count; ++s) {
    const std::size_t begin = s * sample_count / shard_count, end = (s + 1) * sample_count / shard_count;
    plan.shards[s].assign(plan.permutation.begin() + static_cast<std::ptrdiff_t>(begin),
                          plan.permutation.begin() + static_cast<std::ptrdiff_t>(end));
  }
  return plan;
}

SplitPlan make_trial_split(std::span<const std::uint32_t> trial_of_row, std::uint64_t seed, SplitMode mode,
                           std::size_t shard_count) {
  std::vector<std::uint32_t> ids(trial_of_row.begin(), trial_of_row.end());
  std::sort(ids.begin(), ids.end());
  ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
  const SplitPlan by_trial = make_split(ids.size(), seed, mode, shard_count);
  std::vector<std::size_t> shard_of_trial(ids.size());
  for (std::size_t s = 0; s < by_trial.shards.size(); ++s)
    for (std::size_t t : by_trial.shards[s]) shard_of_trial[t] = s;

  SplitPlan plan;
  plan.mode = mode;
  plan.shards.resize(shard_count);
  for (std::size_t row = 0; row < trial_of_row.size(); ++row) {
    const auto t = static_cast<std::size_t>(std::lower_bound(ids.begin(), ids.end(), trial_of_row[row]) - ids.begin());
    plan.shards[shard_of_trial[t]].push_back(row);
  }
  for (const auto& shard : plan.shards) plan.permutation.insert(plan.permutation.end(), shard.begin(), shard.end());
  return plan;
}

void write_samples(std::ostream& out, const SampleSet& set) {
  if (set.features.size() != set.size() * set.n_nodes) {
    throw std::invalid_argument("write_samples: feature buffer does not match labels");
  }
  byte_io::put_magic(out, "SMP1");
  byte_io::put_u32(out, static_cast<std::uint32_t>(set.size()));
  byte_io::put_u32(out, static_cast<std::uint32_t>(set.n_nodes));
  for (float v : set.features) byte_io::put_f32(out, v);
  out.write(reinterpret_cast<const char*>(set.labels.data()), static_cast<std::streamsize>(set.labels.size()));
  if (!out) throw std::runtime_error("write_samples: stream error");
}

SampleSet read_samples(std::istream& in) {
  byte_io::expect_magic(in, "SMP1");
  SampleSet set;
  const std::uint32_t m = byte_io::get_u32(in, "sample count");
  set.n_nodes = byte_io::get_u32(in, "node count");
  set.features.resize(static_cast<std::size_t>(m) * set.n_nodes);
  for (float& v : set.features) v = byte_io::get_f32(in, "sample features");
  set.labels.resize(m);
  if (!in.read(reinterpret_cast<char*>(set.labels.data()), m)) {
    throw std::runtime_error("read_samples: truncated labels");
  }
  for (std::uint8_t l : set.labels)
    if (l >= kClassNames.size()) throw std::runtime_error("read_samples: label " + std::to_string(l) + " out of range");
  return set;
}

void save_samples(const std::filesystem::path& path, const SampleSet& set) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  write_samples(out, set);
}

SampleSet load_samples(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  try {
    return read_samples(in);
  } catch (const std::exception& e) {
    throw std::runtime_error(path.string() + ": " + e.what());
  }
}

SyntheticData make_synthetic(const SyntheticConfig& config, std::uint64_t seed) {
  if (config.n_nodes < 2) throw std::invalid_argument("make_synthetic: need at least 2 nodes");
  const std::size_t classes = kClassNames.size();
  SyntheticData data;
  for (std::size_t c = 0; c < classes; ++c) {
    std::vector<double> p(config.n_nodes);
    for (std::size_t i = 0; i < config.n_nodes; ++i)
      p[i] = std::cos(std::numbers::pi * static_cast<double>((c + 1) * i) / 4.0);
    data.patterns.push_back(std::move(p));
  }
  std::mt19937_64 rng(mix_seed(seed, 0x5747));
  auto draw = [&](std::size_t count, std::size_t first_id) {
    SampleSet set;
    set.n_nodes = config.n_nodes;
    std::vector<std::uint8_t> labels(count);
    for (std::size_t r = 0; r < count; ++r) labels[r] = static_cast<std::uint8_t>(r % classes);
    portable_shuffle(labels, rng);
    for (std::size_t r = 0; r < count; ++r) {
      for (double v : data.patterns[labels[r]])
        set.features.push_back(static_cast<float>(v + config.noise * standard_normal(rng)));
      set.labels.push_back(labels[r]);
      set.trial.push_back(static_cast<std::uint32_t>(first_id + r));
      set.subject.push_back(0);
    }
    return set;
  };
  data.train = draw(config.train_count, 0);
  data.test = draw(config.test_count, config.train_count);
  return data;
}

SampleSet concatenate(const SampleSet& first, const SampleSet& second) {
  SampleSet out = first;
  out.append(second);
  return out;
}

}  // namespace agrn
