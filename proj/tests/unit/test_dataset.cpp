#include <set>
#include <sstream>

#include "agrn/dataset.hpp"
#include "agrn/log.hpp"
#include "doctest.h"
#include "fake_recording.hpp"
#include "oracles.hpp"

using namespace agrn;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / name) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

struct QuietWarnings {
  std::vector<std::string> messages;
  WarningSink previous;
  QuietWarnings() {
    previous = set_warning_sink([this](std::string_view m) { messages.emplace_back(m); });
  }
  ~QuietWarnings() { set_warning_sink(previous); }
};

void check_partition(const SplitPlan& plan, std::size_t count) {
  std::vector<int> seen(count, 0);
  for (const auto& shard : plan.shards)
    for (std::size_t r : shard) ++seen[r];
  for (int s : seen) CHECK(s == 1);
}

}  // namespace

TEST_SUITE("dataset") {
  TEST_CASE("one subject yields 84 trials of 640 samples") {
    TempDir dir("agrn_dataset_subject");
    fake::write_subject(dir.path, 1, 8);
    QuietWarnings quiet;
    const DataConfig config;
    const auto trials = load_subject(dir.path, 1, config);
    CHECK(trials.size() == 84);
    std::array<std::size_t, 4> per_class{};
    for (const auto& t : trials) {
      CHECK(t.signals.size() == 64 * 640);
      ++per_class[t.label];
    }
    for (std::size_t c : per_class) CHECK(c == 21);

    const SampleSet set = load_dataset(dir.path, config);
    CHECK(set.size() == 53'760);
    CHECK(set.n_nodes == 64);
    std::array<std::size_t, 4> rows{};
    for (auto l : set.labels) ++rows[l];
    for (std::size_t c : rows) CHECK(c == 13'440);
    CHECK(std::set<std::uint32_t>(set.trial.begin(), set.trial.end()).size() == 84);
    CHECK(quiet.messages.empty());
  }

  TEST_CASE("trials are cut at the annotated onsets with the mapped labels") {
    QuietWarnings quiet;
    const EdfFile file = parse_edf(write_edf(make_edf(fake::run_spec(6, 8, 3))));
    DataConfig config;
    config.channels = 3;
    const auto trials = trials_from_edf(file, 2, 6, config);
    REQUIRE(trials.size() == 14);
    std::vector<std::size_t> onsets;
    for (const auto& a : file.annotations)
      if (a.text != "T0") onsets.push_back(static_cast<std::size_t>(std::llround(a.onset * 160.0)));
    const double step = 200.0 / 65535.0;
    for (std::size_t k = 0; k < 14; ++k) {
      CHECK(trials[k].label == (k % 2 == 0 ? 2 : 3));
      CHECK(trials[k].subject == 2);
      CHECK(trials[k].run == 6);
      for (std::size_t c = 0; c < 3; ++c)
        for (std::size_t s : {std::size_t{0}, std::size_t{639}})
          CHECK(std::abs(trials[k].signals[c * 640 + s] - fake::signal_value(c, onsets[k] + s, 6)) <= step);
    }
  }

  TEST_CASE("short runs and unmapped runs are reported") {
    QuietWarnings quiet;
    DataConfig config;
    config.channels = 2;
    const EdfFile few = make_edf(fake::run_spec(4, 3, 2));
    CHECK(trials_from_edf(few, 1, 4, config).size() == 6);
    CHECK(quiet.messages.size() == 1);
    CHECK_THROWS_AS(trials_from_edf(few, 1, 5, config), std::invalid_argument);
    config.channels = 64;
    CHECK_THROWS_AS(trials_from_edf(few, 1, 4, config), std::runtime_error);
  }

  TEST_CASE("a trial running past the recording end is skipped with a warning") {
    QuietWarnings quiet;
    DataConfig config;
    config.channels = 1;
    auto spec = fake::run_spec(4, 7, 1);
    spec.annotations.push_back({spec.channels[0].physical.size() / 160.0 - 1.0, 4.1, "T1"});
    config.trials_per_label_per_run = 8;
    const auto trials = trials_from_edf(make_edf(spec), 1, 4, config);
    CHECK(trials.size() == 14);
    CHECK(quiet.messages.size() == 2);
  }

  TEST_CASE("run paths follow the dataset layout") {
    CHECK(run_path("data", 1, 4) == fs::path("data") / "S001" / "S001R04.edf");
    CHECK(run_path("/x", 109, 14) == fs::path("/x") / "S109" / "S109R14.edf");
  }

  TEST_CASE("sample extraction transposes each trial to time-major rows") {
    TrialRecord t;
    t.n_channels = 2;
    t.n_times = 3;
    t.label = 3;
    t.signals = {1, 2, 3, 4, 5, 6};
    const SampleSet set = extract_samples(std::span(&t, 1), 2, 3);
    CHECK(set.features == std::vector<float>{1, 4, 2, 5, 3, 6});
    CHECK(set.labels == std::vector<std::uint8_t>{3, 3, 3});
    t.label = 4;
    CHECK_THROWS_AS(extract_samples(std::span(&t, 1), 2, 3), std::invalid_argument);
  }

  TEST_CASE("z-scoring standardises every channel") {
    SampleSet set;
    set.n_nodes = 2;
    set.features = {1, 5, 2, 5, 3, 5, 6, 5};
    set.labels = {0, 0, 0, 0};
    zscore_channels(set);
    double mean = 0.0, sq = 0.0;
    for (std::size_t r = 0; r < 4; ++r) mean += set.features[r * 2], sq += set.features[r * 2] * set.features[r * 2];
    CHECK(std::abs(mean) < 1e-6);
    CHECK(sq / 4.0 == doctest::Approx(1.0).epsilon(1e-6));
    for (std::size_t r = 0; r < 4; ++r) CHECK(set.features[r * 2 + 1] == 0.0f);
  }

  TEST_CASE("splits partition the samples into ten near-equal shards") {
    for (std::size_t count : {10u, 57u, 1000u}) {
      const SplitPlan plan = make_split(count, 7, SplitMode::kfold);
      REQUIRE(plan.shards.size() == 10);
      check_partition(plan, count);
      for (const auto& shard : plan.shards) {
        CHECK(shard.size() >= count / 10);
        CHECK(shard.size() <= count / 10 + 1);
      }
      CHECK(plan.n_folds() == 10);
      for (std::size_t f = 0; f < 10; ++f) {
        CHECK(plan.train_rows(f).size() + plan.test_rows(f).size() == count);
        std::set<std::size_t> test(plan.test_rows(f).begin(), plan.test_rows(f).end());
        for (std::size_t r : plan.train_rows(f)) CHECK(test.count(r) == 0);
      }
    }
    const SplitPlan holdout = make_split(100, 7, SplitMode::holdout);
    CHECK(holdout.n_folds() == 1);
    CHECK(holdout.test_rows().size() == 10);
    CHECK(holdout.train_rows().size() == 90);
    CHECK_THROWS(holdout.test_rows(1));
    CHECK_THROWS_AS(make_split(9, 1, SplitMode::kfold), std::invalid_argument);
  }

  TEST_CASE("splits are deterministic per seed") {
    CHECK(make_split(500, 3, SplitMode::kfold).shards == make_split(500, 3, SplitMode::kfold).shards);
    CHECK(make_split(500, 3, SplitMode::kfold).shards != make_split(500, 4, SplitMode::kfold).shards);
  }

  TEST_CASE("trial splits keep each trial on one side") {
    std::vector<std::uint32_t> trial_of_row;
    for (std::uint32_t t = 0; t < 30; ++t)
      for (int k = 0; k < 5; ++k) trial_of_row.push_back(t * 3);
    const SplitPlan plan = make_trial_split(trial_of_row, 2, SplitMode::kfold);
    check_partition(plan, trial_of_row.size());
    std::vector<int> shard_of_trial(90, -1);
    for (std::size_t s = 0; s < plan.shards.size(); ++s) {
      CHECK(plan.shards[s].size() == 15);
      for (std::size_t r : plan.shards[s]) {
        auto& owner = shard_of_trial[trial_of_row[r]];
        if (owner < 0) owner = static_cast<int>(s);
        CHECK(owner == static_cast<int>(s));
      }
    }
  }

  TEST_CASE("sample cache round-trips exactly") {
    const auto synth = make_synthetic({5, 40, 8, 0.3}, 2);
    std::stringstream buffer;
    write_samples(buffer, synth.train);
    CHECK(buffer.str().size() == 4 + 4 + 4 + 40 * 5 * 4 + 40);
    const SampleSet back = read_samples(buffer);
    CHECK(back.n_nodes == 5);
    CHECK(back.features == synth.train.features);
    CHECK(back.labels == synth.train.labels);

    std::string bytes;
    {
      std::stringstream again;
      write_samples(again, synth.train);
      bytes = again.str();
    }
    bytes.back() = 9;
    std::istringstream bad_label(bytes);
    CHECK_THROWS(read_samples(bad_label));
    std::istringstream truncated(bytes.substr(0, 50));
    CHECK_THROWS(read_samples(truncated));
    std::istringstream wrong_magic("SMP2");
    CHECK_THROWS(read_samples(wrong_magic));
  }

  TEST_CASE("synthetic data is balanced, seeded and separable") {
    const auto a = make_synthetic({8, 512, 128, 0.1}, 1);
    const auto b = make_synthetic({8, 512, 128, 0.1}, 1);
    CHECK(a.train.features == b.train.features);
    CHECK(a.train.size() == 512);
    CHECK(a.test.size() == 128);
    std::array<std::size_t, 4> counts{};
    for (auto l : a.train.labels) ++counts[l];
    for (std::size_t c : counts) CHECK(c == 128);
    for (std::size_t c = 0; c < 4; ++c)
      for (std::size_t i = 0; i < 8; ++i)
        CHECK(a.patterns[c][i] == doctest::Approx(std::cos(3.141592653589793 * double((c + 1) * i) / 4.0)));
    CHECK(oracle::nearest_centroid_accuracy(a.train, a.test) >= 0.95);
    CHECK(a.test.trial.front() >= 512);
    const auto joined = concatenate(a.train, a.test);
    CHECK(joined.size() == 640);
    CHECK(joined.trial.size() == 640);
  }
}
