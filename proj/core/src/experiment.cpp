#include "agrn/experiment.hpp"

#include <cstdio>
#include <fstream>
#include <stdexcept>

#include "agrn/random.hpp"
#include "json.hpp"

namespace agrn {
namespace {

std::string num(double v) {
  char buffer[32];
  std::snprintf(buffer, sizeof buffer, "%.17g", v);
  return buffer;
}

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  return out;
}

void write_confusion_csv(const std::filesystem::path& path, const ConfusionMatrix& m) {
  auto out = open_out(path);
  out << "true\\predicted";
  for (const char* name : kClassNames) out << ',' << name;
  out << '\n';
  for (std::size_t t = 0; t < kClassCount; ++t) {
    out << kClassNames[t];
    for (std::size_t p = 0; p < kClassCount; ++p) out << ',' << m.counts[t][p];
    out << '\n';
  }
}

void write_confusion_text(std::ostream& out, const ConfusionMatrix& m) {
  out << "confusion (rows = true class, columns = predicted)\n";
  char line[128];
  std::snprintf(line, sizeof line, "%4s %10s %10s %10s %10s\n", "", "L", "R", "B", "F");
  out << line;
  for (std::size_t t = 0; t < kClassCount; ++t) {
    std::snprintf(line, sizeof line, "%4s %10llu %10llu %10llu %10llu\n", kClassNames[t],
                  static_cast<unsigned long long>(m.counts[t][0]), static_cast<unsigned long long>(m.counts[t][1]),
                  static_cast<unsigned long long>(m.counts[t][2]), static_cast<unsigned long long>(m.counts[t][3]));
    out << line;
  }
}

nlohmann::ordered_json report_json(const MetricsReport& r) {
  nlohmann::ordered_json j;
  j["accuracy"] = r.accuracy;
  j["macro_f1"] = r.macro_f1;
  for (std::size_t c = 0; c < kClassCount; ++c) {
    j["per_class"][kClassNames[c]] = {{"recall", r.per_class_accuracy[c]}, {"f1", r.per_class_f1[c]}};
  }
  j["confusion"] = r.confusion.counts;
  return j;
}

nlohmann::ordered_json stats_json(const SummaryStats& s) {
  return {{"median", s.median}, {"mean", s.mean}, {"max", s.max}, {"min", s.min}};
}

// Exact for any 64-bit value: four 16-bit limbs, each representable as f64.
std::vector<double> seed_limbs(std::uint64_t seed) {
  return {double(seed & 0xFFFF), double((seed >> 16) & 0xFFFF), double((seed >> 32) & 0xFFFF),
          double(seed >> 48)};
}

std::uint64_t seed_from_limbs(const std::vector<double>& limbs) {
  std::uint64_t seed = 0;
  for (std::size_t i = 0; i < 4; ++i) seed |= static_cast<std::uint64_t>(limbs[i]) << (16 * i);
  return seed;
}

}  // namespace

std::uint64_t coarsening_seed(std::uint64_t seed) { return mix_seed(seed, 0xC0A25E); }

std::size_t pyramid_levels(const ModelConfig& model) { return model.pooling ? model.n_pool_stages() : 0; }

ElectrodeGraph graph_from_rows(const SampleSet& samples, std::span<const std::size_t> rows) {
  return ElectrodeGraph::from_adjacency(pearson_adjacency(samples.features, samples.n_nodes, rows));
}

RunOutcome run_experiment(const ExperimentConfig& config, const SampleSet& samples,
                          std::span<const std::size_t> train_rows, std::span<const std::size_t> test_rows,
                          std::uint64_t seed, const MetricsCallback& on_metrics) {
  config.model.validate();
  if (train_rows.empty()) throw std::invalid_argument("run_experiment: no training rows");
  RunOutcome out;
  out.graph = graph_from_rows(samples, train_rows);
  out.pyramid = GraphPyramid::build(out.graph, pyramid_levels(config.model), coarsening_seed(seed));
  out.training = train(config.model, config.train, out.pyramid, samples.view(), train_rows, test_rows, seed, on_metrics);
  if (!test_rows.empty()) {
    PrecisionScope precision(config.train.precision);
    out.evaluation = evaluate(config.model, out.training.params, out.pyramid, samples.view(), test_rows,
                              config.train.batch_size);
    std::vector<int> labels;
    labels.reserve(test_rows.size());
    for (std::size_t r : test_rows) labels.push_back(samples.labels[r]);
    out.report = compute_metrics(out.evaluation.predictions, labels);
    out.has_test = true;
  }
  return out;
}

SplitPlan plan_split(const ExperimentConfig& config, const SampleSet& samples, SplitMode mode,
                     std::size_t shard_count) {
  if (!config.data.per_trial_split) return make_split(samples.size(), config.seed, mode, shard_count);
  if (samples.trial.size() != samples.size()) {
    throw std::invalid_argument("per-trial split needs trial provenance, which this sample set lacks");
  }
  return make_trial_split(samples.trial, config.seed, mode, shard_count);
}

CrossValidationResult run_cross_validation(const ExperimentConfig& config, const SampleSet& samples,
                                           std::uint64_t seed) {
  if (config.folds < 2) throw std::invalid_argument("run_cross_validation: need at least 2 folds");
  ExperimentConfig seeded = config;
  seeded.seed = seed;
  const SplitPlan plan = plan_split(seeded, samples, SplitMode::kfold, config.folds);
  CrossValidationResult cv;
  std::vector<double> accuracies, f1s;
  for (std::size_t f = 0; f < plan.n_folds(); ++f) {
    FoldResult fold;
    fold.fold = f;
    const auto train_rows = plan.train_rows(f);
    const auto& test_rows = plan.test_rows(f);
    fold.train_size = train_rows.size();
    fold.test_size = test_rows.size();
    try {
      const RunOutcome run = run_experiment(config, samples, train_rows, test_rows, mix_seed(seed, f + 1));
      fold.steps = run.training.steps;
      fold.report = run.report;
      if (run.training.diverged) {
        fold.failed = true;
        fold.message = run.training.message;
      }
    } catch (const std::exception& e) {
      fold.failed = true;
      fold.message = e.what();
    }
    if (fold.failed) {
      ++cv.n_failed;
    } else {
      accuracies.push_back(fold.report.accuracy);
      f1s.push_back(fold.report.macro_f1);
      for (std::size_t t = 0; t < kClassCount; ++t)
        for (std::size_t p = 0; p < kClassCount; ++p) cv.confusion.counts[t][p] += fold.report.confusion.counts[t][p];
    }
    cv.folds.push_back(std::move(fold));
  }
  if (!accuracies.empty()) {
    cv.accuracy = summarize(accuracies);
    cv.macro_f1 = summarize(f1s);
  }
  return cv;
}

std::vector<NamedTensor> make_checkpoint(const ExperimentConfig& config, const ElectrodeGraph& graph,
                                         std::uint64_t coarsen_seed, ModelParams& params) {
  std::vector<NamedTensor> archive = snapshot(params);
  const std::size_t n = graph.n_nodes();
  const auto a = graph.adjacency.data();
  archive.push_back({"graph.adjacency", {n, n}, {a.begin(), a.end()}});
  archive.push_back({"meta.coarsen_seed", {4}, seed_limbs(coarsen_seed)});
  const std::string text = format_config(config);
  archive.push_back({"meta.config", {text.size()}, {text.begin(), text.end()}});
  return archive;
}

void save_checkpoint(const std::filesystem::path& path, std::span<const NamedTensor> archive) {
  auto out = open_out(path);
  write_archive(out, archive);
}

LoadedModel load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open checkpoint " + path.string());
  const auto archive = read_archive(in);
  auto require = [&](const char* name) -> const NamedTensor& {
    const NamedTensor* t = find_tensor(archive, name);
    if (!t) throw std::runtime_error(path.string() + ": checkpoint lacks '" + name + "'");
    return *t;
  };
  LoadedModel m;
  const auto& text = require("meta.config");
  std::string config_text;
  for (double c : text.values) config_text.push_back(static_cast<char>(c));
  m.config = parse_config(config_text);
  const auto& adjacency = require("graph.adjacency");
  if (adjacency.shape.size() != 2 || adjacency.shape[0] != adjacency.shape[1]) {
    throw std::runtime_error(path.string() + ": graph.adjacency is not square");
  }
  Matrix a(adjacency.shape[0], adjacency.shape[1]);
  std::copy(adjacency.values.begin(), adjacency.values.end(), a.data().begin());
  m.graph = ElectrodeGraph::from_adjacency(std::move(a));
  const auto& seed = require("meta.coarsen_seed");
  if (seed.values.size() != 4) throw std::runtime_error(path.string() + ": malformed meta.coarsen_seed");
  m.pyramid = GraphPyramid::build(m.graph, pyramid_levels(m.config.model), seed_from_limbs(seed.values));
  m.params = init_params(m.config.model, m.pyramid, 0);
  restore(archive, m.params);
  return m;
}

void write_report(const std::filesystem::path& dir, const MetricsReport& report, std::size_t samples) {
  std::filesystem::create_directories(dir);
  {
    auto out = open_out(dir / "report.txt");
    out << "samples " << samples << '\n'
        << "accuracy " << num(report.accuracy) << '\n'
        << "macro_f1 " << num(report.macro_f1) << '\n';
    for (std::size_t c = 0; c < kClassCount; ++c) {
      out << "class " << kClassNames[c] << " recall " << num(report.per_class_accuracy[c]) << " f1 "
          << num(report.per_class_f1[c]) << '\n';
    }
    write_confusion_text(out, report.confusion);
  }
  write_confusion_csv(dir / "confusion.csv", report.confusion);
  auto j = report_json(report);
  j["samples"] = samples;
  open_out(dir / "report.json") << j.dump(2) << '\n';
}

void write_cross_validation_report(const std::filesystem::path& dir, const CrossValidationResult& cv) {
  std::filesystem::create_directories(dir);
  {
    auto out = open_out(dir / "folds.csv");
    out << "fold,status,train_size,test_size,steps,accuracy,macro_f1,recall_L,recall_R,recall_B,recall_F,message\n";
    for (const auto& f : cv.folds) {
      out << f.fold << ',' << (f.failed ? "failed" : "ok") << ',' << f.train_size << ',' << f.test_size << ','
          << f.steps << ',' << num(f.report.accuracy) << ',' << num(f.report.macro_f1);
      for (double r : f.report.per_class_accuracy) out << ',' << num(r);
      std::string message = f.message;
      for (char& ch : message)
        if (ch == ',' || ch == '\n') ch = ' ';
      out << ',' << message << '\n';
    }
  }
  {
    auto out = open_out(dir / "report.txt");
    out << "folds " << cv.folds.size() << '\n' << "failed " << cv.n_failed << '\n';
    for (const auto& f : cv.folds) {
      out << "fold " << f.fold << ' ';
      if (f.failed) out << "FAILED " << f.message << '\n';
      else out << "accuracy " << num(f.report.accuracy) << " macro_f1 " << num(f.report.macro_f1) << '\n';
    }
    if (cv.n_failed < cv.folds.size()) {
      out << "accuracy median " << num(cv.accuracy.median) << " mean " << num(cv.accuracy.mean) << " max "
          << num(cv.accuracy.max) << " min " << num(cv.accuracy.min) << '\n'
          << "macro_f1 median " << num(cv.macro_f1.median) << " mean " << num(cv.macro_f1.mean) << " max "
          << num(cv.macro_f1.max) << " min " << num(cv.macro_f1.min) << '\n';
    }
    write_confusion_text(out, cv.confusion);
  }
  write_confusion_csv(dir / "confusion.csv", cv.confusion);
  nlohmann::ordered_json j;
  j["folds"] = nlohmann::ordered_json::array();
  for (const auto& f : cv.folds) {
    auto entry = report_json(f.report);
    entry["fold"] = f.fold;
    entry["failed"] = f.failed;
    entry["message"] = f.message;
    entry["train_size"] = f.train_size;
    entry["test_size"] = f.test_size;
    entry["steps"] = f.steps;
    j["folds"].push_back(std::move(entry));
  }
  j["n_failed"] = cv.n_failed;
  if (cv.n_failed < cv.folds.size()) {
    j["accuracy"] = stats_json(cv.accuracy);
    j["macro_f1"] = stats_json(cv.macro_f1);
  }
  j["confusion"] = cv.confusion.counts;
  open_out(dir / "report.json") << j.dump(2) << '\n';
}

}  // namespace agrn
