#include "cli.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <optional>
#include <ostream>

#include "CLI11.hpp"
#include "agrn/experiment.hpp"

namespace agrn::cli {
namespace fs = std::filesystem;
namespace {

struct Globals {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string dataset_dir;
  std::string out_dir = ".";
  std::string precision;
  std::vector<std::string> settings;
};

ExperimentConfig resolve_config(const Globals& g) {
  ExperimentConfig c = g.config_path.empty() ? ExperimentConfig{} : load_config(g.config_path);
  for (const auto& s : g.settings) {
    const auto eq = s.find('=');
    if (eq == std::string::npos) throw std::invalid_argument("--set expects key=value, got '" + s + "'");
    apply_setting(c, s.substr(0, eq), s.substr(eq + 1));
  }
  if (g.seed) c.seed = *g.seed;
  if (!g.precision.empty()) c.train.precision = parse_precision(g.precision);
  return c;
}

SampleSet load_data(const Globals& g, const ExperimentConfig& c, const std::string& samples_path) {
  if (!samples_path.empty()) return load_samples(samples_path);
  if (!g.dataset_dir.empty()) return load_dataset(g.dataset_dir, c.data);
  throw std::invalid_argument("no input data: pass --samples FILE or --dataset-dir DIR");
}

fs::path out_path(const Globals& g, const std::string& name) {
  fs::create_directories(g.out_dir);
  return fs::path(g.out_dir) / name;
}

std::ofstream open_file(const fs::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  return out;
}

std::vector<std::size_t> all_rows(std::size_t n) {
  std::vector<std::size_t> rows(n);
  for (std::size_t i = 0; i < n; ++i) rows[i] = i;
  return rows;
}

// Fraction of test rows whose closest class mean (over training rows) is
// their own class.
double nearest_centroid_accuracy(const SampleSet& train, const SampleSet& test) {
  const std::size_t n = train.n_nodes;
  std::vector<std::vector<double>> centroid(kClassCount, std::vector<double>(n, 0.0));
  std::vector<std::size_t> count(kClassCount, 0);
  for (std::size_t r = 0; r < train.size(); ++r) {
    ++count[train.labels[r]];
    for (std::size_t i = 0; i < n; ++i) centroid[train.labels[r]][i] += train.features[r * n + i];
  }
  for (std::size_t c = 0; c < kClassCount; ++c)
    for (double& v : centroid[c]) v /= static_cast<double>(std::max<std::size_t>(count[c], 1));
  std::size_t correct = 0;
  for (std::size_t r = 0; r < test.size(); ++r) {
    std::size_t best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < kClassCount; ++c) {
      double d = 0.0;
      for (std::size_t i = 0; i < n; ++i) d += std::pow(test.features[r * n + i] - centroid[c][i], 2);
      if (d < best_d) best_d = d, best = c;
    }
    correct += best == test.labels[r];
  }
  return test.size() ? static_cast<double>(correct) / static_cast<double>(test.size()) : 0.0;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Attention-based graph ResNet for EEG motor-imagery classification", "agrn"};
  app.require_subcommand(1);
  app.fallthrough();

  Globals g;
  app.add_option("--config", g.config_path, "key = value experiment configuration file");
  app.add_option("--seed", g.seed, "Seed for splits, coarsening, initialisation and shuffling");
  app.add_option("--dataset-dir", g.dataset_dir, "Corpus root holding S001/S001R04.edf style files");
  app.add_option("--out-dir", g.out_dir, "Directory for all outputs")->capture_default_str();
  app.add_option("--precision", g.precision, "Arithmetic precision")->check(CLI::IsMember({"f32", "f64"}));
  app.add_option("--set", g.settings, "Override one configuration key (key=value); repeatable");

  std::string samples_path, graph_path, checkpoint_path, train_samples, test_samples;
  std::optional<std::size_t> levels, folds;
  SyntheticConfig synth;

  auto* build_graph = app.add_subcommand("build-graph", "Pearson adjacency and Laplacian of a sample set -> graph.egr");
  build_graph->add_option("--samples", samples_path, "SMP1 sample file (default: load --dataset-dir)");

  auto* coarsen = app.add_subcommand("coarsen", "Graclus hierarchy of a graph -> hierarchy.txt");
  coarsen->add_option("--graph", graph_path, "EGR1 graph (default: <out-dir>/graph.egr)");
  coarsen->add_option("--levels", levels, "Coarsening levels (default: pooling stages of the model)");

  auto* train_cmd = app.add_subcommand("train", "Train on a holdout split -> checkpoint.agrn, metrics.csv, reports");
  train_cmd->add_option("--samples", samples_path, "SMP1 sample file split 9:1 into train and test");
  train_cmd->add_option("--train-samples", train_samples, "SMP1 training rows (disables the random split)");
  train_cmd->add_option("--test-samples", test_samples, "SMP1 test rows used with --train-samples");

  auto* evaluate_cmd = app.add_subcommand("evaluate", "Score a checkpoint on a sample set -> report.txt, confusion.csv");
  evaluate_cmd->add_option("--checkpoint", checkpoint_path, "Checkpoint (default: <out-dir>/checkpoint.agrn)");
  evaluate_cmd->add_option("--samples", samples_path, "SMP1 sample file (default: load --dataset-dir)");

  auto* cv_cmd = app.add_subcommand("cross-validate", "k-fold cross-validation -> folds.csv, report.txt");
  cv_cmd->add_option("--samples", samples_path, "SMP1 sample file (default: load --dataset-dir)");
  cv_cmd->add_option("--folds", folds, "Number of folds (default: config folds)");

  auto* synth_cmd = app.add_subcommand("synth-data", "Separable synthetic set -> train.smp, test.smp");
  synth_cmd->add_option("--nodes", synth.n_nodes, "Graph nodes")->capture_default_str();
  synth_cmd->add_option("--train-count", synth.train_count, "Training rows")->capture_default_str();
  synth_cmd->add_option("--test-count", synth.test_count, "Test rows")->capture_default_str();
  synth_cmd->add_option("--noise", synth.noise, "Gaussian noise standard deviation")->capture_default_str();

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    const CLI::App* target = &app;
    for (const auto& a : args) {
      if (a.empty() || a[0] == '-') continue;
      try {
        target = app.get_subcommand(a);
      } catch (const CLI::OptionNotFound&) {
      }
      break;
    }
    out << target->help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n" << app.help();
    return 2;
  }

  try {
    ExperimentConfig config = resolve_config(g);

    if (build_graph->parsed()) {
      const SampleSet data = load_data(g, config, samples_path);
      const auto rows = all_rows(data.size());
      const ElectrodeGraph graph = graph_from_rows(data, rows);
      const auto path = out_path(g, "graph.egr");
      auto file = open_file(path);
      write_graph(file, graph);
      out << "wrote " << path.string() << " (" << graph.n_nodes() << " nodes, lambda_max "
          << max_eigenvalue(graph.laplacian) << ")\n";
    } else if (coarsen->parsed()) {
      const fs::path path = graph_path.empty() ? fs::path(g.out_dir) / "graph.egr" : fs::path(graph_path);
      std::ifstream in(path, std::ios::binary);
      if (!in) throw std::runtime_error("cannot open graph " + path.string());
      const ElectrodeGraph graph = read_graph(in);
      const std::size_t n = levels.value_or(pyramid_levels(config.model));
      const auto hierarchy = graclus_coarsen(graph, n, coarsening_seed(config.seed));
      const auto layout = build_permutation(hierarchy);
      const auto target = out_path(g, "hierarchy.txt");
      auto file = open_file(target);
      write_hierarchy(file, hierarchy, layout);
      out << "wrote " << target.string() << " (" << n << " levels, " << layout.padded_size(0)
          << " padded nodes)\n";
    } else if (train_cmd->parsed()) {
      SampleSet data;
      std::vector<std::size_t> train_rows, test_rows;
      if (!train_samples.empty()) {
        data = load_samples(train_samples);
        train_rows = all_rows(data.size());
        if (!test_samples.empty()) {
          data.append(load_samples(test_samples));
          for (std::size_t r = train_rows.size(); r < data.size(); ++r) test_rows.push_back(r);
        }
      } else {
        data = load_data(g, config, samples_path);
        const SplitPlan plan = plan_split(config, data, SplitMode::holdout);
        train_rows = plan.train_rows();
        test_rows = plan.test_rows();
      }
      auto metrics = open_file(out_path(g, "metrics.csv"));
      write_metrics_header(metrics);
      const RunOutcome run = run_experiment(config, data, train_rows, test_rows, config.seed,
                                            [&](const MetricsRow& row) { write_metrics_row(metrics, row); });
      ModelParams params = clone_params(run.training.params);
      save_checkpoint(out_path(g, "checkpoint.agrn"),
                      make_checkpoint(config, run.graph, coarsening_seed(config.seed), params));
      open_file(out_path(g, "config.txt")) << format_config(config);
      out << "trained " << run.training.steps << " steps on " << train_rows.size() << " rows";
      if (run.has_test) {
        write_report(g.out_dir, run.report, test_rows.size());
        out << ", test accuracy " << run.report.accuracy << ", macro-F1 " << run.report.macro_f1;
      }
      out << '\n';
      if (run.training.diverged) {
        err << "error: training diverged: " << run.training.message << " (last good parameters saved)\n";
        return 1;
      }
    } else if (evaluate_cmd->parsed()) {
      const fs::path path =
          checkpoint_path.empty() ? fs::path(g.out_dir) / "checkpoint.agrn" : fs::path(checkpoint_path);
      LoadedModel model = load_checkpoint(path);
      const SampleSet data = load_data(g, model.config, samples_path);
      const auto rows = all_rows(data.size());
      PrecisionScope precision(g.precision.empty() ? model.config.train.precision : config.train.precision);
      const Evaluation ev =
          evaluate(model.config.model, model.params, model.pyramid, data.view(), rows, model.config.train.batch_size);
      const std::vector<int> labels(data.labels.begin(), data.labels.end());
      const MetricsReport report = compute_metrics(ev.predictions, labels);
      write_report(g.out_dir, report, data.size());
      out << "accuracy " << report.accuracy << ", macro-F1 " << report.macro_f1 << " on " << data.size()
          << " samples\n";
    } else if (cv_cmd->parsed()) {
      if (folds) config.folds = *folds;
      const SampleSet data = load_data(g, config, samples_path);
      const CrossValidationResult cv = run_cross_validation(config, data, config.seed);
      write_cross_validation_report(g.out_dir, cv);
      out << cv.folds.size() << " folds, " << cv.n_failed << " failed";
      if (cv.n_failed < cv.folds.size()) {
        out << ", accuracy median " << cv.accuracy.median << " mean " << cv.accuracy.mean << " max " << cv.accuracy.max;
      }
      out << '\n';
      if (cv.n_failed > 0) {
        err << "error: " << cv.n_failed << " fold(s) failed; see folds.csv\n";
        return 1;
      }
    } else if (synth_cmd->parsed()) {
      const SyntheticData data = make_synthetic(synth, config.seed);
      save_samples(out_path(g, "train.smp"), data.train);
      save_samples(out_path(g, "test.smp"), data.test);
      out << "wrote " << data.train.size() << " train and " << data.test.size()
          << " test samples; nearest-centroid test accuracy " << nearest_centroid_accuracy(data.train, data.test)
          << '\n';
    }
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}

}  // namespace agrn::cli
