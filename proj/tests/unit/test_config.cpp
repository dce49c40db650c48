#include <filesystem>
#include <fstream>

#include "agrn/config.hpp"
#include "doctest.h"

using namespace agrn;

TEST_SUITE("config") {
  TEST_CASE("defaults describe the group-level setup") {
    const ExperimentConfig c;
    CHECK(c.model.n_conv_layers == 12);
    CHECK(c.model.cheb_order == 3);
    CHECK(c.train.adam.learning_rate == 0.001);
    CHECK(c.train.l2_lambda == 0.001);
    CHECK(c.train.batch_size == 1024);
    CHECK(c.folds == 10);
    CHECK(c.data.trials_per_label_per_run == 7);
  }

  TEST_CASE("formatted text parses back to the same configuration") {
    ExperimentConfig c;
    c.seed = 77;
    c.model.convs_per_block = 3;
    c.model.feature_widths = {8, 8, 16, 16};
    c.model.pooling = false;
    c.model.bn_eps = 1.0 / 3.0;
    c.train.adam.learning_rate = 0.1 + 0.2;
    c.train.precision = Precision::f32;
    c.data.subjects = {1, 2, 109};
    c.data.rules = {{{3, 7}, "T1", 3, "T2", 0}};
    c.data.zscore = true;
    const std::string text = format_config(c);
    const ExperimentConfig back = parse_config(text);
    CHECK(format_config(back) == text);
    CHECK(back.model.bn_eps == c.model.bn_eps);
    CHECK(back.train.adam.learning_rate == c.train.adam.learning_rate);
    CHECK(back.data.rules.front().runs == std::vector<std::uint32_t>{3, 7});
    CHECK(back.data.rules.front().first_label == 3);
    CHECK(back.train.precision == Precision::f32);
  }

  TEST_CASE("comments, blank lines and spacing are tolerated") {
    const auto c = parse_config("# experiment\n\n  seed =  5  # trailing\nmodel.cheb_order=4\n");
    CHECK(c.seed == 5);
    CHECK(c.model.cheb_order == 4);
  }

  TEST_CASE("bad keys and values are rejected with the key named") {
    CHECK_THROWS_WITH_AS(parse_config("model.depth = 3\n"), doctest::Contains("model.depth"), std::invalid_argument);
    CHECK_THROWS_WITH_AS(parse_config("train.epochs = many\n"), doctest::Contains("train.epochs"),
                         std::invalid_argument);
    CHECK_THROWS_AS(parse_config("seed\n"), std::invalid_argument);
    CHECK_THROWS_AS(parse_config("precision = f16\n"), std::invalid_argument);
    CHECK_THROWS_AS(parse_config("data.label_rules = 4:T1=Q:T2=R\n"), std::invalid_argument);
    CHECK_THROWS_AS(parse_config("train.batch_size = -3\n"), std::invalid_argument);
  }

  TEST_CASE("scope picks the learning rate unless one is given") {
    CHECK(parse_config("scope = subject\n").train.adam.learning_rate == 0.0001);
    CHECK(parse_config("scope = group\n").train.adam.learning_rate == 0.001);
    CHECK(parse_config("train.learning_rate = 0.05\nscope = subject\n").train.adam.learning_rate == 0.05);
    CHECK_THROWS_AS(parse_config("scope = cohort\n"), std::invalid_argument);
  }

  TEST_CASE("settings override a base configuration") {
    ExperimentConfig base;
    base.seed = 9;
    apply_setting(base, "train.epochs", "3");
    const auto c = parse_config("folds = 5\n", base);
    CHECK(c.seed == 9);
    CHECK(c.train.epochs == 3);
    CHECK(c.folds == 5);
  }

  TEST_CASE("load_config reads a file and names it in errors") {
    const auto path = std::filesystem::temp_directory_path() / "agrn_config_test.txt";
    {
      std::ofstream out(path);
      out << "seed = 12\nbogus = 1\n";
    }
    CHECK_THROWS_WITH_AS(load_config(path), doctest::Contains("agrn_config_test.txt"), std::invalid_argument);
    {
      std::ofstream out(path);
      out << "seed = 12\n";
    }
    CHECK(load_config(path).seed == 12);
    std::filesystem::remove(path);
    CHECK_THROWS(load_config(path));
  }

  TEST_CASE("precision names") {
    CHECK(parse_precision("f32") == Precision::f32);
    CHECK(precision_name(Precision::f64) == "f64");
  }
}
