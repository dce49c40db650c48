#include <sstream>
#include <string>

#include "agrn/graph.hpp"
#include "agrn/log.hpp"
#include "doctest.h"
#include "oracles.hpp"

using namespace agrn;

namespace {

struct CapturedWarnings {
  std::vector<std::string> messages;
  WarningSink previous;
  CapturedWarnings() {
    previous = set_warning_sink([this](std::string_view m) { messages.emplace_back(m); });
  }
  ~CapturedWarnings() { set_warning_sink(previous); }
};

Matrix random_signals(std::size_t channels, std::size_t times, std::mt19937_64& rng) {
  Matrix s(channels, times);
  std::normal_distribution<double> n(0.0, 1.0);
  for (double& v : s.data()) v = n(rng);
  // Correlate neighbouring channels so weights are not all near zero.
  for (std::size_t c = 1; c < channels; ++c)
    for (std::size_t t = 0; t < times; ++t) s(c, t) += 0.5 * s(c - 1, t);
  return s;
}

}  // namespace

TEST_SUITE("graph") {
  TEST_CASE("pearson adjacency equals |corr| from the definition") {
    std::mt19937_64 rng(3);
    const Matrix s = random_signals(6, 50, rng);
    const Matrix a = pearson_adjacency(s);
    for (std::size_t i = 0; i < 6; ++i) {
      CHECK(a(i, i) == 0.0);
      for (std::size_t j = 0; j < 6; ++j) {
        if (i == j) continue;
        CHECK(a(i, j) == doctest::Approx(std::abs(oracle::pearson(s.row(i), s.row(j)))).epsilon(1e-12));
        CHECK(a(i, j) == a(j, i));
      }
    }
  }

  TEST_CASE("time-major float rows give the same graph as the channel matrix") {
    std::mt19937_64 rng(5);
    const Matrix s = random_signals(5, 40, rng);
    std::vector<float> rows(40 * 5);
    for (std::size_t t = 0; t < 40; ++t)
      for (std::size_t c = 0; c < 5; ++c) rows[t * 5 + c] = static_cast<float>(s(c, t));
    std::vector<std::size_t> all(40);
    std::iota(all.begin(), all.end(), 0);
    const Matrix a = pearson_adjacency(rows, 5, all);
    const Matrix b = pearson_adjacency(s);
    for (std::size_t k = 0; k < a.data().size(); ++k) CHECK(a.data()[k] == doctest::Approx(b.data()[k]).epsilon(1e-5));

    // Only the listed rows contribute.
    std::vector<std::size_t> first(all.begin(), all.begin() + 20);
    Matrix head(5, 20);
    for (std::size_t c = 0; c < 5; ++c)
      for (std::size_t t = 0; t < 20; ++t) head(c, t) = rows[t * 5 + c];
    const Matrix partial = pearson_adjacency(rows, 5, first);
    const Matrix expected = pearson_adjacency(head);
    for (std::size_t k = 0; k < partial.data().size(); ++k)
      CHECK(partial.data()[k] == doctest::Approx(expected.data()[k]).epsilon(1e-12));
  }

  TEST_CASE("perfectly anti-correlated channels get weight 1") {
    Matrix s(2, 4, std::vector<double>{1, 2, 3, 4, -2, -4, -6, -8});
    CHECK(pearson_adjacency(s)(0, 1) == doctest::Approx(1.0).epsilon(1e-15));
  }

  TEST_CASE("constant channel becomes an isolated node with a warning") {
    CapturedWarnings warnings;
    Matrix s(3, 5, std::vector<double>{1, 2, 3, 4, 5, 7, 7, 7, 7, 7, 5, 3, 4, 1, 2});
    const Matrix a = pearson_adjacency(s);
    CHECK(a(1, 0) == 0.0);
    CHECK(a(1, 2) == 0.0);
    CHECK(a(0, 2) > 0.0);
    REQUIRE(warnings.messages.size() == 1);
    CHECK(warnings.messages[0].find("channel 1") != std::string::npos);

    const Matrix l = normalized_laplacian(a);
    CHECK(l(1, 1) == 1.0);
    CHECK(l(1, 0) == 0.0);
    CHECK(l(0, 1) == 0.0);
  }

  TEST_CASE("pearson adjacency rejects degenerate input") {
    CHECK_THROWS_AS(pearson_adjacency(Matrix(1, 10)), std::invalid_argument);
    CHECK_THROWS_AS(pearson_adjacency(Matrix(3, 1)), std::invalid_argument);
  }

  TEST_CASE("normalized Laplacian matches I - D^-1/2 A D^-1/2 and has spectrum in [0, 2]") {
    std::mt19937_64 rng(11);
    for (int trial = 0; trial < 10; ++trial) {
      const std::size_t n = 3 + trial;
      const Matrix a = oracle::random_adjacency(n, rng, 0.6);
      const Matrix l = normalized_laplacian(a);
      const Eigen::MatrixXd ea = oracle::to_eigen(a);
      Eigen::VectorXd dinv = ea.rowwise().sum();
      for (Eigen::Index i = 0; i < dinv.size(); ++i) dinv(i) = dinv(i) > 0 ? 1.0 / std::sqrt(dinv(i)) : 0.0;
      Eigen::MatrixXd expected = Eigen::MatrixXd::Identity(n, n) - dinv.asDiagonal() * ea * dinv.asDiagonal();
      CHECK((oracle::to_eigen(l) - expected).cwiseAbs().maxCoeff() < 1e-14);
      CHECK(asymmetry(l) == 0.0);
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(oracle::to_eigen(l));
      CHECK(solver.eigenvalues().minCoeff() > -1e-12);
      CHECK(solver.eigenvalues().maxCoeff() < 2.0 + 1e-12);
    }
  }

  TEST_CASE("complete graph has lambda_max n/(n-1)") {
    for (std::size_t n : {2u, 3u, 5u, 8u}) {
      Matrix a(n, n, 1.0);
      for (std::size_t i = 0; i < n; ++i) a(i, i) = 0.0;
      const double lambda = max_eigenvalue(normalized_laplacian(a), 1e-10);
      CHECK(lambda == doctest::Approx(double(n) / double(n - 1)).epsilon(1e-8));
    }
  }

  TEST_CASE("power iteration agrees with a dense eigensolver") {
    std::mt19937_64 rng(17);
    for (int trial = 0; trial < 25; ++trial) {
      const Matrix l = normalized_laplacian(oracle::random_adjacency(4 + trial % 9, rng, 0.7));
      const double expected = oracle::eigen_max_eigenvalue(l);
      CHECK(max_eigenvalue(l, 1e-4) == doctest::Approx(expected).epsilon(1e-3));
      CHECK(max_eigenvalue(l, 1e-12) == doctest::Approx(expected).epsilon(1e-9));
    }
  }

  TEST_CASE("power iteration falls back to 2 when it does not converge") {
    CapturedWarnings warnings;
    std::mt19937_64 rng(23);
    const Matrix l = normalized_laplacian(oracle::random_adjacency(10, rng, 0.5));
    CHECK(max_eigenvalue(l, 1e-15, 1) == 2.0);
    CHECK(warnings.messages.size() == 1);
  }

  TEST_CASE("max_eigenvalue validates its input") {
    CHECK_THROWS_AS(max_eigenvalue(Matrix(2, 3)), std::invalid_argument);
    CHECK_THROWS_AS(max_eigenvalue(Matrix(2, 2, std::vector<double>{0, 1, 0, 0})), std::invalid_argument);
    CHECK_THROWS_AS(max_eigenvalue(Matrix::identity(2), 0.0), std::invalid_argument);
  }

  TEST_CASE("scaled Laplacian is 2L/lambda - I with spectrum in [-1, 1]") {
    std::mt19937_64 rng(29);
    const Matrix l = normalized_laplacian(oracle::random_adjacency(7, rng));
    const double lambda = oracle::eigen_max_eigenvalue(l);
    const ScaledLaplacian s = scale_laplacian(l, lambda);
    CHECK(s.lambda_max == lambda);
    for (std::size_t i = 0; i < 7; ++i)
      for (std::size_t j = 0; j < 7; ++j)
        CHECK(s.matrix(i, j) == doctest::Approx(2.0 * l(i, j) / lambda - (i == j ? 1.0 : 0.0)).epsilon(1e-15));
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(oracle::to_eigen(s.matrix));
    CHECK(solver.eigenvalues().maxCoeff() == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(solver.eigenvalues().minCoeff() >= -1.0 - 1e-12);

    CHECK_THROWS_AS(scale_laplacian(l, 0.0), std::invalid_argument);
    CHECK_THROWS_AS(scale_laplacian(l, -1.0), std::invalid_argument);
  }

  TEST_CASE("ElectrodeGraph validates the adjacency") {
    CHECK_THROWS_AS(ElectrodeGraph::from_adjacency(Matrix(2, 2, std::vector<double>{0, 0.5, 0.4, 0})),
                    std::invalid_argument);
    CHECK_THROWS_AS(ElectrodeGraph::from_adjacency(Matrix(2, 2, std::vector<double>{0, -0.5, -0.5, 0})),
                    std::invalid_argument);
    CHECK_THROWS_AS(ElectrodeGraph::from_adjacency(Matrix(2, 2, std::vector<double>{1, 0.5, 0.5, 0})),
                    std::invalid_argument);
    CHECK_THROWS_AS(ElectrodeGraph::from_adjacency(Matrix(2, 2, std::vector<double>{0, 1.5, 1.5, 0})),
                    std::invalid_argument);
    CHECK_THROWS_AS(ElectrodeGraph::from_adjacency(Matrix(2, 3)), std::invalid_argument);
    const auto g = ElectrodeGraph::from_adjacency(Matrix(2, 2, std::vector<double>{0, 0.5, 0.5, 0}));
    CHECK(g.laplacian(0, 1) == doctest::Approx(-1.0));
  }

  TEST_CASE("EGR1 blob round-trips exactly") {
    std::mt19937_64 rng(31);
    const auto g = ElectrodeGraph::from_adjacency(oracle::random_adjacency(9, rng));
    std::stringstream buffer;
    write_graph(buffer, g);
    CHECK(buffer.str().size() == 4 + 4 + 9 * 9 * 8);
    CHECK(buffer.str().substr(0, 4) == "EGR1");
    const auto back = read_graph(buffer);
    CHECK(back.adjacency == g.adjacency);
    CHECK(back.laplacian == g.laplacian);

    std::stringstream bad("EGR2xxxx");
    CHECK_THROWS(read_graph(bad));
    std::stringstream truncated(buffer.str().substr(0, 40));
    CHECK_THROWS(read_graph(truncated));
  }
}
