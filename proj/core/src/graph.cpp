#include "agrn/graph.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include "agrn/byte_io.hpp"
#include "agrn/log.hpp"

namespace agrn {
namespace {

// Turns a centered covariance accumulation into |Pearson|, zeroing constant
// channels and the diagonal.
Matrix correlation_from_covariance(const Matrix& cov, const std::vector<bool>& constant) {
  const std::size_t n = cov.rows();
  Matrix adjacency(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      if (constant[i] || constant[j]) continue;
      double r = cov(i, j) / std::sqrt(cov(i, i) * cov(j, j));
      r = std::min(1.0, std::abs(r));
      adjacency(i, j) = r;
      adjacency(j, i) = r;
    }
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (constant[i]) warn("pearson_adjacency: channel " + std::to_string(i) +
                          " is constant; it becomes an isolated node");
  }
  return adjacency;
}

void require_valid_adjacency(const Matrix& adjacency, const char* who) {
  if (!adjacency.is_square()) {
    throw std::invalid_argument(std::string(who) + ": adjacency is not square");
  }
  if (const double a = asymmetry(adjacency); a > 1e-12) {
    throw std::invalid_argument(std::string(who) + ": adjacency is not symmetric (max |A-A^T| = " +
                                std::to_string(a) + ")");
  }
  for (std::size_t i = 0; i < adjacency.rows(); ++i) {
    for (std::size_t j = 0; j < adjacency.cols(); ++j) {
      const double w = adjacency(i, j);
      if (!(w >= 0.0) || !std::isfinite(w)) {
        throw std::invalid_argument(std::string(who) + ": adjacency entry (" + std::to_string(i) +
                                    "," + std::to_string(j) + ") is negative or not finite");
      }
    }
    if (adjacency(i, i) != 0.0) {
      throw std::invalid_argument(std::string(who) + ": adjacency diagonal must be zero");
    }
  }
}

}  // namespace

ElectrodeGraph ElectrodeGraph::from_adjacency(Matrix adjacency) {
  require_valid_adjacency(adjacency, "ElectrodeGraph");
  for (double w : adjacency.data()) {
    if (w > 1.0) throw std::invalid_argument("ElectrodeGraph: adjacency weights must lie in [0,1]");
  }
  ElectrodeGraph graph;
  graph.laplacian = normalized_laplacian(adjacency);
  graph.adjacency = std::move(adjacency);
  return graph;
}

Matrix pearson_adjacency(const Matrix& signals) {
  const std::size_t n = signals.rows();
  const std::size_t t = signals.cols();
  if (t < 2) throw std::invalid_argument("pearson_adjacency: need at least 2 time points");
  if (n < 2) throw std::invalid_argument("pearson_adjacency: need at least 2 channels");

  std::vector<double> mean(n, 0.0);
  std::vector<bool> constant(n, true);
  for (std::size_t c = 0; c < n; ++c) {
    const auto row = signals.row(c);
    for (double v : row) mean[c] += v;
    mean[c] /= static_cast<double>(t);
    constant[c] = std::all_of(row.begin(), row.end(), [&](double v) { return v == row[0]; });
  }
  Matrix cov(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i; j < n; ++j) {
      double acc = 0.0;
      const auto ri = signals.row(i);
      const auto rj = signals.row(j);
      for (std::size_t k = 0; k < t; ++k) acc += (ri[k] - mean[i]) * (rj[k] - mean[j]);
      cov(i, j) = acc;
      cov(j, i) = acc;
    }
  }
  return correlation_from_covariance(cov, constant);
}

Matrix pearson_adjacency(std::span<const float> samples, std::size_t n_channels,
                         std::span<const std::size_t> rows) {
  if (rows.size() < 2) throw std::invalid_argument("pearson_adjacency: need at least 2 time points");
  if (n_channels < 2) throw std::invalid_argument("pearson_adjacency: need at least 2 channels");
  const std::size_t n = n_channels;
  auto sample = [&](std::size_t r) {
    if ((r + 1) * n > samples.size()) {
      throw std::out_of_range("pearson_adjacency: row index " + std::to_string(r) + " out of range");
    }
    return samples.subspan(r * n, n);
  };

  std::vector<double> mean(n, 0.0);
  const auto first = sample(rows[0]);
  std::vector<bool> constant(n, true);
  for (std::size_t r : rows) {
    const auto s = sample(r);
    for (std::size_t c = 0; c < n; ++c) {
      mean[c] += s[c];
      if (s[c] != first[c]) constant[c] = false;
    }
  }
  for (double& m : mean) m /= static_cast<double>(rows.size());

  Matrix cov(n, n);
  std::vector<double> centered(n);
  for (std::size_t r : rows) {
    const auto s = sample(r);
    for (std::size_t c = 0; c < n; ++c) centered[c] = s[c] - mean[c];
    for (std::size_t i = 0; i < n; ++i) {
      const double ci = centered[i];
      for (std::size_t j = i; j < n; ++j) cov(i, j) += ci * centered[j];
    }
  }
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < i; ++j) cov(i, j) = cov(j, i);
  return correlation_from_covariance(cov, constant);
}

Matrix normalized_laplacian(const Matrix& adjacency) {
  require_valid_adjacency(adjacency, "normalized_laplacian");
  const std::size_t n = adjacency.rows();
  std::vector<double> inv_sqrt_degree(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    double degree = 0.0;
    for (double w : adjacency.row(i)) degree += w;
    if (degree > 0.0) inv_sqrt_degree[i] = 1.0 / std::sqrt(degree);
  }
  Matrix laplacian = Matrix::identity(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j) continue;
      laplacian(i, j) = -inv_sqrt_degree[i] * adjacency(i, j) * inv_sqrt_degree[j];
    }
  }
  // Symmetrize exactly; the two products above can differ in the last ulp.
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) laplacian(j, i) = laplacian(i, j);
  return laplacian;
}

double max_eigenvalue(const Matrix& matrix, double tol, int max_iterations) {
  if (!matrix.is_square() || matrix.rows() == 0) {
    throw std::invalid_argument("max_eigenvalue: matrix must be square and non-empty");
  }
  if (!is_symmetric(matrix, 1e-9)) throw std::invalid_argument("max_eigenvalue: matrix is not symmetric");
  if (!(tol > 0.0)) throw std::invalid_argument("max_eigenvalue: tol must be positive");
  const std::size_t n = matrix.rows();

  // Shift by the Gershgorin lower bound so the top eigenvalue dominates in
  // magnitude.
  double lower = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double radius = 0.0;
    for (std::size_t j = 0; j < n; ++j)
      if (j != i) radius += std::abs(matrix(i, j));
    lower = std::min(lower, matrix(i, i) - radius);
  }
  const double shift = -lower;

  // Deterministic, generic start vector (all-ones can be an eigenvector).
  std::vector<double> v(n), w(n);
  for (std::size_t i = 0; i < n; ++i) v[i] = 1.0 + 0.6180339887 * std::fmod(0.7548776662 * (i + 1), 1.0);
  auto normalize = [](std::vector<double>& x) {
    double norm = 0.0;
    for (double e : x) norm += e * e;
    norm = std::sqrt(norm);
    if (norm > 0.0)
      for (double& e : x) e /= norm;
    return norm;
  };
  normalize(v);

  for (int it = 0; it < max_iterations; ++it) {
    for (std::size_t i = 0; i < n; ++i) {
      double acc = shift * v[i];
      for (std::size_t j = 0; j < n; ++j) acc += matrix(i, j) * v[j];
      w[i] = acc;
    }
    double rayleigh = 0.0;
    for (std::size_t i = 0; i < n; ++i) rayleigh += v[i] * w[i];
    double residual = 0.0;
    for (std::size_t i = 0; i < n; ++i) residual += (w[i] - rayleigh * v[i]) * (w[i] - rayleigh * v[i]);
    residual = std::sqrt(residual);
    const double estimate = rayleigh - shift;
    if (residual <= tol * std::max(std::abs(estimate), 1.0)) return estimate;
    if (normalize(w) == 0.0) return -shift;
    v.swap(w);
  }
  warn("max_eigenvalue: power iteration did not converge; using the upper bound 2.0");
  return 2.0;
}

ScaledLaplacian scale_laplacian(const Matrix& laplacian, double lambda_max) {
  if (!(lambda_max > 0.0)) {
    throw std::invalid_argument("scale_laplacian: lambda_max must be positive, got " +
                                std::to_string(lambda_max));
  }
  if (!laplacian.is_square()) throw std::invalid_argument("scale_laplacian: matrix is not square");
  ScaledLaplacian out{Matrix(laplacian.rows(), laplacian.cols()), lambda_max};
  const double factor = 2.0 / lambda_max;
  for (std::size_t i = 0; i < laplacian.rows(); ++i)
    for (std::size_t j = 0; j < laplacian.cols(); ++j)
      out.matrix(i, j) = factor * laplacian(i, j) - (i == j ? 1.0 : 0.0);
  return out;
}

ScaledLaplacian scaled_laplacian(const Matrix& laplacian) {
  return scale_laplacian(laplacian, max_eigenvalue(laplacian, 1e-4));
}

void write_graph(std::ostream& out, const ElectrodeGraph& graph) {
  byte_io::put_magic(out, "EGR1");
  byte_io::put_u32(out, static_cast<std::uint32_t>(graph.n_nodes()));
  for (double w : graph.adjacency.data()) byte_io::put_f64(out, w);
  if (!out) throw std::runtime_error("write_graph: stream error");
}

ElectrodeGraph read_graph(std::istream& in) {
  byte_io::expect_magic(in, "EGR1");
  const std::uint32_t n = byte_io::get_u32(in, "EGR1 node count");
  if (n > 1u << 14) throw std::runtime_error("read_graph: implausible node count " + std::to_string(n));
  Matrix adjacency(n, n);
  for (double& w : adjacency.data()) w = byte_io::get_f64(in, "EGR1 adjacency");
  return ElectrodeGraph::from_adjacency(std::move(adjacency));
}

}  // namespace agrn
