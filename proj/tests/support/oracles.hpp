#pragma once

// Independent reference implementations used by the unit and acceptance
// tests. Nothing here calls the code under test except to build inputs.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <random>
#include <vector>

#include "agrn/dataset.hpp"
#include "agrn/matrix.hpp"
#include "agrn/ops.hpp"
#include "agrn/random.hpp"
#include "agrn/tensor.hpp"

namespace oracle {

using agrn::Matrix;
using agrn::Shape;
using agrn::Tensor;

inline Eigen::MatrixXd to_eigen(const Matrix& m) {
  Eigen::MatrixXd e(m.rows(), m.cols());
  for (std::size_t i = 0; i < m.rows(); ++i)
    for (std::size_t j = 0; j < m.cols(); ++j) e(i, j) = m(i, j);
  return e;
}

/// Symmetric, hollow, weights in [0, 1]; each pair is an edge with
/// probability `density`.
inline Matrix random_adjacency(std::size_t n, std::mt19937_64& rng, double density = 0.5) {
  Matrix a(n, n);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j)
      if (u(rng) < density) a(i, j) = a(j, i) = u(rng);
  return a;
}

inline double eigen_max_eigenvalue(const Matrix& m) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(to_eigen(m));
  return solver.eigenvalues().maxCoeff();
}

inline Tensor random_tensor(const Shape& shape, std::mt19937_64& rng, double scale = 1.0, bool grad = true) {
  std::normal_distribution<double> n(0.0, scale);
  std::vector<double> v(agrn::numel(shape));
  for (double& x : v) x = n(rng);
  return Tensor(shape, std::move(v), grad);
}

/// Graph filtering through the eigendecomposition of the scaled Laplacian:
/// y[b,:,o] = sum_i U diag(sum_k theta[k,i,o] T_k(lambda)) U^T x[b,:,i] + bias[o]
/// with T_k(lambda) = cos(k arccos lambda).
inline std::vector<double> spectral_filter(const Matrix& scaled, std::span<const double> theta, std::size_t k_order,
                                           std::size_t f_in, std::size_t f_out, std::span<const double> bias,
                                           std::span<const double> x, std::size_t batch) {
  const std::size_t n = scaled.rows();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(to_eigen(scaled));
  const Eigen::MatrixXd& u = solver.eigenvectors();
  const Eigen::VectorXd& lambda = solver.eigenvalues();
  std::vector<double> y(batch * n * f_out, 0.0);
  for (std::size_t i = 0; i < f_in; ++i) {
    for (std::size_t o = 0; o < f_out; ++o) {
      Eigen::VectorXd g(n);
      for (std::size_t e = 0; e < n; ++e) {
        const double t = std::acos(std::clamp(lambda(e), -1.0, 1.0));
        double s = 0.0;
        for (std::size_t k = 0; k < k_order; ++k) s += theta[(k * f_in + i) * f_out + o] * std::cos(double(k) * t);
        g(e) = s;
      }
      const Eigen::MatrixXd filter = u * g.asDiagonal() * u.transpose();
      for (std::size_t b = 0; b < batch; ++b) {
        Eigen::VectorXd xi(n);
        for (std::size_t v = 0; v < n; ++v) xi(v) = x[(b * n + v) * f_in + i];
        const Eigen::VectorXd yi = filter * xi;
        for (std::size_t v = 0; v < n; ++v) y[(b * n + v) * f_out + o] += yi(v);
      }
    }
  }
  for (std::size_t b = 0; b < batch; ++b)
    for (std::size_t v = 0; v < n; ++v)
      for (std::size_t o = 0; o < f_out; ++o) y[(b * n + v) * f_out + o] += bias[o];
  return y;
}

/// sum(y * W) for a fixed random W, turning any output into a scalar whose
/// gradient exercises every element.
inline Tensor project(const Tensor& y, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const Tensor w = random_tensor(y.shape(), rng, 1.0, false);
  return agrn::sum(agrn::mul(y, w));
}

/// Norm-wise relative error ||a - n|| / max(||a||, ||n||) between autodiff
/// and central-difference gradients, maximised over the inputs.
inline double gradient_error(const std::function<Tensor(const std::vector<Tensor>&)>& f, std::vector<Tensor> inputs,
                             double h = 1e-6) {
  for (auto& t : inputs) t.zero_grad();
  f(inputs).backward();
  double worst = 0.0;
  for (auto& t : inputs) {
    if (!t.requires_grad()) continue;
    std::vector<double> analytic(t.numel(), 0.0);
    if (!t.grad().empty()) std::copy(t.grad().begin(), t.grad().end(), analytic.begin());
    double diff = 0.0, na = 0.0, nn = 0.0;
    for (std::size_t k = 0; k < t.numel(); ++k) {
      auto v = t.mutable_values();
      const double saved = v[k];
      double plus, minus;
      {
        agrn::NoGradScope no_grad;
        v[k] = saved + h;
        plus = f(inputs).item();
        v[k] = saved - h;
        minus = f(inputs).item();
      }
      v[k] = saved;
      const double numeric = (plus - minus) / (2.0 * h);
      diff += std::pow(analytic[k] - numeric, 2);
      na += analytic[k] * analytic[k];
      nn += numeric * numeric;
    }
    const double scale = std::sqrt(std::max(na, nn));
    if (scale > 0.0) worst = std::max(worst, std::sqrt(diff) / scale);
  }
  return worst;
}

/// Greedy normalized-cut matching traced directly from its definition:
/// visit nodes in the seeded order, pair each unmatched node with the
/// unmatched neighbour of largest w_ij (1/d_i + 1/d_j), lowest index on ties.
inline std::vector<std::size_t> greedy_matching(const Matrix& a, std::uint64_t seed, std::size_t& clusters) {
  const std::size_t n = a.rows();
  std::vector<double> d(n, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) d[i] += a(i, j);
  std::mt19937_64 rng(seed);
  const auto order = agrn::shuffled_indices(n, rng);
  std::vector<long> parent(n, -1);
  clusters = 0;
  for (std::size_t i : order) {
    if (parent[i] >= 0) continue;
    std::vector<std::pair<double, std::size_t>> candidates;
    for (std::size_t j = 0; j < n; ++j)
      if (j != i && parent[j] < 0 && a(i, j) > 0.0) candidates.push_back({-a(i, j) * (1.0 / d[i] + 1.0 / d[j]), j});
    std::sort(candidates.begin(), candidates.end());
    parent[i] = static_cast<long>(clusters);
    if (!candidates.empty()) parent[candidates.front().second] = static_cast<long>(clusters);
    ++clusters;
  }
  return {parent.begin(), parent.end()};
}

/// Fraction of test rows nearest (Euclidean) to their own class mean.
inline double nearest_centroid_accuracy(const agrn::SampleSet& train, const agrn::SampleSet& test) {
  const std::size_t n = train.n_nodes;
  std::vector<Eigen::VectorXd> centroid(4, Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n)));
  std::vector<double> count(4, 0.0);
  for (std::size_t r = 0; r < train.size(); ++r) {
    for (std::size_t i = 0; i < n; ++i) centroid[train.labels[r]](static_cast<Eigen::Index>(i)) += train.features[r * n + i];
    count[train.labels[r]] += 1.0;
  }
  for (std::size_t c = 0; c < 4; ++c) centroid[c] /= std::max(count[c], 1.0);
  std::size_t correct = 0;
  for (std::size_t r = 0; r < test.size(); ++r) {
    Eigen::VectorXd x(static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < n; ++i) x(static_cast<Eigen::Index>(i)) = test.features[r * n + i];
    std::size_t best = 0;
    for (std::size_t c = 1; c < 4; ++c)
      if ((x - centroid[c]).squaredNorm() < (x - centroid[best]).squaredNorm()) best = c;
    correct += best == test.labels[r];
  }
  return static_cast<double>(correct) / static_cast<double>(test.size());
}

/// Textbook scalar Adam on f(w) = (w - target)^2.
inline std::vector<double> scalar_adam(double w, double target, double lr, int steps, double b1 = 0.9,
                                       double b2 = 0.999, double eps = 1e-8) {
  std::vector<double> trajectory;
  double m = 0.0, v = 0.0;
  for (int t = 1; t <= steps; ++t) {
    const double g = 2.0 * (w - target);
    m = b1 * m + (1.0 - b1) * g;
    v = b2 * v + (1.0 - b2) * g * g;
    const double mh = m / (1.0 - std::pow(b1, t));
    const double vh = v / (1.0 - std::pow(b2, t));
    w -= lr * mh / (std::sqrt(vh) + eps);
    trajectory.push_back(w);
  }
  return trajectory;
}

/// Pearson correlation of two series, straight from the definition in
/// long double.
inline double pearson(std::span<const double> x, std::span<const double> y) {
  long double mx = 0, my = 0;
  for (std::size_t i = 0; i < x.size(); ++i) mx += x[i], my += y[i];
  mx /= x.size();
  my /= y.size();
  long double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  return static_cast<double>(sxy / std::sqrt(sxx * syy));
}

}  // namespace oracle
