#pragma once

#include <cstddef>
#include <iosfwd>
#include <span>

#include "agrn/matrix.hpp"

namespace agrn {

/// Dense weighted electrode graph. The adjacency is hollow, symmetric and
/// bounded to [0, 1]; the Laplacian is always derived from it.
struct ElectrodeGraph {
  Matrix adjacency;
  Matrix laplacian;

  std::size_t n_nodes() const { return adjacency.rows(); }

  /// Validates the adjacency and computes the normalized Laplacian.
  static ElectrodeGraph from_adjacency(Matrix adjacency);
};

/// 2L/lambda_max - I; the argument of the Chebyshev recursion.
struct ScaledLaplacian {
  Matrix matrix;
  double lambda_max = 2.0;
};

/// |Pearson correlation| between channel rows of a channels x time matrix.
/// Constant channels get weight 0 against every other channel (with a
/// warning). The diagonal is zero.
Matrix pearson_adjacency(const Matrix& signals);

/// Same as above but reads time-major rows (one row = one instant across
/// all channels) from a float buffer, restricted to `rows`. This is the
/// layout of SampleSet features and avoids a channels x time copy.
Matrix pearson_adjacency(std::span<const float> samples, std::size_t n_channels,
                         std::span<const std::size_t> rows);

/// L = I - D^{-1/2} A D^{-1/2}, with D^{-1/2}_ii = 0 for isolated nodes.
Matrix normalized_laplacian(const Matrix& adjacency);

/// Power-iteration estimate of the largest eigenvalue of a symmetric matrix.
/// Falls back to 2.0 (the normalized-Laplacian bound) with a warning if the
/// iteration does not converge within max_iterations.
double max_eigenvalue(const Matrix& matrix, double tol = 1e-4, int max_iterations = 20000);

ScaledLaplacian scale_laplacian(const Matrix& laplacian, double lambda_max);

/// scale_laplacian(L, max_eigenvalue(L, 1e-4)).
ScaledLaplacian scaled_laplacian(const Matrix& laplacian);

// EGR1 blob: "EGR1", u32 N, N*N f64 adjacency (all little endian).
void write_graph(std::ostream& out, const ElectrodeGraph& graph);
ElectrodeGraph read_graph(std::istream& in);

}  // namespace agrn
