#pragma once

// Data-parallel inner kernels shared by the encoder, decoder and in-context
// layers. Each OpenMP kernel has a serial twin in lisa::kernels::serial that
// is kept as the reference implementation for tests and the benchmark.
//
// Every output entry is computed by the same scalar code path in both
// versions (no cross-thread reductions), so results are bit-identical
// regardless of the thread count.

#include "lisa/types.hpp"

#include <span>

namespace lisa::kernels {

/// Squared Euclidean distance, summed left to right.
inline double sq_dist(const double* a, const double* b, Index n) {
    double s = 0.0;
    for (Index i = 0; i < n; ++i) {
        const double d = a[i] - b[i];
        s += d * d;
    }
    return s;
}

/// K x K matrix of squared distances between the rows of X.
Matrix pairwise_sq_dists(const Matrix& X);
/// M x K matrix of squared distances between rows of A and rows of B.
Matrix cross_sq_dists(const Matrix& A, const Matrix& B);
/// Squared distances from y to every row of X.
void sq_dists_to(const Matrix& X, std::span<const double> y, std::span<double> out);

/// exp(-beta * D / epsilon) elementwise.
Matrix gaussian_affinity(const Matrix& sq_dists, double beta, double epsilon);

/// Median of the strictly upper-triangular entries of a symmetric matrix.
double median_offdiag(const Matrix& sq_dists);

namespace serial {
Matrix pairwise_sq_dists(const Matrix& X);
Matrix cross_sq_dists(const Matrix& A, const Matrix& B);
Matrix gaussian_affinity(const Matrix& sq_dists, double beta, double epsilon);
}  // namespace serial

/// Threads OpenMP will use for the parallel kernels.
int max_threads();

}  // namespace lisa::kernels
