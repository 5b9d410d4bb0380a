#include "lisa/kernels.hpp"

#include <omp.h>

#include <algorithm>
#include <cmath>
#include <vector>

namespace lisa::kernels {

Matrix pairwise_sq_dists(const Matrix& X) {
    const Index k = X.rows();
    const Index n = X.cols();
    Matrix out(k, k);
    // Upper triangle only; rows near the top carry more work.
#pragma omp parallel for schedule(dynamic, 16)
    for (Index i = 0; i < k; ++i) {
        const double* xi = X.row(i).data();
        out(i, i) = 0.0;
        for (Index j = i + 1; j < k; ++j) out(i, j) = sq_dist(xi, X.row(j).data(), n);
    }
    for (Index i = 0; i < k; ++i) {
        for (Index j = 0; j < i; ++j) out(i, j) = out(j, i);
    }
    return out;
}

Matrix cross_sq_dists(const Matrix& A, const Matrix& B) {
    if (A.cols() != B.cols()) throw ArgumentError("cross_sq_dists: column mismatch");
    const Index m = A.rows(), k = B.rows(), n = A.cols();
    Matrix out(m, k);
#pragma omp parallel for schedule(static)
    for (Index i = 0; i < m; ++i) {
        const double* ai = A.row(i).data();
        for (Index j = 0; j < k; ++j) out(i, j) = sq_dist(ai, B.row(j).data(), n);
    }
    return out;
}

void sq_dists_to(const Matrix& X, std::span<const double> y, std::span<double> out) {
    const Index k = X.rows(), n = X.cols();
    if (static_cast<Index>(y.size()) != n || static_cast<Index>(out.size()) != k) {
        throw ArgumentError("sq_dists_to: shape mismatch");
    }
    for (Index j = 0; j < k; ++j) out[static_cast<std::size_t>(j)] = sq_dist(X.row(j).data(), y.data(), n);
}

Matrix gaussian_affinity(const Matrix& d2, double beta, double epsilon) {
    Matrix out(d2.rows(), d2.cols());
    const double scale = -beta / epsilon;
    const Index rows = d2.rows(), cols = d2.cols();
#pragma omp parallel for schedule(static)
    for (Index i = 0; i < rows; ++i) {
        for (Index j = 0; j < cols; ++j) out(i, j) = std::exp(scale * d2(i, j));
    }
    return out;
}

double median_offdiag(const Matrix& d2) {
    const Index k = d2.rows();
    if (k < 2) return 0.0;
    std::vector<double> v;
    v.reserve(static_cast<std::size_t>(k * (k - 1) / 2));
    for (Index i = 0; i < k; ++i) {
        for (Index j = i + 1; j < k; ++j) v.push_back(d2(i, j));
    }
    const std::size_t mid = v.size() / 2;
    std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid), v.end());
    double m = v[mid];
    if (v.size() % 2 == 0) {
        const double lo = *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid));
        m = 0.5 * (m + lo);
    }
    return m;
}

int max_threads() { return omp_get_max_threads(); }

namespace serial {

Matrix pairwise_sq_dists(const Matrix& X) {
    const Index k = X.rows(), n = X.cols();
    Matrix out(k, k);
    for (Index i = 0; i < k; ++i) {
        out(i, i) = 0.0;
        for (Index j = i + 1; j < k; ++j) {
            out(i, j) = sq_dist(X.row(i).data(), X.row(j).data(), n);
            out(j, i) = out(i, j);
        }
    }
    return out;
}

Matrix cross_sq_dists(const Matrix& A, const Matrix& B) {
    if (A.cols() != B.cols()) throw ArgumentError("cross_sq_dists: column mismatch");
    Matrix out(A.rows(), B.rows());
    for (Index i = 0; i < A.rows(); ++i) {
        for (Index j = 0; j < B.rows(); ++j) out(i, j) = sq_dist(A.row(i).data(), B.row(j).data(), A.cols());
    }
    return out;
}

Matrix gaussian_affinity(const Matrix& d2, double beta, double epsilon) {
    Matrix out(d2.rows(), d2.cols());
    const double scale = -beta / epsilon;
    for (Index i = 0; i < d2.rows(); ++i) {
        for (Index j = 0; j < d2.cols(); ++j) out(i, j) = std::exp(scale * d2(i, j));
    }
    return out;
}

}  // namespace serial
}  // namespace lisa::kernels
