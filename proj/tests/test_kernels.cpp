#include "lisa/kernels.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstring>

using namespace lisa;

namespace {

bool bit_equal(const Matrix& a, const Matrix& b) {
    return a.rows() == b.rows() && a.cols() == b.cols() &&
           std::memcmp(a.data(), b.data(), sizeof(double) * static_cast<std::size_t>(a.size())) == 0;
}

}  // namespace

TEST_SUITE("kernels") {

TEST_CASE("pairwise distances match a direct double loop") {
    std::srand(10);
    const Matrix x = Matrix::Random(23, 4);
    const Matrix d = kernels::pairwise_sq_dists(x);
    for (Index i = 0; i < x.rows(); ++i) {
        for (Index j = 0; j < x.rows(); ++j) {
            double s = 0.0;
            for (Index c = 0; c < x.cols(); ++c) s += (x(i, c) - x(j, c)) * (x(i, c) - x(j, c));
            CHECK(d(i, j) == doctest::Approx(s).epsilon(1e-14));
        }
        CHECK(d(i, i) == 0.0);
    }
    CHECK(d == d.transpose());
}

TEST_CASE("cross distances and distances to a point") {
    std::srand(11);
    const Matrix a = Matrix::Random(7, 3), b = Matrix::Random(9, 3);
    const Matrix d = kernels::cross_sq_dists(a, b);
    REQUIRE(d.rows() == 7);
    REQUIRE(d.cols() == 9);
    std::vector<double> out(9);
    kernels::sq_dists_to(b, std::span<const double>(a.row(2).data(), 3), out);
    for (Index i = 0; i < 7; ++i) {
        for (Index j = 0; j < 9; ++j) CHECK(d(i, j) == doctest::Approx((a.row(i) - b.row(j)).squaredNorm()));
    }
    for (Index j = 0; j < 9; ++j) CHECK(out[static_cast<std::size_t>(j)] == d(2, j));
}

TEST_CASE("parallel kernels are bit-identical to the serial reference") {
    std::srand(12);
    const Matrix x = Matrix::Random(301, 17), y = Matrix::Random(57, 17);
    CHECK(bit_equal(kernels::pairwise_sq_dists(x), kernels::serial::pairwise_sq_dists(x)));
    CHECK(bit_equal(kernels::cross_sq_dists(y, x), kernels::serial::cross_sq_dists(y, x)));
    const Matrix d = kernels::pairwise_sq_dists(x);
    CHECK(bit_equal(kernels::gaussian_affinity(d, 0.7, 2.5), kernels::serial::gaussian_affinity(d, 0.7, 2.5)));
}

TEST_CASE("gaussian affinity") {
    Matrix d(1, 3);
    d << 0.0, 1.0, 2.0;
    const Matrix k = kernels::gaussian_affinity(d, 2.0, 4.0);
    CHECK(k(0, 0) == 1.0);
    CHECK(k(0, 1) == doctest::Approx(std::exp(-0.5)));
    CHECK(k(0, 2) == doctest::Approx(std::exp(-1.0)));
}

TEST_CASE("median of the off-diagonal entries") {
    std::srand(13);
    for (Index n : {2, 3, 8, 9}) {
        const Matrix d = kernels::pairwise_sq_dists(Matrix::Random(n, 2));
        std::vector<double> v;
        for (Index i = 0; i < n; ++i) {
            for (Index j = i + 1; j < n; ++j) v.push_back(d(i, j));
        }
        std::sort(v.begin(), v.end());
        const std::size_t m = v.size();
        const double expect = m % 2 == 1 ? v[m / 2] : 0.5 * (v[m / 2 - 1] + v[m / 2]);
        CHECK(kernels::median_offdiag(d) == doctest::Approx(expect));
    }
}

}  // TEST_SUITE
