#include "lisa/icpca.hpp"

#include "oracles.hpp"

#include <doctest.h>

#include <Eigen/Cholesky>
#include <Eigen/QR>

#include <cmath>
#include <random>

using namespace lisa;
using namespace lisa::icpca;

namespace {

Eigen::MatrixXd random_spd(Index d, std::mt19937_64& rng) {
    const Eigen::MatrixXd a = oracle::gaussian(d, d, rng);
    return a * a.transpose() / static_cast<double>(d) + 0.2 * Eigen::MatrixXd::Identity(d, d);
}

Matrix draw(const Eigen::MatrixXd& sigma, Index n, std::mt19937_64& rng) {
    const Eigen::MatrixXd l = sigma.llt().matrixL();
    return oracle::gaussian(n, sigma.rows(), rng) * l.transpose();
}

// E |q - W V^T q|^2 for q ~ N(0, sigma).
double expected_residual(const Eigen::MatrixXd& sigma, const Eigen::MatrixXd& w, const Eigen::MatrixXd& v) {
    const Eigen::MatrixXd m = Eigen::MatrixXd::Identity(sigma.rows(), sigma.rows()) - w * v.transpose();
    return (m * sigma * m.transpose()).trace();
}

double sample_residual(const Matrix& q, const Eigen::MatrixXd& w, const Eigen::MatrixXd& v) {
    return (Eigen::MatrixXd(q) - q * v * w.transpose()).rowwise().squaredNorm().mean();
}

}  // namespace

TEST_SUITE("icpca") {

TEST_CASE("covariance of three hand points") {
    Matrix x(3, 2);
    x << 1, 2, 3, 4, 5, 9;
    Vector mean;
    const Eigen::MatrixXd c = covariance(x, &mean);
    CHECK(mean[0] == doctest::Approx(3.0));
    CHECK(mean[1] == doctest::Approx(5.0));
    // Deviations (-2,-3), (0,-1), (2,4), divided by N-1 = 2.
    CHECK(c(0, 0) == doctest::Approx(4.0));
    CHECK(c(0, 1) == doctest::Approx(7.0));
    CHECK(c(1, 0) == doctest::Approx(7.0));
    CHECK(c(1, 1) == doctest::Approx(13.0));
    CHECK_THROWS_AS(covariance(x.topRows(1)), ArgumentError);
}

TEST_CASE("rank-one data") {
    Matrix x(50, 3);
    for (Index i = 0; i < 50; ++i) x.row(i) << i, -2.0 * i, 0.5 * i;
    const PcaModel m = fit_pca(x, 1);
    CHECK(m.loading.col(0).norm() == doctest::Approx(1.0));
    CHECK(std::abs(m.loading(1, 0)) == doctest::Approx(2.0 / std::sqrt(5.25)));
    CHECK(m.loading(1, 0) > 0.0);
    CHECK_THROWS_AS(fit_pca(x, 2), ArgumentError);
    CHECK_THROWS_AS(fit_pca(x, 4), ArgumentError);
}

TEST_CASE("isotropic data has a narrow spectrum") {
    std::mt19937_64 rng(50);
    const Index n = 20000;
    const PcaModel m = fit_pca(oracle::gaussian(n, 4, rng), 4);
    CHECK(m.eigvals[0] - m.eigvals[3] <= 5.0 / std::sqrt(static_cast<double>(n)));
    for (Index i = 0; i + 1 < 4; ++i) CHECK(m.eigvals[i] >= m.eigvals[i + 1]);
    CHECK((m.loading.transpose() * m.loading - Eigen::MatrixXd::Identity(4, 4)).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("no shift with full rank gives W = V") {
    std::mt19937_64 rng(51);
    const Eigen::MatrixXd sigma = random_spd(5, rng);
    const PcaModel m = fit_pca(draw(sigma, 2000, rng), 5);
    const Eigen::MatrixXd sample_cov = covariance(draw(sigma, 500, rng));
    const Eigen::MatrixXd w_full = oracle_adaptation(sample_cov, m);
    CHECK((w_full - m.loading).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("no shift, reduced rank: V^T W = I") {
    std::mt19937_64 rng(52);
    const Eigen::MatrixXd sigma = random_spd(6, rng);
    const PcaModel m = fit_pca(draw(sigma, 3000, rng), 3);
    const Eigen::MatrixXd w = oracle_adaptation(sigma, m);
    CHECK((m.loading.transpose() * w - Eigen::MatrixXd::Identity(3, 3)).cwiseAbs().maxCoeff() < 1e-10);
    // Scale invariance.
    CHECK((oracle_adaptation(7.5 * sigma, m) - w).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("W agrees with a least-squares fit on 1e5 samples") {
    std::mt19937_64 rng(53);
    const Eigen::MatrixXd sigma_p = random_spd(4, rng), sigma_q = random_spd(4, rng);
    const PcaModel m = fit_pca(draw(sigma_p, 5000, rng), 2);
    const Eigen::MatrixXd w = oracle_adaptation(sigma_q, m);
    const Matrix q = draw(sigma_q, 100000, rng);
    const Eigen::MatrixXd latents = q * m.loading;  // N x r
    // Solve min |latents W^T - q|.
    const Eigen::MatrixXd wt = latents.colPivHouseholderQr().solve(Eigen::MatrixXd(q));
    const Eigen::MatrixXd w_fit = wt.transpose();
    const double risk = expected_residual(sigma_q, w, m.loading);
    const double risk_fit = expected_residual(sigma_q, w_fit, m.loading);
    CHECK(risk <= risk_fit);
    CHECK(risk_fit <= 1.01 * risk);
    CHECK((w_fit - w).norm() / w.norm() < 0.05);
}

TEST_CASE("perturbing W never lowers the reconstruction error") {
    std::mt19937_64 rng(54);
    const Eigen::MatrixXd sigma_p = random_spd(5, rng), sigma_q = random_spd(5, rng);
    const PcaModel m = fit_pca(draw(sigma_p, 4000, rng), 2);
    const Eigen::MatrixXd w = oracle_adaptation(sigma_q, m);
    const double best = expected_residual(sigma_q, w, m.loading);
    const Matrix q = draw(sigma_q, 100000, rng);
    const double best_sample = sample_residual(q, w, m.loading);
    for (int trial = 0; trial < 20; ++trial) {
        Eigen::MatrixXd dw = oracle::gaussian(5, 2, rng);
        dw *= 0.1 / dw.norm();
        CHECK(expected_residual(sigma_q, w + dw, m.loading) >= best);
        CHECK(sample_residual(q, w + dw, m.loading) >= best_sample);
    }
}

TEST_CASE("singular projected covariance") {
    Matrix x(4, 2);
    x << 1, 0, -1, 0, 0, 1, 0, -1;
    const PcaModel m = fit_pca(x, 1);
    // All Q-variance orthogonal to the loading.
    const Eigen::Vector2d v = m.loading.col(0);
    const Eigen::Vector2d u(-v[1], v[0]);
    CHECK_THROWS_AS(oracle_adaptation(u * u.transpose(), m), ConditioningError);
    CHECK_THROWS_AS(oracle_adaptation(Eigen::MatrixXd::Identity(3, 3), m), ArgumentError);
}

TEST_CASE("adaptation demo converges") {
    const auto rows = adaptation_demo(8, 3, {10, 100, 1000, 10000}, 5000, 5);
    REQUIRE(rows.size() == 4);
    CHECK(rows[3].relative_map_error < rows[0].relative_map_error);
    CHECK(rows[3].relative_map_error < 0.1);
    CHECK(rows[3].estimated_recon_mse <= 1.05 * rows[3].oracle_recon_mse);
    CHECK(rows[0].oracle_recon_mse <= rows[0].unadapted_recon_mse);
    CHECK(adaptation_demo(8, 3, {10, 100, 1000, 10000}, 5000, 5)[2].relative_map_error == rows[2].relative_map_error);
}

}  // TEST_SUITE
