#include "lisa/icpca.hpp"

#include <random>

namespace lisa::icpca {

Eigen::MatrixXd covariance(const Matrix& samples, Vector* mean_out) {
    const Index n = samples.rows();
    if (n < 2) throw ArgumentError("covariance needs at least two samples");
    const Vector mean = samples.colwise().mean().transpose();
    const Eigen::MatrixXd centered = samples.rowwise() - mean.transpose();
    if (mean_out != nullptr) *mean_out = mean;
    return centered.transpose() * centered / static_cast<double>(n - 1);
}

PcaModel fit_pca(const Matrix& samples, Index r) {
    const Index d = samples.cols();
    if (r < 1 || r > d) throw ArgumentError("rank must lie in [1, D]");
    PcaModel m;
    const Eigen::MatrixXd cov = covariance(samples, &m.mean);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cov);
    if (es.info() != Eigen::Success) throw EigenSolverError("covariance eigendecomposition failed");
    const Vector vals = es.eigenvalues().reverse();
    const double top = std::max(vals[0], 0.0);
    const double tol = 1e-12 * std::max(top, 1e-300) * static_cast<double>(d);
    if (!(vals[r - 1] > tol)) {
        throw ArgumentError("requested rank " + std::to_string(r) + " exceeds the numerical rank of the data");
    }
    m.eigvals = vals.head(r);
    m.loading.resize(d, r);
    for (Index x = 0; x < r; ++x) {
        Vector v = es.eigenvectors().col(d - 1 - x);
        Index arg = 0;
        v.cwiseAbs().maxCoeff(&arg);
        if (v[arg] < 0.0) v = -v;
        m.loading.col(x) = v;
    }
    return m;
}

Eigen::MatrixXd oracle_adaptation(const Eigen::MatrixXd& sigma_q, const PcaModel& pca) {
    const Eigen::MatrixXd& v = pca.loading;
    if (sigma_q.rows() != v.rows() || sigma_q.cols() != v.rows()) {
        throw ArgumentError("covariance dimension does not match the PCA loading");
    }
    const Eigen::MatrixXd cross = sigma_q * v;            // D x r
    const Eigen::MatrixXd projected = v.transpose() * cross;  // r x r
    Eigen::LDLT<Eigen::MatrixXd> ldlt(projected);
    const double scale = projected.diagonal().cwiseAbs().maxCoeff();
    const double smallest = ldlt.vectorD().cwiseAbs().minCoeff();
    if (ldlt.info() != Eigen::Success || !(smallest > 1e-12 * scale) || !(scale > 0.0)) {
        throw ConditioningError("projected covariance V^T Sigma_Q V is singular");
    }
    // W = cross * projected^-1 = (projected^-1 * cross^T)^T for symmetric projected
    return ldlt.solve(cross.transpose()).transpose();
}

namespace {

Matrix draw(const Eigen::MatrixXd& chol_lower, Index n, std::mt19937_64& rng) {
    std::normal_distribution<double> normal(0.0, 1.0);
    const Index d = chol_lower.rows();
    Eigen::MatrixXd z(d, n);
    for (Index j = 0; j < n; ++j) {
        for (Index i = 0; i < d; ++i) z(i, j) = normal(rng);
    }
    return (chol_lower * z).transpose();
}

double recon_mse(const Matrix& q, const Eigen::MatrixXd& w, const Eigen::MatrixXd& v) {
    const Eigen::MatrixXd approx = q * v * w.transpose();
    return (Eigen::MatrixXd(q) - approx).rowwise().squaredNorm().mean();
}

}  // namespace

std::vector<DemoRow> adaptation_demo(Index dim, Index rank, const std::vector<Index>& lengths,
                                     Index train_samples, std::uint64_t seed) {
    if (rank < 1 || rank > dim) throw ArgumentError("rank must lie in [1, dim]");
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);

    Eigen::MatrixXd a(dim, dim), shift(dim, dim);
    for (Index i = 0; i < dim; ++i) {
        for (Index j = 0; j < dim; ++j) {
            a(i, j) = normal(rng);
            shift(i, j) = 0.5 * normal(rng);
        }
    }
    const Eigen::MatrixXd sigma_p = a * a.transpose() / static_cast<double>(dim) +
                                    0.1 * Eigen::MatrixXd::Identity(dim, dim);
    const Eigen::MatrixXd b = Eigen::MatrixXd::Identity(dim, dim) + shift;
    const Eigen::MatrixXd sigma_q = b * sigma_p * b.transpose();
    const Eigen::MatrixXd lp = sigma_p.llt().matrixL();
    const Eigen::MatrixXd lq = sigma_q.llt().matrixL();

    const PcaModel pca = fit_pca(draw(lp, train_samples, rng), rank);
    const Eigen::MatrixXd w_oracle = oracle_adaptation(sigma_q, pca);

    Index longest = 0;
    for (Index l : lengths) longest = std::max(longest, l);
    const Matrix stream = draw(lq, longest, rng);
    const Matrix held_out = draw(lq, 5000, rng);

    std::vector<DemoRow> rows;
    for (Index l : lengths) {
        if (l < 2) throw ArgumentError("context lengths must be at least 2");
        DemoRow row;
        row.context_length = l;
        const Eigen::MatrixXd est = covariance(stream.topRows(l));
        const Eigen::MatrixXd w_est = oracle_adaptation(est, pca);
        row.relative_map_error = (w_est - w_oracle).norm() / w_oracle.norm();
        row.estimated_recon_mse = recon_mse(held_out, w_est, pca.loading);
        row.oracle_recon_mse = recon_mse(held_out, w_oracle, pca.loading);
        row.unadapted_recon_mse = recon_mse(held_out, pca.loading, pca.loading);
        rows.push_back(row);
    }
    return rows;
}

}  // namespace lisa::icpca
