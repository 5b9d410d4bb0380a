#include "lisa/spectral.hpp"

#include "lisa/kernels.hpp"

#include <lapacke.h>

#include <cmath>
#include <exception>
#include <sstream>

namespace lisa::spectral {

void KernelParams::validate(bool allow_auto_epsilon) const {
    if (!(beta > 0.0) || !std::isfinite(beta)) throw ArgumentError("kernel beta must be positive");
    if (!std::isfinite(epsilon) || (!allow_auto_epsilon && !(epsilon > 0.0))) {
        throw ArgumentError("kernel epsilon must be positive");
    }
    if (!(alpha_density >= 0.0 && alpha_density <= 1.0)) {
        throw ArgumentError("alpha_density must lie in [0, 1]");
    }
}

namespace {

/// Row degrees of K; throws when any vanishes.
Vector degrees(const Matrix& k) {
    Vector q = k.rowwise().sum();
    for (Index i = 0; i < q.size(); ++i) {
        if (!(q[i] > 0.0) || !std::isfinite(q[i])) {
            std::ostringstream msg;
            msg << "kernel row " << i << " has zero degree; increase epsilon";
            throw DegeneracyError(msg.str());
        }
    }
    return q;
}

/// In place: K -> D^-a K D^-a.
void density_normalize(Matrix& k, const Vector& q, double alpha) {
    if (alpha == 0.0) return;
    const Vector qa = q.array().pow(alpha);
    for (Index i = 0; i < k.rows(); ++i) {
        for (Index j = 0; j < k.cols(); ++j) k(i, j) /= qa[i] * qa[j];
    }
}

}  // namespace

Matrix cl_softmax(const Matrix& H, double beta, double alpha_density) {
    if (H.rows() != H.cols() || H.rows() < 1) throw ArgumentError("cl_softmax expects a square matrix");
    if (!H.allFinite()) throw ArgumentError("cl_softmax: logits must be finite");
    Matrix k = kernels::gaussian_affinity(H, beta, 1.0);
    const Vector q = degrees(k);
    density_normalize(k, q, alpha_density);
    const Vector row = k.rowwise().sum();
    for (Index i = 0; i < k.rows(); ++i) k.row(i) /= row[i];
    return k;
}

SpectralModel SpectralModel::fit(const hankel::DelayTensor& train, const KernelParams& params_in,
                                 Index r, Provenance provenance) {
    params_in.validate();
    const Index n = train.count();
    if (r < 1) throw ArgumentError("rank must be at least 1");
    if (n <= r + 1) {
        throw ArgumentError("need more than r + 1 = " + std::to_string(r + 1) +
                            " training windows, got " + std::to_string(n));
    }

    SpectralModel m;
    m.train_windows_ = train.data;
    m.window_ = train.window;
    m.channels_ = train.channels;
    m.provenance_ = provenance;
    m.kernel_ = params_in;

    Matrix work = kernels::pairwise_sq_dists(train.data);
    if (!(m.kernel_.epsilon > 0.0)) {
        const double med = kernels::median_offdiag(work);
        if (med > 0.0) {
            m.kernel_.epsilon = med;
        } else {
            m.kernel_.epsilon = 1.0;
            m.warnings_.push_back("all training windows coincide; epsilon set to 1");
        }
    }

    // work: D^2 -> K -> K^(alpha), then the symmetric conjugate
    // S = Dr^-1/2 K^(alpha) Dr^-1/2 with Dr the row sums of K^(alpha).
    work = kernels::gaussian_affinity(work, m.kernel_.beta, m.kernel_.epsilon);
    m.density_ = degrees(work);
    density_normalize(work, m.density_, m.kernel_.alpha_density);
    const Vector row = work.rowwise().sum();
    const Vector inv_sqrt_row = row.array().rsqrt();
#pragma omp parallel for schedule(static)
    for (Index i = 0; i < n; ++i) {
        for (Index j = 0; j < n; ++j) work(i, j) *= inv_sqrt_row[i] * inv_sqrt_row[j];
    }

    // Top r+1 eigenpairs (LAPACK returns them ascending).
    const lapack_int nn = static_cast<lapack_int>(n);
    const lapack_int want = static_cast<lapack_int>(r + 1);
    std::vector<double> w(static_cast<std::size_t>(n));
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> z(n, want);
    std::vector<lapack_int> support(2 * static_cast<std::size_t>(want));
    lapack_int found = 0;
    const lapack_int info = LAPACKE_dsyevr(LAPACK_ROW_MAJOR, 'V', 'I', 'U', nn, work.data(), nn, 0.0,
                                           0.0, nn - want + 1, nn, LAPACKE_dlamch('S'), &found,
                                           w.data(), z.data(), want, support.data());
    if (info != 0 || found != want) {
        throw EigenSolverError("dsyevr failed (info=" + std::to_string(info) + ")");
    }

    m.eigenvalues_.resize(want);
    m.eigenvectors_.resize(n, want);
    for (Index x = 0; x < want; ++x) {
        const Index src = want - 1 - x;
        m.eigenvalues_[x] = w[static_cast<std::size_t>(src)];
        Vector phi = z.col(src).cwiseProduct(inv_sqrt_row);
        phi *= std::sqrt(static_cast<double>(n)) / phi.norm();
        Index arg = 0;
        phi.cwiseAbs().maxCoeff(&arg);
        if (phi[arg] < 0.0) phi = -phi;
        m.eigenvectors_.col(x) = phi;
    }
    m.finalize_rank();
    return m;
}

void SpectralModel::finalize_rank() {
    density_pow_ = density_.array().pow(kernel_.alpha_density);
    active_rank_ = 0;
    for (Index x = 1; x < eigenvalues_.size(); ++x) {
        if (eigenvalues_[x] >= kMinEigenvalue) {
            if (active_rank_ == x - 1) ++active_rank_;
        } else {
            std::ostringstream msg;
            msg << "mode " << x << " excluded: eigenvalue " << eigenvalues_[x] << " below "
                << kMinEigenvalue;
            bool seen = false;
            for (const auto& w : warnings_) seen = seen || w == msg.str();
            if (!seen) warnings_.push_back(msg.str());
        }
    }
}

SpectralModel SpectralModel::from_parts(Matrix train_windows, Index window, Index channels,
                                        KernelParams kernel, Vector eigenvalues, Matrix eigenvectors,
                                        Vector density, std::vector<std::string> warnings,
                                        Provenance provenance) {
    if (train_windows.cols() != window * channels || eigenvectors.rows() != train_windows.rows() ||
        eigenvectors.cols() != eigenvalues.size() || density.size() != train_windows.rows()) {
        throw ArgumentError("inconsistent spectral model parts");
    }
    SpectralModel m;
    m.train_windows_ = std::move(train_windows);
    m.window_ = window;
    m.channels_ = channels;
    m.kernel_ = kernel;
    m.eigenvalues_ = std::move(eigenvalues);
    m.eigenvectors_ = std::move(eigenvectors);
    m.density_ = std::move(density);
    m.warnings_ = std::move(warnings);
    m.provenance_ = provenance;
    m.finalize_rank();
    return m;
}

namespace {

void encode_into(const SpectralModel& m, const Vector& qpow, const double* window, double* out,
                 std::vector<double>& scratch) {
    const Matrix& x = m.train_windows();
    const Index n = x.rows(), dim = x.cols();
    const KernelParams& kp = m.kernel();
    scratch.resize(static_cast<std::size_t>(n));
    const double scale = -kp.beta / kp.epsilon;
    double q_new = 0.0;
    for (Index t = 0; t < n; ++t) {
        const double k = std::exp(scale * kernels::sq_dist(x.row(t).data(), window, dim));
        scratch[static_cast<std::size_t>(t)] = k;
        q_new += k;
    }
    if (!(q_new > 0.0) || !std::isfinite(q_new)) {
        throw DegeneracyError("window has no affinity to any training window; increase epsilon");
    }
    const double q_new_pow = std::pow(q_new, kp.alpha_density);
    double row = 0.0;
    for (Index t = 0; t < n; ++t) {
        auto& v = scratch[static_cast<std::size_t>(t)];
        v /= q_new_pow * qpow[t];
        row += v;
    }
    const Index r = m.rank();
    const Matrix& phi = m.eigenvectors();
    for (Index c = 0; c < r; ++c) out[c] = 0.0;
    for (Index t = 0; t < n; ++t) {
        const double p = scratch[static_cast<std::size_t>(t)] / row;
        const double* ph = phi.row(t).data();
        for (Index c = 0; c < r; ++c) out[c] += p * ph[c + 1];
    }
    for (Index c = 0; c < r; ++c) out[c] /= m.eigenvalues()[c + 1];
}

}  // namespace

Vector SpectralModel::encode(std::span<const double> window) const {
    if (static_cast<Index>(window.size()) != train_windows_.cols()) {
        throw ArgumentError("window has " + std::to_string(window.size()) + " values, encoder expects " +
                            std::to_string(train_windows_.cols()));
    }
    Vector out(active_rank_);
    std::vector<double> scratch;
    encode_into(*this, density_pow_, window.data(), out.data(), scratch);
    return out;
}

Matrix SpectralModel::encode_batch(const Matrix& windows) const {
    if (windows.cols() != train_windows_.cols()) {
        throw ArgumentError("windows have " + std::to_string(windows.cols()) +
                            " columns, encoder expects " + std::to_string(train_windows_.cols()));
    }
    const Index m = windows.rows();
    Matrix out(m, active_rank_);
    std::exception_ptr failure;
#pragma omp parallel
    {
        std::vector<double> scratch;
#pragma omp for schedule(static)
        for (Index i = 0; i < m; ++i) {
            try {
                encode_into(*this, density_pow_, windows.row(i).data(), out.row(i).data(), scratch);
            } catch (...) {
#pragma omp critical(lisa_encode_failure)
                if (!failure) failure = std::current_exception();
            }
        }
    }
    if (failure) std::rethrow_exception(failure);
    return out;
}

Matrix SpectralModel::train_coordinates() const {
    return eigenvectors_.middleCols(1, active_rank_);
}

}  // namespace lisa::spectral
