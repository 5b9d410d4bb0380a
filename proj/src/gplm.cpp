#include "lisa/gplm.hpp"

#include "lisa/hankel.hpp"
#include "lisa/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace lisa::gplm {

double LatentKernel::operator()(const double* a, const double* b, Index n) const {
    return std::exp(-beta * kernels::sq_dist(a, b, n) / epsilon);
}

Matrix LatentKernel::gram(const Matrix& A, const Matrix& B) const {
    return kernels::gaussian_affinity(kernels::cross_sq_dists(A, B), beta, epsilon);
}

Matrix LatentKernel::gram(const Matrix& A) const {
    return kernels::gaussian_affinity(kernels::pairwise_sq_dists(A), beta, epsilon);
}

TrainingPairs build_pairs(const TimeSeries& series, const spectral::SpectralModel& model, Index stride) {
    const Index L = model.window();
    if (stride < 1) throw ArgumentError("stride must be at least 1");
    if (series.dim() != model.channels()) throw ArgumentError("series channel count does not match encoder");
    const Index with_successor = series.length() - L;
    if (with_successor < 1) {
        throw ArgumentError("series of length " + std::to_string(series.length()) +
                            " yields no (window, next sample) pair for L = " + std::to_string(L));
    }
    TrainingPairs out;
    for (Index t = 0; t < with_successor; t += stride) out.window_index.push_back(t);
    const Index m = static_cast<Index>(out.window_index.size());
    Matrix windows(m, L * series.dim());
    out.targets.resize(m, series.dim());
    for (Index i = 0; i < m; ++i) {
        const Index t = out.window_index[static_cast<std::size_t>(i)];
        windows.row(i) = hankel::window_at(series.values, t, L).transpose();
        out.targets.row(i) = series.values.row(t + L);
    }
    out.latents = model.encode_batch(windows);
    return out;
}

std::shared_ptr<const Eigen::LLT<Eigen::MatrixXd>> factorize_regularized(Eigen::MatrixXd gram,
                                                                        double noise_var,
                                                                        const char* what) {
    const Index n = gram.rows();
    gram.diagonal().array() += noise_var;
    const double scale = n > 0 ? gram.diagonal().maxCoeff() : 1.0;
    auto llt = std::make_shared<Eigen::LLT<Eigen::MatrixXd>>(gram);
    bool ok = llt->info() == Eigen::Success;
    if (ok && n > 0) {
        // Pivots that survive only through rounding mean the matrix is singular.
        const Eigen::MatrixXd& l = llt->matrixLLT();
        const double floor = static_cast<double>(n) * std::numeric_limits<double>::epsilon() * scale;
        for (Index i = 0; i < n && ok; ++i) ok = l(i, i) * l(i, i) > floor;
    }
    if (!ok) {
        throw ConditioningError(std::string(what) +
                                ": regularized Gram matrix is not positive definite; increase the noise variance");
    }
    return llt;
}

GplmDecoder GplmDecoder::fit(Matrix latents, Matrix targets, LatentKernel kernel, double noise_var) {
    if (latents.rows() != targets.rows()) throw ArgumentError("latents and targets differ in row count");
    if (latents.rows() < 1) throw ArgumentError("decoder needs at least one training pair");
    if (!(noise_var >= 0.0) || !std::isfinite(noise_var)) throw ArgumentError("noise variance must be >= 0");
    if (!(kernel.beta > 0.0)) throw ArgumentError("decoder kernel beta must be positive");

    Matrix d2 = kernels::pairwise_sq_dists(latents);
    if (!(kernel.epsilon > 0.0)) {
        const double med = kernels::median_offdiag(d2);
        kernel.epsilon = med > 0.0 ? med : 1.0;
    }
    const Eigen::MatrixXd gram = kernels::gaussian_affinity(d2, kernel.beta, kernel.epsilon);

    GplmDecoder dec;
    dec.factor_ = factorize_regularized(gram, noise_var, "decoder");
    dec.weights_ = dec.factor_->solve(Eigen::MatrixXd(targets));
    dec.latents_ = std::move(latents);
    dec.targets_ = std::move(targets);
    dec.kernel_ = kernel;
    dec.noise_var_ = noise_var;
    return dec;
}

Vector GplmDecoder::predict_mean(const Vector& z) const {
    if (z.size() != latents_.cols()) throw ArgumentError("latent has wrong dimension");
    const Index m = latents_.rows(), d = targets_.cols(), r = latents_.cols();
    Vector mean = Vector::Zero(d);
    for (Index i = 0; i < m; ++i) {
        const double k = kernel_(latents_.row(i).data(), z.data(), r);
        for (Index x = 0; x < d; ++x) mean[x] += k * weights_(i, x);
    }
    return mean;
}

Matrix GplmDecoder::predict_mean_batch(const Matrix& Z) const {
    Matrix out(Z.rows(), targets_.cols());
#pragma omp parallel for schedule(static)
    for (Index i = 0; i < Z.rows(); ++i) out.row(i) = predict_mean(Z.row(i).transpose()).transpose();
    return out;
}

Prediction GplmDecoder::predict(const Vector& z) const {
    if (z.size() != latents_.cols()) throw ArgumentError("latent has wrong dimension");
    const Index m = latents_.rows(), r = latents_.cols();
    Eigen::VectorXd k(m);
    for (Index i = 0; i < m; ++i) k[i] = kernel_(latents_.row(i).data(), z.data(), r);
    Prediction p;
    p.mean = (k.transpose() * weights_).transpose();
    const Eigen::VectorXd v = factor_->matrixL().solve(k);
    const double k_aa = 1.0;
    p.variance = std::clamp(k_aa - v.squaredNorm(), 0.0, k_aa);
    return p;
}

Eigen::MatrixXd GplmDecoder::gram_factor() const { return factor_->matrixL(); }

}  // namespace lisa::gplm
