#pragma once

// Gaussian-process latent model: the frozen one-step decoder from latent
// diffusion coordinates to the next ambient sample. Latents are fixed inputs
// (never optimized); a single isotropic RBF kernel is shared by all output
// channels.

#include "lisa/spectral.hpp"
#include "lisa/types.hpp"

#include <memory>

namespace lisa::gplm {

/// exp(-beta * |a - b|^2 / epsilon)
struct LatentKernel {
    double beta = 1.0;
    double epsilon = 1.0;

    double operator()(const double* a, const double* b, Index n) const;
    /// Gram matrix between the rows of A and B.
    Matrix gram(const Matrix& A, const Matrix& B) const;
    Matrix gram(const Matrix& A) const;
};

struct TrainingPairs {
    Matrix latents;  ///< M x r, latent of the window starting at T
    Matrix targets;  ///< M x D, series[T + L]
    std::vector<Index> window_index;
};

/// Pairs (latent of window T, sample T + L) for every window with a
/// successor, taking every `stride`-th window. Throws when no pair exists.
TrainingPairs build_pairs(const TimeSeries& series, const spectral::SpectralModel& model,
                          Index stride = 1);

struct Prediction {
    Vector mean;
    double variance = 0.0;
};

class GplmDecoder {
public:
    GplmDecoder() = default;

    /// Factorizes K + noise_var * I once. A non-positive kernel epsilon is
    /// replaced by the median pairwise squared distance of the latents.
    /// Throws ConditioningError if the factorization fails.
    static GplmDecoder fit(Matrix latents, Matrix targets, LatentKernel kernel, double noise_var);

    /// mean = k_a (K + s2 I)^-1 Y, var = k_aa - k_a (K + s2 I)^-1 k_a^T clamped to [0, k_aa].
    Prediction predict(const Vector& z) const;
    /// Mean only: O(M r) instead of O(M^2).
    Vector predict_mean(const Vector& z) const;
    /// Row-wise predict_mean.
    Matrix predict_mean_batch(const Matrix& Z) const;

    const Matrix& train_latents() const { return latents_; }
    const Matrix& train_targets() const { return targets_; }
    const LatentKernel& kernel() const { return kernel_; }
    double noise_var() const { return noise_var_; }
    /// Lower-triangular factor L with L L^T = K + noise_var * I.
    Eigen::MatrixXd gram_factor() const;
    Index latent_dim() const { return latents_.cols(); }
    Index output_dim() const { return targets_.cols(); }

private:
    Matrix latents_;
    Matrix targets_;
    LatentKernel kernel_;
    double noise_var_ = 0.0;
    std::shared_ptr<const Eigen::LLT<Eigen::MatrixXd>> factor_;
    Matrix weights_;  ///< (K + s2 I)^-1 Y
};

inline constexpr double kDefaultNoiseVar = 1e-4;

/// Cholesky with a relative pivot check; throws ConditioningError on failure.
std::shared_ptr<const Eigen::LLT<Eigen::MatrixXd>> factorize_regularized(Eigen::MatrixXd gram,
                                                                        double noise_var,
                                                                        const char* what);

}  // namespace lisa::gplm
