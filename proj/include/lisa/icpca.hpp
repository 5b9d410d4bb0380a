#pragma once

// In-context PCA toy model: a PCA basis learned on P-data and the closed-form
// linear map that reconstructs Q-samples from their P-latents when both
// covariances are known.

#include "lisa/types.hpp"

#include <cstdint>
#include <vector>

namespace lisa::icpca {

struct PcaModel {
    Eigen::MatrixXd loading;  ///< D x r, orthonormal columns
    Vector mean;              ///< D
    Vector eigvals;           ///< r, descending

    Index rank() const { return loading.cols(); }
};

/// Empirical covariance with the 1/(N-1) normalization.
Eigen::MatrixXd covariance(const Matrix& samples, Vector* mean = nullptr);

/// Top-r principal directions, each column's largest-magnitude entry positive.
/// Throws ArgumentError if r exceeds the numerical rank of the covariance.
PcaModel fit_pca(const Matrix& samples, Index r);

/// W = Sigma_Q V (V^T Sigma_Q V)^-1. Throws ConditioningError when the
/// projected covariance is singular.
Eigen::MatrixXd oracle_adaptation(const Eigen::MatrixXd& sigma_q, const PcaModel& pca_p);

struct DemoRow {
    Index context_length = 0;
    double relative_map_error = 0.0;    ///< |W_est - W_oracle|_F / |W_oracle|_F
    double estimated_recon_mse = 0.0;   ///< held-out Q reconstruction error using W_est
    double oracle_recon_mse = 0.0;
    double unadapted_recon_mse = 0.0;   ///< using V itself
};

/// Oracle vs. plug-in adaptation error as the context grows. Q-covariance
/// estimates come from the first `ell` samples of a Q-stream.
std::vector<DemoRow> adaptation_demo(Index dim, Index rank, const std::vector<Index>& context_lengths,
                                     Index train_samples, std::uint64_t seed);

}  // namespace lisa::icpca
