#pragma once

// Frozen NLSA encoder: a density-normalized (Coifman-Lafon) Markov operator
// over training delay windows, its leading eigenpairs, and Nystrom extension
// of the eigenvectors to unseen windows.

#include "lisa/hankel.hpp"
#include "lisa/types.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace lisa::spectral {

struct KernelParams {
    double beta = 1.0;           ///< locality strength
    double epsilon = 0.0;        ///< scale; <= 0 means "median pairwise squared distance"
    double alpha_density = 1.0;  ///< density-normalization exponent in [0, 1]

    void validate(bool allow_auto_epsilon = true) const;
};

/// Coifman-Lafon softmax of a logits matrix:
///   K = exp(-beta H),  q_i = sum_j K_ij,
///   K^a_ij = K_ij / (q_i^a q_j^a),  P_ij = K^a_ij / sum_k K^a_ik.
/// Throws DegeneracyError when a degree vanishes.
Matrix cl_softmax(const Matrix& H, double beta, double alpha_density);

struct Provenance {
    std::uint64_t seed = 0;
    std::uint64_t data_hash = 0;
};

class SpectralModel {
public:
    SpectralModel() = default;

    /// Builds the operator on the rows of `train` (flattened windows) and
    /// keeps modes 0..r. Throws ArgumentError unless K > r + 1.
    static SpectralModel fit(const hankel::DelayTensor& train, const KernelParams& params, Index r,
                             Provenance provenance = {});

    /// Nystrom coordinates of one flattened window (length L*D). Returns a
    /// vector of length rank().
    Vector encode(std::span<const double> window) const;
    Vector encode(const Vector& window) const { return encode(std::span(window.data(), window.size())); }
    /// Row-wise encode; identical to calling encode per row.
    Matrix encode_batch(const Matrix& windows) const;

    /// Diffusion coordinates of the training windows (K x rank()).
    Matrix train_coordinates() const;

    /// Number of nontrivial modes in use (requested r minus any modes with
    /// eigenvalue below 1e-10, which are dropped with a warning).
    Index rank() const { return active_rank_; }
    Index requested_rank() const { return eigenvalues_.size() - 1; }
    Index window() const { return window_; }
    Index channels() const { return channels_; }
    Index train_count() const { return train_windows_.rows(); }

    const Matrix& train_windows() const { return train_windows_; }
    const KernelParams& kernel() const { return kernel_; }
    const Vector& eigenvalues() const { return eigenvalues_; }
    /// K x (r+1); column 0 is the constant mode.
    const Matrix& eigenvectors() const { return eigenvectors_; }
    /// Pre-normalization degrees q_i of the training kernel.
    const Vector& density() const { return density_; }
    const std::vector<std::string>& warnings() const { return warnings_; }
    const Provenance& provenance() const { return provenance_; }

    /// Reassemble a fitted model from stored parts (used by the artifact loader).
    static SpectralModel from_parts(Matrix train_windows, Index window, Index channels,
                                    KernelParams kernel, Vector eigenvalues, Matrix eigenvectors,
                                    Vector density, std::vector<std::string> warnings,
                                    Provenance provenance);

private:
    void finalize_rank();

    Matrix train_windows_;
    Index window_ = 0;
    Index channels_ = 0;
    KernelParams kernel_;
    Vector eigenvalues_;
    Matrix eigenvectors_;
    Vector density_;
    Vector density_pow_;  ///< q_i^alpha, cached for Nystrom
    Index active_rank_ = 0;
    std::vector<std::string> warnings_;
    Provenance provenance_;
};

/// Eigenvalues below this are treated as numerically zero.
inline constexpr double kMinEigenvalue = 1e-10;

}  // namespace lisa::spectral
