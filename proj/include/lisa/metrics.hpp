#pragma once

// Forecast-vs-truth metrics: pointwise MSE (total and per horizon step),
// autocorrelation mismatch, Welch spectral divergence and MMD^2 between
// state distributions.

#include "lisa/types.hpp"

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace lisa::metrics {

struct MseResult {
    double total = 0.0;
    Vector by_horizon;  ///< |F_a - T_a|^2 per step
};

MseResult mse(const Matrix& forecast, const Matrix& truth);

enum class Divergence { JS, KL };

struct WelchOptions {
    Index segment_length = 0;  ///< 0 means min(256, n)
    Index overlap = -1;        ///< -1 means segment_length / 2
    double floor = 1e-12;
};

/// One-sided Welch PSD of one channel: Hann window, per-segment mean
/// detrending, density scaling. Returns bins 0 .. nseg/2.
Vector welch_psd(std::span<const double> x, Index segment_length, Index overlap);

struct SpectralResult {
    double value = 0.0;
    bool degenerate = false;  ///< some channel had (near) zero power
};

/// Average over channels of the divergence between normalized spectral masses
/// p(w) = (S_w + floor) / sum(S + floor), zero frequency excluded. JS is
/// computed as D(p_T || p_F) symmetrized through the midpoint, in nats;
/// KL is D(p_T || p_F).
SpectralResult spectral_divergence(const Matrix& forecast, const Matrix& truth, Divergence kind,
                                   const WelchOptions& opts = {});

/// Biased normalized sample autocorrelation for lags 0..tau_max.
/// A zero-variance channel yields rho = 0 for all positive lags.
Vector autocorrelation(std::span<const double> x, Index tau_max, bool* constant = nullptr);

struct AcfResult {
    double value = 0.0;
    bool degenerate = false;
};

AcfResult acf_mse(const Matrix& forecast, const Matrix& truth, Index tau_max);

/// Gaussian kernel exp(-|z - w|^2 / (2 h^2)).
struct RbfKernel {
    double bandwidth = 1.0;
};

/// Median pairwise Euclidean distance of the pooled rows.
double median_bandwidth(const Matrix& a, const Matrix& b);

/// Unbiased U-statistic MMD^2 with the exact kernel.
double mmd2_exact(const Matrix& samples_t, const Matrix& samples_f, RbfKernel kernel);

/// Unbiased MMD^2 with the kernel replaced by random Fourier features
/// phi(z) = sqrt(2/F) cos(W z + b). Deterministic for a given seed.
double mmd2_rff(const Matrix& samples_t, const Matrix& samples_f, RbfKernel kernel, Index n_features,
                std::uint64_t seed);

struct MetricOptions {
    Index tau_max = -1;  ///< -1: min(H - 1, 50)
    WelchOptions welch;
    Divergence divergence = Divergence::JS;
    Index mmd_features = 2048;
    double mmd_bandwidth = 0.0;  ///< <= 0: median heuristic on the pooled sample
    std::uint64_t mmd_seed = 0;
};

struct MetricReport {
    double mse = 0.0;
    Vector mse_by_horizon;
    double acf_mse = 0.0;
    double spec_div = 0.0;
    double mmd2 = 0.0;
    /// Estimator settings and flags, in insertion order of keys.
    std::map<std::string, std::string> metadata;
};

MetricReport evaluate(const Matrix& forecast, const Matrix& truth, const MetricOptions& opts = {});

/// Flat key=value record: metrics first, then metadata.
std::vector<std::pair<std::string, std::string>> flatten(const MetricReport& report);

}  // namespace lisa::metrics
