#pragma once

// In-context residual correction. A prefix is split into context windows with
// known one-step targets; the frozen encoder/decoder give baseline
// predictions, and the residuals drive either a GP posterior (ICGP) or a
// kernel-weighted average (ICNW) correction at the query window.

#include "lisa/gplm.hpp"
#include "lisa/spectral.hpp"
#include "lisa/types.hpp"

#include <cstdint>
#include <memory>
#include <random>
#include <string_view>

namespace lisa::icm {

enum class Mode { None, ICGP, ICNW };

std::string_view to_string(Mode mode);
Mode parse_mode(std::string_view name);

struct IcmConfig {
    double beta = 1.0;
    /// Latent kernel scale. Non-positive means "inherit the decoder's epsilon"
    /// (resolved by build_state).
    double epsilon = 0.0;
    double sigma2 = 1e-2;   ///< GP noise variance over context residuals
    double tau2 = 1.0;      ///< confidence-gate scale
    double k0 = 4.0;        ///< context-gate scale; 0 disables the gate
    double gain = 1.0;      ///< overall correction gain
    double temperature = 1.0;
    Mode mode = Mode::ICNW;

    void validate() const;
    /// Context gate C / (C + k0); 1 when k0 == 0 and C > 0, 0 when C == 0.
    double context_gate(Index context_count) const;
};

/// exp(-beta |z1 - z2|^2 / (epsilon * temperature)).
double latent_kernel(const Vector& z1, const Vector& z2, const IcmConfig& cfg);

/// Per-prefix state. The context part is shared (copy is cheap) so that a
/// rollout can swap the query without rebuilding.
class IcmState {
public:
    IcmState() = default;

    Index context_count() const { return context_latents_.rows(); }
    const Matrix& context_latents() const { return context_latents_; }
    const Matrix& residuals() const { return residuals_; }
    /// Baseline decoder predictions Q for the C context windows followed by
    /// the query window (C + 1 rows).
    const Matrix& baseline() const { return baseline_; }
    const Vector& query_latent() const { return query_latent_; }
    Vector query_baseline() const { return baseline_.row(baseline_.rows() - 1).transpose(); }
    /// Config with epsilon resolved.
    const IcmConfig& config() const { return cfg_; }
    /// Lower factor of (k_AA' + sigma2 I); empty unless built in ICGP mode.
    Eigen::MatrixXd gram_factor() const;
    bool has_gram() const { return static_cast<bool>(gp_); }
    /// (k_AA' + sigma2 I)^-1 residuals, C x D (ICGP only).
    const Eigen::MatrixXd& gp_weights() const;
    /// L^-1 v for the lower Gram factor L (ICGP only).
    Eigen::VectorXd gp_solve_lower(const Eigen::VectorXd& v) const;

    /// Same context, new query latent and baseline prediction.
    IcmState with_query(Vector latent, const Vector& baseline) const;

    /// Build directly from context pieces (latents C x r, targets C x D,
    /// baselines (C+1) x D with the query last, query latent r).
    static IcmState from_parts(Matrix context_latents, const Matrix& targets, Matrix baseline,
                               Vector query_latent, const IcmConfig& cfg);

private:
    Matrix context_latents_;
    Matrix residuals_;
    Matrix baseline_;
    Vector query_latent_;
    IcmConfig cfg_;

    struct GpContext {
        Eigen::LLT<Eigen::MatrixXd> llt;
        Eigen::MatrixXd weights;  ///< (k + sigma2 I)^-1 residuals, C x D
    };
    std::shared_ptr<const GpContext> gp_;
};

/// Splits the prefix, encodes all C + 1 windows, decodes baselines and forms
/// residuals. In ICGP mode also factorizes the context Gram matrix.
IcmState build_state(const TimeSeries& prefix, Index L, const spectral::SpectralModel& encoder,
                     const gplm::GplmDecoder& decoder, const IcmConfig& cfg);

struct GpCorrection {
    Vector delta;
    double variance = 1.0;  ///< posterior variance s^2 in [0, 1]
    double gate = 0.0;      ///< tau2 / (tau2 + s^2)
};

GpCorrection icgp_correction(const IcmState& state);

/// delta + sqrt(s^2 + sigma2) * xi with xi ~ N(0, I_D).
Vector icgp_sample(const IcmState& state, std::mt19937_64& rng);
Vector icgp_sample(const IcmState& state, std::uint64_t seed);

struct NwCorrection {
    Vector delta;
    Vector weights;  ///< length C, nonnegative, sums to 1
    bool degenerate = false;
};

/// Weights k_aA / sum k_aA' evaluated as a shifted softmax of the logits
/// -beta d^2 / (epsilon T), so sharp kernels never underflow as a whole.
/// Non-finite logits fall back to uniform weights (degenerate = true).
NwCorrection icnw_correction(const IcmState& state);

struct StepOutcome {
    Vector prediction;
    double gamma_ctx = 0.0;
    double gamma_var = 1.0;           ///< ICGP only
    double variance = 1.0;            ///< ICGP posterior variance, 1 otherwise
    double weight_entropy = 0.0;      ///< ICNW only, nats
    bool degenerate = false;
};

/// Q + gain * gamma_ctx * gamma_var * delta (ICGP), Q + gain * gamma_ctx * delta
/// (ICNW), or Q (None). With C = 0 the output is exactly Q.
StepOutcome evaluate(const IcmState& state);
/// Same, but the ICGP residual is drawn from the posterior.
StepOutcome evaluate_sampled(const IcmState& state, std::mt19937_64& rng);

inline Vector corrected_prediction(const IcmState& state) { return evaluate(state).prediction; }

}  // namespace lisa::icm
