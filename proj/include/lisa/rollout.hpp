#pragma once

// Autoregressive multi-step forecasting with the frozen encoder/decoder and
// an optional in-context correction:
//   NLSA - baseline, only the last L samples are used
//   LISA - GP residual correction (ICGP)
//   ALSA - kernel-weighted residual correction (ICNW)

#include "lisa/gplm.hpp"
#include "lisa/icm.hpp"
#include "lisa/spectral.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace lisa::rollout {

enum class Method { NLSA, LISA, ALSA };

std::string_view to_string(Method method);
Method parse_method(std::string_view name);
icm::Mode mode_for(Method method);

struct RolloutConfig {
    Index horizon = 1;
    Method method = Method::NLSA;
    /// Observed samples used as context (>= L). Ignored for NLSA.
    Index context_length = 0;
    icm::IcmConfig icm;
    /// LISA only: draw the residual from the GP posterior.
    bool stochastic = false;
    std::uint64_t seed = 0;
};

struct StepDiagnostics {
    double gamma_ctx = 0.0;
    double gamma_var = 1.0;
    double weight_entropy = 0.0;
    bool degenerate = false;
};

struct Forecast {
    Matrix values;  ///< steps x D (standardized space); fewer than H rows after divergence
    std::optional<Vector> per_step_variance;  ///< LISA only
    std::vector<StepDiagnostics> diagnostics;
    std::optional<Index> divergence_step;  ///< first step that failed
    std::string divergence_reason;
    Index context_count = 0;

    Index steps() const { return values.rows(); }
    bool diverged() const { return divergence_step.has_value(); }
};

/// Rolls the model forward `cfg.horizon` steps from the end of `prefix`.
/// Context residuals come only from observed samples and stay frozen; the
/// query window slides over predictions and is re-encoded each step.
Forecast roll(const TimeSeries& prefix, const spectral::SpectralModel& encoder,
              const gplm::GplmDecoder& decoder, const RolloutConfig& cfg);

}  // namespace lisa::rollout
