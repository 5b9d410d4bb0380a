#include "lisa/rollout.hpp"

#include "lisa/hankel.hpp"

#include <algorithm>
#include <cctype>
#include <random>

namespace lisa::rollout {

std::string_view to_string(Method method) {
    switch (method) {
    case Method::NLSA: return "NLSA";
    case Method::LISA: return "LISA";
    case Method::ALSA: return "ALSA";
    }
    return "?";
}

Method parse_method(std::string_view name) {
    std::string s(name);
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::toupper(c); });
    if (s == "NLSA") return Method::NLSA;
    if (s == "LISA") return Method::LISA;
    if (s == "ALSA") return Method::ALSA;
    throw ArgumentError("unknown method '" + std::string(name) + "'");
}

icm::Mode mode_for(Method method) {
    switch (method) {
    case Method::NLSA: return icm::Mode::None;
    case Method::LISA: return icm::Mode::ICGP;
    case Method::ALSA: return icm::Mode::ICNW;
    }
    return icm::Mode::None;
}

Forecast roll(const TimeSeries& prefix, const spectral::SpectralModel& encoder,
              const gplm::GplmDecoder& decoder, const RolloutConfig& cfg) {
    const Index L = encoder.window();
    const Index d = prefix.dim();
    if (cfg.horizon < 1) throw ArgumentError("horizon must be positive");
    const Index ell = cfg.method == Method::NLSA ? L : cfg.context_length;
    if (ell < L) throw ArgumentError("context length must be at least the window length");
    if (prefix.length() < ell) {
        throw ArgumentError("prefix of length " + std::to_string(prefix.length()) +
                            " is shorter than the context length " + std::to_string(ell));
    }

    icm::IcmConfig icfg = cfg.icm;
    icfg.mode = mode_for(cfg.method);
    const TimeSeries observed = prefix.slice(prefix.length() - ell, ell);
    const icm::IcmState context = icm::build_state(observed, L, encoder, decoder, icfg);

    Forecast out;
    out.context_count = context.context_count();
    out.values.resize(cfg.horizon, d);
    out.diagnostics.reserve(static_cast<std::size_t>(cfg.horizon));
    const bool with_variance = cfg.method == Method::LISA;
    Vector variance(cfg.horizon);

    // Working buffer: the last L observed samples followed by predictions.
    Matrix work(L + cfg.horizon, d);
    work.topRows(L) = observed.values.bottomRows(L);
    std::mt19937_64 rng(cfg.seed);
    const bool sample = cfg.stochastic && cfg.method == Method::LISA;

    Index done = 0;
    for (Index h = 0; h < cfg.horizon; ++h) {
        try {
            icm::IcmState state = context;
            if (h > 0) {
                Vector z = encoder.encode(hankel::window_at(work, h, L));
                Vector q = decoder.predict_mean(z);
                state = context.with_query(std::move(z), q);
            }
            const icm::StepOutcome step = sample ? icm::evaluate_sampled(state, rng) : icm::evaluate(state);
            if (!step.prediction.allFinite()) {
                out.divergence_step = h;
                out.divergence_reason = "non-finite prediction";
                break;
            }
            work.row(L + h) = step.prediction.transpose();
            variance[h] = step.variance;
            out.diagnostics.push_back({step.gamma_ctx, step.gamma_var, step.weight_entropy, step.degenerate});
            ++done;
        } catch (const DegeneracyError& e) {
            out.divergence_step = h;
            out.divergence_reason = e.what();
            break;
        }
    }
    out.values = work.middleRows(L, done);
    if (with_variance) out.per_step_variance = variance.head(done);
    return out;
}

}  // namespace lisa::rollout
