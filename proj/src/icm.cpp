#include "lisa/icm.hpp"

#include "lisa/hankel.hpp"
#include "lisa/kernels.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <limits>
#include <string>

namespace lisa::icm {

std::string_view to_string(Mode mode) {
    switch (mode) {
    case Mode::None: return "None";
    case Mode::ICGP: return "ICGP";
    case Mode::ICNW: return "ICNW";
    }
    return "?";
}

Mode parse_mode(std::string_view name) {
    std::string s(name);
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::toupper(c); });
    if (s == "NONE") return Mode::None;
    if (s == "ICGP") return Mode::ICGP;
    if (s == "ICNW") return Mode::ICNW;
    throw ArgumentError("unknown in-context mode '" + std::string(name) + "'");
}

void IcmConfig::validate() const {
    auto positive = [](double v) { return v > 0.0 && std::isfinite(v); };
    if (!positive(beta)) throw ArgumentError("icm beta must be positive");
    if (!std::isfinite(epsilon)) throw ArgumentError("icm epsilon must be finite");
    if (!(sigma2 >= 0.0) || !std::isfinite(sigma2)) throw ArgumentError("icm sigma2 must be >= 0");
    if (!positive(tau2)) throw ArgumentError("icm tau2 must be positive");
    if (!(k0 >= 0.0) || !std::isfinite(k0)) throw ArgumentError("icm k0 must be >= 0");
    if (!(gain >= 0.0) || !std::isfinite(gain)) throw ArgumentError("icm gain must be >= 0");
    if (!positive(temperature)) throw ArgumentError("icm temperature must be positive");
}

double IcmConfig::context_gate(Index c) const {
    if (c <= 0) return 0.0;
    const double cc = static_cast<double>(c);
    return cc / (cc + k0);
}

double latent_kernel(const Vector& z1, const Vector& z2, const IcmConfig& cfg) {
    if (z1.size() != z2.size()) throw ArgumentError("latent_kernel: length mismatch");
    return std::exp(-cfg.beta * (z1 - z2).squaredNorm() / (cfg.epsilon * cfg.temperature));
}

namespace {

double kernel_scale(const IcmConfig& cfg) { return cfg.beta / (cfg.epsilon * cfg.temperature); }

Eigen::VectorXd query_kernel_row(const IcmState& s) {
    const Index c = s.context_count(), r = s.context_latents().cols();
    const double scale = kernel_scale(s.config());
    Eigen::VectorXd k(c);
    for (Index a = 0; a < c; ++a) {
        k[a] = std::exp(-scale * kernels::sq_dist(s.context_latents().row(a).data(),
                                                  s.query_latent().data(), r));
    }
    return k;
}

}  // namespace

Eigen::MatrixXd IcmState::gram_factor() const {
    if (!gp_) return {};
    return gp_->llt.matrixL();
}

IcmState IcmState::with_query(Vector latent, const Vector& baseline) const {
    if (latent.size() != context_latents_.cols()) throw ArgumentError("query latent has wrong dimension");
    if (baseline.size() != baseline_.cols()) throw ArgumentError("query baseline has wrong dimension");
    IcmState s = *this;
    s.query_latent_ = std::move(latent);
    s.baseline_.row(s.baseline_.rows() - 1) = baseline.transpose();
    return s;
}

IcmState IcmState::from_parts(Matrix context_latents, const Matrix& targets, Matrix baseline,
                              Vector query_latent, const IcmConfig& cfg_in) {
    IcmConfig cfg = cfg_in;
    if (!(cfg.epsilon > 0.0)) cfg.epsilon = 1.0;
    cfg.validate();
    const Index c = context_latents.rows();
    if (targets.rows() != c || baseline.rows() != c + 1 || targets.cols() != baseline.cols() ||
        query_latent.size() != context_latents.cols()) {
        throw ArgumentError("inconsistent in-context state parts");
    }
    IcmState s;
    s.cfg_ = cfg;
    s.residuals_ = targets - baseline.topRows(c);
    s.context_latents_ = std::move(context_latents);
    s.baseline_ = std::move(baseline);
    s.query_latent_ = std::move(query_latent);
    if (cfg.mode == Mode::ICGP && c > 0) {
        gplm::LatentKernel k{cfg.beta, cfg.epsilon * cfg.temperature};
        auto llt = gplm::factorize_regularized(k.gram(s.context_latents_), cfg.sigma2, "in-context GP");
        auto gp = std::make_shared<GpContext>();
        gp->llt = *llt;
        gp->weights = gp->llt.solve(Eigen::MatrixXd(s.residuals_));
        s.gp_ = std::move(gp);
    }
    return s;
}

IcmState build_state(const TimeSeries& prefix, Index L, const spectral::SpectralModel& encoder,
                     const gplm::GplmDecoder& decoder, const IcmConfig& cfg_in) {
    IcmConfig cfg = cfg_in;
    if (!(cfg.epsilon > 0.0)) cfg.epsilon = decoder.kernel().epsilon;
    const hankel::ContextSplit split = hankel::split_prefix(prefix, L);
    const Index c = split.context_count();
    Matrix windows(c + 1, split.query_window.size());
    windows.topRows(c) = split.context_windows;
    windows.row(c) = split.query_window.transpose();
    const Matrix latents = encoder.encode_batch(windows);
    Matrix baseline = decoder.predict_mean_batch(latents);
    return IcmState::from_parts(latents.topRows(c), split.targets, std::move(baseline),
                                latents.row(c).transpose(), cfg);
}

const Eigen::MatrixXd& IcmState::gp_weights() const {
    if (!gp_) throw ArgumentError("in-context state was not built in ICGP mode");
    return gp_->weights;
}

Eigen::VectorXd IcmState::gp_solve_lower(const Eigen::VectorXd& v) const {
    if (!gp_) throw ArgumentError("in-context state was not built in ICGP mode");
    return gp_->llt.matrixL().solve(v);
}

GpCorrection icgp_correction(const IcmState& s) {
    const Index d = s.baseline().cols();
    const double tau2 = s.config().tau2;
    GpCorrection out;
    if (s.context_count() == 0) {
        out.delta = Vector::Zero(d);
        out.variance = 1.0;
        out.gate = tau2 / (tau2 + 1.0);
        return out;
    }
    const Eigen::VectorXd k = query_kernel_row(s);
    out.delta = (k.transpose() * s.gp_weights()).transpose();
    const double k_aa = 1.0;
    out.variance = std::clamp(k_aa - s.gp_solve_lower(k).squaredNorm(), 0.0, 1.0);
    out.gate = tau2 / (tau2 + out.variance);
    return out;
}

Vector icgp_sample(const IcmState& s, std::mt19937_64& rng) {
    const GpCorrection gp = icgp_correction(s);
    const double sd = std::sqrt(gp.variance + s.config().sigma2);
    std::normal_distribution<double> normal(0.0, 1.0);
    Vector out = gp.delta;
    for (Index x = 0; x < out.size(); ++x) out[x] += sd * normal(rng);
    return out;
}

Vector icgp_sample(const IcmState& s, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    return icgp_sample(s, rng);
}

NwCorrection icnw_correction(const IcmState& s) {
    const Index c = s.context_count(), d = s.baseline().cols(), r = s.context_latents().cols();
    NwCorrection out;
    out.delta = Vector::Zero(d);
    if (c == 0) return out;
    const double scale = kernel_scale(s.config());
    Vector logits(c);
    for (Index a = 0; a < c; ++a) {
        logits[a] = -scale * kernels::sq_dist(s.context_latents().row(a).data(), s.query_latent().data(), r);
    }
    const double top = logits.maxCoeff();
    if (!std::isfinite(top) || !logits.allFinite()) {
        out.weights = Vector::Constant(c, 1.0 / static_cast<double>(c));
        out.degenerate = true;
    } else {
        out.weights = (logits.array() - top).exp().matrix();
        out.weights /= out.weights.sum();
        // The unshifted kernel row k_aA underflowed entirely.
        out.degenerate = std::exp(top) == 0.0;
    }
    out.delta = (out.weights.transpose() * s.residuals()).transpose();
    return out;
}

namespace {

double entropy(const Vector& w) {
    double h = 0.0;
    for (Index i = 0; i < w.size(); ++i) {
        if (w[i] > 0.0) h -= w[i] * std::log(w[i]);
    }
    return h;
}

StepOutcome evaluate_impl(const IcmState& s, std::mt19937_64* rng) {
    const IcmConfig& cfg = s.config();
    StepOutcome out;
    out.prediction = s.query_baseline();
    const Index c = s.context_count();
    out.gamma_ctx = cfg.context_gate(c);
    switch (cfg.mode) {
    case Mode::None: break;
    case Mode::ICGP: {
        const GpCorrection gp = icgp_correction(s);
        out.variance = gp.variance;
        out.gamma_var = gp.gate;
        if (c == 0) break;
        Vector delta = gp.delta;
        if (rng != nullptr) {
            std::normal_distribution<double> normal(0.0, 1.0);
            const double sd = std::sqrt(gp.variance + cfg.sigma2);
            for (Index x = 0; x < delta.size(); ++x) delta[x] += sd * normal(*rng);
        }
        out.prediction += (cfg.gain * out.gamma_ctx * gp.gate) * delta;
        break;
    }
    case Mode::ICNW: {
        if (c == 0) break;
        const NwCorrection nw = icnw_correction(s);
        out.weight_entropy = entropy(nw.weights);
        out.degenerate = nw.degenerate;
        out.prediction += (cfg.gain * out.gamma_ctx) * nw.delta;
        break;
    }
    }
    return out;
}

}  // namespace

StepOutcome evaluate(const IcmState& s) { return evaluate_impl(s, nullptr); }

StepOutcome evaluate_sampled(const IcmState& s, std::mt19937_64& rng) { return evaluate_impl(s, &rng); }

}  // namespace lisa::icm
