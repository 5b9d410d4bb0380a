#include "lisa/metrics.hpp"

#include "lisa/kernels.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <complex>
#include <mutex>
#include <numbers>
#include <random>
#include <sstream>

namespace lisa::metrics {

namespace {

void require_same_shape(const Matrix& f, const Matrix& t, const char* what) {
    if (f.rows() != t.rows() || f.cols() != t.cols()) {
        std::ostringstream msg;
        msg << what << ": forecast is " << f.rows() << "x" << f.cols() << " but truth is " << t.rows()
            << "x" << t.cols();
        throw ArgumentError(msg.str());
    }
}

std::string fmt(double v) {
    std::ostringstream s;
    s.precision(17);
    s << v;
    return s.str();
}

// FFTW planning is not thread-safe; execution on distinct arrays is.
std::mutex& planner_mutex() {
    static std::mutex m;
    return m;
}

class RealFft {
public:
    explicit RealFft(Index n) : n_(n) {
        std::lock_guard lock(planner_mutex());
        in_ = fftw_alloc_real(static_cast<std::size_t>(n));
        out_ = fftw_alloc_complex(static_cast<std::size_t>(n / 2 + 1));
        plan_ = fftw_plan_dft_r2c_1d(static_cast<int>(n), in_, out_, FFTW_ESTIMATE);
    }
    ~RealFft() {
        std::lock_guard lock(planner_mutex());
        fftw_destroy_plan(plan_);
        fftw_free(in_);
        fftw_free(out_);
    }
    RealFft(const RealFft&) = delete;
    RealFft& operator=(const RealFft&) = delete;

    double* input() { return in_; }
    void run() { fftw_execute(plan_); }
    double power(Index k) const { return out_[k][0] * out_[k][0] + out_[k][1] * out_[k][1]; }

private:
    Index n_;
    double* in_ = nullptr;
    fftw_complex* out_ = nullptr;
    fftw_plan plan_ = nullptr;
};

Vector column(const Matrix& m, Index c) { return m.col(c); }

}  // namespace

MseResult mse(const Matrix& forecast, const Matrix& truth) {
    require_same_shape(forecast, truth, "mse");
    MseResult r;
    r.by_horizon = (forecast - truth).rowwise().squaredNorm();
    r.total = r.by_horizon.size() > 0 ? r.by_horizon.mean() : 0.0;
    return r;
}

Vector welch_psd(std::span<const double> x, Index nseg, Index overlap) {
    const Index n = static_cast<Index>(x.size());
    if (nseg < 1 || nseg > n) throw ArgumentError("Welch segment length must lie in [1, series length]");
    if (overlap < 0 || overlap >= nseg) throw ArgumentError("Welch overlap must lie in [0, segment length)");
    const Index step = nseg - overlap;

    Vector window(nseg);
    if (nseg == 1) {
        window[0] = 1.0;
    } else {
        for (Index k = 0; k < nseg; ++k) {
            window[k] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(k) / static_cast<double>(nseg));
        }
    }
    const double scale = 1.0 / window.squaredNorm();
    const Index bins = nseg / 2 + 1;
    Vector psd = Vector::Zero(bins);

    RealFft fft(nseg);
    Index segments = 0;
    for (Index start = 0; start + nseg <= n; start += step) {
        double mean = 0.0;
        for (Index k = 0; k < nseg; ++k) mean += x[static_cast<std::size_t>(start + k)];
        mean /= static_cast<double>(nseg);
        double* in = fft.input();
        for (Index k = 0; k < nseg; ++k) in[k] = (x[static_cast<std::size_t>(start + k)] - mean) * window[k];
        fft.run();
        for (Index k = 0; k < bins; ++k) psd[k] += fft.power(k);
        ++segments;
    }
    psd *= scale / static_cast<double>(segments);
    // One-sided: double everything except DC and (for even lengths) Nyquist.
    const Index last_doubled = nseg % 2 == 0 ? bins - 2 : bins - 1;
    for (Index k = 1; k <= last_doubled; ++k) psd[k] *= 2.0;
    return psd;
}

SpectralResult spectral_divergence(const Matrix& forecast, const Matrix& truth, Divergence kind,
                                   const WelchOptions& opts) {
    require_same_shape(forecast, truth, "spectral_divergence");
    const Index n = truth.rows();
    const Index nseg = opts.segment_length > 0 ? opts.segment_length : std::min<Index>(256, n);
    const Index overlap = opts.overlap >= 0 ? opts.overlap : nseg / 2;
    if (n < nseg || n < 1) throw ArgumentError("series shorter than the Welch segment length");

    SpectralResult out;
    const Index channels = truth.cols();
    if (nseg / 2 < 1 || channels == 0) {
        out.degenerate = true;
        return out;
    }
    double total = 0.0;
    for (Index c = 0; c < channels; ++c) {
        const Vector tc = column(truth, c), fc = column(forecast, c);
        const Vector st = welch_psd(std::span(tc.data(), tc.size()), nseg, overlap);
        const Vector sf = welch_psd(std::span(fc.data(), fc.size()), nseg, overlap);
        const Index bins = st.size() - 1;
        Vector p = st.tail(bins).array() + opts.floor;
        Vector q = sf.tail(bins).array() + opts.floor;
        const double sum_st = st.tail(bins).sum(), sum_sf = sf.tail(bins).sum();
        if (sum_st <= opts.floor * static_cast<double>(bins) || sum_sf <= opts.floor * static_cast<double>(bins)) {
            out.degenerate = true;
        }
        p /= p.sum();
        q /= q.sum();
        double d = 0.0;
        if (kind == Divergence::KL) {
            for (Index k = 0; k < bins; ++k) d += p[k] * std::log(p[k] / q[k]);
        } else {
            for (Index k = 0; k < bins; ++k) {
                const double m = 0.5 * (p[k] + q[k]);
                d += 0.5 * p[k] * std::log(p[k] / m) + 0.5 * q[k] * std::log(q[k] / m);
            }
        }
        total += std::max(d, 0.0);
    }
    out.value = total / static_cast<double>(channels);
    return out;
}

Vector autocorrelation(std::span<const double> x, Index tau_max, bool* constant) {
    const Index n = static_cast<Index>(x.size());
    if (tau_max < 0 || n <= tau_max) throw ArgumentError("series must be longer than tau_max");
    double mean = 0.0;
    for (double v : x) mean += v;
    mean /= static_cast<double>(n);
    double denom = 0.0;
    for (double v : x) denom += (v - mean) * (v - mean);
    Vector rho = Vector::Zero(tau_max + 1);
    rho[0] = 1.0;
    const bool flat = !(denom > 0.0);
    if (constant != nullptr) *constant = flat;
    if (flat) return rho;
    for (Index tau = 1; tau <= tau_max; ++tau) {
        double s = 0.0;
        for (Index t = 0; t + tau < n; ++t) {
            s += (x[static_cast<std::size_t>(t)] - mean) * (x[static_cast<std::size_t>(t + tau)] - mean);
        }
        rho[tau] = s / denom;
    }
    return rho;
}

AcfResult acf_mse(const Matrix& forecast, const Matrix& truth, Index tau_max) {
    require_same_shape(forecast, truth, "acf_mse");
    AcfResult out;
    if (tau_max == 0 || truth.cols() == 0) {
        out.degenerate = true;
        return out;
    }
    double total = 0.0;
    for (Index c = 0; c < truth.cols(); ++c) {
        const Vector tc = column(truth, c), fc = column(forecast, c);
        bool flat_t = false, flat_f = false;
        const Vector rt = autocorrelation(std::span(tc.data(), tc.size()), tau_max, &flat_t);
        const Vector rf = autocorrelation(std::span(fc.data(), fc.size()), tau_max, &flat_f);
        out.degenerate = out.degenerate || flat_t || flat_f;
        total += (rf.tail(tau_max) - rt.tail(tau_max)).squaredNorm();
    }
    out.value = total / (static_cast<double>(tau_max) * static_cast<double>(truth.cols()));
    return out;
}

double median_bandwidth(const Matrix& a, const Matrix& b) {
    Matrix pooled(a.rows() + b.rows(), a.cols());
    pooled << a, b;
    const double med = kernels::median_offdiag(kernels::pairwise_sq_dists(pooled));
    return med > 0.0 ? std::sqrt(med) : 1.0;
}

double mmd2_exact(const Matrix& zt, const Matrix& zf, RbfKernel kernel) {
    const Index n = zt.rows(), m = zf.rows();
    if (n < 2 || m < 2) throw ArgumentError("MMD^2 needs at least two samples on each side");
    if (zt.cols() != zf.cols()) throw ArgumentError("MMD^2 sample dimensions differ");
    const double beta = 1.0, eps = 2.0 * kernel.bandwidth * kernel.bandwidth;
    const Matrix ktt = kernels::gaussian_affinity(kernels::pairwise_sq_dists(zt), beta, eps);
    const Matrix kff = kernels::gaussian_affinity(kernels::pairwise_sq_dists(zf), beta, eps);
    const Matrix ktf = kernels::gaussian_affinity(kernels::cross_sq_dists(zt, zf), beta, eps);
    const double dn = static_cast<double>(n), dm = static_cast<double>(m);
    const double tt = (ktt.sum() - ktt.trace()) / (dn * (dn - 1.0));
    const double ff = (kff.sum() - kff.trace()) / (dm * (dm - 1.0));
    return tt + ff - 2.0 * ktf.sum() / (dn * dm);
}

double mmd2_rff(const Matrix& zt, const Matrix& zf, RbfKernel kernel, Index n_features, std::uint64_t seed) {
    const Index n = zt.rows(), m = zf.rows(), p = zt.cols();
    if (n < 2 || m < 2) throw ArgumentError("MMD^2 needs at least two samples on each side");
    if (zf.cols() != p) throw ArgumentError("MMD^2 sample dimensions differ");
    if (n_features < 1) throw ArgumentError("need at least one random feature");

    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0 / kernel.bandwidth);
    std::uniform_real_distribution<double> phase(0.0, 2.0 * std::numbers::pi);
    Matrix w(n_features, p);
    Vector b(n_features);
    for (Index f = 0; f < n_features; ++f) {
        for (Index j = 0; j < p; ++j) w(f, j) = normal(rng);
        b[f] = phase(rng);
    }
    const double amp = std::sqrt(2.0 / static_cast<double>(n_features));

    // Returns (sum of features, sum of squared feature norms).
    auto accumulate = [&](const Matrix& z, Vector& sum) {
        sum = Vector::Zero(n_features);
        double sq = 0.0;
        for (Index i = 0; i < z.rows(); ++i) {
            for (Index f = 0; f < n_features; ++f) {
                double arg = b[f];
                for (Index j = 0; j < p; ++j) arg += w(f, j) * z(i, j);
                const double phi = amp * std::cos(arg);
                sum[f] += phi;
                sq += phi * phi;
            }
        }
        return sq;
    };
    Vector st, sf;
    const double sqt = accumulate(zt, st);
    const double sqf = accumulate(zf, sf);
    const double dn = static_cast<double>(n), dm = static_cast<double>(m);
    return (st.squaredNorm() - sqt) / (dn * (dn - 1.0)) + (sf.squaredNorm() - sqf) / (dm * (dm - 1.0)) -
           2.0 * st.dot(sf) / (dn * dm);
}

MetricReport evaluate(const Matrix& forecast, const Matrix& truth, const MetricOptions& opts) {
    require_same_shape(forecast, truth, "metrics");
    const Index h = truth.rows();
    if (h < 1) throw ArgumentError("metrics need at least one step");
    MetricReport r;
    const MseResult m = mse(forecast, truth);
    r.mse = m.total;
    r.mse_by_horizon = m.by_horizon;

    const Index tau_max = opts.tau_max >= 0 ? std::min(opts.tau_max, h - 1) : std::min<Index>(h - 1, 50);
    const AcfResult acf = acf_mse(forecast, truth, tau_max);
    r.acf_mse = acf.value;

    WelchOptions welch = opts.welch;
    if (welch.segment_length <= 0) welch.segment_length = std::min<Index>(256, h);
    welch.segment_length = std::min(welch.segment_length, h);
    if (welch.overlap < 0 || welch.overlap >= welch.segment_length) welch.overlap = welch.segment_length / 2;
    const SpectralResult spec = spectral_divergence(forecast, truth, opts.divergence, welch);
    r.spec_div = spec.value;

    double bandwidth = opts.mmd_bandwidth;
    bool mmd_undefined = h < 2;
    if (!mmd_undefined) {
        if (!(bandwidth > 0.0)) bandwidth = median_bandwidth(truth, forecast);
        r.mmd2 = mmd2_rff(truth, forecast, RbfKernel{bandwidth}, opts.mmd_features, opts.mmd_seed);
    }

    r.metadata["tau_max"] = std::to_string(tau_max);
    r.metadata["welch_segment"] = std::to_string(welch.segment_length);
    r.metadata["welch_overlap"] = std::to_string(welch.overlap);
    r.metadata["welch_window"] = "hann";
    r.metadata["welch_detrend"] = "mean";
    r.metadata["spectral_floor"] = fmt(welch.floor);
    r.metadata["divergence"] = opts.divergence == Divergence::JS ? "JS" : "KL";
    r.metadata["mmd_features"] = std::to_string(opts.mmd_features);
    r.metadata["mmd_bandwidth"] = fmt(mmd_undefined ? 0.0 : bandwidth);
    r.metadata["mmd_seed"] = std::to_string(opts.mmd_seed);
    r.metadata["spec_degenerate"] = spec.degenerate ? "1" : "0";
    r.metadata["acf_degenerate"] = acf.degenerate ? "1" : "0";
    r.metadata["mmd_undefined"] = mmd_undefined ? "1" : "0";
    return r;
}

std::vector<std::pair<std::string, std::string>> flatten(const MetricReport& r) {
    std::vector<std::pair<std::string, std::string>> out{
        {"mse", fmt(r.mse)}, {"acf_mse", fmt(r.acf_mse)}, {"spec_div", fmt(r.spec_div)}, {"mmd2", fmt(r.mmd2)}};
    for (const auto& kv : r.metadata) out.push_back(kv);
    return out;
}

}  // namespace lisa::metrics
