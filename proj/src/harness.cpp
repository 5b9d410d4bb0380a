#include "lisa/harness.hpp"

#include "lisa/csv.hpp"
#include "lisa/hankel.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

namespace lisa::harness {

using json = nlohmann::ordered_json;

// ---------------------------------------------------------------------------
// Standardization
// ---------------------------------------------------------------------------

Standardizer Standardizer::fit(const Matrix& values) {
    if (values.rows() < 1) throw ArgumentError("cannot standardize an empty series");
    Standardizer s;
    const Index n = values.rows();
    const Index d = values.cols();
    s.mean = values.colwise().mean().transpose();
    s.scale.resize(d);
    s.flagged.assign(static_cast<std::size_t>(d), false);
    for (Index x = 0; x < d; ++x) {
        const double var = (values.col(x).array() - s.mean[x]).square().sum() / static_cast<double>(n);
        const double sd = std::sqrt(var);
        const double tol = 1e-12 * std::max(1.0, std::abs(s.mean[x]));
        if (!(sd > tol)) {
            s.scale[x] = 1.0;
            s.flagged[static_cast<std::size_t>(x)] = true;
        } else {
            s.scale[x] = sd;
        }
    }
    return s;
}

Matrix Standardizer::apply(const Matrix& values) const {
    if (values.cols() != mean.size()) throw ArgumentError("standardizer channel count mismatch");
    Matrix out(values.rows(), values.cols());
    for (Index i = 0; i < values.rows(); ++i) {
        for (Index x = 0; x < values.cols(); ++x) out(i, x) = (values(i, x) - mean[x]) / scale[x];
    }
    return out;
}

TimeSeries Standardizer::apply(const TimeSeries& series) const {
    TimeSeries out = series;
    out.values = apply(series.values);
    return out;
}

Matrix Standardizer::invert(const Matrix& z) const {
    if (z.cols() != mean.size()) throw ArgumentError("standardizer channel count mismatch");
    Matrix out(z.rows(), z.cols());
    for (Index i = 0; i < z.rows(); ++i) {
        for (Index x = 0; x < z.cols(); ++x) out(i, x) = z(i, x) * scale[x] + mean[x];
    }
    return out;
}

Standardized standardize(const TimeSeries& series, const Matrix& stats_source) {
    Standardized out;
    out.stats = Standardizer::fit(stats_source);
    out.series = out.stats.apply(series);
    return out;
}

// ---------------------------------------------------------------------------
// Configuration
// ---------------------------------------------------------------------------

namespace {

std::string source_name(DataSource s) {
    switch (s) {
        case DataSource::System: return "system";
        case DataSource::Csv: return "csv";
        case DataSource::SyntheticLoad: return "synthetic_load";
    }
    return "system";
}

DataSource parse_source(const std::string& s) {
    if (s == "system") return DataSource::System;
    if (s == "csv") return DataSource::Csv;
    if (s == "synthetic_load") return DataSource::SyntheticLoad;
    throw ConfigError("data.source must be system, csv or synthetic_load (got '" + s + "')");
}

json params_json(const dynsys::ParamSet& p) {
    json j = json::object();
    for (const auto& [k, v] : p) j[k] = v;
    return j;
}

dynsys::ParamSet parse_params(const json& j, const std::string& where) {
    if (!j.is_object()) throw ConfigError(where + " must be an object");
    dynsys::ParamSet p;
    for (const auto& [k, v] : j.items()) {
        if (!v.is_number()) throw ConfigError(where + "." + k + " must be a number");
        p[k] = v.get<double>();
    }
    return p;
}

json to_json(const ExperimentConfig& c) {
    json j;
    j["data"] = {
        {"source", source_name(c.data.source)},
        {"system", std::string(dynsys::to_string(c.data.system))},
        {"params", params_json(c.data.params)},
        {"dt", c.data.dt},
        {"n_steps", c.data.n_steps},
        {"burn_in", c.data.burn_in},
        {"stride", c.data.stride},
        {"seed", c.data.seed},
        {"csv_path", c.data.csv_path},
        {"log1p", c.data.log1p},
        {"load_channels", c.data.load_channels},
    };
    j["split"] = {
        {"kind", c.split.kind == SplitKind::Chronological ? "chronological" : "regime_switch"},
        {"train_fraction", c.split.train_fraction},
        {"regime_b", params_json(c.split.regime_b)},
    };
    j["standardization"] = c.standardization == StatsSource::Train ? "train" : "global";
    j["model"] = {
        {"window", c.model.window},
        {"rank", c.model.rank},
        {"max_train_windows", c.model.max_train_windows},
        {"max_decoder_pairs", c.model.max_decoder_pairs},
        {"encoder",
         {{"beta", c.model.encoder.beta},
          {"epsilon", c.model.encoder.epsilon},
          {"alpha_density", c.model.encoder.alpha_density}}},
        {"decoder",
         {{"beta", c.model.decoder.beta}, {"epsilon", c.model.decoder.epsilon}, {"noise_var", c.model.noise_var}}},
    };
    j["icm"] = {
        {"mode", std::string(icm::to_string(c.icm.mode))},
        {"beta", c.icm.beta},
        {"epsilon", c.icm.epsilon},
        {"sigma2", c.icm.sigma2},
        {"tau2", c.icm.tau2},
        {"k0", c.icm.k0},
        {"gain", c.icm.gain},
        {"temperature", c.icm.temperature},
    };
    json methods = json::array();
    for (auto m : c.eval.methods) methods.push_back(std::string(rollout::to_string(m)));
    j["eval"] = {
        {"horizon", c.eval.horizon},
        {"context_multiples", c.eval.context_multiples},
        {"temperatures", c.eval.temperatures},
        {"temperature_context_multiple", c.eval.temperature_context_multiple},
        {"n_starts", c.eval.n_starts},
        {"seed", c.eval.seed},
        {"methods", methods},
        {"stochastic", c.eval.stochastic},
        {"write_forecasts", c.eval.write_forecasts},
    };
    j["metrics"] = {
        {"tau_max", c.metrics.tau_max},
        {"welch_segment", c.metrics.welch.segment_length},
        {"welch_overlap", c.metrics.welch.overlap},
        {"spectral_floor", c.metrics.welch.floor},
        {"divergence", c.metrics.divergence == metrics::Divergence::JS ? "JS" : "KL"},
        {"mmd_features", c.metrics.mmd_features},
        {"mmd_bandwidth", c.metrics.mmd_bandwidth},
        {"mmd_seed", c.metrics.mmd_seed},
    };
    return j;
}

// Free-form maps whose keys are parameter names.
bool open_map(const std::string& path) { return path == "data.params" || path == "split.regime_b"; }

void merge_checked(json& base, const json& patch, const std::string& path) {
    if (!patch.is_object()) throw ConfigError((path.empty() ? "config" : path) + " must be an object");
    for (const auto& [key, value] : patch.items()) {
        const std::string sub = path.empty() ? key : path + "." + key;
        if (open_map(path)) {
            base[key] = value;
            continue;
        }
        if (!base.contains(key)) throw ConfigError("unknown config key '" + sub + "'");
        json& target = base[key];
        if (target.is_object() && !open_map(sub)) {
            merge_checked(target, value, sub);
        } else if (open_map(sub)) {
            if (!value.is_object()) throw ConfigError(sub + " must be an object");
            target = json::object();
            merge_checked(target, value, sub);
        } else {
            target = value;
        }
    }
}

template <class T>
T get(const json& j, const char* section, const char* key) {
    try {
        return j.at(section).at(key).get<T>();
    } catch (const json::exception& e) {
        throw ConfigError(std::string(section) + "." + key + ": " + e.what());
    }
}

ExperimentConfig from_json(const json& j) {
    ExperimentConfig c;
    c.data.source = parse_source(get<std::string>(j, "data", "source"));
    try {
        c.data.system = dynsys::parse_system(get<std::string>(j, "data", "system"));
    } catch (const ArgumentError& e) {
        throw ConfigError(std::string("data.system: ") + e.what());
    }
    c.data.params = parse_params(j["data"]["params"], "data.params");
    c.data.dt = get<double>(j, "data", "dt");
    c.data.n_steps = get<Index>(j, "data", "n_steps");
    c.data.burn_in = get<Index>(j, "data", "burn_in");
    c.data.stride = get<Index>(j, "data", "stride");
    c.data.seed = get<std::uint64_t>(j, "data", "seed");
    c.data.csv_path = get<std::string>(j, "data", "csv_path");
    c.data.log1p = get<bool>(j, "data", "log1p");
    c.data.load_channels = get<Index>(j, "data", "load_channels");

    const auto kind = get<std::string>(j, "split", "kind");
    if (kind == "chronological") {
        c.split.kind = SplitKind::Chronological;
    } else if (kind == "regime_switch") {
        c.split.kind = SplitKind::RegimeSwitch;
    } else {
        throw ConfigError("split.kind must be chronological or regime_switch (got '" + kind + "')");
    }
    c.split.train_fraction = get<double>(j, "split", "train_fraction");
    c.split.regime_b = parse_params(j["split"]["regime_b"], "split.regime_b");

    std::string stats;
    try {
        stats = j.at("standardization").get<std::string>();
    } catch (const json::exception& e) {
        throw ConfigError(std::string("standardization: ") + e.what());
    }
    if (stats == "train") {
        c.standardization = StatsSource::Train;
    } else if (stats == "global") {
        c.standardization = StatsSource::Global;
    } else {
        throw ConfigError("standardization must be train or global (got '" + stats + "')");
    }

    c.model.window = get<Index>(j, "model", "window");
    c.model.rank = get<Index>(j, "model", "rank");
    c.model.max_train_windows = get<Index>(j, "model", "max_train_windows");
    c.model.max_decoder_pairs = get<Index>(j, "model", "max_decoder_pairs");
    const json& enc = j["model"]["encoder"];
    const json& dec = j["model"]["decoder"];
    try {
        c.model.encoder.beta = enc.at("beta").get<double>();
        c.model.encoder.epsilon = enc.at("epsilon").get<double>();
        c.model.encoder.alpha_density = enc.at("alpha_density").get<double>();
        c.model.decoder.beta = dec.at("beta").get<double>();
        c.model.decoder.epsilon = dec.at("epsilon").get<double>();
        c.model.noise_var = dec.at("noise_var").get<double>();
    } catch (const json::exception& e) {
        throw ConfigError(std::string("model: ") + e.what());
    }

    try {
        c.icm.mode = icm::parse_mode(get<std::string>(j, "icm", "mode"));
    } catch (const ArgumentError& e) {
        throw ConfigError(std::string("icm.mode: ") + e.what());
    }
    c.icm.beta = get<double>(j, "icm", "beta");
    c.icm.epsilon = get<double>(j, "icm", "epsilon");
    c.icm.sigma2 = get<double>(j, "icm", "sigma2");
    c.icm.tau2 = get<double>(j, "icm", "tau2");
    c.icm.k0 = get<double>(j, "icm", "k0");
    c.icm.gain = get<double>(j, "icm", "gain");
    c.icm.temperature = get<double>(j, "icm", "temperature");

    c.eval.horizon = get<Index>(j, "eval", "horizon");
    c.eval.context_multiples = get<std::vector<Index>>(j, "eval", "context_multiples");
    c.eval.temperatures = get<std::vector<double>>(j, "eval", "temperatures");
    c.eval.temperature_context_multiple = get<Index>(j, "eval", "temperature_context_multiple");
    c.eval.n_starts = get<Index>(j, "eval", "n_starts");
    c.eval.seed = get<std::uint64_t>(j, "eval", "seed");
    c.eval.methods.clear();
    for (const auto& m : get<std::vector<std::string>>(j, "eval", "methods")) {
        try {
            c.eval.methods.push_back(rollout::parse_method(m));
        } catch (const ArgumentError& e) {
            throw ConfigError(std::string("eval.methods: ") + e.what());
        }
    }
    c.eval.stochastic = get<bool>(j, "eval", "stochastic");
    c.eval.write_forecasts = get<bool>(j, "eval", "write_forecasts");

    c.metrics.tau_max = get<Index>(j, "metrics", "tau_max");
    c.metrics.welch.segment_length = get<Index>(j, "metrics", "welch_segment");
    c.metrics.welch.overlap = get<Index>(j, "metrics", "welch_overlap");
    c.metrics.welch.floor = get<double>(j, "metrics", "spectral_floor");
    const auto div = get<std::string>(j, "metrics", "divergence");
    if (div == "JS") {
        c.metrics.divergence = metrics::Divergence::JS;
    } else if (div == "KL") {
        c.metrics.divergence = metrics::Divergence::KL;
    } else {
        throw ConfigError("metrics.divergence must be JS or KL (got '" + div + "')");
    }
    c.metrics.mmd_features = get<Index>(j, "metrics", "mmd_features");
    c.metrics.mmd_bandwidth = get<double>(j, "metrics", "mmd_bandwidth");
    c.metrics.mmd_seed = get<std::uint64_t>(j, "metrics", "mmd_seed");
    return c;
}

}  // namespace

ExperimentConfig ExperimentConfig::from_json_text(const std::string& text) {
    json patch;
    try {
        patch = json::parse(text, nullptr, true, /*ignore_comments=*/true);
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("config is not valid JSON: ") + e.what());
    }
    json merged = to_json(ExperimentConfig{});
    merge_checked(merged, patch, "");
    ExperimentConfig c = from_json(merged);
    c.validate();
    return c;
}

ExperimentConfig ExperimentConfig::from_file(const std::filesystem::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open config " + path.string());
    std::stringstream buf;
    buf << f.rdbuf();
    return from_json_text(buf.str());
}

std::string ExperimentConfig::to_json_text() const { return to_json(*this).dump(2) + "\n"; }

Index ExperimentConfig::window() const {
    if (model.window > 0) return model.window;
    if (data.source != DataSource::System) return 24;
    const Index ref = dynsys::reference_window(data.system);
    return std::max<Index>(2, (ref + data.stride - 1) / data.stride);
}

void ExperimentConfig::validate() const {
    auto fail = [](const std::string& m) { throw ConfigError(m); };
    if (data.n_steps < 1) fail("data.n_steps must be positive");
    if (data.burn_in < 0 || data.burn_in >= data.n_steps) fail("data.burn_in must lie in [0, n_steps)");
    if (data.stride < 1) fail("data.stride must be at least 1");
    if (data.dt < 0.0 || !std::isfinite(data.dt)) fail("data.dt must be finite and >= 0 (0 = reference)");
    if (data.source == DataSource::Csv && data.csv_path.empty()) fail("data.csv_path is required for csv data");
    if (data.load_channels < 1) fail("data.load_channels must be positive");
    if (!(split.train_fraction > 0.0 && split.train_fraction < 1.0)) fail("split.train_fraction must lie in (0, 1)");
    if (split.kind == SplitKind::RegimeSwitch &&
        (data.source != DataSource::System || data.system != dynsys::SystemKind::Lorenz63)) {
        fail("regime_switch split requires data.source = system with Lorenz63");
    }
    if (model.window < 0) fail("model.window must be >= 0 (0 = reference)");
    if (model.rank < 1) fail("model.rank must be positive");
    if (model.max_train_windows < model.rank + 2) fail("model.max_train_windows must exceed rank + 1");
    if (model.max_train_windows > 4000) fail("model.max_train_windows is capped at 4000 (dense kernel)");
    if (model.max_decoder_pairs < 1) fail("model.max_decoder_pairs must be positive");
    if (!(model.noise_var > 0.0)) fail("model.decoder.noise_var must be positive");
    if (!(model.decoder.beta > 0.0)) fail("model.decoder.beta must be positive");
    try {
        model.encoder.validate();
        icm.validate();
    } catch (const ArgumentError& e) {
        fail(e.what());
    }
    if (eval.horizon < 1) fail("eval.horizon must be positive");
    if (eval.context_multiples.empty()) fail("eval.context_multiples must not be empty");
    for (Index m : eval.context_multiples) {
        if (m < 1) fail("eval.context_multiples entries must be >= 1");
    }
    for (double t : eval.temperatures) {
        if (!(t > 0.0) || !std::isfinite(t)) fail("eval.temperatures entries must be positive");
    }
    if (eval.temperature_context_multiple < 1) fail("eval.temperature_context_multiple must be >= 1");
    if (eval.n_starts < 1) fail("eval.n_starts must be >= 1");
    if (eval.methods.empty()) fail("eval.methods must not be empty");
    if (metrics.mmd_features < 1) fail("metrics.mmd_features must be positive");
}

// ---------------------------------------------------------------------------
// Data
// ---------------------------------------------------------------------------

TimeSeries synthetic_load(Index hours, Index channels, std::uint64_t seed) {
    if (hours < 1 || channels < 1) throw ArgumentError("synthetic load needs positive hours and channels");
    constexpr double kTwoPi = 6.283185307179586;
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::normal_distribution<double> normal(0.0, 1.0);
    TimeSeries s;
    s.values.resize(hours, channels);
    s.dt = 1.0;
    for (Index x = 0; x < channels; ++x) {
        const double base = 50.0 + 100.0 * unit(rng);
        const double daily_phase = kTwoPi * unit(rng);
        const double weekly_phase = kTwoPi * unit(rng);
        const double daily_amp = 0.25 + 0.15 * unit(rng);
        const double weekly_amp = 0.10 + 0.10 * unit(rng);
        const double trend = 2e-5 * unit(rng);
        for (Index t = 0; t < hours; ++t) {
            const double tt = static_cast<double>(t);
            const double v = base * (1.0 + daily_amp * std::sin(kTwoPi * tt / 24.0 + daily_phase) +
                                     weekly_amp * std::sin(kTwoPi * tt / 168.0 + weekly_phase) + trend * tt +
                                     0.05 * normal(rng));
            s.values(t, x) = std::max(0.0, v);
        }
    }
    return s;
}

namespace {

TimeSeries every_nth(const TimeSeries& s, Index stride) {
    if (stride == 1) return s;
    const Index n = (s.length() + stride - 1) / stride;
    TimeSeries out;
    out.values.resize(n, s.dim());
    for (Index i = 0; i < n; ++i) out.values.row(i) = s.values.row(i * stride);
    out.dt = s.dt * static_cast<double>(stride);
    out.t0 = s.t0;
    return out;
}

TimeSeries concat(const TimeSeries& a, const TimeSeries& b) {
    TimeSeries out = a;
    out.values.resize(a.length() + b.length(), a.dim());
    out.values.topRows(a.length()) = a.values;
    out.values.bottomRows(b.length()) = b.values;
    return out;
}

}  // namespace

std::pair<TimeSeries, TimeSeries> load_segments(const ExperimentConfig& cfg, std::vector<std::string>* names) {
    cfg.validate();
    TimeSeries full;
    Index split = 0;
    std::vector<std::string> channel_names;
    const auto& d = cfg.data;

    if (d.source == DataSource::System) {
        const dynsys::OdeSystem sys = dynsys::make_system(d.system, d.params);
        dynsys::TrajectoryConfig tc;
        tc.dt = d.dt > 0.0 ? d.dt : dynsys::reference_dt(d.system);
        tc.n_steps = d.n_steps;
        tc.burn_in = d.burn_in;
        tc.seed = d.seed;
        const Index n_out = d.n_steps - d.burn_in;
        const Index raw_split = static_cast<Index>(std::llround(cfg.split.train_fraction * static_cast<double>(n_out)));
        if (cfg.split.kind == SplitKind::RegimeSwitch) {
            dynsys::RegimeSwitchSpec spec = dynsys::default_regime_switch(raw_split);
            for (const auto& [k, v] : d.params) spec.regime_a[k] = v;
            spec.regime_b = cfg.split.regime_b;
            const auto rs = dynsys::integrate_regime_switch(sys, spec, tc);
            full = concat(rs.train, rs.test);
        } else {
            full = dynsys::integrate(sys, tc);
        }
        // The first kept sample at or after the split belongs to the test segment.
        split = (raw_split + d.stride - 1) / d.stride;
        full = every_nth(full, d.stride);
    } else {
        if (d.source == DataSource::Csv) {
            auto ing = csv::ingest(d.csv_path, d.log1p);
            full = std::move(ing.series);
            channel_names = std::move(ing.channel_names);
        } else {
            full = synthetic_load(d.n_steps, d.load_channels, d.seed);
            if (d.log1p) full.values = full.values.unaryExpr([](double v) { return std::log1p(v); });
            for (Index x = 0; x < full.dim(); ++x) channel_names.push_back("load" + std::to_string(x));
        }
        full = every_nth(full, d.stride);
        split = static_cast<Index>(std::llround(cfg.split.train_fraction * static_cast<double>(full.length())));
    }
    if (split < 1 || split >= full.length()) throw ConfigError("train/test split leaves an empty segment");
    if (names != nullptr) *names = channel_names;
    return {full.slice(0, split), full.slice(split, full.length() - split)};
}

PreparedData prepare_data(const ExperimentConfig& cfg) {
    PreparedData out;
    auto [train, test] = load_segments(cfg, &out.channel_names);
    if (out.channel_names.empty()) {
        for (Index x = 0; x < train.dim(); ++x) out.channel_names.push_back("x" + std::to_string(x));
    }
    if (cfg.standardization == StatsSource::Train) {
        out.stats = Standardizer::fit(train.values);
    } else {
        Matrix both(train.length() + test.length(), train.dim());
        both.topRows(train.length()) = train.values;
        both.bottomRows(test.length()) = test.values;
        out.stats = Standardizer::fit(both);
    }
    out.train = out.stats.apply(train);
    out.test = out.stats.apply(test);
    out.log1p = cfg.data.log1p && cfg.data.source != DataSource::System;
    return out;
}

// ---------------------------------------------------------------------------
// Model
// ---------------------------------------------------------------------------

Model train_model(const TimeSeries& train, const ModelConfig& cfg, std::uint64_t seed) {
    if (cfg.window < 1) throw ConfigError("model.window must be resolved before training");
    const Index L = cfg.window;
    if (train.length() < L + 2) throw ConfigError("training segment is shorter than the window plus two samples");

    const hankel::DelayTensor all = hankel::hankelize(train, L);
    const Index k_all = all.count();
    const Index k = std::min(k_all, cfg.max_train_windows);
    hankel::DelayTensor sub;
    sub.window = all.window;
    sub.channels = all.channels;
    sub.data.resize(k, all.data.cols());
    for (Index i = 0; i < k; ++i) {
        // Evenly spaced window starts, first and last included.
        const Index src = k == 1 ? 0 : (i * (k_all - 1)) / (k - 1);
        sub.data.row(i) = all.data.row(src);
        sub.origin.push_back(all.origin[static_cast<std::size_t>(src)]);
    }

    Model m;
    m.train_hash = hash_matrix(train.values);
    m.seed = seed;
    m.encoder = spectral::SpectralModel::fit(sub, cfg.encoder, cfg.rank, spectral::Provenance{seed, m.train_hash});

    const Index n_pairs = train.length() - L;
    const Index stride = std::max<Index>(1, (n_pairs + cfg.max_decoder_pairs - 1) / cfg.max_decoder_pairs);
    gplm::TrainingPairs pairs = gplm::build_pairs(train, m.encoder, stride);
    m.decoder = gplm::GplmDecoder::fit(std::move(pairs.latents), std::move(pairs.targets), cfg.decoder, cfg.noise_var);
    return m;
}

Model train_model(const PreparedData& data, const ExperimentConfig& cfg) {
    ModelConfig mc = cfg.model;
    mc.window = cfg.window();
    Model m = train_model(data.train, mc, cfg.data.seed);
    m.stats = data.stats;
    m.log1p = data.log1p;
    m.channel_names = data.channel_names;
    return m;
}

// ---------------------------------------------------------------------------
// Evaluation
// ---------------------------------------------------------------------------

std::vector<Index> select_starts(Index test_len, Index ell_max, Index horizon, Index n_starts,
                                 std::uint64_t seed, bool* with_replacement) {
    if (n_starts < 1) throw ConfigError("n_starts must be >= 1");
    const Index lo = ell_max;
    const Index hi = test_len - horizon;
    if (hi < lo) {
        throw ConfigError("admissible start region is empty: need test length >= ell_max + H (" +
                          std::to_string(test_len) + " < " + std::to_string(ell_max) + " + " +
                          std::to_string(horizon) + ")");
    }
    const Index region = hi - lo + 1;
    std::mt19937_64 rng(seed);
    std::vector<Index> starts;
    const bool replace = region < n_starts;
    if (replace) {
        std::uniform_int_distribution<Index> pick(lo, hi);
        for (Index i = 0; i < n_starts; ++i) starts.push_back(pick(rng));
    } else {
        std::vector<Index> pool(static_cast<std::size_t>(region));
        std::iota(pool.begin(), pool.end(), lo);
        for (Index i = 0; i < n_starts; ++i) {
            std::uniform_int_distribution<Index> pick(i, region - 1);
            std::swap(pool[static_cast<std::size_t>(i)], pool[static_cast<std::size_t>(pick(rng))]);
        }
        starts.assign(pool.begin(), pool.begin() + n_starts);
    }
    std::sort(starts.begin(), starts.end());
    if (with_replacement != nullptr) *with_replacement = replace;
    return starts;
}

std::pair<double, double> mean_std(const std::vector<double>& v) {
    if (v.empty()) return {std::nan(""), std::nan("")};
    double sum = 0.0;
    for (double x : v) sum += x;
    const double mean = sum / static_cast<double>(v.size());
    if (v.size() < 2) return {mean, 0.0};
    double ss = 0.0;
    for (double x : v) ss += (x - mean) * (x - mean);
    return {mean, std::sqrt(ss / static_cast<double>(v.size() - 1))};
}

std::vector<AggregateRow> aggregate(const std::vector<SweepRow>& rows) {
    std::vector<AggregateRow> out;
    std::vector<std::vector<const SweepRow*>> groups;
    for (const auto& r : rows) {
        std::size_t g = 0;
        for (; g < out.size(); ++g) {
            if (out[g].method == r.method && out[g].context_length == r.context_length &&
                out[g].temperature == r.temperature) {
                break;
            }
        }
        if (g == out.size()) {
            AggregateRow a;
            a.method = r.method;
            a.context_length = r.context_length;
            a.temperature = r.temperature;
            out.push_back(a);
            groups.emplace_back();
        }
        groups[g].push_back(&r);
    }
    for (std::size_t g = 0; g < out.size(); ++g) {
        auto& a = out[g];
        std::vector<double> mse, acf, spec, mmd;
        Index longest = 0;
        for (const SweepRow* r : groups[g]) {
            ++a.n;
            if (r->diverged_step >= 0) ++a.n_diverged;
            if (r->steps < 1) continue;
            mse.push_back(r->report.mse);
            acf.push_back(r->report.acf_mse);
            spec.push_back(r->report.spec_div);
            mmd.push_back(r->report.mmd2);
            longest = std::max(longest, r->steps);
        }
        std::tie(a.mse_mean, a.mse_std) = mean_std(mse);
        std::tie(a.acf_mean, a.acf_std) = mean_std(acf);
        std::tie(a.spec_mean, a.spec_std) = mean_std(spec);
        std::tie(a.mmd_mean, a.mmd_std) = mean_std(mmd);
        a.mse_by_horizon = Vector::Zero(longest);
        for (Index h = 0; h < longest; ++h) {
            double s = 0.0;
            Index n = 0;
            for (const SweepRow* r : groups[g]) {
                if (r->steps > h) {
                    s += r->report.mse_by_horizon[h];
                    ++n;
                }
            }
            a.mse_by_horizon[h] = s / static_cast<double>(n);
        }
    }
    return out;
}

const AggregateRow& SweepResult::aggregate(rollout::Method method, Index context_length, double temperature) const {
    for (const auto& a : aggregates) {
        if (a.method == method && a.context_length == context_length && a.temperature == temperature) return a;
    }
    throw ArgumentError("no aggregate for " + std::string(rollout::to_string(method)) + " ell=" +
                        std::to_string(context_length) + " temperature=" + csv::format_double(temperature));
}

std::vector<Index> experiment_starts(const ExperimentConfig& cfg, const PreparedData& data, bool* with_replacement) {
    const Index L = cfg.window();
    Index mult = cfg.eval.temperature_context_multiple;
    for (Index m : cfg.eval.context_multiples) mult = std::max(mult, m);
    return select_starts(data.test.length(), mult * L, cfg.eval.horizon, cfg.eval.n_starts, cfg.eval.seed,
                         with_replacement);
}

namespace {

struct Cell {
    rollout::Method method;
    Index ell;
    double temperature;
    Index start;
};

SweepRow run_cell(const Cell& cell, const ExperimentConfig& cfg, const Model& model, const PreparedData& data) {
    rollout::RolloutConfig rc;
    rc.horizon = cfg.eval.horizon;
    rc.method = cell.method;
    rc.context_length = cell.ell;
    rc.icm = cfg.icm;
    rc.icm.temperature = cell.temperature;
    rc.stochastic = cfg.eval.stochastic;
    rc.seed = cfg.eval.seed ^ (static_cast<std::uint64_t>(cell.start) * 0x9e3779b97f4a7c15ULL);

    const TimeSeries prefix = data.test.slice(cell.start - cell.ell, cell.ell);
    SweepRow row;
    row.method = cell.method;
    row.context_length = cell.ell;
    row.temperature = cell.temperature;
    row.start = cell.start;
    row.forecast = rollout::roll(prefix, model.encoder, model.decoder, rc);
    row.steps = row.forecast.steps();
    row.diverged_step = row.forecast.divergence_step.value_or(-1);
    row.context_count = row.forecast.context_count;
    if (row.steps > 0) {
        const Matrix truth = data.test.values.middleRows(cell.start, row.steps);
        row.report = metrics::evaluate(row.forecast.values, truth, cfg.metrics);
        double ent = 0.0, gv = 0.0;
        for (const auto& dg : row.forecast.diagnostics) {
            ent += dg.weight_entropy;
            gv += dg.gamma_var;
        }
        row.mean_entropy = ent / static_cast<double>(row.steps);
        row.mean_gamma_var = gv / static_cast<double>(row.steps);
    } else {
        const double nan = std::nan("");
        row.report.mse = row.report.acf_mse = row.report.spec_div = row.report.mmd2 = nan;
    }
    return row;
}

SweepResult run_cells(const std::string& kind, const std::vector<Cell>& cells, std::vector<Index> starts,
                      bool replaced, const ExperimentConfig& cfg, const Model& model, const PreparedData& data) {
    SweepResult res;
    res.kind = kind;
    res.starts = std::move(starts);
    res.starts_with_replacement = replaced;
    res.rows.resize(cells.size());
    std::string failure;
    std::string failure_kind;
    const auto n = static_cast<long>(cells.size());
#pragma omp parallel for schedule(dynamic)
    for (long i = 0; i < n; ++i) {
        const Cell& c = cells[static_cast<std::size_t>(i)];
        try {
            res.rows[static_cast<std::size_t>(i)] = run_cell(c, cfg, model, data);
        } catch (const std::exception& e) {
            const auto* le = dynamic_cast<const Error*>(&e);
#pragma omp critical(lisa_sweep_failure)
            if (failure.empty()) {
                failure_kind = le != nullptr ? le->kind() : "internal";
                failure = std::string(rollout::to_string(c.method)) + " ell=" + std::to_string(c.ell) +
                          " temperature=" + csv::format_double(c.temperature) +
                          " start=" + std::to_string(c.start) + ": " + e.what();
            }
        }
    }
    if (!failure.empty()) throw Error(failure_kind, failure);
    res.aggregates = aggregate(res.rows);
    return res;
}

}  // namespace

SweepResult run_context_sweep(const ExperimentConfig& cfg, const Model& model, const PreparedData& data) {
    if (model.window() != cfg.window()) throw ConfigError("model window does not match the config window");
    bool replaced = false;
    const auto starts = experiment_starts(cfg, data, &replaced);
    const Index L = model.window();
    std::vector<Cell> cells;
    for (Index m : cfg.eval.context_multiples) {
        for (auto method : cfg.eval.methods) {
            for (Index t0 : starts) cells.push_back({method, m * L, cfg.icm.temperature, t0});
        }
    }
    return run_cells("context", cells, starts, replaced, cfg, model, data);
}

SweepResult run_temperature_sweep(const ExperimentConfig& cfg, const Model& model, const PreparedData& data) {
    if (model.window() != cfg.window()) throw ConfigError("model window does not match the config window");
    if (cfg.eval.temperatures.empty()) throw ConfigError("eval.temperatures must not be empty");
    bool replaced = false;
    const auto starts = experiment_starts(cfg, data, &replaced);
    const Index ell = cfg.eval.temperature_context_multiple * model.window();
    std::vector<Cell> cells;
    for (double temp : cfg.eval.temperatures) {
        for (auto method : cfg.eval.methods) {
            for (Index t0 : starts) cells.push_back({method, ell, temp, t0});
        }
    }
    return run_cells("temperature", cells, starts, replaced, cfg, model, data);
}

// ---------------------------------------------------------------------------
// Output
// ---------------------------------------------------------------------------

std::string forecast_to_csv(const rollout::Forecast& f, const std::vector<std::string>& names,
                            const Matrix* values_override) {
    const Matrix& values = values_override != nullptr ? *values_override : f.values;
    csv::Table t;
    t.header.push_back("step");
    for (Index x = 0; x < values.cols(); ++x) {
        t.header.push_back(static_cast<std::size_t>(x) < names.size() ? names[static_cast<std::size_t>(x)]
                                                                      : "x" + std::to_string(x));
    }
    for (const char* h : {"variance", "gamma_ctx", "gamma_var", "entropy"}) t.header.emplace_back(h);
    for (Index i = 0; i < values.rows(); ++i) {
        std::vector<std::string> row{std::to_string(i + 1)};
        for (Index x = 0; x < values.cols(); ++x) row.push_back(csv::format_double(values(i, x)));
        row.push_back(f.per_step_variance ? csv::format_double((*f.per_step_variance)[i]) : "");
        const auto& d = f.diagnostics[static_cast<std::size_t>(i)];
        row.push_back(csv::format_double(d.gamma_ctx));
        row.push_back(csv::format_double(d.gamma_var));
        row.push_back(csv::format_double(d.weight_entropy));
        t.add_row(std::move(row));
    }
    return t.to_string();
}

namespace {

void write_text(const std::filesystem::path& path, const std::string& text) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open " + path.string() + " for writing");
    f << text;
    if (!f) throw IoError("write failed for " + path.string());
}

std::string meta(const metrics::MetricReport& r, const char* key) {
    auto it = r.metadata.find(key);
    return it == r.metadata.end() ? "" : it->second;
}

}  // namespace

void write_sweep(const std::filesystem::path& dir, const SweepResult& res, const ExperimentConfig& cfg,
                 const PreparedData& data) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw IoError("cannot create output directory " + dir.string() + ": " + ec.message());

    ExperimentConfig resolved = cfg;
    resolved.model.window = cfg.window();
    if (resolved.data.source == DataSource::System && !(resolved.data.dt > 0.0)) {
        resolved.data.dt = dynsys::reference_dt(resolved.data.system);
    }
    json j = to_json(resolved);
    j["resolved"] = {{"sweep", res.kind},
                     {"starts", res.starts},
                     {"starts_with_replacement", res.starts_with_replacement},
                     {"train_length", data.train.length()},
                     {"test_length", data.test.length()},
                     {"standardizer_mean", std::vector<double>(data.stats.mean.data(),
                                                               data.stats.mean.data() + data.stats.mean.size())},
                     {"standardizer_scale", std::vector<double>(data.stats.scale.data(),
                                                                data.stats.scale.data() + data.stats.scale.size())},
                     {"standardizer_flagged", data.stats.flagged}};
    write_text(dir / "config.resolved", j.dump(2) + "\n");

    csv::Table raw;
    raw.header = {"method",    "ell",          "temperature",   "start",          "steps",
                  "diverged_step", "context_count", "mse",       "acf_mse",        "spec_div",
                  "mmd2",      "mean_entropy", "mean_gamma_var", "spec_degenerate", "acf_degenerate",
                  "mmd_undefined"};
    for (const auto& r : res.rows) {
        raw.add_row({std::string(rollout::to_string(r.method)), std::to_string(r.context_length),
                     csv::format_double(r.temperature), std::to_string(r.start), std::to_string(r.steps),
                     std::to_string(r.diverged_step), std::to_string(r.context_count),
                     csv::format_double(r.report.mse), csv::format_double(r.report.acf_mse),
                     csv::format_double(r.report.spec_div), csv::format_double(r.report.mmd2),
                     csv::format_double(r.mean_entropy), csv::format_double(r.mean_gamma_var),
                     meta(r.report, "spec_degenerate"), meta(r.report, "acf_degenerate"),
                     meta(r.report, "mmd_undefined")});
    }
    raw.write(dir / "raw_metrics.csv");

    csv::Table agg;
    agg.header = {"method",     "ell",         "temperature", "n",         "n_diverged",
                  "mse_mean",   "mse_std",     "acf_mse_mean", "acf_mse_std", "spec_div_mean",
                  "spec_div_std", "mmd2_mean", "mmd2_std"};
    csv::Table horizon;
    horizon.header = {"method", "ell", "temperature", "step", "mse_mean"};
    for (const auto& a : res.aggregates) {
        const std::string method(rollout::to_string(a.method));
        agg.add_row({method, std::to_string(a.context_length), csv::format_double(a.temperature),
                     std::to_string(a.n), std::to_string(a.n_diverged), csv::format_double(a.mse_mean),
                     csv::format_double(a.mse_std), csv::format_double(a.acf_mean), csv::format_double(a.acf_std),
                     csv::format_double(a.spec_mean), csv::format_double(a.spec_std),
                     csv::format_double(a.mmd_mean), csv::format_double(a.mmd_std)});
        for (Index h = 0; h < a.mse_by_horizon.size(); ++h) {
            horizon.add_row({method, std::to_string(a.context_length), csv::format_double(a.temperature),
                             std::to_string(h + 1), csv::format_double(a.mse_by_horizon[h])});
        }
    }
    agg.write(dir / "aggregates.csv");
    horizon.write(dir / "mse_by_horizon.csv");

    if (cfg.eval.write_forecasts) {
        for (const auto& r : res.rows) {
            std::string name = "forecast_" + std::string(rollout::to_string(r.method)) + "_ell" +
                               std::to_string(r.context_length);
            if (res.kind == "temperature") name += "_temp" + csv::format_double(r.temperature);
            name += "_" + std::to_string(r.start) + ".csv";
            write_text(dir / name, forecast_to_csv(r.forecast, data.channel_names));
        }
    }
    csv::write_series(dir / "trajectory_export.csv", data.test, data.channel_names);
}

}  // namespace lisa::harness
