#pragma once

// Experiment driver: data preparation, model training, multi-start
// evaluation, context-length and temperature sweeps, and plot-ready output.

#include "lisa/dynsys.hpp"
#include "lisa/gplm.hpp"
#include "lisa/icm.hpp"
#include "lisa/metrics.hpp"
#include "lisa/rollout.hpp"
#include "lisa/spectral.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace lisa::harness {

// ---------------------------------------------------------------------------
// Standardization
// ---------------------------------------------------------------------------

/// x -> (x - mean) / scale per channel; scale is the population standard
/// deviation, replaced by 1 (and flagged) for constant channels.
struct Standardizer {
    Vector mean;
    Vector scale;
    std::vector<bool> flagged;

    static Standardizer fit(const Matrix& values);
    Matrix apply(const Matrix& values) const;
    TimeSeries apply(const TimeSeries& series) const;
    Matrix invert(const Matrix& standardized) const;
};

enum class StatsSource { Train, Global };

struct Standardized {
    TimeSeries series;
    Standardizer stats;
};

/// Standardize `series` with statistics computed on `stats_source`.
Standardized standardize(const TimeSeries& series, const Matrix& stats_source);

// ---------------------------------------------------------------------------
// Configuration
// ---------------------------------------------------------------------------

enum class DataSource { System, Csv, SyntheticLoad };
enum class SplitKind { Chronological, RegimeSwitch };

struct DataConfig {
    DataSource source = DataSource::System;
    dynsys::SystemKind system = dynsys::SystemKind::Lorenz63;
    dynsys::ParamSet params;
    double dt = 0.0;  ///< <= 0: reference dt of the system
    Index n_steps = 20000;
    Index burn_in = 2000;
    /// Keep every stride-th sample after integration (desk-scale resampling).
    Index stride = 1;
    std::uint64_t seed = 0;
    std::string csv_path;
    bool log1p = false;
    Index load_channels = 6;  ///< synthetic load generator
};

struct SplitConfig {
    SplitKind kind = SplitKind::Chronological;
    double train_fraction = 0.7;
    dynsys::ParamSet regime_b{{"sigma", 16.0}, {"rho", 50.0}, {"beta", 3.0}};
};

struct ModelConfig {
    Index window = 0;  ///< <= 0: reference window of the system divided by stride
    Index rank = 10;
    Index max_train_windows = 2000;
    Index max_decoder_pairs = 2000;
    spectral::KernelParams encoder;
    gplm::LatentKernel decoder{1.0, 0.0};
    double noise_var = gplm::kDefaultNoiseVar;
};

struct EvalConfig {
    Index horizon = 300;
    std::vector<Index> context_multiples{1, 2, 4, 8, 16};
    /// Seven values evenly spaced in log10 from 1e-3 to 1e6.
    std::vector<double> temperatures{1e-3, 0.031622776601683791, 1.0, 31.622776601683793, 1e3, 31622.776601683792, 1e6};
    Index temperature_context_multiple = 16;
    Index n_starts = 10;
    std::uint64_t seed = 0;
    std::vector<rollout::Method> methods{rollout::Method::NLSA, rollout::Method::LISA, rollout::Method::ALSA};
    bool stochastic = false;
    bool write_forecasts = true;
};

struct ExperimentConfig {
    DataConfig data;
    SplitConfig split;
    StatsSource standardization = StatsSource::Train;
    ModelConfig model;
    icm::IcmConfig icm;
    EvalConfig eval;
    metrics::MetricOptions metrics;

    /// Throws ConfigError on unknown keys or invalid values.
    static ExperimentConfig from_json_text(const std::string& text);
    static ExperimentConfig from_file(const std::filesystem::path& path);
    /// Every field, defaults included.
    std::string to_json_text() const;
    /// Resolved delay-window length.
    Index window() const;
    void validate() const;
};

// ---------------------------------------------------------------------------
// Data
// ---------------------------------------------------------------------------

struct PreparedData {
    TimeSeries train;  ///< standardized
    TimeSeries test;   ///< standardized
    Standardizer stats;
    std::vector<std::string> channel_names;
    bool log1p = false;
};

/// Hourly multichannel load stand-in: daily and weekly cycles, trend, noise.
TimeSeries synthetic_load(Index hours, Index channels, std::uint64_t seed);

/// Raw (unstandardized) train/test segments according to the config.
std::pair<TimeSeries, TimeSeries> load_segments(const ExperimentConfig& cfg,
                                                std::vector<std::string>* channel_names = nullptr);

PreparedData prepare_data(const ExperimentConfig& cfg);

// ---------------------------------------------------------------------------
// Model
// ---------------------------------------------------------------------------

struct Model {
    spectral::SpectralModel encoder;
    gplm::GplmDecoder decoder;
    Standardizer stats;
    bool log1p = false;
    std::vector<std::string> channel_names;
    std::uint64_t train_hash = 0;  ///< hash of the standardized training matrix
    std::uint64_t seed = 0;

    Index window() const { return encoder.window(); }
};

/// Fits encoder and decoder on the (standardized) training segment only.
Model train_model(const TimeSeries& train, const ModelConfig& cfg, std::uint64_t seed);
Model train_model(const PreparedData& data, const ExperimentConfig& cfg);

// ---------------------------------------------------------------------------
// Evaluation
// ---------------------------------------------------------------------------

/// n start indices t0 with t0 >= ell_max and t0 + H <= test_len, sorted.
/// Sampled without replacement unless the region is smaller than n (then
/// with replacement and *with_replacement is set).
std::vector<Index> select_starts(Index test_len, Index ell_max, Index horizon, Index n_starts,
                                 std::uint64_t seed, bool* with_replacement = nullptr);

struct SweepRow {
    rollout::Method method = rollout::Method::NLSA;
    Index context_length = 0;
    double temperature = 1.0;
    Index start = 0;
    metrics::MetricReport report;
    Index steps = 0;
    Index diverged_step = -1;
    Index context_count = 0;
    double mean_entropy = 0.0;
    double mean_gamma_var = 1.0;
    rollout::Forecast forecast;
};

struct AggregateRow {
    rollout::Method method = rollout::Method::NLSA;
    Index context_length = 0;
    double temperature = 1.0;
    Index n = 0;
    Index n_diverged = 0;
    double mse_mean = 0.0, mse_std = 0.0;
    double acf_mean = 0.0, acf_std = 0.0;
    double spec_mean = 0.0, spec_std = 0.0;
    double mmd_mean = 0.0, mmd_std = 0.0;
    Vector mse_by_horizon;  ///< mean over starts
};

struct SweepResult {
    std::string kind;  ///< "context" or "temperature"
    std::vector<Index> starts;
    bool starts_with_replacement = false;
    std::vector<SweepRow> rows;
    std::vector<AggregateRow> aggregates;

    const AggregateRow& aggregate(rollout::Method method, Index context_length, double temperature) const;
};

/// Mean and sample standard deviation (0 for a single value).
std::pair<double, double> mean_std(const std::vector<double>& values);
std::vector<AggregateRow> aggregate(const std::vector<SweepRow>& rows);

/// Starts are drawn once with ell_max covering both sweeps so that rows of
/// the two sweeps line up.
std::vector<Index> experiment_starts(const ExperimentConfig& cfg, const PreparedData& data,
                                     bool* with_replacement = nullptr);

SweepResult run_context_sweep(const ExperimentConfig& cfg, const Model& model, const PreparedData& data);
SweepResult run_temperature_sweep(const ExperimentConfig& cfg, const Model& model, const PreparedData& data);

/// Writes config.resolved, raw_metrics.csv, aggregates.csv,
/// mse_by_horizon.csv, forecast_*.csv and trajectory_export.csv into `dir`.
void write_sweep(const std::filesystem::path& dir, const SweepResult& result, const ExperimentConfig& cfg,
                 const PreparedData& data);

/// Forecast table: step, per-channel values, variance, gamma_ctx, gamma_var, entropy.
std::string forecast_to_csv(const rollout::Forecast& forecast, const std::vector<std::string>& channel_names,
                            const Matrix* values_override = nullptr);

}  // namespace lisa::harness
