// lisa: command-line front end for simulation, training, forecasting, sweeps
// and metrics.

#include "lisa/artifact.hpp"
#include "lisa/csv.hpp"
#include "lisa/dynsys.hpp"
#include "lisa/harness.hpp"
#include "lisa/icpca.hpp"
#include "lisa/kernels.hpp"
#include "lisa/metrics.hpp"
#include "lisa/rollout.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <omp.h>

#include <algorithm>
#include <fstream>
#include <iostream>
#include <sstream>

using namespace lisa;
using json = nlohmann::ordered_json;

namespace {

struct ConfigArgs {
    std::string path;
    std::vector<std::string> sets;
    std::string system;
    Index window = -1;
    Index rank = -1;
    Index horizon = -1;
    Index n_starts = -1;
    long long seed = -1;
};

void add_config_flags(CLI::App* cmd, ConfigArgs& a) {
    cmd->add_option("-c,--config", a.path, "JSON experiment config (missing keys take defaults)");
    cmd->add_option("--set", a.sets, "override a config field, e.g. --set icm.k0=2 --set eval.context_multiples=[1,4]");
    cmd->add_option("--system", a.system, "shorthand for data.system");
    cmd->add_option("--window", a.window, "shorthand for model.window");
    cmd->add_option("--rank", a.rank, "shorthand for model.rank");
    cmd->add_option("--horizon", a.horizon, "shorthand for eval.horizon");
    cmd->add_option("--n-starts", a.n_starts, "shorthand for eval.n_starts");
    cmd->add_option("--seed", a.seed, "shorthand for eval.seed");
}

json parse_value(const std::string& text) {
    try {
        return json::parse(text);
    } catch (const json::exception&) {
        return text;  // bare word, e.g. --set data.system=Rossler
    }
}

void set_path(json& root, const std::string& dotted, json value) {
    json* node = &root;
    std::size_t pos = 0;
    while (true) {
        const auto dot = dotted.find('.', pos);
        const std::string key = dotted.substr(pos, dot == std::string::npos ? std::string::npos : dot - pos);
        if (key.empty()) throw ConfigError("malformed --set path '" + dotted + "'");
        if (dot == std::string::npos) {
            (*node)[key] = std::move(value);
            return;
        }
        if (!node->contains(key) || !(*node)[key].is_object()) (*node)[key] = json::object();
        node = &(*node)[key];
        pos = dot + 1;
    }
}

harness::ExperimentConfig load_config(const ConfigArgs& a) {
    json patch = json::object();
    if (!a.path.empty()) {
        std::ifstream f(a.path, std::ios::binary);
        if (!f) throw IoError("cannot open config " + a.path);
        try {
            patch = json::parse(f, nullptr, true, true);
        } catch (const json::parse_error& e) {
            throw ConfigError(std::string("config is not valid JSON: ") + e.what());
        }
    }
    if (!a.system.empty()) set_path(patch, "data.system", a.system);
    if (a.window >= 0) set_path(patch, "model.window", a.window);
    if (a.rank >= 0) set_path(patch, "model.rank", a.rank);
    if (a.horizon >= 0) set_path(patch, "eval.horizon", a.horizon);
    if (a.n_starts >= 0) set_path(patch, "eval.n_starts", a.n_starts);
    if (a.seed >= 0) set_path(patch, "eval.seed", a.seed);
    for (const auto& s : a.sets) {
        const auto eq = s.find('=');
        if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + s + "'");
        set_path(patch, s.substr(0, eq), parse_value(s.substr(eq + 1)));
    }
    return harness::ExperimentConfig::from_json_text(patch.dump());
}

void emit(const std::string& out_path, const std::string& text) {
    if (out_path.empty() || out_path == "-") {
        std::cout << text;
        return;
    }
    std::ofstream f(out_path, std::ios::binary);
    if (!f) throw IoError("cannot open " + out_path + " for writing");
    f << text;
}

json model_summary(const harness::Model& m) {
    std::vector<double> eig(m.encoder.eigenvalues().data(),
                            m.encoder.eigenvalues().data() + m.encoder.eigenvalues().size());
    return {{"window", m.window()},
            {"channels", m.encoder.channels()},
            {"rank", m.encoder.rank()},
            {"train_windows", m.encoder.train_count()},
            {"decoder_pairs", m.decoder.train_latents().rows()},
            {"encoder_epsilon", m.encoder.kernel().epsilon},
            {"decoder_epsilon", m.decoder.kernel().epsilon},
            {"eigenvalues", eig},
            {"train_hash", m.train_hash},
            {"warnings", m.encoder.warnings()}};
}

int run_sweep(const ConfigArgs& ca, const std::string& model_path, const std::string& out_dir, bool temperature) {
    const auto cfg = load_config(ca);
    harness::PreparedData data = harness::prepare_data(cfg);
    harness::Model model;
    std::filesystem::create_directories(out_dir);
    if (model_path.empty()) {
        model = harness::train_model(data, cfg);
        artifact::save(std::filesystem::path(out_dir) / "model.lisa", model);
    } else {
        model = artifact::load(model_path);
        // The artifact's standardizer is authoritative.
        const auto [train_raw, test_raw] = harness::load_segments(cfg);
        data.stats = model.stats;
        data.train = model.stats.apply(train_raw);
        data.test = model.stats.apply(test_raw);
        if (hash_matrix(data.train.values) != model.train_hash) {
            std::cerr << json{{"warning", "training segment differs from the one the model was fitted on"}}.dump()
                      << "\n";
        }
    }

    const auto res = temperature ? harness::run_temperature_sweep(cfg, model, data)
                                 : harness::run_context_sweep(cfg, model, data);
    harness::write_sweep(out_dir, res, cfg, data);

    json summary = json::array();
    for (const auto& a : res.aggregates) {
        summary.push_back({{"method", std::string(rollout::to_string(a.method))},
                           {"ell", a.context_length},
                           {"temperature", a.temperature},
                           {"mse_mean", a.mse_mean},
                           {"mmd2_mean", a.mmd_mean},
                           {"n_diverged", a.n_diverged}});
    }
    std::cout << summary.dump(2) << "\n";
    return 0;
}

// Forecast tables carry a step counter and per-step diagnostics next to the
// channels; keep only the channels.
std::string channels_only(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open " + path);
    static const std::vector<std::string> drop{"step", "variance", "gamma_ctx", "gamma_var", "entropy"};
    std::vector<bool> keep;
    std::string line, out;
    while (std::getline(f, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        std::vector<std::string> cells;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) cells.push_back(cell);
        if (!line.empty() && line.back() == ',') cells.emplace_back();
        if (keep.empty()) {
            for (const auto& c : cells) keep.push_back(std::find(drop.begin(), drop.end(), c) == drop.end());
        }
        std::string row;
        for (std::size_t i = 0; i < cells.size(); ++i) {
            if (i < keep.size() && !keep[i]) continue;
            if (!row.empty()) row += ',';
            row += cells[i];
        }
        out += row + "\n";
    }
    return out;
}

std::vector<std::pair<std::string, double>> parse_params(const std::vector<std::string>& items) {
    std::vector<std::pair<std::string, double>> out;
    for (const auto& s : items) {
        const auto eq = s.find('=');
        if (eq == std::string::npos) throw ArgumentError("--param expects name=value, got '" + s + "'");
        try {
            out.emplace_back(s.substr(0, eq), std::stod(s.substr(eq + 1)));
        } catch (const std::logic_error&) {
            throw ArgumentError("--param value is not a number: '" + s + "'");
        }
    }
    return out;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"In-context spectral forecasting toolkit"};
    app.require_subcommand(1);
    int threads = 0;
    app.add_option("--threads", threads, "OpenMP threads (0 = runtime default)");

    // simulate
    auto* sim = app.add_subcommand("simulate", "integrate a benchmark system and write CSV");
    std::string sim_system = "Lorenz63", sim_out;
    Index sim_steps = 10000, sim_burn = 0, sim_stride = 1, sim_switch = -1;
    double sim_dt = 0.0;
    std::uint64_t sim_seed = 0;
    std::vector<std::string> sim_params;
    sim->add_option("--system", sim_system, "system name")->capture_default_str();
    sim->add_option("--n-steps", sim_steps, "integration steps including burn-in")->capture_default_str();
    sim->add_option("--burn-in", sim_burn, "steps discarded at the start")->capture_default_str();
    sim->add_option("--dt", sim_dt, "step size (0 = reference)")->capture_default_str();
    sim->add_option("--stride", sim_stride, "keep every n-th sample")->capture_default_str();
    sim->add_option("--seed", sim_seed, "initial-condition seed")->capture_default_str();
    sim->add_option("--param", sim_params, "parameter override name=value");
    sim->add_option("--regime-switch-at", sim_switch, "Lorenz63 only: switch to regime B at this retained sample");
    sim->add_option("-o,--out", sim_out, "output CSV (stdout if omitted)");

    // train
    auto* train = app.add_subcommand("train", "fit encoder and decoder on the training segment");
    ConfigArgs train_cfg;
    std::string train_out = "model.lisa";
    add_config_flags(train, train_cfg);
    train->add_option("-o,--out", train_out, "model artifact path")->capture_default_str();

    // forecast
    auto* fc = app.add_subcommand("forecast", "roll a trained model forward from a prefix CSV");
    std::string fc_model, fc_input, fc_out, fc_method = "ALSA", fc_mode_cfg;
    Index fc_horizon = 100, fc_context = 0;
    bool fc_standardized = false, fc_stochastic = false;
    std::uint64_t fc_seed = 0;
    icm::IcmConfig fc_icm;
    fc->add_option("-m,--model", fc_model, "model artifact")->required();
    fc->add_option("-i,--input", fc_input, "prefix CSV in original units")->required();
    fc->add_option("--horizon", fc_horizon, "steps to forecast")->capture_default_str();
    fc->add_option("--method", fc_method, "NLSA, LISA or ALSA")->capture_default_str();
    fc->add_option("--context-length", fc_context, "observed samples used as context (0 = whole prefix)");
    fc->add_option("--temperature", fc_icm.temperature)->capture_default_str();
    fc->add_option("--k0", fc_icm.k0)->capture_default_str();
    fc->add_option("--sigma2", fc_icm.sigma2)->capture_default_str();
    fc->add_option("--tau2", fc_icm.tau2)->capture_default_str();
    fc->add_option("--gain", fc_icm.gain)->capture_default_str();
    fc->add_option("--icm-beta", fc_icm.beta)->capture_default_str();
    fc->add_option("--icm-epsilon", fc_icm.epsilon, "0 = inherit the decoder's")->capture_default_str();
    fc->add_flag("--stochastic", fc_stochastic, "LISA: sample residuals from the GP posterior");
    fc->add_option("--seed", fc_seed)->capture_default_str();
    fc->add_flag("--standardized", fc_standardized, "write standardized values instead of original units");
    fc->add_option("-o,--out", fc_out, "output CSV (stdout if omitted)");

    // sweeps
    auto* sc = app.add_subcommand("sweep-context", "context-length sweep over NLSA/LISA/ALSA");
    ConfigArgs sc_cfg;
    std::string sc_model, sc_out = "sweep_context";
    add_config_flags(sc, sc_cfg);
    sc->add_option("-m,--model", sc_model, "reuse a saved model instead of training");
    sc->add_option("-o,--out", sc_out, "output directory")->capture_default_str();

    auto* st = app.add_subcommand("sweep-temperature", "in-context temperature sweep at fixed context length");
    ConfigArgs st_cfg;
    std::string st_model, st_out = "sweep_temperature";
    add_config_flags(st, st_cfg);
    st->add_option("-m,--model", st_model, "reuse a saved model instead of training");
    st->add_option("-o,--out", st_out, "output directory")->capture_default_str();

    // icpca-demo
    auto* pca = app.add_subcommand("icpca-demo", "in-context PCA adaptation toy");
    Index pca_dim = 8, pca_rank = 3, pca_train = 5000;
    std::vector<Index> pca_lengths{10, 20, 50, 100, 200, 500, 1000, 2000, 5000};
    std::uint64_t pca_seed = 0;
    std::string pca_out;
    pca->add_option("--dim", pca_dim)->capture_default_str();
    pca->add_option("--rank", pca_rank)->capture_default_str();
    pca->add_option("--train-samples", pca_train)->capture_default_str();
    pca->add_option("--lengths", pca_lengths, "context lengths")->delimiter(',');
    pca->add_option("--seed", pca_seed)->capture_default_str();
    pca->add_option("-o,--out", pca_out, "output CSV (stdout if omitted)");

    // metrics
    auto* met = app.add_subcommand("metrics", "compare a forecast CSV with a truth CSV");
    std::string met_f, met_t, met_div = "JS";
    metrics::MetricOptions met_opts;
    bool met_exact = false;
    met->add_option("-f,--forecast", met_f, "forecast CSV")->required();
    met->add_option("-t,--truth", met_t, "truth CSV")->required();
    met->add_option("--tau-max", met_opts.tau_max, "-1 = min(H-1, 50)")->capture_default_str();
    met->add_option("--welch-segment", met_opts.welch.segment_length, "0 = min(256, H)")->capture_default_str();
    met->add_option("--divergence", met_div, "JS or KL")->capture_default_str();
    met->add_option("--mmd-features", met_opts.mmd_features)->capture_default_str();
    met->add_option("--mmd-bandwidth", met_opts.mmd_bandwidth, "0 = median heuristic")->capture_default_str();
    met->add_option("--mmd-seed", met_opts.mmd_seed)->capture_default_str();
    met->add_flag("--exact-mmd", met_exact, "also report the exact-kernel MMD^2");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << json{{"error", "usage"}, {"message", e.what()}}.dump() << "\n";
        return 2;
    }
    if (threads > 0) omp_set_num_threads(threads);

    try {
        if (*sim) {
            const auto kind = dynsys::parse_system(sim_system);
            dynsys::ParamSet overrides;
            for (const auto& [k, v] : parse_params(sim_params)) overrides[k] = v;
            const auto sys = dynsys::make_system(kind, overrides);
            dynsys::TrajectoryConfig tc;
            tc.dt = sim_dt > 0.0 ? sim_dt : dynsys::reference_dt(kind);
            tc.n_steps = sim_steps;
            tc.burn_in = sim_burn;
            tc.seed = sim_seed;
            TimeSeries s;
            if (sim_switch >= 0) {
                auto spec = dynsys::default_regime_switch(sim_switch);
                for (const auto& [k, v] : overrides) spec.regime_a[k] = v;
                const auto rs = dynsys::integrate_regime_switch(sys, spec, tc);
                s.values.resize(rs.train.length() + rs.test.length(), rs.train.dim());
                s.values << rs.train.values, rs.test.values;
                s.dt = tc.dt;
            } else {
                s = dynsys::integrate(sys, tc);
            }
            if (sim_stride < 1) throw ArgumentError("--stride must be at least 1");
            if (sim_stride > 1) {
                TimeSeries sub;
                const Index n = (s.length() + sim_stride - 1) / sim_stride;
                sub.values.resize(n, s.dim());
                for (Index i = 0; i < n; ++i) sub.values.row(i) = s.values.row(i * sim_stride);
                sub.dt = s.dt * static_cast<double>(sim_stride);
                sub.t0 = s.t0;
                s = std::move(sub);
            }
            emit(sim_out, csv::series_to_string(s));
        } else if (*train) {
            const auto cfg = load_config(train_cfg);
            const auto data = harness::prepare_data(cfg);
            const auto model = harness::train_model(data, cfg);
            artifact::save(train_out, model);
            std::cout << model_summary(model).dump(2) << "\n";
        } else if (*fc) {
            const auto model = artifact::load(fc_model);
            auto ing = csv::ingest(fc_input, model.log1p);
            if (ing.series.dim() != model.encoder.channels()) {
                throw ArgumentError("input has " + std::to_string(ing.series.dim()) + " channels, model expects " +
                                    std::to_string(model.encoder.channels()));
            }
            const TimeSeries prefix = model.stats.apply(ing.series);
            rollout::RolloutConfig rc;
            rc.horizon = fc_horizon;
            rc.method = rollout::parse_method(fc_method);
            rc.context_length = fc_context > 0 ? fc_context : prefix.length();
            rc.icm = fc_icm;
            rc.stochastic = fc_stochastic;
            rc.seed = fc_seed;
            const auto f = rollout::roll(prefix, model.encoder, model.decoder, rc);
            Matrix out = f.values;
            if (!fc_standardized) {
                out = model.stats.invert(out);
                if (model.log1p) out = csv::invert_log1p(out);
            }
            auto names = model.channel_names.empty() ? ing.channel_names : model.channel_names;
            emit(fc_out, harness::forecast_to_csv(f, names, &out));
            if (f.diverged()) {
                std::cerr << json{{"warning", "diverged"},
                                  {"step", *f.divergence_step},
                                  {"message", f.divergence_reason}}
                                 .dump()
                          << "\n";
            }
        } else if (*sc) {
            return run_sweep(sc_cfg, sc_model, sc_out, false);
        } else if (*st) {
            return run_sweep(st_cfg, st_model, st_out, true);
        } else if (*pca) {
            const auto rows = icpca::adaptation_demo(pca_dim, pca_rank, pca_lengths, pca_train, pca_seed);
            csv::Table t;
            t.header = {"context_length", "relative_map_error", "estimated_recon_mse", "oracle_recon_mse",
                        "unadapted_recon_mse"};
            for (const auto& r : rows) {
                t.add_row({std::to_string(r.context_length), csv::format_double(r.relative_map_error),
                           csv::format_double(r.estimated_recon_mse), csv::format_double(r.oracle_recon_mse),
                           csv::format_double(r.unadapted_recon_mse)});
            }
            emit(pca_out, t.to_string());
        } else if (*met) {
            if (met_div == "JS") {
                met_opts.divergence = metrics::Divergence::JS;
            } else if (met_div == "KL") {
                met_opts.divergence = metrics::Divergence::KL;
            } else {
                throw ArgumentError("--divergence must be JS or KL");
            }
            const auto f = csv::ingest_string(channels_only(met_f), false).series.values;
            const auto t = csv::ingest_string(channels_only(met_t), false).series.values;
            const auto report = metrics::evaluate(f, t, met_opts);
            json j = json::object();
            for (const auto& [k, v] : metrics::flatten(report)) j[k] = v;
            if (met_exact && t.rows() >= 2) {
                const double h = met_opts.mmd_bandwidth > 0.0 ? met_opts.mmd_bandwidth : metrics::median_bandwidth(t, f);
                j["mmd2_exact"] = csv::format_double(metrics::mmd2_exact(t, f, metrics::RbfKernel{h}));
            }
            std::cout << j.dump(2) << "\n";
        }
    } catch (const Error& e) {
        json err{{"error", e.kind()}, {"message", e.what()}};
        if (const auto* pe = dynamic_cast<const ParseError*>(&e)) {
            err["row"] = pe->row();
            err["column"] = pe->column();
        }
        std::cerr << err.dump() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << json{{"error", "internal"}, {"message", e.what()}}.dump() << "\n";
        return 1;
    }
    return 0;
}
