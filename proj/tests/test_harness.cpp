#include "lisa/artifact.hpp"
#include "lisa/csv.hpp"
#include "lisa/hankel.hpp"
#include "lisa/harness.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

using namespace lisa;
using namespace lisa::harness;
using rollout::Method;

namespace {

ExperimentConfig small_config() {
    ExperimentConfig c;
    c.data.n_steps = 4000;
    c.data.burn_in = 500;
    c.data.seed = 2;
    c.model.window = 6;
    c.model.rank = 6;
    c.model.max_train_windows = 500;
    c.model.max_decoder_pairs = 400;
    c.eval.horizon = 40;
    c.eval.context_multiples = {1, 2, 4};
    c.eval.temperatures = {0.1, 1.0, 1e6};
    c.eval.temperature_context_multiple = 4;
    c.eval.n_starts = 3;
    c.eval.seed = 5;
    return c;
}

struct Run {
    ExperimentConfig cfg;
    PreparedData data;
    Model model;
};

const Run& small_run() {
    static const Run r = [] {
        Run run;
        run.cfg = small_config();
        run.data = prepare_data(run.cfg);
        run.model = train_model(run.data, run.cfg);
        return run;
    }();
    return r;
}

std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

std::filesystem::path temp_dir(const std::string& name) {
    auto p = std::filesystem::temp_directory_path() / ("lisa_test_" + name);
    std::filesystem::remove_all(p);
    std::filesystem::create_directories(p);
    return p;
}

}  // namespace

TEST_SUITE("harness") {

TEST_CASE("standardizer") {
    Matrix x(4, 2);
    x << 1, 5, 2, 5, 3, 5, 4, 5;
    const Standardizer s = Standardizer::fit(x);
    CHECK(!s.flagged[0]);
    CHECK(s.flagged[1]);
    CHECK(s.scale[1] == 1.0);
    CHECK(s.scale[0] == doctest::Approx(std::sqrt(1.25)));
    const Matrix z = s.apply(x);
    CHECK(std::abs(z.col(0).mean()) < 1e-12);
    CHECK(z.col(1).isZero());
    CHECK((s.invert(z) - x).cwiseAbs().maxCoeff() < 1e-12);

    std::mt19937_64 rng(60);
    std::normal_distribution<double> g(3.0, 7.0);
    Matrix y(500, 3);
    for (Index i = 0; i < y.size(); ++i) y.data()[i] = g(rng);
    const Standardized st = standardize(TimeSeries{y, 0.1, 0.0}, y);
    for (Index c = 0; c < 3; ++c) {
        const Vector col = st.series.values.col(c);
        CHECK(std::abs(col.mean()) < 1e-10);
        CHECK(std::abs(std::sqrt(col.array().square().mean()) - 1.0) < 1e-10);
    }
    CHECK(((st.stats.invert(st.series.values) - y).array() / y.array().abs().max(1.0)).abs().maxCoeff() < 1e-12);
    CHECK_THROWS_AS(s.apply(Matrix::Zero(2, 3)), ArgumentError);
}

TEST_CASE("regime-B test segment keeps a nonzero mean under training statistics") {
    ExperimentConfig c = small_config();
    c.split.kind = SplitKind::RegimeSwitch;
    const PreparedData d = prepare_data(c);
    CHECK(std::abs(d.train.values.col(2).mean()) < 1e-10);
    CHECK(std::abs(d.test.values.col(2).mean()) > 0.5);
}

TEST_CASE("global standardization uses both segments") {
    ExperimentConfig c = small_config();
    c.standardization = StatsSource::Global;
    const PreparedData d = prepare_data(c);
    const Index n = d.train.length() + d.test.length();
    const double mean = (d.train.values.col(0).sum() + d.test.values.col(0).sum()) / static_cast<double>(n);
    CHECK(std::abs(mean) < 1e-10);
}

TEST_CASE("chronological split and stride") {
    ExperimentConfig c = small_config();
    auto [train, test] = load_segments(c);
    CHECK(train.length() == 2450);
    CHECK(test.length() == 1050);
    CHECK(test.t0 == doctest::Approx(train.t0 + 2450 * train.dt));
    c.data.stride = 4;
    auto [tr4, te4] = load_segments(c);
    CHECK(tr4.length() == 613);
    CHECK(tr4.length() + te4.length() == 875);
    CHECK(tr4.values.row(1) == train.values.row(4));
    CHECK(te4.values.row(0) == test.values.row(2));
    CHECK(c.window() == 6);
    c.model.window = 0;
    CHECK(c.window() == (dynsys::reference_window(dynsys::SystemKind::Lorenz63) + 3) / 4);
}

TEST_CASE("CSV ingestion") {
    const auto r = csv::ingest_string("t,a,b\n0,0,1.718281828459045\n1,3,4\n", true);
    CHECK(r.had_time_column);
    CHECK(r.log1p);
    CHECK(r.series.values(0, 0) == 0.0);
    CHECK(r.series.values(0, 1) == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(r.channel_names == std::vector<std::string>{"a", "b"});

    TimeSeries s;
    s.values.resize(3, 2);
    s.values << 0.1, -2.5, 1.0 / 3.0, 1e-300, 12345.678, 6.02e23;
    s.dt = 0.5;
    const auto back = csv::ingest_string(csv::series_to_string(s, {"u", "v"}), false);
    CHECK(back.series.values == s.values);
    CHECK(back.series.dt == 0.5);

    try {
        csv::ingest_string("a,b\n1,2\n3,x\n", false);
        FAIL("expected a parse error");
    } catch (const ParseError& e) {
        CHECK(e.row() == 3);
        CHECK(e.column() == 2);
    }
    CHECK_THROWS_AS(csv::ingest_string("a,b\n1,2\n3\n", false), ParseError);
    CHECK_THROWS_AS(csv::ingest_string("a\n-1\n", true), ParseError);
    CHECK(csv::invert_log1p(r.series.values)(0, 1) == doctest::Approx(std::exp(1.0) - 1.0));
}

TEST_CASE("start selection") {
    CHECK(select_starts(100, 60, 40, 1, 3) == std::vector<Index>{60});
    bool replaced = false;
    const auto tight = select_starts(100, 60, 40, 4, 3, &replaced);
    CHECK(replaced);
    CHECK(tight == std::vector<Index>{60, 60, 60, 60});
    const auto a = select_starts(1000, 100, 50, 10, 7, &replaced);
    CHECK(!replaced);
    CHECK(a == select_starts(1000, 100, 50, 10, 7));
    CHECK(a != select_starts(1000, 100, 50, 10, 8));
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(a[i] >= 100);
        CHECK(a[i] + 50 <= 1000);
        if (i > 0) CHECK(a[i] > a[i - 1]);
    }
    CHECK_THROWS_AS(select_starts(99, 60, 40, 1, 3), ConfigError);
}

TEST_CASE("mean and sample standard deviation") {
    const auto [m, s] = mean_std({1.0, 2.0, 3.0, 4.0});
    CHECK(m == 2.5);
    CHECK(s == doctest::Approx(std::sqrt(5.0 / 3.0)));
    CHECK(mean_std({7.0}).second == 0.0);
    CHECK(std::isnan(mean_std({}).first));
}

TEST_CASE("context sweep") {
    const Run& r = small_run();
    const SweepResult res = run_context_sweep(r.cfg, r.model, r.data);
    const Index L = r.model.window();
    CHECK(res.rows.size() == 3 * 3 * 3);
    CHECK(res.aggregates.size() == 9);

    SUBCASE("rows at ell = L coincide across methods") {
        for (std::size_t i = 0; i < res.rows.size(); ++i) {
            const SweepRow& row = res.rows[i];
            if (row.context_length != L || row.method == Method::NLSA) continue;
            for (const SweepRow& base : res.rows) {
                if (base.method == Method::NLSA && base.context_length == L && base.start == row.start) {
                    CHECK((row.forecast.values - base.forecast.values).cwiseAbs().maxCoeff() <= 1e-12);
                    CHECK(row.report.mse == base.report.mse);
                }
            }
        }
    }
    SUBCASE("NLSA ignores the context length") {
        const auto& a1 = res.aggregate(Method::NLSA, L, 1.0);
        const auto& a4 = res.aggregate(Method::NLSA, 4 * L, 1.0);
        CHECK(a1.mse_mean == a4.mse_mean);
    }
    SUBCASE("aggregates match a recomputation from raw rows") {
        for (const auto& a : res.aggregates) {
            std::vector<double> v;
            for (const auto& row : res.rows) {
                if (row.method == a.method && row.context_length == a.context_length) v.push_back(row.report.mmd2);
            }
            const double n = static_cast<double>(v.size());
            double mean = 0.0, ss = 0.0;
            for (double x : v) mean += x / n;
            for (double x : v) ss += (x - mean) * (x - mean);
            CHECK(std::abs(a.mmd_mean - mean) <= 1e-12 * std::max(1.0, std::abs(mean)));
            CHECK(std::abs(a.mmd_std - std::sqrt(ss / (n - 1.0))) <= 1e-12 * std::max(1.0, std::abs(mean)));
            CHECK(a.n == 3);
        }
    }
    SUBCASE("starts respect the largest context") {
        for (Index s : res.starts) {
            CHECK(s >= 4 * L);
            CHECK(s + r.cfg.eval.horizon <= r.data.test.length());
        }
    }
    CHECK_THROWS_AS(res.aggregate(Method::LISA, 3 * L, 1.0), ArgumentError);
}

TEST_CASE("single start with H = 1") {
    const Run& r = small_run();
    ExperimentConfig c = r.cfg;
    c.eval.horizon = 1;
    c.eval.n_starts = 1;
    c.eval.context_multiples = {2};
    const SweepResult res = run_context_sweep(c, r.model, r.data);
    for (const auto& row : res.rows) {
        const Vector truth = r.data.test.values.row(row.start).transpose();
        CHECK(row.report.mse == doctest::Approx((row.forecast.values.row(0).transpose() - truth).squaredNorm()));
    }
}

TEST_CASE("temperature sweep") {
    const Run& r = small_run();
    const SweepResult ctx = run_context_sweep(r.cfg, r.model, r.data);
    const SweepResult tmp = run_temperature_sweep(r.cfg, r.model, r.data);
    const Index ell = 4 * r.model.window();
    CHECK(tmp.starts == ctx.starts);
    for (Method m : {Method::NLSA, Method::LISA, Method::ALSA}) {
        CHECK(tmp.aggregate(m, ell, 1.0).mse_mean == ctx.aggregate(m, ell, 1.0).mse_mean);
        CHECK(tmp.aggregate(m, ell, 1.0).mmd_mean == ctx.aggregate(m, ell, 1.0).mmd_mean);
    }
    const double nlsa = tmp.aggregate(Method::NLSA, ell, 0.1).mse_mean;
    CHECK(tmp.aggregate(Method::NLSA, ell, 1e6).mse_mean == nlsa);
    const double ln_c = std::log(static_cast<double>(ell - r.model.window()));
    for (const auto& row : tmp.rows) {
        if (row.method == Method::ALSA && row.temperature == 1e6) CHECK(std::abs(row.mean_entropy - ln_c) < 1e-3);
    }
}

TEST_CASE("temperature sweep with the correction switched off") {
    const Run& r = small_run();
    ExperimentConfig c = r.cfg;
    c.icm.gain = 0.0;
    c.eval.methods = {Method::LISA, Method::ALSA};
    const SweepResult tmp = run_temperature_sweep(c, r.model, r.data);
    const auto& first = tmp.rows.front();
    for (const auto& row : tmp.rows) {
        if (row.start == first.start) CHECK(row.forecast.values == first.forecast.values);
    }
}

TEST_CASE("no leakage: the model sees only the training segment") {
    const Run& r = small_run();
    CHECK(r.model.train_hash == hash_matrix(r.data.train.values));
    CHECK(r.model.encoder.provenance().data_hash == r.model.train_hash);
    auto [raw_train, raw_test] = load_segments(r.cfg);
    const Standardizer s = Standardizer::fit(raw_train.values);
    CHECK(s.mean == r.data.stats.mean);
    CHECK(s.scale == r.data.stats.scale);

    PreparedData poisoned = r.data;
    poisoned.test.values.setConstant(99.0);
    const Model m = train_model(poisoned, r.cfg);
    CHECK(m.encoder.eigenvalues() == r.model.encoder.eigenvalues());
    CHECK(m.decoder.predict_mean(m.encoder.train_coordinates().row(3).transpose()) ==
          r.model.decoder.predict_mean(r.model.encoder.train_coordinates().row(3).transpose()));
}

TEST_CASE("artifact round trip") {
    const Run& r = small_run();
    const std::string bytes = artifact::serialize(r.model);
    const Model back = artifact::deserialize(bytes);
    CHECK(artifact::serialize(back) == bytes);
    CHECK(back.window() == r.model.window());
    CHECK(back.train_hash == r.model.train_hash);
    CHECK(back.stats.mean == r.model.stats.mean);
    const Matrix q = r.data.test.values.topRows(50);
    const Vector w = hankel::window_at(q, 10, back.window());
    CHECK(back.encoder.encode(w) == r.model.encoder.encode(w));
    const Vector z = r.model.encoder.encode(w);
    CHECK(back.decoder.predict(z).variance == r.model.decoder.predict(z).variance);
    CHECK(back.decoder.predict_mean(z) == r.model.decoder.predict_mean(z));

    CHECK_THROWS_AS(artifact::deserialize("not a model"), IoError);
    CHECK_THROWS_AS(artifact::deserialize(bytes.substr(0, bytes.size() - 8)), IoError);
    CHECK_THROWS_AS(artifact::load("/nonexistent/model.lisa"), IoError);
}

TEST_CASE("sweep output files and rerun from a saved artifact") {
    const Run& r = small_run();
    const auto dir = temp_dir("sweep");
    const SweepResult res = run_context_sweep(r.cfg, r.model, r.data);
    write_sweep(dir / "a", res, r.cfg, r.data);
    artifact::save(dir / "model.lisa", r.model);
    const Model loaded = artifact::load(dir / "model.lisa");
    write_sweep(dir / "b", run_context_sweep(r.cfg, loaded, r.data), r.cfg, r.data);

    Index files = 0;
    for (const auto& e : std::filesystem::directory_iterator(dir / "a")) {
        const auto name = e.path().filename();
        CHECK(std::filesystem::exists(dir / "b" / name));
        CHECK(slurp(e.path()) == slurp(dir / "b" / name));
        ++files;
    }
    CHECK(files == 5 + static_cast<Index>(res.rows.size()));
    CHECK(std::filesystem::exists(dir / "a" / "trajectory_export.csv"));
    const std::string agg = slurp(dir / "a" / "aggregates.csv");
    CHECK(std::count(agg.begin(), agg.end(), '\n') == 1 + static_cast<long>(res.aggregates.size()));
    std::filesystem::remove_all(dir);
}

TEST_CASE("config parsing") {
    const ExperimentConfig d = ExperimentConfig::from_json_text("{}");
    CHECK(d.eval.horizon == 300);
    CHECK(d.eval.temperatures.size() == 7);
    const ExperimentConfig c = ExperimentConfig::from_json_text(R"({
        // comments are allowed
        "data": {"system": "rossler", "params": {"c": 6.0}, "stride": 20},
        "model": {"rank": 12, "decoder": {"noise_var": 1e-3}},
        "icm": {"mode": "ICGP", "k0": 0},
        "eval": {"methods": ["NLSA", "ALSA"], "context_multiples": [1, 2]}
    })");
    CHECK(c.data.system == dynsys::SystemKind::Rossler);
    CHECK(c.data.params.at("c") == 6.0);
    CHECK(c.model.rank == 12);
    CHECK(c.model.noise_var == 1e-3);
    CHECK(c.icm.mode == icm::Mode::ICGP);
    CHECK(c.eval.methods.size() == 2);
    CHECK(c.window() == (dynsys::reference_window(dynsys::SystemKind::Rossler) + 19) / 20);

    const ExperimentConfig again = ExperimentConfig::from_json_text(c.to_json_text());
    CHECK(again.to_json_text() == c.to_json_text());

    CHECK_THROWS_AS(ExperimentConfig::from_json_text(R"({"model": {"rnak": 3}})"), ConfigError);
    CHECK_THROWS_AS(ExperimentConfig::from_json_text(R"({"surprise": 1})"), ConfigError);
    CHECK_THROWS_AS(ExperimentConfig::from_json_text(R"({"model": {"rank": "ten"}})"), ConfigError);
    CHECK_THROWS_AS(ExperimentConfig::from_json_text(R"({"eval": {"n_starts": 0}})"), ConfigError);
    CHECK_THROWS_AS(ExperimentConfig::from_json_text(R"({"eval": {"methods": ["XYZ"]}})"), ConfigError);
    CHECK_THROWS_AS(ExperimentConfig::from_json_text("{"), ConfigError);
    CHECK_THROWS_AS(ExperimentConfig::from_json_text(
                        R"({"data": {"system": "rossler"}, "split": {"kind": "regime_switch"}})"),
                    ConfigError);
}

TEST_CASE("synthetic load") {
    const TimeSeries s = synthetic_load(24 * 7 * 4, 3, 1);
    CHECK(s.dim() == 3);
    CHECK(s.values.minCoeff() >= 0.0);
    CHECK(s.values == synthetic_load(24 * 7 * 4, 3, 1).values);
    // Daily cycle: lag-24 autocorrelation dominates lag-12.
    const Vector x = s.values.col(0);
    const Vector rho = metrics::autocorrelation(std::span(x.data(), x.size()), 24);
    CHECK(rho[24] > rho[12]);

    ExperimentConfig c;
    c.data.source = DataSource::SyntheticLoad;
    c.data.n_steps = 2000;
    c.data.burn_in = 0;
    c.data.log1p = true;
    const PreparedData d = prepare_data(c);
    CHECK(d.log1p);
    CHECK(d.channel_names.size() == 6);
    CHECK(c.window() == 24);
}

}  // TEST_SUITE
