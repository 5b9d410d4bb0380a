#include "lisa/csv.hpp"

#include <doctest.h>
#include <json.hpp>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <sys/wait.h>

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

struct Result {
    int code;
    std::string out, err;
};

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

fs::path workdir() {
    static const fs::path dir = [] {
        auto d = fs::temp_directory_path() / "lisa_cli_test";
        fs::remove_all(d);
        fs::create_directories(d);
        return d;
    }();
    return dir;
}

Result run(const std::string& args) {
    const fs::path out = workdir() / "stdout.txt", err = workdir() / "stderr.txt";
    const std::string cmd = std::string(LISA_CLI_PATH) + " " + args + " >" + out.string() + " 2>" + err.string();
    const int status = std::system(cmd.c_str());
    return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, slurp(out), slurp(err)};
}

const char* kSmall = "--set data.n_steps=3000 --set data.burn_in=500 --window 6 --rank 5 "
                     "--set model.max_train_windows=300 --set model.max_decoder_pairs=300 --horizon 30 --n-starts 2 "
                     "--set eval.context_multiples=[1,3] --set eval.temperatures=[1,1000000] "
                     "--set eval.temperature_context_multiple=3";

}  // namespace

TEST_SUITE("cli") {

TEST_CASE("usage errors exit 2 with JSON") {
    const Result r = run("no-such-command");
    CHECK(r.code == 2);
    CHECK(json::parse(r.err)["error"] == "usage");
}

TEST_CASE("library errors exit 1 with a machine-readable kind") {
    Result r = run("simulate --system pendulum");
    CHECK(r.code == 1);
    CHECK(json::parse(r.err)["error"] == "argument");

    r = run("train --set model.rnak=3");
    CHECK(r.code == 1);
    CHECK(json::parse(r.err)["error"] == "config");

    const fs::path bad = workdir() / "bad.csv";
    std::ofstream(bad) << "a,b\n1,2\n3,oops\n";
    r = run("metrics -f " + bad.string() + " -t " + bad.string());
    CHECK(r.code == 1);
    const json e = json::parse(r.err);
    CHECK(e["error"] == "parse");
    CHECK(e["row"] == 3);
    CHECK(e["column"] == 2);

    r = run("forecast -m /nonexistent.lisa -i " + bad.string());
    CHECK(r.code == 1);
    CHECK(json::parse(r.err)["error"] == "io");
}

TEST_CASE("simulate writes a CSV") {
    const fs::path p = workdir() / "sim.csv";
    const Result r = run("simulate --system rossler --n-steps 300 --burn-in 100 --stride 2 -o " + p.string());
    REQUIRE(r.code == 0);
    const auto ing = lisa::csv::ingest(p, false);
    CHECK(ing.series.length() == 100);
    CHECK(ing.series.dim() == 3);
    CHECK(ing.series.dt == doctest::Approx(0.02));
    CHECK(run("simulate --system rossler --n-steps 300 --burn-in 100 --stride 2").out == slurp(p));
}

TEST_CASE("train, forecast and metrics") {
    const fs::path model = workdir() / "m.lisa";
    Result r = run(std::string("train ") + kSmall + " -o " + model.string());
    REQUIRE(r.code == 0);
    const json summary = json::parse(r.out);
    CHECK(summary["window"] == 6);
    CHECK(summary["rank"] == 5);

    const fs::path prefix = workdir() / "prefix.csv";
    REQUIRE(run("simulate --n-steps 1200 --burn-in 1000 --seed 9 -o " + prefix.string()).code == 0);
    const fs::path fc = workdir() / "fc.csv";
    r = run("forecast -m " + model.string() + " -i " + prefix.string() + " --method LISA --horizon 25 -o " +
            fc.string());
    REQUIRE(r.code == 0);
    const std::string table = slurp(fc);
    CHECK(table.rfind("step,x0,x1,x2,variance,gamma_ctx,gamma_var,entropy\n", 0) == 0);
    CHECK(std::count(table.begin(), table.end(), '\n') == 26);

    r = run("metrics -f " + fc.string() + " -t " + fc.string() + " --exact-mmd");
    REQUIRE(r.code == 0);
    const json m = json::parse(r.out);
    CHECK(std::stod(m["mse"].get<std::string>()) == 0.0);
    CHECK(std::stod(m["acf_mse"].get<std::string>()) == 0.0);
    CHECK(m.contains("mmd2_exact"));
}

TEST_CASE("sweeps write plot-ready files and rerun bit-identically from the artifact") {
    const fs::path a = workdir() / "sweep_a", b = workdir() / "sweep_b";
    Result r = run(std::string("sweep-context ") + kSmall + " -o " + a.string());
    REQUIRE(r.code == 0);
    CHECK(json::parse(r.out).size() == 6);
    for (const char* f : {"config.resolved", "raw_metrics.csv", "aggregates.csv", "mse_by_horizon.csv",
                          "trajectory_export.csv", "model.lisa"}) {
        CHECK(fs::exists(a / f));
    }
    const json resolved = json::parse(slurp(a / "config.resolved"));
    CHECK(resolved["model"]["window"] == 6);
    CHECK(resolved["resolved"]["starts"].size() == 2);

    r = run(std::string("sweep-context ") + kSmall + " -m " + (a / "model.lisa").string() + " -o " + b.string());
    REQUIRE(r.code == 0);
    CHECK(r.err.empty());
    for (const auto& e : fs::directory_iterator(a)) {
        if (e.path().filename() == "model.lisa") continue;
        CHECK(slurp(e.path()) == slurp(b / e.path().filename()));
    }

    const fs::path t = workdir() / "sweep_t";
    r = run(std::string("sweep-temperature ") + kSmall + " -m " + (a / "model.lisa").string() + " -o " + t.string());
    REQUIRE(r.code == 0);
    CHECK(json::parse(r.out).size() == 6);
}

TEST_CASE("icpca demo") {
    const Result r = run("icpca-demo --lengths 10,1000 --train-samples 2000");
    REQUIRE(r.code == 0);
    CHECK(r.out.rfind("context_length,relative_map_error", 0) == 0);
    CHECK(std::count(r.out.begin(), r.out.end(), '\n') == 3);
}

}  // TEST_SUITE
