// Serial vs OpenMP timings for the data-parallel kernels, with a bit-equality
// check on every pair of outputs.

#include "lisa/dynsys.hpp"
#include "lisa/hankel.hpp"
#include "lisa/kernels.hpp"
#include "lisa/spectral.hpp"

#include <CLI11.hpp>

#include <omp.h>

#include <chrono>
#include <cstdio>
#include <cstring>
#include <functional>
#include <random>

using namespace lisa;

namespace {

double seconds(const std::function<void()>& fn, int reps) {
    double best = 1e300;
    for (int r = 0; r < reps; ++r) {
        const auto t0 = std::chrono::steady_clock::now();
        fn();
        const auto t1 = std::chrono::steady_clock::now();
        best = std::min(best, std::chrono::duration<double>(t1 - t0).count());
    }
    return best;
}

bool identical(const Matrix& a, const Matrix& b) {
    return a.rows() == b.rows() && a.cols() == b.cols() &&
           std::memcmp(a.data(), b.data(), sizeof(double) * static_cast<std::size_t>(a.size())) == 0;
}

bool report(const char* name, double serial, double parallel, bool same) {
    std::printf("%-22s serial %9.4f s   openmp %9.4f s   speedup %5.2fx   %s\n", name, serial, parallel,
                serial / parallel, same ? "bit-identical" : "MISMATCH");
    return same;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"kernel benchmark"};
    Index k = 2000, windows = 500, L = 75;
    int reps = 3, threads = 0;
    app.add_option("--train", k, "training windows")->capture_default_str();
    app.add_option("--query", windows, "windows to encode")->capture_default_str();
    app.add_option("--window", L, "delay-window length")->capture_default_str();
    app.add_option("--reps", reps, "repetitions (best time is reported)")->capture_default_str();
    app.add_option("--threads", threads, "OpenMP threads (0 = runtime default)");
    CLI11_PARSE(app, argc, argv);
    if (threads > 0) omp_set_num_threads(threads);

    dynsys::TrajectoryConfig tc;
    tc.dt = 0.01;
    tc.n_steps = 2 * (k + windows + L) + 1000;
    tc.burn_in = 1000;
    tc.seed = 7;
    const TimeSeries s = dynsys::integrate(dynsys::make_system(dynsys::SystemKind::Lorenz63), tc);
    const hankel::DelayTensor all = hankel::hankelize(s, L);
    hankel::DelayTensor train;
    train.window = L;
    train.channels = all.channels;
    train.data.resize(k, all.data.cols());
    for (Index i = 0; i < k; ++i) train.data.row(i) = all.data.row(2 * i);
    const Matrix query = all.data.middleRows(1, windows);

    std::printf("threads %d, K=%ld, queries=%ld, L*D=%ld\n", kernels::max_threads(), static_cast<long>(k),
                static_cast<long>(windows), static_cast<long>(all.data.cols()));

    bool ok = true;
    Matrix a, b;
    double ts = seconds([&] { a = kernels::serial::pairwise_sq_dists(train.data); }, reps);
    double tp = seconds([&] { b = kernels::pairwise_sq_dists(train.data); }, reps);
    ok &= report("pairwise_sq_dists", ts, tp, identical(a, b));

    ts = seconds([&] { a = kernels::serial::cross_sq_dists(query, train.data); }, reps);
    tp = seconds([&] { b = kernels::cross_sq_dists(query, train.data); }, reps);
    ok &= report("cross_sq_dists", ts, tp, identical(a, b));

    const Matrix d2 = kernels::pairwise_sq_dists(train.data);
    const double eps = kernels::median_offdiag(d2);
    ts = seconds([&] { a = kernels::serial::gaussian_affinity(d2, 1.0, eps); }, reps);
    tp = seconds([&] { b = kernels::gaussian_affinity(d2, 1.0, eps); }, reps);
    ok &= report("gaussian_affinity", ts, tp, identical(a, b));

    const auto model = spectral::SpectralModel::fit(train, spectral::KernelParams{}, 10);
    ts = seconds(
        [&] {
            a.resize(windows, model.rank());
            for (Index i = 0; i < windows; ++i) {
                a.row(i) = model.encode(std::span<const double>(query.row(i).data(), query.cols())).transpose();
            }
        },
        reps);
    tp = seconds([&] { b = model.encode_batch(query); }, reps);
    ok &= report("encode_batch", ts, tp, identical(a, b));

    return ok ? 0 : 1;
}
