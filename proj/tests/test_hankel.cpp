#include "lisa/hankel.hpp"

#include <doctest.h>

using namespace lisa;
using namespace lisa::hankel;

namespace {

TimeSeries series_of(std::initializer_list<std::initializer_list<double>> rows) {
    TimeSeries s;
    s.values.resize(static_cast<Index>(rows.size()), static_cast<Index>(rows.begin()->size()));
    Index i = 0;
    for (const auto& r : rows) {
        Index j = 0;
        for (double v : r) s.values(i, j++) = v;
        ++i;
    }
    return s;
}

TimeSeries random_series(Index n, Index d, unsigned seed) {
    std::srand(seed);
    TimeSeries s;
    s.values = Matrix::Random(n, d);
    return s;
}

}  // namespace

TEST_SUITE("hankel") {

TEST_CASE("four samples, L=2") {
    const TimeSeries s = series_of({{1}, {2}, {3}, {4}});
    const DelayTensor t = hankelize(s, 2);
    REQUIRE(t.count() == 3);
    CHECK(t.data(0, 0) == 1);
    CHECK(t.data(0, 1) == 2);
    CHECK(t.data(1, 0) == 2);
    CHECK(t.data(1, 1) == 3);
    CHECK(t.data(2, 0) == 3);
    CHECK(t.data(2, 1) == 4);
    CHECK(t.origin == std::vector<Index>{0, 1, 2});
}

TEST_CASE("L=1 and L=N boundaries") {
    const TimeSeries s = random_series(7, 2, 1);
    const DelayTensor one = hankelize(s, 1);
    CHECK(one.count() == 7);
    CHECK(one.data == s.values);
    const DelayTensor full = hankelize(s, 7);
    REQUIRE(full.count() == 1);
    for (Index c = 0; c < 7; ++c) {
        for (Index x = 0; x < 2; ++x) CHECK(full.at(0, c, x) == s.values(c, x));
    }
    CHECK_THROWS_AS(hankelize(s, 8), ArgumentError);
    CHECK_THROWS_AS(hankelize(s, 0), ArgumentError);
}

TEST_CASE("entries follow the lag-major layout") {
    const TimeSeries s = random_series(20, 3, 2);
    const DelayTensor t = hankelize(s, 5);
    CHECK(t.count() == 16);
    for (Index T = 0; T < t.count(); ++T) {
        for (Index c = 0; c < 5; ++c) {
            for (Index x = 0; x < 3; ++x) CHECK(t.at(T, c, x) == s.values(T + c, x));
        }
    }
}

TEST_CASE("dehankelize inverts hankelize") {
    const TimeSeries s = random_series(30, 2, 3);
    for (Index L : {1, 4, 30}) {
        const Matrix back = dehankelize(hankelize(s, L));
        CHECK((back - s.values).cwiseAbs().maxCoeff() < 1e-14);
    }
}

TEST_CASE("prefix split, ell=4, L=2") {
    const TimeSeries s = series_of({{1}, {2}, {3}, {4}});
    const ContextSplit cs = split_prefix(s, 2);
    REQUIRE(cs.context_count() == 2);
    CHECK(cs.context_windows(0, 0) == 1);
    CHECK(cs.context_windows(0, 1) == 2);
    CHECK(cs.context_windows(1, 0) == 2);
    CHECK(cs.context_windows(1, 1) == 3);
    CHECK(cs.targets(0, 0) == 3);
    CHECK(cs.targets(1, 0) == 4);
    CHECK(cs.query_window[0] == 3);
    CHECK(cs.query_window[1] == 4);
}

TEST_CASE("ell=L gives an empty context and the whole prefix as query") {
    const TimeSeries s = random_series(6, 2, 4);
    const ContextSplit cs = split_prefix(s, 6);
    CHECK(cs.context_count() == 0);
    CHECK(cs.targets.rows() == 0);
    for (Index c = 0; c < 6; ++c) {
        for (Index x = 0; x < 2; ++x) CHECK(cs.query_window[c * 2 + x] == s.values(c, x));
    }
}

TEST_CASE("ell=L+1 gives one context window targeting the last sample") {
    const TimeSeries s = random_series(5, 3, 5);
    const ContextSplit cs = split_prefix(s, 4);
    REQUIRE(cs.context_count() == 1);
    CHECK(cs.targets.row(0) == s.values.row(4));
    CHECK_THROWS_AS(split_prefix(s, 6), ArgumentError);
}

TEST_CASE("window_at matches the tensor row") {
    const TimeSeries s = random_series(12, 2, 6);
    const DelayTensor t = hankelize(s, 3);
    for (Index T = 0; T < t.count(); ++T) CHECK(window_at(s.values, T, 3) == t.data.row(T).transpose());
    CHECK_THROWS_AS(window_at(s.values, 10, 3), ArgumentError);
}

}  // TEST_SUITE
