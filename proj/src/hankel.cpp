#include "lisa/hankel.hpp"

#include <cstring>
#include <string>

namespace lisa::hankel {

Vector window_at(const Matrix& series, Index begin, Index L) {
    const Index d = series.cols();
    if (L < 1 || begin < 0 || begin + L > series.rows()) {
        throw ArgumentError("window [" + std::to_string(begin) + ", " + std::to_string(begin + L) +
                            ") is outside a series of length " + std::to_string(series.rows()));
    }
    Vector w(L * d);
    // Row-major storage: the L rows of a window are contiguous.
    std::memcpy(w.data(), series.data() + begin * d, sizeof(double) * static_cast<std::size_t>(L * d));
    return w;
}

DelayTensor hankelize(const TimeSeries& series, Index L) {
    const Index n = series.length();
    const Index d = series.dim();
    if (L < 1) throw ArgumentError("window length must be at least 1");
    if (n < L) {
        throw ArgumentError("series of length " + std::to_string(n) +
                            " is shorter than window length " + std::to_string(L));
    }
    const Index k = n - L + 1;
    DelayTensor out;
    out.window = L;
    out.channels = d;
    out.data.resize(k, L * d);
    out.origin.resize(static_cast<std::size_t>(k));
    for (Index t = 0; t < k; ++t) {
        std::memcpy(out.data.row(t).data(), series.values.data() + t * d,
                    sizeof(double) * static_cast<std::size_t>(L * d));
        out.origin[static_cast<std::size_t>(t)] = t;
    }
    return out;
}

ContextSplit split_prefix(const TimeSeries& prefix, Index L) {
    const Index len = prefix.length();
    const Index d = prefix.dim();
    if (L < 1) throw ArgumentError("window length must be at least 1");
    if (len < L) {
        throw ArgumentError("prefix of length " + std::to_string(len) +
                            " is shorter than window length " + std::to_string(L));
    }
    const Index c = len - L;
    ContextSplit out;
    out.window = L;
    out.channels = d;
    out.context_windows.resize(c, L * d);
    out.targets.resize(c, d);
    for (Index a = 0; a < c; ++a) {
        std::memcpy(out.context_windows.row(a).data(), prefix.values.data() + a * d,
                    sizeof(double) * static_cast<std::size_t>(L * d));
        out.targets.row(a) = prefix.values.row(a + L);
    }
    out.query_window = window_at(prefix.values, c, L);
    return out;
}

Matrix dehankelize(const DelayTensor& tensor) {
    const Index k = tensor.count();
    const Index L = tensor.window;
    const Index d = tensor.channels;
    const Index n = k + L - 1;
    Matrix sum = Matrix::Zero(n, d);
    Vector hits = Vector::Zero(n);
    for (Index t = 0; t < k; ++t) {
        for (Index c = 0; c < L; ++c) {
            for (Index x = 0; x < d; ++x) sum(t + c, x) += tensor.at(t, c, x);
            hits[t + c] += 1.0;
        }
    }
    for (Index i = 0; i < n; ++i) sum.row(i) /= hits[i];
    return sum;
}

}  // namespace lisa::hankel
