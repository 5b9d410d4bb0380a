#pragma once

// Delay-coordinate (Hankel) embedding with unit lag. All indices are
// zero-based: window T covers samples T .. T+L-1.

#include "lisa/types.hpp"

#include <vector>

namespace lisa::hankel {

/// K windows of length L over D channels. Each row of `data` is one window
/// flattened lag-major, i.e. entry (T, c * D + X) = source[T + c, X].
struct DelayTensor {
    Matrix data;
    Index window = 0;
    Index channels = 0;
    std::vector<Index> origin;  ///< time index of each window's first sample

    Index count() const { return data.rows(); }
    double at(Index T, Index c, Index X) const { return data(T, c * channels + X); }
};

struct ContextSplit {
    Matrix context_windows;  ///< C x (L*D)
    Matrix targets;          ///< C x D, targets[A] = prefix[A + L]
    Vector query_window;     ///< L*D, the final window of the prefix
    Index window = 0;
    Index channels = 0;

    Index context_count() const { return context_windows.rows(); }
};

/// K = N - L + 1 windows. Throws ArgumentError when N < L or L < 1.
DelayTensor hankelize(const TimeSeries& series, Index L);

/// Splits a prefix of length l >= L into C = l - L context windows with
/// in-prefix one-step targets, plus the trailing query window.
ContextSplit split_prefix(const TimeSeries& prefix, Index L);

/// Flattened window starting at row `begin` (L*D values).
Vector window_at(const Matrix& series, Index begin, Index L);

/// Anti-diagonal average of a delay tensor: recovers the N x D source.
Matrix dehankelize(const DelayTensor& tensor);

}  // namespace lisa::hankel
