#include "lisa/types.hpp"

namespace lisa {

TimeSeries TimeSeries::slice(Index begin, Index count) const {
    if (begin < 0 || count < 0 || begin + count > length()) {
        throw ArgumentError("slice [" + std::to_string(begin) + ", " +
                            std::to_string(begin + count) + ") out of range for series of length " +
                            std::to_string(length()));
    }
    return TimeSeries{values.middleRows(begin, count), dt, time(begin)};
}

std::uint64_t fnv1a(std::span<const std::byte> bytes, std::uint64_t h) {
    for (std::byte b : bytes) {
        h ^= static_cast<std::uint64_t>(b);
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::uint64_t hash_matrix(const Matrix& m) {
    const std::int64_t shape[2] = {static_cast<std::int64_t>(m.rows()),
                                   static_cast<std::int64_t>(m.cols())};
    std::uint64_t h = fnv1a(std::as_bytes(std::span(shape)));
    return fnv1a(std::as_bytes(std::span(m.data(), static_cast<std::size_t>(m.size()))), h);
}

}  // namespace lisa
