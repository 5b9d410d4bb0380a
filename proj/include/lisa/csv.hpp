#pragma once

// Plain CSV in and out. Numbers are written with 17 significant digits and a
// '.' decimal separator regardless of locale.

#include "lisa/types.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace lisa::csv {

std::string format_double(double v);

/// Writes `t,x0,x1,...` (or the given channel names) with one row per sample.
void write_series(const std::filesystem::path& path, const TimeSeries& series,
                  const std::vector<std::string>& channel_names = {});
std::string series_to_string(const TimeSeries& series, const std::vector<std::string>& channel_names = {});

struct Table {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    void add_row(std::vector<std::string> row) { rows.push_back(std::move(row)); }
    std::string to_string() const;
    void write(const std::filesystem::path& path) const;
};

struct IngestResult {
    TimeSeries series;
    std::vector<std::string> channel_names;
    bool log1p = false;
    bool had_time_column = false;
};

/// Reads a rectangular numeric CSV with a header row. A leading column named
/// `t` or `timestamp` is treated as time and dropped from the values (a
/// numeric `t` column also sets dt and t0). With log1p each value x becomes
/// log(1 + x) and must satisfy x > -1. Errors carry 1-based row/column.
IngestResult ingest(const std::filesystem::path& path, bool log1p);
IngestResult ingest_string(const std::string& text, bool log1p);

/// Undo log1p: expm1 elementwise.
Matrix invert_log1p(const Matrix& values);

}  // namespace lisa::csv
