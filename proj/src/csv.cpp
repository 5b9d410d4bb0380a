#include "lisa/csv.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

namespace lisa::csv {

std::string format_double(double v) {
    std::array<char, 64> buf{};
    auto res = std::to_chars(buf.data(), buf.data() + buf.size(), v, std::chars_format::general, 17);
    return std::string(buf.data(), res.ptr);
}

namespace {

std::vector<std::string> default_names(Index d) {
    std::vector<std::string> names;
    for (Index i = 0; i < d; ++i) names.push_back("x" + std::to_string(i));
    return names;
}

std::string trim(std::string s) {
    auto not_space = [](unsigned char c) { return !std::isspace(c); };
    s.erase(s.begin(), std::find_if(s.begin(), s.end(), not_space));
    s.erase(std::find_if(s.rbegin(), s.rend(), not_space).base(), s.end());
    return s;
}

std::vector<std::string> split(const std::string& line) {
    std::vector<std::string> cells;
    std::string cell;
    std::istringstream in(line);
    while (std::getline(in, cell, ',')) cells.push_back(trim(cell));
    if (!line.empty() && line.back() == ',') cells.emplace_back();
    return cells;
}

bool parse_number(const std::string& s, double& out) {
    if (s.empty()) return false;
    const char* first = s.data();
    if (*first == '+') ++first;
    auto res = std::from_chars(first, s.data() + s.size(), out);
    return res.ec == std::errc() && res.ptr == s.data() + s.size();
}

std::string lower(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
    return s;
}

}  // namespace

std::string series_to_string(const TimeSeries& series, const std::vector<std::string>& names_in) {
    const auto names = names_in.empty() ? default_names(series.dim()) : names_in;
    if (static_cast<Index>(names.size()) != series.dim()) throw ArgumentError("channel name count mismatch");
    std::string out = "t";
    for (const auto& n : names) out += "," + n;
    out += "\n";
    for (Index i = 0; i < series.length(); ++i) {
        out += format_double(series.time(i));
        for (Index x = 0; x < series.dim(); ++x) out += "," + format_double(series.values(i, x));
        out += "\n";
    }
    return out;
}

void write_series(const std::filesystem::path& path, const TimeSeries& series,
                  const std::vector<std::string>& names) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open " + path.string() + " for writing");
    f << series_to_string(series, names);
}

std::string Table::to_string() const {
    std::string out;
    auto emit = [&out](const std::vector<std::string>& row) {
        for (std::size_t i = 0; i < row.size(); ++i) {
            if (i > 0) out += ",";
            out += row[i];
        }
        out += "\n";
    };
    emit(header);
    for (const auto& r : rows) emit(r);
    return out;
}

void Table::write(const std::filesystem::path& path) const {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open " + path.string() + " for writing");
    f << to_string();
}

IngestResult ingest_string(const std::string& text, bool log1p) {
    std::istringstream in(text);
    std::string line;
    Index line_no = 0;
    std::vector<std::string> header;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (!trim(line).empty()) {
            header = split(line);
            break;
        }
    }
    if (header.empty()) throw ParseError(0, 0, "CSV has no header row");

    IngestResult out;
    out.log1p = log1p;
    const std::string first = lower(header.front());
    const bool numeric_time = first == "t";
    out.had_time_column = numeric_time || first == "timestamp";
    const std::size_t skip = out.had_time_column ? 1 : 0;
    out.channel_names.assign(header.begin() + static_cast<std::ptrdiff_t>(skip), header.end());
    const Index d = static_cast<Index>(out.channel_names.size());
    if (d == 0) throw ParseError(line_no, 0, "CSV has no value columns");

    std::vector<double> values, times;
    Index rows = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (trim(line).empty()) continue;
        const auto cells = split(line);
        if (cells.size() != header.size()) {
            throw ParseError(line_no, 0,
                             "row " + std::to_string(line_no) + " has " + std::to_string(cells.size()) +
                                 " cells, header has " + std::to_string(header.size()));
        }
        if (numeric_time) {
            double t = 0.0;
            if (!parse_number(cells[0], t)) {
                throw ParseError(line_no, 1, "non-numeric time '" + cells[0] + "' at row " + std::to_string(line_no));
            }
            times.push_back(t);
        }
        for (std::size_t c = skip; c < cells.size(); ++c) {
            const Index col = static_cast<Index>(c + 1);
            double v = 0.0;
            if (!parse_number(cells[c], v)) {
                throw ParseError(line_no, col, "non-numeric cell '" + cells[c] + "' at row " +
                                                    std::to_string(line_no) + ", column " + std::to_string(col));
            }
            if (log1p) {
                if (!(v > -1.0)) {
                    throw ParseError(line_no, col, "value " + cells[c] + " <= -1 cannot be log1p-transformed (row " +
                                                        std::to_string(line_no) + ", column " + std::to_string(col) + ")");
                }
                v = std::log1p(v);
            }
            values.push_back(v);
        }
        ++rows;
    }
    out.series.values = Eigen::Map<const Matrix>(values.data(), rows, d);
    if (times.size() >= 2) {
        out.series.t0 = times[0];
        out.series.dt = times[1] - times[0];
    } else if (times.size() == 1) {
        out.series.t0 = times[0];
    }
    return out;
}

IngestResult ingest(const std::filesystem::path& path, bool log1p) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open " + path.string());
    std::stringstream buf;
    buf << f.rdbuf();
    return ingest_string(buf.str(), log1p);
}

Matrix invert_log1p(const Matrix& values) { return values.unaryExpr([](double v) { return std::expm1(v); }); }

}  // namespace lisa::csv
