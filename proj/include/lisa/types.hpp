#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>

namespace lisa {

using Index = Eigen::Index;
using Vector = Eigen::VectorXd;
/// Row-major so that consecutive time samples (and therefore delay windows)
/// are contiguous in memory.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// An N x D series of observations, one row per time step.
struct TimeSeries {
    Matrix values;
    double dt = 1.0;
    double t0 = 0.0;

    Index length() const { return values.rows(); }
    Index dim() const { return values.cols(); }
    double time(Index i) const { return t0 + static_cast<double>(i) * dt; }

    /// Rows [begin, begin + count) as a new series with adjusted start time.
    TimeSeries slice(Index begin, Index count) const;
};

// ---------------------------------------------------------------------------
// Errors. Every failure raised by the library derives from lisa::Error and
// carries a short machine-readable kind string.
// ---------------------------------------------------------------------------

class Error : public std::runtime_error {
public:
    Error(std::string kind, const std::string& what)
        : std::runtime_error(what), kind_(std::move(kind)) {}
    const std::string& kind() const noexcept { return kind_; }

private:
    std::string kind_;
};

class ArgumentError : public Error {
public:
    explicit ArgumentError(const std::string& what) : Error("argument", what) {}
};

class IntegrationError : public Error {
public:
    IntegrationError(Index step, const std::string& what)
        : Error("integration", what), step_(step) {}
    Index step() const noexcept { return step_; }

private:
    Index step_;
};

class DegeneracyError : public Error {
public:
    explicit DegeneracyError(const std::string& what) : Error("degeneracy", what) {}
};

class ConditioningError : public Error {
public:
    explicit ConditioningError(const std::string& what) : Error("conditioning", what) {}
};

class EigenSolverError : public Error {
public:
    explicit EigenSolverError(const std::string& what) : Error("eigensolver", what) {}
};

class ParseError : public Error {
public:
    ParseError(Index row, Index column, const std::string& what)
        : Error("parse", what), row_(row), column_(column) {}
    Index row() const noexcept { return row_; }
    Index column() const noexcept { return column_; }

private:
    Index row_;
    Index column_;
};

class ConfigError : public Error {
public:
    explicit ConfigError(const std::string& what) : Error("config", what) {}
};

class IoError : public Error {
public:
    explicit IoError(const std::string& what) : Error("io", what) {}
};

/// 64-bit FNV-1a over raw bytes; used for data provenance hashes.
std::uint64_t fnv1a(std::span<const std::byte> bytes, std::uint64_t seed = 0xcbf29ce484222325ULL);
std::uint64_t hash_matrix(const Matrix& m);

}  // namespace lisa
