#pragma once

#include <Eigen/Core>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>

namespace robustcg {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using Index = std::ptrdiff_t;

/// Invalid numeric parameter (estimator settings, schedule constants, ...).
class ParameterError : public std::invalid_argument {
public:
    explicit ParameterError(const std::string& what) : std::invalid_argument(what) {}
};

/// Operands of mismatched dimension.
class DimensionError : public std::invalid_argument {
public:
    explicit DimensionError(const std::string& what) : std::invalid_argument(what) {}
};

/// Problem or solver set up in a way the algorithm cannot handle
/// (e.g. DICG over atoms that are not 0/1 vectors).
class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

inline std::span<const double> as_span(const Vector& v) noexcept
{
    return {v.data(), static_cast<std::size_t>(v.size())};
}

inline void require_same_dim(Index a, Index b, const char* what)
{
    if (a != b) {
        throw DimensionError(std::string(what) + ": dimension mismatch (" + std::to_string(a) +
                             " vs " + std::to_string(b) + ")");
    }
}

} // namespace robustcg
