#pragma once

#include <robustcg/types.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <span>
#include <string>
#include <variant>
#include <vector>

namespace robustcg {

// One-dimensional mean estimators. All routines are pure and thread-safe.

struct EmpiricalMean {
    friend bool operator==(const EmpiricalMean&, const EmpiricalMean&) = default;
};

/// Median of the means of `blocks` contiguous index-order blocks.
struct MedianOfMeans {
    Index blocks = 1;
    friend bool operator==(const MedianOfMeans&, const MedianOfMeans&) = default;
};

/// Mean after removing ceil(trim_fraction * n) samples from each tail.
struct TrimmedMean {
    double trim_fraction = 0.0;
    friend bool operator==(const TrimmedMean&, const TrimmedMean&) = default;
};

using RobustEstimator = std::variant<EmpiricalMean, MedianOfMeans, TrimmedMean>;

namespace detail {

// alpha * n is computed in floating point; 0.1 * 300 must count as 30, not 31.
inline Index trim_count(double alpha, std::size_t n) noexcept
{
    return static_cast<Index>(std::ceil(alpha * static_cast<double>(n) - 1e-9));
}

} // namespace detail

inline double empirical_mean(std::span<const double> samples)
{
    if (samples.empty()) {
        throw ParameterError("empty sample set");
    }
    double sum = 0.0;
    for (double s : samples) {
        sum += s;
    }
    return sum / static_cast<double>(samples.size());
}

/// Start offset of block k when n samples are split into K contiguous
/// blocks whose sizes differ by at most one.
inline std::size_t block_begin(std::size_t k, std::size_t n, std::size_t blocks) noexcept
{
    return k * n / blocks;
}

/// Median of the values; even counts average the two central order statistics.
/// Reorders `values`.
inline double median_inplace(std::span<double> values)
{
    if (values.empty()) {
        throw ParameterError("empty sample set");
    }
    const std::size_t m = values.size();
    const std::size_t mid = m / 2;
    std::nth_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(mid), values.end());
    const double upper = values[mid];
    if (m % 2 == 1) {
        return upper;
    }
    const double lower = *std::max_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(mid));
    return (lower + upper) / 2.0;
}

inline double median_of_means(std::span<const double> samples, Index blocks)
{
    const std::size_t n = samples.size();
    if (blocks <= 0 || static_cast<std::size_t>(blocks) > n) {
        throw ParameterError("median_of_means: need 1 <= blocks <= n (blocks = " + std::to_string(blocks) +
                             ", n = " + std::to_string(n) + ")");
    }
    const auto K = static_cast<std::size_t>(blocks);
    std::vector<double> means(K);
    for (std::size_t k = 0; k < K; ++k) {
        const std::size_t lo = block_begin(k, n, K);
        const std::size_t hi = block_begin(k + 1, n, K);
        double sum = 0.0;
        for (std::size_t i = lo; i < hi; ++i) {
            sum += samples[i];
        }
        means[k] = sum / static_cast<double>(hi - lo);
    }
    return median_inplace(means);
}

/// Trimmed mean using caller-provided scratch space (avoids an allocation per
/// call inside the oracle loops). The retained samples are summed in ascending order.
inline double trimmed_mean(std::span<const double> samples, double trim_fraction, std::vector<double>& scratch)
{
    if (!(trim_fraction >= 0.0 && trim_fraction < 0.5)) {
        throw ParameterError("trimmed_mean: trim fraction must lie in [0, 0.5)");
    }
    const std::size_t n = samples.size();
    if (n == 0) {
        throw ParameterError("empty sample set");
    }
    const Index t = detail::trim_count(trim_fraction, n);
    if (static_cast<Index>(n) - 2 * t < 1) {
        throw ParameterError("trimmed_mean: trimming removes every sample");
    }
    scratch.assign(samples.begin(), samples.end());
    std::sort(scratch.begin(), scratch.end());
    double sum = 0.0;
    const auto hi = static_cast<Index>(n) - t;
    for (Index i = t; i < hi; ++i) {
        sum += scratch[static_cast<std::size_t>(i)];
    }
    return sum / static_cast<double>(hi - t);
}

inline double trimmed_mean(std::span<const double> samples, double trim_fraction)
{
    std::vector<double> scratch;
    return trimmed_mean(samples, trim_fraction, scratch);
}

/// ceil(18 ln |A|) blocks, the block count under which MOM-scored atom
/// selection holds with high probability over all |A| atoms.
inline Index default_mom_blocks(Index atom_count)
{
    if (atom_count < 2) {
        throw ParameterError("default_mom_blocks: atom count must be >= 2");
    }
    return static_cast<Index>(std::ceil(18.0 * std::log(static_cast<double>(atom_count))));
}

/// default_mom_blocks clamped to floor(n / 4) (and at least one block).
inline Index default_mom_blocks(Index atom_count, Index sample_count)
{
    return std::max<Index>(1, std::min(default_mom_blocks(atom_count), sample_count / 4));
}

/// Checks the estimator's own invariants independent of any sample count.
inline void validate(const RobustEstimator& estimator)
{
    if (const auto* mom = std::get_if<MedianOfMeans>(&estimator); mom && mom->blocks < 1) {
        throw ParameterError("median_of_means: blocks must be >= 1");
    }
    if (const auto* trm = std::get_if<TrimmedMean>(&estimator);
        trm && !(trm->trim_fraction >= 0.0 && trm->trim_fraction < 0.5)) {
        throw ParameterError("trimmed_mean: trim fraction must lie in [0, 0.5)");
    }
}

/// Stateful evaluator holding scratch storage; one per thread.
class Estimator {
public:
    explicit Estimator(RobustEstimator kind) : kind_(kind) { validate(kind_); }

    double operator()(std::span<const double> samples)
    {
        return std::visit(
            [&](const auto& e) -> double {
                using E = std::decay_t<decltype(e)>;
                if constexpr (std::is_same_v<E, EmpiricalMean>) {
                    return empirical_mean(samples);
                } else if constexpr (std::is_same_v<E, MedianOfMeans>) {
                    return median_of_means(samples, e.blocks);
                } else {
                    return trimmed_mean(samples, e.trim_fraction, scratch_);
                }
            },
            kind_);
    }

    const RobustEstimator& kind() const noexcept { return kind_; }

private:
    RobustEstimator kind_;
    std::vector<double> scratch_;
};

inline double estimate(const RobustEstimator& estimator, std::span<const double> samples)
{
    return Estimator(estimator)(samples);
}

inline std::string describe(const RobustEstimator& estimator)
{
    return std::visit(
        [](const auto& e) -> std::string {
            using E = std::decay_t<decltype(e)>;
            if constexpr (std::is_same_v<E, EmpiricalMean>) {
                return "mean";
            } else if constexpr (std::is_same_v<E, MedianOfMeans>) {
                return "mom(K=" + std::to_string(e.blocks) + ")";
            } else {
                return "trm(alpha=" + std::to_string(e.trim_fraction) + ")";
            }
        },
        estimator);
}

} // namespace robustcg
