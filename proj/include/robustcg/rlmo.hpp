#pragma once

#include <robustcg/atoms.hpp>
#include <robustcg/robust_mean.hpp>
#include <robustcg/types.hpp>

#include <numeric>
#include <span>
#include <vector>

namespace robustcg {

/// Per-sample gradients at one iterate; row i is g_i.
struct GradientBatch {
    Matrix samples;

    Index size() const noexcept { return samples.rows(); }
    Index dim() const noexcept { return samples.cols(); }
    Vector mean() const { return samples.colwise().mean().transpose(); }
};

inline void require_nonempty(const GradientBatch& batch)
{
    if (batch.size() < 1) {
        throw ParameterError("gradient batch is empty");
    }
}

inline std::vector<Index> all_indices(const AtomSet& set)
{
    std::vector<Index> idx(static_cast<std::size_t>(set.size()));
    std::iota(idx.begin(), idx.end(), Index{0});
    return idx;
}

namespace detail {

inline bool exactly_odd(const RobustEstimator& e)
{
    return std::holds_alternative<EmpiricalMean>(e) || std::holds_alternative<MedianOfMeans>(e);
}

} // namespace detail

/// Robust estimate of <a_i, G> for each candidate i, from the n per-sample
/// inner products <a_i, g_1>, ..., <a_i, g_n>.
inline std::vector<ScoredAtom> robust_scores(const GradientBatch& batch, const AtomSet& set,
                                             std::span<const Index> candidates, const RobustEstimator& estimator)
{
    require_nonempty(batch);
    if (candidates.empty()) {
        throw ParameterError("robust_scores: empty candidate list");
    }
    Estimator est(estimator);
    std::vector<ScoredAtom> out(candidates.size());
    if (const auto sb = set.signed_basis_params(); sb && detail::exactly_odd(estimator)) {
        // Mean and MOM commute bit-exactly with negation, so each coordinate
        // is estimated once and shared by +D e_j and -D e_j.
        for (Index c : candidates) {
            if (c < 0 || c >= set.size()) {
                throw ParameterError("atom index out of range");
            }
        }
        const Index n = batch.size();
        InnerProductCounter::add(static_cast<std::uint64_t>(n) * candidates.size());
        std::vector<double> cache(static_cast<std::size_t>(sb->dim));
        std::vector<char> have(static_cast<std::size_t>(sb->dim), 0);
        std::vector<double> column(static_cast<std::size_t>(n));
        for (std::size_t c = 0; c < candidates.size(); ++c) {
            const Index i = candidates[c];
            const Index j = i % sb->dim;
            const auto uj = static_cast<std::size_t>(j);
            if (!have[uj]) {
                for (Index r = 0; r < n; ++r) {
                    column[static_cast<std::size_t>(r)] = sb->radius * batch.samples(r, j);
                }
                cache[uj] = est(std::span<const double>(column));
                have[uj] = 1;
            }
            out[c] = {i, i < sb->dim ? cache[uj] : -cache[uj]};
        }
        return out;
    }
    const Matrix proj = set.project(batch.samples, candidates);
    const auto n = static_cast<std::size_t>(proj.rows());
    for (Index c = 0; c < proj.cols(); ++c) {
        out[static_cast<std::size_t>(c)] = {candidates[static_cast<std::size_t>(c)],
                                            est(std::span<const double>(proj.col(c).data(), n))};
    }
    return out;
}

namespace detail {

inline ScoredAtom argmin_lowest(const std::vector<ScoredAtom>& scores)
{
    ScoredAtom best = scores.front();
    for (const auto& s : scores) {
        if (s.value < best.value || (s.value == best.value && s.index < best.index)) {
            best = s;
        }
    }
    return best;
}

} // namespace detail

/// Robust FW atom together with the full score vector it was chosen from.
struct RlmoSelection {
    ScoredAtom atom;
    std::vector<ScoredAtom> scores;
};

inline RlmoSelection rlmo_fw_scored(const GradientBatch& batch, const AtomSet& set, const RobustEstimator& estimator)
{
    const auto candidates = all_indices(set);
    auto scores = robust_scores(batch, set, candidates, estimator);
    const ScoredAtom best = detail::argmin_lowest(scores);
    return {best, std::move(scores)};
}

/// argmin over all atoms of the robust score; ties go to the lowest index.
inline ScoredAtom rlmo_fw(const GradientBatch& batch, const AtomSet& set, const RobustEstimator& estimator)
{
    return rlmo_fw_scored(batch, set, estimator).atom;
}

/// Robust away atom: minimizes the robust estimate of <a, -G> over the
/// candidates. The returned value is the negation of that estimate, i.e. the
/// robust estimate of <a, G> for the chosen atom.
inline ScoredAtom rlmo_away(const GradientBatch& batch, const AtomSet& set, std::span<const Index> candidates,
                            const RobustEstimator& estimator)
{
    require_nonempty(batch);
    if (candidates.empty()) {
        throw ParameterError("rlmo_away: empty candidate list");
    }
    Matrix proj = set.project(batch.samples, candidates);
    proj = -proj;
    Estimator est(estimator);
    const auto n = static_cast<std::size_t>(proj.rows());
    std::vector<ScoredAtom> neg(candidates.size());
    for (Index c = 0; c < proj.cols(); ++c) {
        neg[static_cast<std::size_t>(c)] = {candidates[static_cast<std::size_t>(c)],
                                            est(std::span<const double>(proj.col(c).data(), n))};
    }
    const ScoredAtom best = detail::argmin_lowest(neg);
    return {best.index, -best.value};
}

/// Robust estimate of <G, iterate - fw_atom> from the per-sample inner products.
/// Not clamped: under corruption the estimate may be negative.
inline double robust_duality_gap(const GradientBatch& batch, const Vector& iterate, const Vector& fw_atom,
                                 const RobustEstimator& estimator)
{
    require_nonempty(batch);
    require_same_dim(iterate.size(), batch.dim(), "robust_duality_gap");
    require_same_dim(fw_atom.size(), batch.dim(), "robust_duality_gap");
    const Vector direction = iterate - fw_atom;
    const Vector products = batch.samples * direction;
    return estimate(estimator, as_span(products));
}

/// Component j is the robust estimate over {g_i(j)}: a coordinate-wise
/// stand-in for a multivariate robust mean.
inline Vector coordinatewise_robust_gradient(const GradientBatch& batch, const RobustEstimator& estimator)
{
    require_nonempty(batch);
    Estimator est(estimator);
    Vector out(batch.dim());
    const auto n = static_cast<std::size_t>(batch.size());
    for (Index j = 0; j < batch.dim(); ++j) {
        out[j] = est(std::span<const double>(batch.samples.col(j).data(), n));
    }
    return out;
}

} // namespace robustcg
