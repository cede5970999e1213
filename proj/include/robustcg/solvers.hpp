#pragma once

#include <robustcg/atoms.hpp>
#include <robustcg/diagnostics.hpp>
#include <robustcg/rlmo.hpp>
#include <robustcg/robust_mean.hpp>
#include <robustcg/schedule.hpp>
#include <robustcg/types.hpp>

#include <algorithm>
#include <cmath>
#include <concepts>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

namespace robustcg {

// ---------------------------------------------------------------------------
// Problem concepts
// ---------------------------------------------------------------------------

/// Anything that yields per-sample gradients at a point.
template <class P>
concept GradientSource = requires(const P& p, const Vector& beta) {
    { p.dim() } -> std::convertible_to<Index>;
    { p.gradient_batch(beta) } -> std::convertible_to<GradientBatch>;
};

/// Problems with a known ground truth report ||beta - beta*||.
template <class P>
concept HasGroundTruth = requires(const P& p, const Vector& beta) {
    { p.xdist(beta) } -> std::convertible_to<double>;
};

/// Problems with an exact population gradient, used by the RASC audit.
template <class P>
concept HasPopulationGradient = requires(const P& p, const Vector& beta) {
    { p.population_gradient(beta) } -> std::convertible_to<Vector>;
};

/// l1-ball problem lifted onto the 2d-simplex: beta = D (z_+ - z_-), with
/// gradients lifted to D (g, -g). Vertex k of the simplex corresponds to atom
/// k of SignedBasis{d, D}.
template <GradientSource P>
class LiftedL1 {
public:
    LiftedL1(const P& base, double radius) : base_(&base), radius_(radius)
    {
        if (!(radius > 0.0)) {
            throw ParameterError("LiftedL1: radius must be > 0");
        }
    }

    Index dim() const { return 2 * base_->dim(); }
    double radius() const noexcept { return radius_; }

    Vector fold(const Vector& z) const
    {
        require_same_dim(z.size(), dim(), "LiftedL1::fold");
        const Index d = base_->dim();
        return radius_ * (z.head(d) - z.tail(d));
    }

    Vector lift_gradient(const Vector& g) const
    {
        Vector out(2 * g.size());
        out << radius_ * g, -(radius_ * g);
        return out;
    }

    GradientBatch gradient_batch(const Vector& z) const
    {
        const GradientBatch inner = base_->gradient_batch(fold(z));
        const Index d = inner.dim();
        GradientBatch lifted{Matrix(inner.size(), 2 * d)};
        lifted.samples.leftCols(d) = radius_ * inner.samples;
        lifted.samples.rightCols(d) = -lifted.samples.leftCols(d);
        return lifted;
    }

    double xdist(const Vector& z) const
        requires HasGroundTruth<P>
    {
        return base_->xdist(fold(z));
    }

    Vector population_gradient(const Vector& z) const
        requires HasPopulationGradient<P>
    {
        return lift_gradient(base_->population_gradient(fold(z)));
    }

private:
    const P* base_;
    double radius_;
};

// ---------------------------------------------------------------------------
// Configuration and trace
// ---------------------------------------------------------------------------

enum class Algorithm {
    PCG,   // pairwise CG with robust atom selection (RLMO)
    DICG,  // decomposition-invariant pairwise CG with RLMO
    PCG2,  // pairwise CG on a coordinate-wise robust gradient
    DICG2, // decomposition-invariant pairwise CG on a coordinate-wise robust gradient
};

inline std::string to_string(Algorithm a)
{
    switch (a) {
    case Algorithm::PCG: return "pcg";
    case Algorithm::DICG: return "dicg";
    case Algorithm::PCG2: return "pcg2";
    case Algorithm::DICG2: return "dicg2";
    }
    return "?";
}

struct SolverConfig {
    Algorithm algorithm = Algorithm::PCG;
    RobustEstimator estimator = EmpiricalMean{};
    StepSchedule schedule = AdaptiveGap{};
    Index max_iters = 500;
    std::optional<double> stop_xgap; // stop once the clamped duality-gap estimate falls to this level
    std::uint64_t seed = 0;         // provenance only; the solvers are deterministic
    bool keep_iterates = false;
    bool audit_rasc = false; // requires HasPopulationGradient
};

struct TraceRecord {
    Index iter = 0;
    double xdist = std::numeric_limits<double>::quiet_NaN();
    double gap = 0.0;      // clamped robust duality-gap estimate at beta_t
    double pair_gap = 0.0; // clamped robust pairwise gap at beta_t
    double eta = 0.0;      // step actually taken from beta_t (0 on the final record)
    Index fw = -1;
    Index away = -1;
    std::optional<double> rasc_gap;
    double weight_sum = 0.0; // PCG: sum of decomposition weights; DICG: sum of iterate coordinates
    double min_weight = 0.0; // PCG: smallest weight; DICG: smallest coordinate
};

struct RunTrace {
    std::vector<TraceRecord> records;
    std::vector<Vector> iterates; // beta_t per record, when keep_iterates is set
    Vector final_iterate;
    std::optional<Decomposition> final_decomposition; // PCG variants only

    double final_xdist() const { return records.empty() ? std::numeric_limits<double>::quiet_NaN() : records.back().xdist; }
};

namespace detail {

struct Selection {
    Index fw = -1;
    Index away = -1;
    double duality_gap = 0.0; // unclamped
    double pair_gap = 0.0;    // unclamped
};

inline bool is_pcg_family(Algorithm a) { return a == Algorithm::PCG || a == Algorithm::PCG2; }
inline bool uses_rlmo(Algorithm a) { return a == Algorithm::PCG || a == Algorithm::DICG; }

inline Selection select_atoms(const GradientBatch& batch, const AtomSet& set, const Vector& beta,
                              std::span<const Index> away_candidates, const SolverConfig& cfg)
{
    Selection sel;
    if (uses_rlmo(cfg.algorithm)) {
        const ScoredAtom fw = rlmo_fw(batch, set, cfg.estimator);
        const ScoredAtom away = rlmo_away(batch, set, away_candidates, cfg.estimator);
        sel.fw = fw.index;
        sel.away = away.index;
        sel.pair_gap = away.value - fw.value;
        sel.duality_gap = robust_duality_gap(batch, beta, set.atom(fw.index), cfg.estimator);
    } else {
        const Vector g = coordinatewise_robust_gradient(batch, cfg.estimator);
        const ScoredAtom fw = lmo_exact(set, g);
        const ScoredAtom away = away_exact(set, away_candidates, g);
        sel.fw = fw.index;
        sel.away = away.index;
        sel.pair_gap = away.value - fw.value;
        sel.duality_gap = g.dot(beta) - fw.value;
    }
    return sel;
}

template <class Problem>
double audit_rasc(const Problem& problem, const AtomSet& set, const Vector& beta,
                  std::span<const Index> away_candidates, const Selection& sel)
{
    const Vector G = problem.population_gradient(beta);
    const ScoredAtom fw = lmo_exact(set, G);
    const ScoredAtom away = away_exact(set, away_candidates, G);
    const Vector exact_dir = set.atom(fw.index) - set.atom(away.index);
    const Vector robust_dir = set.atom(sel.fw) - set.atom(sel.away);
    return rasc_gap(G, exact_dir, robust_dir);
}

template <GradientSource Problem>
RunTrace run_pairwise(const Problem& problem, const AtomSet& set, const SolverConfig& cfg)
{
    require_same_dim(problem.dim(), set.dim(), "solver: problem/atom set");
    if (cfg.max_iters < 1) {
        throw ParameterError("solver: max_iters must be >= 1");
    }
    validate(cfg.estimator);
    validate(cfg.schedule);
    const bool pcg = is_pcg_family(cfg.algorithm);
    if (!pcg && !set.on_hypercube()) {
        throw ConfigError("DICG requires atoms on the 0/1 hypercube (lift l1 problems onto the simplex)");
    }
    if (cfg.audit_rasc && !HasPopulationGradient<Problem>) {
        throw ConfigError("RASC audit requires a problem with a population gradient");
    }

    RunTrace trace;
    trace.records.reserve(static_cast<std::size_t>(cfg.max_iters + 1));
    Vector beta = set.atom(0);
    Decomposition decomp = Decomposition::vertex(0);

    for (Index t = 0; t <= cfg.max_iters; ++t) {
        const std::vector<Index> candidates = pcg ? decomp.active_indices() : dicg_away_candidates(set, beta);
        if (candidates.empty()) {
            throw ConfigError("solver: iterate has no admissible away atom");
        }
        const GradientBatch batch = problem.gradient_batch(beta);
        const Selection sel = select_atoms(batch, set, beta, candidates, cfg);

        TraceRecord rec;
        rec.iter = t;
        if constexpr (HasGroundTruth<Problem>) {
            rec.xdist = problem.xdist(beta);
        }
        rec.gap = std::max(0.0, sel.duality_gap);
        rec.pair_gap = std::max(0.0, sel.pair_gap);
        rec.fw = sel.fw;
        rec.away = sel.away;
        if constexpr (HasPopulationGradient<Problem>) {
            if (cfg.audit_rasc) {
                rec.rasc_gap = audit_rasc(problem, set, beta, candidates, sel);
            }
        }
        if (pcg) {
            rec.weight_sum = decomp.sum();
            rec.min_weight = decomp.min_coefficient();
        } else {
            rec.weight_sum = beta.sum();
            rec.min_weight = beta.minCoeff();
        }

        if (cfg.keep_iterates) {
            trace.iterates.push_back(beta);
        }

        const bool last = t == cfg.max_iters || (cfg.stop_xgap && rec.gap <= *cfg.stop_xgap);
        if (!last) {
            const double eta =
                std::clamp(step_size(cfg.schedule, t, GapEstimates{rec.gap, rec.pair_gap}), 0.0, 1.0);
            if (pcg) {
                rec.eta = decomp.pairwise_update(sel.fw, sel.away, eta);
                if (rec.eta > 0.0 && sel.fw != sel.away) {
                    set.axpy(sel.fw, rec.eta, beta);
                    set.axpy(sel.away, -rec.eta, beta);
                }
            } else {
                const Vector direction = set.atom(sel.fw) - set.atom(sel.away);
                rec.eta = dicg_step_size(eta, beta, direction);
                if (rec.eta > 0.0) {
                    beta += rec.eta * direction;
                }
            }
        }
        trace.records.push_back(rec);
        if (last) {
            break;
        }
    }
    trace.final_iterate = beta;
    if (pcg) {
        trace.final_decomposition = decomp;
    }
    return trace;
}

} // namespace detail

/// Pairwise CG with robust atom selection. Starts at atom 0 and keeps an
/// explicit convex decomposition; steps are trimmed to the away atom's weight.
template <GradientSource Problem>
RunTrace run_pcg(const Problem& problem, const AtomSet& set, SolverConfig cfg)
{
    cfg.algorithm = Algorithm::PCG;
    return detail::run_pairwise(problem, set, cfg);
}

/// Decomposition-invariant pairwise CG with robust atom selection over 0/1
/// atoms: away atoms are restricted to the iterate's support and steps are
/// rounded down to powers of two within the feasible range.
template <GradientSource Problem>
RunTrace run_dicg(const Problem& problem, const AtomSet& set, SolverConfig cfg)
{
    cfg.algorithm = Algorithm::DICG;
    return detail::run_pairwise(problem, set, cfg);
}

template <GradientSource Problem>
RunTrace run_pcg2(const Problem& problem, const AtomSet& set, SolverConfig cfg)
{
    cfg.algorithm = Algorithm::PCG2;
    return detail::run_pairwise(problem, set, cfg);
}

template <GradientSource Problem>
RunTrace run_dicg2(const Problem& problem, const AtomSet& set, SolverConfig cfg)
{
    cfg.algorithm = Algorithm::DICG2;
    return detail::run_pairwise(problem, set, cfg);
}

/// Dispatch on cfg.algorithm.
template <GradientSource Problem>
RunTrace run_solver(const Problem& problem, const AtomSet& set, const SolverConfig& cfg)
{
    return detail::run_pairwise(problem, set, cfg);
}

/// RASC records from an audited trace; records without an audit are skipped.
inline std::vector<RascRecord> rasc_records(const RunTrace& trace)
{
    std::vector<RascRecord> out;
    for (const auto& r : trace.records) {
        if (r.rasc_gap) {
            out.push_back({r.iter, r.xdist, *r.rasc_gap});
        }
    }
    return out;
}

} // namespace robustcg
