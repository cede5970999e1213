#pragma once

#include <robustcg/haar.hpp>
#include <robustcg/types.hpp>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>
#include <string>
#include <utility>
#include <optional>
#include <variant>
#include <vector>

namespace robustcg {

// ---------------------------------------------------------------------------
// Atom sets
// ---------------------------------------------------------------------------

/// Arbitrary finite atom list, one atom per row.
struct ExplicitAtoms {
    Matrix atoms;
};

/// {+D e_i}_{i<d} followed by {-D e_i}_{i<d}: the l1 ball of radius D.
struct SignedBasis {
    Index dim = 0;
    double radius = 1.0;
};

/// One-hot vertices of the probability simplex in R^d.
struct SimplexVertices {
    Index dim = 0;
};

/// {+D h_i}_{i<d} followed by {-D h_i}_{i<d} over the orthonormal Haar basis.
struct HaarSigned {
    Index dim = 0;
    double radius = 1.0;
};

/// Instrumentation: when installed, every atom/sample inner product issued by
/// AtomSet::project is counted. Used by tests to pin oracle cost.
class InnerProductCounter {
public:
    InnerProductCounter() : previous_(current()) { current() = this; }
    ~InnerProductCounter() { current() = previous_; }
    InnerProductCounter(const InnerProductCounter&) = delete;
    InnerProductCounter& operator=(const InnerProductCounter&) = delete;

    std::uint64_t count() const noexcept { return count_.load(); }

    static void add(std::uint64_t n) noexcept
    {
        if (auto* c = current()) {
            c->count_ += n;
        }
    }

private:
    static InnerProductCounter*& current() noexcept
    {
        thread_local InnerProductCounter* active = nullptr;
        return active;
    }

    std::atomic<std::uint64_t> count_{0};
    InnerProductCounter* previous_;
};

/// Immutable, enumerable atom collection. Structured variants materialize
/// atoms on demand instead of storing them.
class AtomSet {
public:
    using Variant = std::variant<ExplicitAtoms, SignedBasis, SimplexVertices, HaarSigned>;

    explicit AtomSet(Variant v) : v_(std::move(v)) { check(); }

    static AtomSet explicit_atoms(Matrix rows) { return AtomSet(ExplicitAtoms{std::move(rows)}); }
    static AtomSet signed_basis(Index d, double radius = 1.0) { return AtomSet(SignedBasis{d, radius}); }
    static AtomSet simplex(Index d) { return AtomSet(SimplexVertices{d}); }
    static AtomSet haar(Index d, double radius = 1.0) { return AtomSet(HaarSigned{d, radius}); }

    const Variant& variant() const noexcept { return v_; }

    Index dim() const noexcept
    {
        return std::visit(
            [](const auto& s) -> Index {
                if constexpr (std::is_same_v<std::decay_t<decltype(s)>, ExplicitAtoms>) {
                    return s.atoms.cols();
                } else {
                    return s.dim;
                }
            },
            v_);
    }

    Index size() const noexcept
    {
        return std::visit(
            [](const auto& s) -> Index {
                using S = std::decay_t<decltype(s)>;
                if constexpr (std::is_same_v<S, ExplicitAtoms>) {
                    return s.atoms.rows();
                } else if constexpr (std::is_same_v<S, SimplexVertices>) {
                    return s.dim;
                } else {
                    return 2 * s.dim;
                }
            },
            v_);
    }

    /// Maximum pairwise l2 distance between atoms.
    double diameter() const
    {
        return std::visit(
            [](const auto& s) -> double {
                using S = std::decay_t<decltype(s)>;
                if constexpr (std::is_same_v<S, ExplicitAtoms>) {
                    double best = 0.0;
                    for (Index i = 0; i < s.atoms.rows(); ++i) {
                        for (Index j = i + 1; j < s.atoms.rows(); ++j) {
                            best = std::max(best, (s.atoms.row(i) - s.atoms.row(j)).norm());
                        }
                    }
                    return best;
                } else if constexpr (std::is_same_v<S, SimplexVertices>) {
                    return std::sqrt(2.0);
                } else {
                    return 2.0 * s.radius;
                }
            },
            v_);
    }

    Vector atom(Index i) const
    {
        check_index(i);
        return std::visit(
            [i](const auto& s) -> Vector {
                using S = std::decay_t<decltype(s)>;
                if constexpr (std::is_same_v<S, ExplicitAtoms>) {
                    return s.atoms.row(i).transpose();
                } else if constexpr (std::is_same_v<S, SimplexVertices>) {
                    return Vector::Unit(s.dim, i);
                } else if constexpr (std::is_same_v<S, SignedBasis>) {
                    const double sign = i < s.dim ? 1.0 : -1.0;
                    return sign * s.radius * Vector::Unit(s.dim, i % s.dim);
                } else {
                    const double sign = i < s.dim ? 1.0 : -1.0;
                    return sign * s.radius * haar_vector(s.dim, i % s.dim);
                }
            },
            v_);
    }

    /// <a_i, g>.
    double inner(Index i, const Vector& g) const
    {
        check_index(i);
        require_same_dim(g.size(), dim(), "AtomSet::inner");
        return inner_unchecked(i, g.data());
    }

    /// <a_i, g> for every atom, in index order.
    Vector inner_all(const Vector& g) const
    {
        require_same_dim(g.size(), dim(), "AtomSet::inner_all");
        const Index m = size();
        Vector out(m);
        if (const auto* h = std::get_if<HaarSigned>(&v_)) {
            std::vector<double> coeffs(static_cast<std::size_t>(h->dim));
            std::vector<double> work;
            haar_analysis(as_span(g), coeffs, work);
            for (Index j = 0; j < h->dim; ++j) {
                out[j] = h->radius * coeffs[static_cast<std::size_t>(j)];
                out[j + h->dim] = -h->radius * coeffs[static_cast<std::size_t>(j)];
            }
            return out;
        }
        for (Index i = 0; i < m; ++i) {
            out[i] = inner_unchecked(i, g.data());
        }
        return out;
    }

    /// Projections of every sample (rows of `samples`, n x d) onto each
    /// candidate atom: result is n x |candidates|, column c = <a_{cand[c]}, g_i>.
    Matrix project(const Matrix& samples, std::span<const Index> candidates) const
    {
        require_same_dim(samples.cols(), dim(), "AtomSet::project");
        for (Index c : candidates) {
            check_index(c);
        }
        const Index n = samples.rows();
        const auto m = static_cast<Index>(candidates.size());
        Matrix out(n, m);
        InnerProductCounter::add(static_cast<std::uint64_t>(n) * static_cast<std::uint64_t>(m));
        std::visit(
            [&](const auto& s) {
                using S = std::decay_t<decltype(s)>;
                if constexpr (std::is_same_v<S, SignedBasis>) {
                    for (Index c = 0; c < m; ++c) {
                        const Index i = candidates[static_cast<std::size_t>(c)];
                        const double scale = i < s.dim ? s.radius : -s.radius;
                        out.col(c) = scale * samples.col(i % s.dim);
                    }
                } else if constexpr (std::is_same_v<S, SimplexVertices>) {
                    for (Index c = 0; c < m; ++c) {
                        out.col(c) = samples.col(candidates[static_cast<std::size_t>(c)]);
                    }
                } else if constexpr (std::is_same_v<S, ExplicitAtoms>) {
                    for (Index c = 0; c < m; ++c) {
                        out.col(c) = samples * s.atoms.row(candidates[static_cast<std::size_t>(c)]).transpose();
                    }
                } else {
                    project_haar(s, samples, candidates, out);
                }
            },
            v_);
        return out;
    }

    /// x += scale * a_i, touching only the atom's support.
    void axpy(Index i, double scale, Vector& x) const
    {
        check_index(i);
        require_same_dim(x.size(), dim(), "AtomSet::axpy");
        std::visit(
            [&](const auto& s) {
                using S = std::decay_t<decltype(s)>;
                if constexpr (std::is_same_v<S, ExplicitAtoms>) {
                    x += scale * s.atoms.row(i).transpose();
                } else if constexpr (std::is_same_v<S, SimplexVertices>) {
                    x[i] += scale;
                } else if constexpr (std::is_same_v<S, SignedBasis>) {
                    x[i % s.dim] += (i < s.dim ? scale : -scale) * s.radius;
                } else {
                    const double sign = i < s.dim ? 1.0 : -1.0;
                    const HaarSupport sup = haar_support(s.dim, i % s.dim);
                    const double v = sign * scale * s.radius * sup.value;
                    if (sup.scaling) {
                        x.array() += v;
                    } else {
                        x.segment(sup.begin, sup.half).array() += v;
                        x.segment(sup.begin + sup.half, sup.half).array() -= v;
                    }
                }
            },
            v_);
    }

    /// True when every atom is a 0/1 vector (the DICG domain requirement).
    bool on_hypercube() const
    {
        return std::visit(
            [](const auto& s) -> bool {
                using S = std::decay_t<decltype(s)>;
                if constexpr (std::is_same_v<S, SimplexVertices>) {
                    return true;
                } else if constexpr (std::is_same_v<S, ExplicitAtoms>) {
                    return (s.atoms.array() == 0.0 || s.atoms.array() == 1.0).all();
                } else {
                    return false;
                }
            },
            v_);
    }

    /// Parameters of a SignedBasis set; empty for the other variants.
    std::optional<SignedBasis> signed_basis_params() const
    {
        if (const auto* s = std::get_if<SignedBasis>(&v_)) {
            return *s;
        }
        return std::nullopt;
    }

    /// Index of the atom with opposite sign, for the symmetric sets; -1 otherwise.
    Index negation(Index i) const
    {
        check_index(i);
        return std::visit(
            [i](const auto& s) -> Index {
                using S = std::decay_t<decltype(s)>;
                if constexpr (std::is_same_v<S, SignedBasis> || std::is_same_v<S, HaarSigned>) {
                    return i < s.dim ? i + s.dim : i - s.dim;
                } else {
                    return -1;
                }
            },
            v_);
    }

private:
    void check() const
    {
        std::visit(
            [](const auto& s) {
                using S = std::decay_t<decltype(s)>;
                if constexpr (std::is_same_v<S, ExplicitAtoms>) {
                    if (s.atoms.rows() < 2 || s.atoms.cols() < 1) {
                        throw ParameterError("explicit atom set needs at least two atoms of dimension >= 1");
                    }
                } else if constexpr (std::is_same_v<S, SimplexVertices>) {
                    if (s.dim < 2) {
                        throw ParameterError("simplex needs dimension >= 2");
                    }
                } else {
                    if (s.dim < 1 || !(s.radius > 0.0)) {
                        throw ParameterError("signed atom set needs dimension >= 1 and radius > 0");
                    }
                    if constexpr (std::is_same_v<S, HaarSigned>) {
                        require_haar_dim(s.dim);
                    }
                }
            },
            v_);
    }

    void check_index(Index i) const
    {
        if (i < 0 || i >= size()) {
            throw std::out_of_range("atom index " + std::to_string(i) + " out of range [0, " +
                                    std::to_string(size()) + ")");
        }
    }

    double inner_unchecked(Index i, const double* g) const
    {
        return std::visit(
            [&](const auto& s) -> double {
                using S = std::decay_t<decltype(s)>;
                if constexpr (std::is_same_v<S, ExplicitAtoms>) {
                    double acc = 0.0;
                    for (Index k = 0; k < s.atoms.cols(); ++k) {
                        acc += s.atoms(i, k) * g[k];
                    }
                    return acc;
                } else if constexpr (std::is_same_v<S, SimplexVertices>) {
                    return g[i];
                } else if constexpr (std::is_same_v<S, SignedBasis>) {
                    return (i < s.dim ? s.radius : -s.radius) * g[i % s.dim];
                } else {
                    return (i < s.dim ? s.radius : -s.radius) * haar_inner(s.dim, i % s.dim, g);
                }
            },
            v_);
    }

    static void project_haar(const HaarSigned& s, const Matrix& samples, std::span<const Index> candidates,
                             Matrix& out)
    {
        const Index n = samples.rows();
        const auto m = static_cast<Index>(candidates.size());
        // Few candidates: direct O(support) inner products; otherwise one fast
        // transform per sample.
        if (m * 8 < s.dim) {
            std::vector<double> row(static_cast<std::size_t>(s.dim));
            for (Index r = 0; r < n; ++r) {
                for (Index k = 0; k < s.dim; ++k) {
                    row[static_cast<std::size_t>(k)] = samples(r, k);
                }
                for (Index c = 0; c < m; ++c) {
                    const Index i = candidates[static_cast<std::size_t>(c)];
                    const double scale = i < s.dim ? s.radius : -s.radius;
                    out(r, c) = scale * haar_inner(s.dim, i % s.dim, row.data());
                }
            }
            return;
        }
        std::vector<double> row(static_cast<std::size_t>(s.dim));
        std::vector<double> coeffs(static_cast<std::size_t>(s.dim));
        std::vector<double> work;
        for (Index r = 0; r < n; ++r) {
            for (Index k = 0; k < s.dim; ++k) {
                row[static_cast<std::size_t>(k)] = samples(r, k);
            }
            haar_analysis(row, coeffs, work);
            for (Index c = 0; c < m; ++c) {
                const Index i = candidates[static_cast<std::size_t>(c)];
                const double scale = i < s.dim ? s.radius : -s.radius;
                out(r, c) = scale * coeffs[static_cast<std::size_t>(i % s.dim)];
            }
        }
    }

    Variant v_;
};

/// Reads an explicit atom set: one atom per row, comma-separated decimals, no header.
inline AtomSet load_atoms_csv(const std::string& path)
{
    std::ifstream in(path);
    if (!in) {
        throw std::runtime_error("cannot open atom file '" + path + "'");
    }
    std::vector<std::vector<double>> rows;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') {
            line.pop_back();
        }
        if (line.find_first_not_of(" \t") == std::string::npos) {
            continue;
        }
        std::vector<double> row;
        std::stringstream ss(line);
        ss.imbue(std::locale::classic());
        std::string cell;
        while (std::getline(ss, cell, ',')) {
            std::istringstream cs(cell);
            cs.imbue(std::locale::classic());
            double v = 0.0;
            if (!(cs >> v)) {
                throw std::runtime_error("atom file '" + path + "': bad number '" + cell + "'");
            }
            row.push_back(v);
        }
        if (!rows.empty() && row.size() != rows.front().size()) {
            throw DimensionError("atom file '" + path + "': rows have different lengths");
        }
        rows.push_back(std::move(row));
    }
    if (rows.empty()) {
        throw std::runtime_error("atom file '" + path + "' is empty");
    }
    Matrix atoms(static_cast<Index>(rows.size()), static_cast<Index>(rows.front().size()));
    for (Index i = 0; i < atoms.rows(); ++i) {
        for (Index j = 0; j < atoms.cols(); ++j) {
            atoms(i, j) = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
        }
    }
    return AtomSet::explicit_atoms(std::move(atoms));
}

// ---------------------------------------------------------------------------
// Exact oracles
// ---------------------------------------------------------------------------

struct ScoredAtom {
    Index index = -1;
    double value = 0.0;
};

/// argmin_{a in A} <a, g>; ties go to the lowest index.
inline ScoredAtom lmo_exact(const AtomSet& set, const Vector& g)
{
    const Vector scores = set.inner_all(g);
    ScoredAtom best{0, scores[0]};
    for (Index i = 1; i < scores.size(); ++i) {
        if (scores[i] < best.value) {
            best = {i, scores[i]};
        }
    }
    return best;
}

/// argmax over the active atoms of <a, g>; ties go to the lowest index.
inline ScoredAtom away_exact(const AtomSet& set, std::span<const Index> active, const Vector& g)
{
    if (active.empty()) {
        throw ParameterError("away_exact: empty active set");
    }
    ScoredAtom best{-1, -std::numeric_limits<double>::infinity()};
    for (Index i : active) {
        const double v = set.inner(i, g);
        if (best.index < 0 || v > best.value || (v == best.value && i < best.index)) {
            best = {i, v};
        }
    }
    return best;
}

// ---------------------------------------------------------------------------
// DICG support masking and step rounding
// ---------------------------------------------------------------------------

inline constexpr double kDicgZeroTol = 1e-10;

/// Copy of g with -inf wherever the iterate is (numerically) zero. Under the
/// convention (-inf) * 0 = 0, argmax_a <masked, a> over 0/1 atoms is restricted
/// to atoms supported inside support(iterate).
///
/// The published DICG listing writes this away step as an argmin over the
/// masked vector, which would always select a masked-out atom; the away atom
/// is the argmax, as in the usual away-step definition.
inline Vector dicg_away_mask(const Vector& g, const Vector& iterate, double zero_tol = kDicgZeroTol)
{
    require_same_dim(g.size(), iterate.size(), "dicg_away_mask");
    Vector masked = g;
    for (Index i = 0; i < g.size(); ++i) {
        if (iterate[i] <= zero_tol) {
            masked[i] = -std::numeric_limits<double>::infinity();
        }
    }
    return masked;
}

/// <masked, a> with (-inf) * 0 = 0.
inline double masked_inner(const Vector& masked, const Vector& atom)
{
    require_same_dim(masked.size(), atom.size(), "masked_inner");
    double acc = 0.0;
    for (Index i = 0; i < masked.size(); ++i) {
        if (atom[i] == 0.0) {
            continue;
        }
        acc += masked[i] * atom[i];
    }
    return acc;
}

/// Atoms whose support lies inside support(iterate): the DICG away candidates.
inline std::vector<Index> dicg_away_candidates(const AtomSet& set, const Vector& iterate,
                                               double zero_tol = kDicgZeroTol)
{
    require_same_dim(iterate.size(), set.dim(), "dicg_away_candidates");
    std::vector<Index> out;
    if (std::holds_alternative<SimplexVertices>(set.variant())) {
        for (Index i = 0; i < iterate.size(); ++i) {
            if (iterate[i] > zero_tol) {
                out.push_back(i);
            }
        }
        return out;
    }
    const Vector mask = dicg_away_mask(Vector::Zero(iterate.size()), iterate, zero_tol);
    for (Index i = 0; i < set.size(); ++i) {
        if (std::isfinite(masked_inner(mask, set.atom(i)))) {
            out.push_back(i);
        }
    }
    return out;
}

/// argmax_a <dicg_away_mask(g, iterate), a>, lowest index on ties.
inline ScoredAtom dicg_away_exact(const AtomSet& set, const Vector& g, const Vector& iterate)
{
    const auto candidates = dicg_away_candidates(set, iterate);
    if (candidates.empty()) {
        throw ConfigError("dicg_away_exact: iterate has no admissible away atom");
    }
    return away_exact(set, candidates, g);
}

/// Largest gamma keeping iterate + gamma * direction >= 0 (inf if unconstrained).
inline double max_feasible_step(const Vector& iterate, const Vector& direction)
{
    require_same_dim(iterate.size(), direction.size(), "max_feasible_step");
    double gamma = std::numeric_limits<double>::infinity();
    for (Index i = 0; i < iterate.size(); ++i) {
        if (direction[i] < 0.0) {
            gamma = std::min(gamma, std::max(iterate[i], 0.0) / -direction[i]);
        }
    }
    return gamma;
}

/// Dyadic DICG step: the largest 2^-delta (delta natural) not exceeding
/// min(eta, max feasible step). Zero when that bound is not positive.
inline double dicg_step_size(double eta, const Vector& iterate, const Vector& direction)
{
    if (!(eta > 0.0)) {
        return 0.0;
    }
    const double bound = std::min(eta, max_feasible_step(iterate, direction));
    if (!(bound > 0.0)) {
        return 0.0;
    }
    double step = 1.0;
    while (step > bound) {
        step *= 0.5;
        if (step == 0.0) {
            return 0.0;
        }
    }
    return step;
}

// ---------------------------------------------------------------------------
// Convex decomposition (PCG)
// ---------------------------------------------------------------------------

inline constexpr double kDropThreshold = 1e-12;

/// beta = sum_i c_i a_i with c_i > 0, sum c_i = 1.
class Decomposition {
public:
    Decomposition() = default;

    static Decomposition vertex(Index i)
    {
        Decomposition d;
        d.entries_[i] = 1.0;
        return d;
    }

    static Decomposition from_entries(std::map<Index, double> entries)
    {
        Decomposition d;
        d.entries_ = std::move(entries);
        return d;
    }

    const std::map<Index, double>& entries() const noexcept { return entries_; }
    bool contains(Index i) const { return entries_.count(i) != 0; }
    std::size_t size() const noexcept { return entries_.size(); }

    double coefficient(Index i) const
    {
        const auto it = entries_.find(i);
        return it == entries_.end() ? 0.0 : it->second;
    }

    std::vector<Index> active_indices() const
    {
        std::vector<Index> out;
        out.reserve(entries_.size());
        for (const auto& [i, c] : entries_) {
            out.push_back(i);
        }
        return out;
    }

    double sum() const
    {
        double s = 0.0;
        for (const auto& [i, c] : entries_) {
            s += c;
        }
        return s;
    }

    double min_coefficient() const
    {
        double m = std::numeric_limits<double>::infinity();
        for (const auto& [i, c] : entries_) {
            m = std::min(m, c);
        }
        return m;
    }

    Vector reconstruct(const AtomSet& set) const
    {
        Vector x = Vector::Zero(set.dim());
        for (const auto& [i, c] : entries_) {
            set.axpy(i, c, x);
        }
        return x;
    }

    /// Moves min(eta, c_away) from the away atom to the FW atom and returns the
    /// mass moved. The away entry is dropped once it falls below 1e-12.
    double pairwise_update(Index fw, Index away, double eta)
    {
        auto it = entries_.find(away);
        if (it == entries_.end()) {
            throw std::logic_error("pairwise_update: away atom " + std::to_string(away) + " is not active");
        }
        if (!(eta >= 0.0)) {
            throw ParameterError("pairwise_update: step must be >= 0");
        }
        const double used = std::min(eta, it->second);
        if (used == 0.0 || fw == away) {
            return used;
        }
        it->second -= used;
        if (it->second < kDropThreshold) {
            entries_.erase(it);
        }
        entries_[fw] += used;
        return used;
    }

private:
    std::map<Index, double> entries_;
};

/// Functional form of Decomposition::pairwise_update.
inline std::pair<Decomposition, double> pairwise_update(Decomposition decomp, Index fw, Index away, double eta)
{
    const double used = decomp.pairwise_update(fw, away, eta);
    return {std::move(decomp), used};
}

} // namespace robustcg
