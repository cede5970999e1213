#pragma once

#include <robustcg/atoms.hpp>
#include <robustcg/haar.hpp>
#include <robustcg/rlmo.hpp>
#include <robustcg/types.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <random>
#include <string>
#include <variant>
#include <vector>

namespace robustcg {

// ---------------------------------------------------------------------------
// Corruption models
// ---------------------------------------------------------------------------

/// y_i <- magnitude * ||y||_inf * (-sign(y_i)).
struct ResponseFlip {
    double magnitude = 10.0;
};

/// x_i <- scale * u with u = -beta*/||beta*||, y_i <- -scale.
struct LeveragePoint {
    double scale = 10.0;
};

/// (x_i, y_i) redrawn independently of beta*, with `scale` times the clean variance.
struct ObliviousGaussian {
    double scale = 10.0;
};

using Adversary = std::variant<ResponseFlip, LeveragePoint, ObliviousGaussian>;

struct NoCorruption {};

/// An adversary overwrites floor(epsilon * n) seeded-random rows.
struct HuberContamination {
    double epsilon = 0.1;
    Adversary adversary = ResponseFlip{};
};

/// exp(Z), Z ~ N(0,1); centered by subtracting exp(1/2) unless disabled.
struct LogNormal {
    bool centered = true;
};

struct StudentT {
    double dof = 3.0;
};

/// Design entries and noise drawn from a heavy-tailed law.
struct HeavyTail {
    std::variant<LogNormal, StudentT> distribution = LogNormal{};
};

using CorruptionSpec = std::variant<NoCorruption, HuberContamination, HeavyTail>;

inline double corruption_epsilon(const CorruptionSpec& c)
{
    if (const auto* h = std::get_if<HuberContamination>(&c)) {
        return h->epsilon;
    }
    return 0.0;
}

/// floor(epsilon * n), guarded against representation error in epsilon * n.
inline Index corrupted_count(double epsilon, Index n)
{
    return static_cast<Index>(std::floor(epsilon * static_cast<double>(n) + 1e-9));
}

// ---------------------------------------------------------------------------
// Design covariance
// ---------------------------------------------------------------------------

struct IdentityCovariance {
    double scale = 1.0; // Sigma_x = scale * I
};
struct DiagonalCovariance {
    Vector diagonal;
};
struct DenseCovariance {
    Matrix matrix;
};
using CovarianceSpec = std::variant<IdentityCovariance, DiagonalCovariance, DenseCovariance>;

/// Sigma_x (beta - beta*): the gradient of the population least-squares risk
/// under zero-mean noise.
inline Vector population_gradient(const CovarianceSpec& sigma_x, const Vector& beta, const Vector& beta_star)
{
    require_same_dim(beta.size(), beta_star.size(), "population_gradient");
    const Vector diff = beta - beta_star;
    return std::visit(
        [&](const auto& s) -> Vector {
            using S = std::decay_t<decltype(s)>;
            if constexpr (std::is_same_v<S, IdentityCovariance>) {
                return s.scale * diff;
            } else if constexpr (std::is_same_v<S, DiagonalCovariance>) {
                require_same_dim(s.diagonal.size(), diff.size(), "population_gradient");
                return s.diagonal.cwiseProduct(diff);
            } else {
                require_same_dim(s.matrix.rows(), diff.size(), "population_gradient");
                return s.matrix * diff;
            }
        },
        sigma_x);
}

// ---------------------------------------------------------------------------
// Sparse signals
// ---------------------------------------------------------------------------

struct SparseSignal {
    Vector beta;
    std::vector<Index> atoms;   // supporting atom indices
    std::vector<double> weights; // atomic coefficients, summing to the scale
};

/// beta = scale * sum_k w_k a_{atoms[k]} with the given convex weights.
inline SparseSignal signal_from_atoms(const AtomSet& set, std::vector<Index> atoms, std::vector<double> weights,
                                      double scale)
{
    if (atoms.size() != weights.size() || atoms.empty()) {
        throw ParameterError("signal_from_atoms: need matching, non-empty atom and weight lists");
    }
    SparseSignal out;
    out.beta = Vector::Zero(set.dim());
    for (std::size_t k = 0; k < atoms.size(); ++k) {
        weights[k] *= scale;
        set.axpy(atoms[k], weights[k], out.beta);
    }
    out.atoms = std::move(atoms);
    out.weights = std::move(weights);
    return out;
}

/// Convex combination of s distinct atoms with symmetric-Dirichlet weights,
/// scaled by `scale` (0.9 keeps beta* strictly inside conv(A); 1.0 puts it on
/// the boundary face). Never selects an atom together with its negation.
inline SparseSignal sparse_signal(const AtomSet& set, Index sparsity, std::uint64_t seed, double scale = 0.9)
{
    const Index base = set.negation(0) >= 0 ? set.size() / 2 : set.size();
    if (sparsity < 1 || sparsity > set.size() / 2) {
        throw ParameterError("sparse_signal: sparsity must lie in [1, |A|/2]");
    }
    if (!(scale > 0.0 && scale <= 1.0)) {
        throw ParameterError("sparse_signal: scale must lie in (0, 1]");
    }
    std::seed_seq seq{seed, std::uint64_t{0x51a7}};
    std::mt19937_64 rng(seq);
    std::vector<Index> pool(static_cast<std::size_t>(base));
    std::iota(pool.begin(), pool.end(), Index{0});
    std::shuffle(pool.begin(), pool.end(), rng);
    std::vector<Index> atoms(pool.begin(), pool.begin() + sparsity);
    std::sort(atoms.begin(), atoms.end());
    if (base != set.size()) {
        std::bernoulli_distribution coin(0.5);
        for (auto& a : atoms) {
            if (coin(rng)) {
                a = set.negation(a);
            }
        }
    }
    std::gamma_distribution<double> gamma(1.0, 1.0);
    std::vector<double> weights(static_cast<std::size_t>(sparsity));
    double total = 0.0;
    for (auto& w : weights) {
        w = gamma(rng);
        total += w;
    }
    for (auto& w : weights) {
        w /= total;
    }
    return signal_from_atoms(set, std::move(atoms), std::move(weights), scale);
}

// ---------------------------------------------------------------------------
// Regression problems
// ---------------------------------------------------------------------------

/// y = X beta* + xi, possibly corrupted. Per-sample loss 1/2 (<x_i, beta> - y_i)^2.
struct RegressionProblem {
    Matrix X;
    Vector y;
    Vector beta_star;
    double sigma = 0.0;
    CorruptionSpec corruption = NoCorruption{};
    std::optional<CovarianceSpec> sigma_x; // clean-design covariance, when known
    std::vector<bool> corrupted;           // per-row flag
    SparseSignal signal;
    std::uint64_t seed = 0;

    Index dim() const noexcept { return X.cols(); }
    Index samples() const noexcept { return X.rows(); }

    /// g_i = x_i (<x_i, beta> - y_i).
    GradientBatch gradient_batch(const Vector& beta) const
    {
        require_same_dim(beta.size(), dim(), "gradient_batch");
        const Vector residual = X * beta - y;
        return GradientBatch{X.array().colwise() * residual.array()};
    }

    Vector population_gradient(const Vector& beta) const
    {
        if (!sigma_x) {
            throw ConfigError("population gradient needs a known design covariance");
        }
        return robustcg::population_gradient(*sigma_x, beta, beta_star);
    }

    double xdist(const Vector& beta) const { return (beta - beta_star).norm(); }

    Index corrupted_rows() const
    {
        return static_cast<Index>(std::count(corrupted.begin(), corrupted.end(), true));
    }
};

inline GradientBatch gradient_batch(const RegressionProblem& problem, const Vector& beta)
{
    return problem.gradient_batch(beta);
}

/// F(beta) = 1/2 ||beta - beta*||^2 with its exact gradient as a one-sample batch.
struct IsotropicQuadratic {
    Vector beta_star;

    Index dim() const noexcept { return beta_star.size(); }
    GradientBatch gradient_batch(const Vector& beta) const
    {
        require_same_dim(beta.size(), dim(), "IsotropicQuadratic::gradient_batch");
        return GradientBatch{(beta - beta_star).transpose()};
    }
    Vector population_gradient(const Vector& beta) const { return beta - beta_star; }
    double xdist(const Vector& beta) const { return (beta - beta_star).norm(); }
};

struct GenerateOptions {
    double signal_scale = 0.9;
};

namespace detail {

inline std::mt19937_64 stream(std::uint64_t seed, std::uint64_t tag)
{
    std::seed_seq seq{seed, tag};
    return std::mt19937_64(seq);
}

inline constexpr double kLogNormalMean = 1.6487212707001282; // exp(1/2)

} // namespace detail

/// Draws a regression problem over `set`. Design, noise, corrupted rows and
/// adversarial overwrites use independent seeded streams, so the clean part
/// of a corrupted draw equals the uncorrupted draw for the same seed.
inline RegressionProblem generate(const AtomSet& set, Index n, Index d, Index sparsity, double sigma,
                                  const CorruptionSpec& corruption, std::uint64_t seed,
                                  const GenerateOptions& options = {})
{
    require_same_dim(d, set.dim(), "generate");
    if (n < 1) {
        throw ParameterError("generate: need n >= 1");
    }
    if (!(sigma >= 0.0)) {
        throw ParameterError("generate: sigma must be >= 0");
    }
    if (const auto* h = std::get_if<HuberContamination>(&corruption); h && !(h->epsilon >= 0.0 && h->epsilon < 0.5)) {
        throw ParameterError("generate: epsilon must lie in [0, 0.5)");
    }
    if (const auto* h = std::get_if<HeavyTail>(&corruption)) {
        if (const auto* t = std::get_if<StudentT>(&h->distribution); t && !(t->dof > 0.0)) {
            throw ParameterError("generate: Student-t degrees of freedom must be > 0");
        }
    }

    RegressionProblem p;
    p.seed = seed;
    p.sigma = sigma;
    p.corruption = corruption;
    p.signal = sparse_signal(set, sparsity, seed, options.signal_scale);
    p.beta_star = p.signal.beta;
    p.X.resize(n, d);
    p.y.resize(n);
    p.corrupted.assign(static_cast<std::size_t>(n), false);

    // Draw one variate from the design/noise law.
    std::normal_distribution<double> normal(0.0, 1.0);
    auto heavy = std::get_if<HeavyTail>(&corruption);
    auto draw = [&](std::mt19937_64& rng) -> double {
        if (!heavy) {
            return normal(rng);
        }
        if (const auto* ln = std::get_if<LogNormal>(&heavy->distribution)) {
            const double v = std::exp(normal(rng));
            return ln->centered ? v - detail::kLogNormalMean : v;
        }
        std::student_t_distribution<double> t(std::get<StudentT>(heavy->distribution).dof);
        return t(rng);
    };

    auto design_rng = detail::stream(seed, 1);
    for (Index i = 0; i < n; ++i) {
        for (Index j = 0; j < d; ++j) {
            p.X(i, j) = draw(design_rng);
        }
    }
    auto noise_rng = detail::stream(seed, 2);
    p.y = p.X * p.beta_star;
    for (Index i = 0; i < n; ++i) {
        p.y[i] += sigma * draw(noise_rng);
    }

    if (!heavy) {
        p.sigma_x = IdentityCovariance{1.0};
    } else if (const auto* ln = std::get_if<LogNormal>(&heavy->distribution)) {
        const double var = (std::exp(1.0) - 1.0) * std::exp(1.0);
        if (ln->centered) {
            p.sigma_x = IdentityCovariance{var};
        } else {
            // Second-moment matrix of the uncentered design.
            Matrix m = Matrix::Constant(d, d, detail::kLogNormalMean * detail::kLogNormalMean);
            m.diagonal().array() += var;
            p.sigma_x = DenseCovariance{std::move(m)};
        }
    } else {
        const double dof = std::get<StudentT>(heavy->distribution).dof;
        if (dof > 2.0) {
            p.sigma_x = IdentityCovariance{dof / (dof - 2.0)};
        }
    }

    if (const auto* huber = std::get_if<HuberContamination>(&corruption)) {
        const Index m = corrupted_count(huber->epsilon, n);
        auto pick_rng = detail::stream(seed, 3);
        std::vector<Index> rows(static_cast<std::size_t>(n));
        std::iota(rows.begin(), rows.end(), Index{0});
        std::shuffle(rows.begin(), rows.end(), pick_rng);
        rows.resize(static_cast<std::size_t>(m));
        std::sort(rows.begin(), rows.end());

        const double y_inf = p.y.size() > 0 ? p.y.cwiseAbs().maxCoeff() : 0.0;
        auto adv_rng = detail::stream(seed, 4);
        for (Index i : rows) {
            p.corrupted[static_cast<std::size_t>(i)] = true;
            std::visit(
                [&](const auto& a) {
                    using A = std::decay_t<decltype(a)>;
                    if constexpr (std::is_same_v<A, ResponseFlip>) {
                        const double sign = p.y[i] < 0.0 ? -1.0 : 1.0;
                        p.y[i] = a.magnitude * y_inf * -sign;
                    } else if constexpr (std::is_same_v<A, LeveragePoint>) {
                        const double norm = p.beta_star.norm();
                        const Vector u = norm > 0.0 ? Vector(-p.beta_star / norm) : Vector(Vector::Unit(d, 0));
                        p.X.row(i) = a.scale * u.transpose();
                        p.y[i] = -a.scale;
                    } else {
                        const double sd = std::sqrt(a.scale);
                        for (Index j = 0; j < d; ++j) {
                            p.X(i, j) = sd * normal(adv_rng);
                        }
                        p.y[i] = sd * std::sqrt(p.beta_star.squaredNorm() + sigma * sigma) * normal(adv_rng);
                    }
                },
                huber->adversary);
        }
    }
    return p;
}

} // namespace robustcg
