#include <robustcg/diagnostics.hpp>
#include <robustcg/solvers.hpp>

#include <gtest/gtest.h>

#include <cmath>
#include <random>

using namespace robustcg;

namespace {

std::vector<RascRecord> records_from(const std::vector<double>& xdist, const std::vector<double>& gap)
{
    std::vector<RascRecord> out;
    for (std::size_t i = 0; i < xdist.size(); ++i) {
        out.push_back({static_cast<Index>(i), xdist[i], gap[i]});
    }
    return out;
}

} // namespace

TEST(RascGap, Examples)
{
    const Vector G = (Vector(2) << 1.0, 0.0).finished();
    const Vector d = (Vector(2) << 1.0, 1.0).finished();
    const Vector dt = (Vector(2) << 0.0, 1.0).finished();
    EXPECT_EQ(rasc_gap(G, d, d), 0.0);
    EXPECT_EQ(rasc_gap(G, d, dt), 1.0);
    EXPECT_THROW(rasc_gap(G, Vector::Zero(3), dt), DimensionError);
}

TEST(RascGap, SymmetricInTheDirections)
{
    std::mt19937_64 rng(1);
    std::normal_distribution<double> z;
    for (int trial = 0; trial < 200; ++trial) {
        Vector G(5), a(5), b(5);
        for (Index j = 0; j < 5; ++j) {
            G[j] = z(rng);
            a[j] = z(rng);
            b[j] = z(rng);
        }
        ASSERT_EQ(rasc_gap(G, a, b), rasc_gap(G, b, a));
        ASSERT_GE(rasc_gap(G, a, b), 0.0);
    }
}

TEST(FitRasc, AllZeroGaps)
{
    const auto fit = fit_rasc(records_from(std::vector<double>(20, 1.0), std::vector<double>(20, 0.0)));
    EXPECT_EQ(fit.theta_hat, 0.0);
    EXPECT_EQ(fit.psi_hat, 0.0);
    EXPECT_EQ(fit.coverage, 1.0);
}

TEST(FitRasc, GapsProportionalToDistance)
{
    std::vector<double> x, g;
    for (int i = 0; i < 50; ++i) {
        x.push_back(std::pow(0.8, i));
        g.push_back(4.0 * x.back());
    }
    const auto fit = fit_rasc(records_from(x, g));
    EXPECT_DOUBLE_EQ(fit.theta_hat, 1.0);
    EXPECT_EQ(fit.psi_hat, 0.0);
    EXPECT_EQ(fit.coverage, 1.0);
}

TEST(FitRasc, ToleratesFivePercentViolations)
{
    // 100 records on 4 x; five outliers may stay uncovered.
    std::vector<double> x(100), g(100);
    for (int i = 0; i < 100; ++i) {
        x[static_cast<std::size_t>(i)] = 1.0 + i;
        g[static_cast<std::size_t>(i)] = 4.0 * 0.5 * x[static_cast<std::size_t>(i)];
    }
    for (int i = 0; i < 5; ++i) {
        g[static_cast<std::size_t>(i)] = 1e3;
    }
    const auto fit = fit_rasc(records_from(x, g));
    EXPECT_EQ(fit.psi_hat, 0.0);
    EXPECT_GE(fit.coverage, 0.95);
    // theta_max is 1e3 / 4 = 250; the grid point just above 0.5 wins.
    EXPECT_DOUBLE_EQ(fit.theta_hat, 250.0 * 1.0 / 99.0);
}

TEST(FitRasc, CertificateReproducesCoverage)
{
    std::mt19937_64 rng(2);
    std::exponential_distribution<double> e(1.0);
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t n = 10 + rng() % 200;
        std::vector<double> x(n), g(n);
        for (std::size_t i = 0; i < n; ++i) {
            x[i] = rng() % 7 == 0 ? 0.0 : e(rng);
            g[i] = rng() % 5 == 0 ? 0.0 : e(rng) * (1.0 + x[i]);
        }
        const auto records = records_from(x, g);
        const auto fit = fit_rasc(records);
        ASSERT_GE(fit.theta_hat, 0.0);
        ASSERT_GE(fit.psi_hat, 0.0);
        ASSERT_GE(fit.coverage, 0.95);
        ASSERT_EQ(rasc_coverage(records, fit.theta_hat, fit.psi_hat), fit.coverage);
    }
}

TEST(FitRasc, Errors)
{
    EXPECT_THROW(fit_rasc(records_from(std::vector<double>(9, 1.0), std::vector<double>(9, 0.0))), ParameterError);
    auto bad = records_from(std::vector<double>(10, 1.0), std::vector<double>(10, 0.0));
    bad[3].gap = -1.0;
    EXPECT_THROW(fit_rasc(bad), ParameterError);
}

TEST(FitRasc, ExactAuditOfAQuadraticRunIsZero)
{
    // Mean estimator on exact gradients: the robust and exact selections
    // coincide at every iteration.
    const IsotropicQuadratic problem{(Vector(4) << 0.1, 0.2, 0.3, 0.4).finished()};
    SolverConfig cfg;
    cfg.schedule = AdaptiveGap{0.5};
    cfg.max_iters = 40;
    cfg.audit_rasc = true;
    const auto records = rasc_records(run_pcg(problem, AtomSet::simplex(4), cfg));
    const auto fit = fit_rasc(records);
    EXPECT_EQ(fit.theta_hat, 0.0);
    EXPECT_EQ(fit.psi_hat, 0.0);
}

TEST(LoglogSlope, Examples)
{
    const std::vector<double> xs{1.0, 4.0, 16.0, 64.0};
    std::vector<double> inv_sqrt, constant(4, 3.0);
    for (double x : xs) {
        inv_sqrt.push_back(1.0 / std::sqrt(x));
    }
    EXPECT_NEAR(loglog_slope(xs, inv_sqrt), -0.5, 1e-12);
    EXPECT_NEAR(loglog_slope(xs, constant), 0.0, 1e-12);
    EXPECT_THROW(loglog_slope({1.0, 2.0}, {1.0, 2.0}), ParameterError);
    EXPECT_THROW(loglog_slope({1.0, 2.0, 0.0}, {1.0, 2.0, 3.0}), ParameterError);
    EXPECT_THROW(loglog_slope({1.0, 2.0, 3.0}, {1.0, 2.0}), DimensionError);
}

TEST(PrePlateauSlope, GeometricThenFlat)
{
    std::vector<double> xs;
    for (int t = 0; t < 30; ++t) {
        xs.push_back(std::pow(0.5, t));
    }
    xs.resize(60, xs.back());
    // ln(0.5) per iteration up to the first value within 10x of the floor.
    EXPECT_NEAR(pre_plateau_slope(xs), std::log(0.5), 1e-12);
    EXPECT_EQ(pre_plateau_slope({}), 0.0);
    EXPECT_EQ(pre_plateau_slope({0.0, 0.0}), 0.0);
    EXPECT_EQ(pre_plateau_slope({1.0, 1.0, 1.0}), 0.0);
}

TEST(RestrictedMinEigenvalue, MatchesDirectComputation)
{
    std::mt19937_64 rng(3);
    std::normal_distribution<double> z;
    Matrix X(40, 6);
    for (Index i = 0; i < X.rows(); ++i) {
        for (Index j = 0; j < X.cols(); ++j) {
            X(i, j) = z(rng);
        }
    }
    std::vector<bool> all(40, true);
    const auto set = AtomSet::signed_basis(6, 1.0);
    // Coordinate atoms: the restriction is the principal submatrix (up to sign).
    const std::vector<Index> atoms{1, 10};
    Matrix sub(40, 2);
    sub.col(0) = X.col(1);
    sub.col(1) = X.col(4);
    const Matrix S = sub.transpose() * sub / 40.0;
    const double expected = Eigen::SelfAdjointEigenSolver<Matrix>(S).eigenvalues().minCoeff();
    EXPECT_NEAR(restricted_min_eigenvalue(X, all, set, atoms), expected, 1e-12);

    std::vector<bool> none(40, false);
    EXPECT_THROW(restricted_min_eigenvalue(X, none, set, atoms), ParameterError);
    EXPECT_THROW(restricted_min_eigenvalue(X, all, set, {}), ParameterError);
}

TEST(RascThreshold, Formula)
{
    EXPECT_DOUBLE_EQ(rasc_threshold(1.0, 4), 1.0 / 32.0);
    EXPECT_DOUBLE_EQ(rasc_threshold(0.8, 1), 0.05);
}

TEST(Summarize, Values)
{
    const auto s = summarize({1.0, 2.0, 3.0, 4.0});
    EXPECT_DOUBLE_EQ(s.mean, 2.5);
    EXPECT_DOUBLE_EQ(s.stddev, std::sqrt(5.0 / 3.0));
    EXPECT_EQ(s.min, 1.0);
    EXPECT_EQ(s.max, 4.0);
    EXPECT_EQ(summarize({7.0}).stddev, 0.0);
    EXPECT_THROW(summarize({}), ParameterError);
}
