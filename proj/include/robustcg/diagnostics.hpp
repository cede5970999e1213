#pragma once

#include <robustcg/atoms.hpp>
#include <robustcg/models.hpp>
#include <robustcg/types.hpp>

#include <Eigen/Eigenvalues>
#include <Eigen/QR>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <vector>

namespace robustcg {

/// |<G, exact_dir - robust_dir>|.
inline double rasc_gap(const Vector& pop_grad, const Vector& exact_dir, const Vector& robust_dir)
{
    require_same_dim(pop_grad.size(), exact_dir.size(), "rasc_gap");
    require_same_dim(pop_grad.size(), robust_dir.size(), "rasc_gap");
    return std::abs(pop_grad.dot(exact_dir - robust_dir));
}

/// Exact population gradient of the least-squares risk for a synthetic problem.
struct PopulationOracle {
    CovarianceSpec sigma_x;
    Vector beta_star;

    Vector gradient(const Vector& beta) const { return population_gradient(sigma_x, beta, beta_star); }
};

struct RascRecord {
    Index iter = 0;
    double xdist = 0.0;
    double gap = 0.0;
};

struct RascFit {
    double theta_hat = 0.0;
    double psi_hat = 0.0;
    double coverage = 0.0;
};

namespace detail {

// Relative slack so that a bound met with equality survives rounding in 4*theta*x.
inline bool rasc_covered(const RascRecord& r, double theta, double psi)
{
    const double bound = 4.0 * theta * r.xdist + 4.0 * psi;
    return r.gap <= bound * (1.0 + 1e-12);
}

} // namespace detail

/// Fraction of records with gap <= 4 theta xdist + 4 psi.
inline double rasc_coverage(const std::vector<RascRecord>& records, double theta, double psi)
{
    if (records.empty()) {
        return 0.0;
    }
    const auto hits = std::count_if(records.begin(), records.end(),
                                    [&](const RascRecord& r) { return detail::rasc_covered(r, theta, psi); });
    return static_cast<double>(hits) / static_cast<double>(records.size());
}

/// Smallest (psi, theta), lexicographically, on a 100x100 grid such that the
/// RASC inequality holds for at least `min_coverage` of the records. Grids run
/// from 0 to the largest value either parameter alone would need.
inline RascFit fit_rasc(const std::vector<RascRecord>& records, double min_coverage = 0.95)
{
    if (records.size() < 10) {
        throw ParameterError("fit_rasc: need at least 10 records");
    }
    double theta_max = 0.0;
    double psi_max = 0.0;
    for (const auto& r : records) {
        if (!(r.gap >= 0.0) || !(r.xdist >= 0.0)) {
            throw ParameterError("fit_rasc: gaps and distances must be nonnegative");
        }
        psi_max = std::max(psi_max, r.gap / 4.0);
        if (r.xdist > 0.0) {
            theta_max = std::max(theta_max, r.gap / (4.0 * r.xdist));
        }
    }
    constexpr int kGrid = 100;
    auto grid = [](double hi, int k) { return hi * static_cast<double>(k) / static_cast<double>(kGrid - 1); };

    for (int p = 0; p < kGrid; ++p) {
        const double psi = grid(psi_max, p);
        if (rasc_coverage(records, theta_max, psi) < min_coverage) {
            continue; // coverage is monotone in theta
        }
        for (int q = 0; q < kGrid; ++q) {
            const double theta = grid(theta_max, q);
            const double cov = rasc_coverage(records, theta, psi);
            if (cov >= min_coverage) {
                return {theta, psi, cov};
            }
        }
    }
    // psi_max alone covers every record, so this is unreachable for min_coverage <= 1.
    return {theta_max, psi_max, rasc_coverage(records, theta_max, psi_max)};
}

/// Least-squares slope of log(ys) against log(xs).
inline double loglog_slope(const std::vector<double>& xs, const std::vector<double>& ys)
{
    if (xs.size() != ys.size()) {
        throw DimensionError("loglog_slope: xs and ys differ in length");
    }
    if (xs.size() < 3) {
        throw ParameterError("loglog_slope: need at least 3 points");
    }
    std::vector<double> lx, ly;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        if (!(xs[i] > 0.0 && ys[i] > 0.0)) {
            throw ParameterError("loglog_slope: values must be positive");
        }
        lx.push_back(std::log(xs[i]));
        ly.push_back(std::log(ys[i]));
    }
    const double n = static_cast<double>(lx.size());
    const double mx = std::accumulate(lx.begin(), lx.end(), 0.0) / n;
    const double my = std::accumulate(ly.begin(), ly.end(), 0.0) / n;
    double sxy = 0.0, sxx = 0.0;
    for (std::size_t i = 0; i < lx.size(); ++i) {
        sxy += (lx[i] - mx) * (ly[i] - my);
        sxx += (lx[i] - mx) * (lx[i] - mx);
    }
    if (sxx == 0.0) {
        throw ParameterError("loglog_slope: xs must not all be equal");
    }
    return sxy / sxx;
}

/// Slope of ln(xdist) per iteration over the descent segment: from the start
/// up to the first iterate within 10x of the smallest positive distance.
/// Returns 0 when the segment has fewer than 2 points.
inline double pre_plateau_slope(const std::vector<double>& xdist)
{
    double floor = std::numeric_limits<double>::infinity();
    for (double v : xdist) {
        if (v > 0.0) {
            floor = std::min(floor, v);
        }
    }
    if (!std::isfinite(floor)) {
        return 0.0;
    }
    std::vector<double> t, ly;
    for (std::size_t i = 0; i < xdist.size(); ++i) {
        if (xdist[i] > 0.0) {
            t.push_back(static_cast<double>(i));
            ly.push_back(std::log(xdist[i]));
        }
        if (xdist[i] <= 10.0 * floor) {
            break;
        }
    }
    if (t.size() < 2) {
        return 0.0;
    }
    const double n = static_cast<double>(t.size());
    const double mt = std::accumulate(t.begin(), t.end(), 0.0) / n;
    const double my = std::accumulate(ly.begin(), ly.end(), 0.0) / n;
    double sxy = 0.0, sxx = 0.0;
    for (std::size_t i = 0; i < t.size(); ++i) {
        sxy += (t[i] - mt) * (ly[i] - my);
        sxx += (t[i] - mt) * (t[i] - mt);
    }
    return sxy / sxx;
}

/// Smallest eigenvalue of the empirical second-moment matrix of the selected
/// rows of X, restricted to the span of the given atoms.
inline double restricted_min_eigenvalue(const Matrix& X, const std::vector<bool>& use_row, const AtomSet& set,
                                        const std::vector<Index>& atoms)
{
    require_same_dim(static_cast<Index>(use_row.size()), X.rows(), "restricted_min_eigenvalue");
    require_same_dim(X.cols(), set.dim(), "restricted_min_eigenvalue");
    if (atoms.empty()) {
        throw ParameterError("restricted_min_eigenvalue: no atoms");
    }
    Matrix basis(set.dim(), static_cast<Index>(atoms.size()));
    for (std::size_t k = 0; k < atoms.size(); ++k) {
        basis.col(static_cast<Index>(k)) = set.atom(atoms[k]);
    }
    Eigen::HouseholderQR<Matrix> qr(basis);
    const Matrix Q = qr.householderQ() * Matrix::Identity(basis.rows(), basis.cols());

    Index m = 0;
    Matrix XQ(X.rows(), Q.cols());
    for (Index i = 0; i < X.rows(); ++i) {
        if (use_row[static_cast<std::size_t>(i)]) {
            XQ.row(m++) = X.row(i) * Q;
        }
    }
    if (m == 0) {
        throw ParameterError("restricted_min_eigenvalue: no rows selected");
    }
    const Matrix S = XQ.topRows(m).transpose() * XQ.topRows(m) / static_cast<double>(m);
    Eigen::SelfAdjointEigenSolver<Matrix> eig(S, Eigen::EigenvaluesOnly);
    return eig.eigenvalues().minCoeff();
}

/// alpha_l / (16 sqrt(card)).
inline double rasc_threshold(double alpha_l, Index card)
{
    return alpha_l / (16.0 * std::sqrt(static_cast<double>(card)));
}

struct SampleSummary {
    double mean = 0.0;
    double stddev = 0.0; // sample standard deviation (n - 1)
    double min = 0.0;
    double max = 0.0;
};

inline SampleSummary summarize(const std::vector<double>& v)
{
    if (v.empty()) {
        throw ParameterError("summarize: empty sample");
    }
    SampleSummary s;
    const double n = static_cast<double>(v.size());
    s.mean = std::accumulate(v.begin(), v.end(), 0.0) / n;
    double ss = 0.0;
    for (double x : v) {
        ss += (x - s.mean) * (x - s.mean);
    }
    s.stddev = v.size() > 1 ? std::sqrt(ss / (n - 1.0)) : 0.0;
    const auto [lo, hi] = std::minmax_element(v.begin(), v.end());
    s.min = *lo;
    s.max = *hi;
    return s;
}

} // namespace robustcg
