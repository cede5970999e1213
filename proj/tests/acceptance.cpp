// Acceptance run: one PASS/FAIL line per criterion. Tolerances and budgets are
// pinned below; the experiment settings come from the shipped configs.

#include "oracles.hpp"

#include <robustcg/experiments.hpp>
#include <robustcg/robustcg.hpp>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

using namespace robustcg;
namespace ex = robustcg::experiments;

namespace {

// Pinned tolerances.
constexpr double kRateBound = 1.0 + 1e-12;
constexpr double kRateAtHalf = 0.4880;
constexpr double kRateAtHalfTol = 1e-3;
constexpr double kBreakdownTrmSpread = 1e-6;
constexpr double kBreakdownMeanSpread = 1e2;
constexpr double kRecoveryTol = 1e-6;
constexpr double kDescentSlope = -0.01;
constexpr double kStallFraction = 0.05;
constexpr double kFloorRatioLo = 3.0;
constexpr double kFloorRatioHi = 30.0;
constexpr double kParityFactor = 3.0;
constexpr double kRateSlopeLo = -0.7;
constexpr double kRateSlopeHi = -0.3;
constexpr double kHaarDenseFactor = 4.0; // recovered support >= 4 s counts as "much larger than s"
constexpr double kCoverage = 0.95;
constexpr double kWeightSumTol = 1e-10;
constexpr double kNonnegTol = -1e-12;
constexpr double kSimplexTol = 1e-8;

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string fmt(double v)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4g", v);
    return buf;
}

// Feasibility ledger filled by every solver run below.
struct Feasibility {
    std::size_t pcg_runs = 0;
    std::size_t dicg_runs = 0;
    double worst_sum = 0.0;        // max |sum of weights - 1| (PCG)
    double min_coefficient = 1.0;  // min weight (PCG)
    double min_coordinate = 0.0;   // min lifted coordinate (DICG)
    double worst_simplex = 0.0;    // max |sum of lifted coordinates - 1| (DICG)

    void record(const RunTrace& t, bool pcg)
    {
        for (const auto& r : t.records) {
            if (pcg) {
                worst_sum = std::max(worst_sum, std::abs(r.weight_sum - 1.0));
                min_coefficient = std::min(min_coefficient, r.min_weight);
            } else {
                min_coordinate = std::min(min_coordinate, r.min_weight);
                worst_simplex = std::max(worst_simplex, std::abs(r.weight_sum - 1.0));
            }
        }
        if (pcg && t.final_decomposition) {
            worst_sum = std::max(worst_sum, std::abs(t.final_decomposition->sum() - 1.0));
            min_coefficient = std::min(min_coefficient, t.final_decomposition->min_coefficient());
        }
        (pcg ? pcg_runs : dicg_runs) += 1;
    }
};

Feasibility feasibility;

RunTrace run_and_record(const RegressionProblem& p, const AtomSet& set, const SolverConfig& cfg)
{
    RunTrace t = run_solver(p, set, cfg);
    feasibility.record(t, cfg.algorithm == Algorithm::PCG || cfg.algorithm == Algorithm::PCG2);
    return t;
}

RunTrace run_lifted_dicg(const RegressionProblem& p, double radius, SolverConfig cfg)
{
    cfg.algorithm = Algorithm::DICG;
    const LiftedL1<RegressionProblem> lifted(p, radius);
    RunTrace t = run_dicg(lifted, AtomSet::simplex(2 * p.dim()), cfg);
    feasibility.record(t, false);
    return t;
}

ex::ExperimentConfig shipped(const std::string& name)
{
    return ex::load_config(std::string(ROBUSTCG_CONFIG_DIR) + "/" + name + ".json", name);
}

RegressionProblem instance(const ex::ExperimentConfig& c, const AtomSet& set, double sigma)
{
    return generate(set, c.n.front(), c.d, c.sparsity, sigma, ex::corruption_for(c, c.design), c.seed,
                    GenerateOptions{c.signal_scale});
}

// ---------------------------------------------------------------------------

Outcome criterion1()
{
    std::mt19937_64 rng(20240911);
    // Both sides must agree bit for bit, or both reject (alpha n can trim every sample).
    auto agree = [](const std::optional<double>& ref, const std::function<double()>& impl) {
        try {
            const double v = impl();
            return ref && *ref == v;
        } catch (const ParameterError&) {
            return !ref;
        }
    };
    std::size_t mismatches = 0, rejected = 0;
    for (int trial = 0; trial < 1000; ++trial) {
        const std::size_t n = 5 + rng() % 496;
        const auto x = oracle::random_sample(rng, n);
        const std::size_t K = 1 + rng() % n;
        const double alpha = std::uniform_real_distribution<double>(0.0, 0.4)(rng);
        const auto mom_ref = oracle::median_of_means(x, K);
        const auto trm_ref = oracle::trimmed_mean(x, alpha);
        mismatches += !agree(mom_ref, [&] { return median_of_means(x, static_cast<Index>(K)); });
        mismatches += !agree(trm_ref, [&] { return trimmed_mean(x, alpha); });
        rejected += !trm_ref;
    }
    return {mismatches == 0, "mismatches=" + std::to_string(mismatches) + " over 1000 instances (" +
                                 std::to_string(rejected) + " trimmed-mean instances rejected by both)"};
}

Outcome criterion2()
{
    std::mt19937_64 rng(20240912);
    std::normal_distribution<double> z;
    std::vector<double> base(300);
    for (auto& v : base) {
        v = z(rng);
    }
    double tlo = 1e300, thi = -1e300, mlo = 1e300, mhi = -1e300;
    for (double M : {1e3, 1e6, 1e9}) {
        auto x = base;
        for (std::size_t i = 0; i < 30; ++i) {
            x[i * 10] = M;
        }
        const double t = trimmed_mean(x, 0.1);
        const double m = empirical_mean(x);
        tlo = std::min(tlo, t);
        thi = std::max(thi, t);
        mlo = std::min(mlo, m);
        mhi = std::max(mhi, m);
    }
    const double trm_spread = thi - tlo;
    const double mean_spread = mhi - mlo;
    return {trm_spread < kBreakdownTrmSpread && mean_spread > kBreakdownMeanSpread,
            "trm_spread=" + fmt(trm_spread) + " mean_spread=" + fmt(mean_spread)};
}

Outcome criterion3()
{
    double worst = -1e300;
    for (int k = 0; k <= 1000; ++k) {
        worst = std::max(worst, rate_factor_pcg(k / 1000.0));
    }
    const double half = rate_factor_pcg(0.5);
    return {worst <= kRateBound && std::abs(half - kRateAtHalf) <= kRateAtHalfTol,
            "max_rho=" + fmt(worst) + " rho(0.5)=" + fmt(half)};
}

Outcome criterion4()
{
    std::mt19937_64 rng(20240913);
    std::normal_distribution<double> z;
    std::size_t mismatches = 0;
    for (int trial = 0; trial < 200; ++trial) {
        const Index d = 2 + static_cast<Index>(rng() % 30);
        const Index n = 1 + static_cast<Index>(rng() % 50);
        const AtomSet set = trial % 2 == 0 ? AtomSet::signed_basis(d, 1.0) : AtomSet::simplex(d);
        GradientBatch batch{Matrix(n, d)};
        for (Index i = 0; i < n; ++i) {
            for (Index j = 0; j < d; ++j) {
                batch.samples(i, j) = z(rng);
            }
        }
        std::vector<Index> active;
        for (Index i = 0; i < set.size(); ++i) {
            if (i == 0 || rng() % 3 == 0) {
                active.push_back(i);
            }
        }
        const Vector g = batch.mean();
        mismatches += rlmo_fw(batch, set, EmpiricalMean{}).index != lmo_exact(set, g).index;
        mismatches += rlmo_away(batch, set, active, EmpiricalMean{}).index != away_exact(set, active, g).index;
    }

    const auto c = shipped("lasso-convergence");
    const AtomSet set = AtomSet::signed_basis(c.d, c.radius);
    const RegressionProblem clean =
        generate(set, c.n.front(), c.d, c.sparsity, 0.0, NoCorruption{}, c.seed, GenerateOptions{c.signal_scale});
    SolverConfig cfg;
    cfg.estimator = EmpiricalMean{};
    cfg.schedule = c.schedule;
    cfg.max_iters = 100;
    cfg.algorithm = Algorithm::PCG;
    const RunTrace a = run_and_record(clean, set, cfg);
    cfg.algorithm = Algorithm::PCG2;
    const RunTrace b = run_and_record(clean, set, cfg);
    std::size_t trace_diff = a.records.size() != b.records.size();
    double worst_dx = 0.0;
    for (std::size_t t = 0; t < std::min(a.records.size(), b.records.size()); ++t) {
        trace_diff += a.records[t].fw != b.records[t].fw || a.records[t].away != b.records[t].away;
        worst_dx = std::max(worst_dx, std::abs(a.records[t].xdist - b.records[t].xdist));
    }
    return {mismatches == 0 && trace_diff == 0 && worst_dx <= 1e-10,
            "oracle_mismatches=" + std::to_string(mismatches) + " trace_index_mismatches=" +
                std::to_string(trace_diff) + " max_xdist_diff=" + fmt(worst_dx)};
}

// Criterion 5's instance is reused by criteria 9 and 10.
struct LassoRun {
    RegressionProblem problem;
    RunTrace trace;
};

LassoRun lasso_noiseless()
{
    const auto c = shipped("lasso-convergence");
    const AtomSet set = AtomSet::signed_basis(c.d, c.radius);
    LassoRun out{instance(c, set, 0.0), {}};
    out.trace = run_and_record(out.problem, set, ex::solver_config(c, set, c.n.front(), c.schedule));
    return out;
}

Outcome criterion5(const LassoRun& robust)
{
    const auto c = shipped("lasso-convergence");
    const AtomSet set = AtomSet::signed_basis(c.d, c.radius);
    SolverConfig vanilla = ex::solver_config(c, set, c.n.front(), c.schedule);
    vanilla.estimator = EmpiricalMean{};
    const RunTrace control = run_and_record(robust.problem, set, vanilla);

    const double final_xdist = robust.trace.final_xdist();
    const double slope = pre_plateau_slope(ex::xdist_series(robust.trace));
    const double stall = control.final_xdist();
    const double norm = robust.problem.beta_star.norm();
    const bool pass = robust.trace.records.size() <= 501 && final_xdist <= kRecoveryTol && slope <= kDescentSlope &&
                      stall >= kStallFraction * norm;
    return {pass, "final_xdist=" + fmt(final_xdist) + " slope=" + fmt(slope) + "/iter mean_pcg_xdist=" + fmt(stall) +
                      " (threshold " + fmt(kStallFraction * norm) + ")"};
}

Outcome criterion6()
{
    const auto c = shipped("lasso-convergence");
    const AtomSet set = AtomSet::signed_basis(c.d, c.radius);
    std::vector<double> floors;
    for (double sigma : {1e-3, 1e-2, 1e-1}) {
        const RegressionProblem p = instance(c, set, sigma);
        floors.push_back(run_and_record(p, set, ex::solver_config(c, set, c.n.front(), c.schedule)).final_xdist());
    }
    bool pass = true;
    std::string detail = "floors=" + fmt(floors[0]) + "," + fmt(floors[1]) + "," + fmt(floors[2]) + " ratios=";
    for (std::size_t i = 1; i < floors.size(); ++i) {
        const double r = floors[i] / floors[i - 1];
        pass = pass && floors[i] > floors[i - 1] && r >= kFloorRatioLo && r <= kFloorRatioHi;
        detail += (i > 1 ? "," : "") + fmt(r);
    }
    return {pass, detail};
}

Outcome criterion7()
{
    // Mirrors the heavy-tail-sweep command with per-run feasibility checks.
    const auto c = shipped("heavy-tail-sweep");
    const AtomSet set = AtomSet::signed_basis(c.d, c.radius);
    ex::ExperimentConfig baseline = c;
    baseline.design = ex::Design::Gaussian;
    baseline.epsilon = 0.0;
    baseline.estimator = EmpiricalMean{};
    const StepSchedule baseline_schedule = c.baseline_schedule.value_or(c.schedule);

    struct Job {
        Index n;
        Index rep;
        bool robust;
    };
    std::vector<Job> jobs;
    for (Index n : c.n) {
        for (Index r = 0; r < c.reps; ++r) {
            jobs.push_back({n, r, true});
            jobs.push_back({n, r, false});
        }
    }
    auto traces = ex::parallel_map<RunTrace>(jobs.size(), [&](std::size_t i) {
        const Job& job = jobs[i];
        const auto seed =
            ex::derive_seed(c.seed, static_cast<std::uint64_t>(job.n), static_cast<std::uint64_t>(job.rep));
        const ex::ExperimentConfig& cfg = job.robust ? c : baseline;
        const RegressionProblem p = generate(set, job.n, c.d, c.sparsity, c.sigma.front(),
                                             ex::corruption_for(cfg, cfg.design), seed, GenerateOptions{c.signal_scale});
        return run_solver(p, set, ex::solver_config(cfg, set, job.n, job.robust ? c.schedule : baseline_schedule));
    });

    std::vector<double> ns, robust_means;
    bool parity = true;
    std::string detail = "ratios=";
    for (Index n : c.n) {
        double rsum = 0.0, msum = 0.0;
        for (std::size_t i = 0; i < jobs.size(); ++i) {
            if (jobs[i].n == n) {
                (jobs[i].robust ? rsum : msum) += traces[i].final_xdist();
            }
        }
        const double ratio = rsum / msum;
        parity = parity && ratio <= kParityFactor;
        detail += (ns.empty() ? "" : ",") + fmt(ratio);
        ns.push_back(static_cast<double>(n));
        robust_means.push_back(rsum / static_cast<double>(c.reps));
    }
    for (const auto& t : traces) {
        feasibility.record(t, true);
    }
    const double slope = loglog_slope(ns, robust_means);
    detail += " robust_means=";
    for (std::size_t i = 0; i < robust_means.size(); ++i) {
        detail += (i ? "," : "") + fmt(robust_means[i]);
    }
    detail += " loglog_slope=" + fmt(slope);
    return {parity && slope >= kRateSlopeLo && slope <= kRateSlopeHi, detail};
}

Outcome criterion8()
{
    const auto c = shipped("haar-convergence");
    const AtomSet set = AtomSet::haar(c.d, c.radius);
    const RegressionProblem p = instance(c, set, 0.0);
    const RunTrace t = run_and_record(p, set, ex::solver_config(c, set, c.n.front(), c.schedule));
    const double scale = t.final_iterate.cwiseAbs().maxCoeff();
    const Index support = (t.final_iterate.array().abs() > 1e-8 * scale).count();
    const bool pass = t.final_xdist() <= kRecoveryTol && support >= kHaarDenseFactor * static_cast<double>(c.sparsity);
    return {pass, "d=" + std::to_string(c.d) + " final_xdist=" + fmt(t.final_xdist()) +
                      " recovered_support=" + std::to_string(support) + " s=" + std::to_string(c.sparsity)};
}

Outcome criterion9()
{
    const auto c = shipped("rasc-audit");
    const AtomSet set = AtomSet::signed_basis(c.d, c.radius);
    RegressionProblem p = instance(c, set, c.sigma.front());
    p.sigma_x = IdentityCovariance{1.0};
    SolverConfig cfg = ex::solver_config(c, set, c.n.front(), c.schedule);
    cfg.audit_rasc = true;
    const RunTrace t = run_and_record(p, set, cfg);
    const RascFit fit = fit_rasc(rasc_records(t));
    std::vector<bool> clean(p.corrupted.size());
    for (std::size_t i = 0; i < clean.size(); ++i) {
        clean[i] = !p.corrupted[i];
    }
    const double alpha_l = restricted_min_eigenvalue(p.X, clean, set, p.signal.atoms);
    const double threshold = rasc_threshold(alpha_l, c.sparsity);
    return {fit.coverage >= kCoverage && fit.theta_hat <= threshold,
            "coverage=" + fmt(fit.coverage) + " theta_hat=" + fmt(fit.theta_hat) + " psi_hat=" + fmt(fit.psi_hat) +
                " alpha_l=" + fmt(alpha_l) + " threshold=" + fmt(threshold)};
}

Outcome criterion10(const LassoRun& lasso)
{
    // Robust DICG on the lifted simplex, on the criterion-5 instance.
    const auto c = shipped("lasso-convergence");
    const AtomSet set = AtomSet::signed_basis(c.d, c.radius);
    const RunTrace t = run_lifted_dicg(lasso.problem, c.radius, ex::solver_config(c, set, c.n.front(), c.schedule));
    const bool pass = feasibility.worst_sum <= kWeightSumTol && feasibility.min_coefficient > 0.0 &&
                      feasibility.min_coordinate >= kNonnegTol && feasibility.worst_simplex <= kSimplexTol &&
                      feasibility.pcg_runs > 0 && feasibility.dicg_runs > 0;
    return {pass, "pcg_runs=" + std::to_string(feasibility.pcg_runs) + " max|sum-1|=" + fmt(feasibility.worst_sum) +
                      " min_weight=" + fmt(feasibility.min_coefficient) +
                      " dicg_runs=" + std::to_string(feasibility.dicg_runs) +
                      " min_coord=" + fmt(feasibility.min_coordinate) +
                      " max|simplex-1|=" + fmt(feasibility.worst_simplex) +
                      " dicg_final_xdist=" + fmt(lasso.problem.xdist(LiftedL1<RegressionProblem>(lasso.problem, c.radius)
                                                                          .fold(t.final_iterate)))};
}

} // namespace

int main()
{
    int failures = 0;
    auto report = [&](int id, double budget_s, const std::function<Outcome()>& body) {
        const auto start = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = body();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        const bool in_budget = secs < budget_s;
        const bool pass = o.pass && in_budget;
        failures += !pass;
        std::printf("criterion %2d: %s  %s  runtime=%.1fs (budget %.0fs%s)\n", id, pass ? "PASS" : "FAIL",
                    o.detail.c_str(), secs, budget_s, in_budget ? "" : ", exceeded");
        std::fflush(stdout);
    };

    LassoRun lasso;
    report(1, 5, criterion1);
    report(2, 1, criterion2);
    report(3, 1, criterion3);
    report(4, 10, criterion4);
    report(5, 120, [&] {
        lasso = lasso_noiseless();
        return criterion5(lasso);
    });
    report(6, 300, criterion6);
    report(7, 900, criterion7);
    report(8, 120, criterion8);
    report(9, 120, criterion9);
    report(10, 120, [&] { return criterion10(lasso); });

    std::printf("%d of 10 criteria failed\n", failures);
    return failures == 0 ? 0 : 1;
}
