#pragma once

#include <robustcg/atoms.hpp>
#include <robustcg/diagnostics.hpp>
#include <robustcg/io.hpp>
#include <robustcg/models.hpp>
#include <robustcg/robust_mean.hpp>
#include <robustcg/schedule.hpp>
#include <robustcg/solvers.hpp>
#include <robustcg/types.hpp>

#include <json.hpp>

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <thread>
#include <vector>

namespace robustcg::experiments {

using json = nlohmann::json;

inline const std::vector<std::string>& experiment_names()
{
    static const std::vector<std::string> names = {"lasso-convergence", "heavy-tail-sweep", "haar-convergence",
                                                   "rasc-audit"};
    return names;
}

/// Design law for the robust arm of an experiment.
enum class Design { Gaussian, LogNormal, LogNormalUncentered, StudentT };

struct ExperimentConfig {
    std::string experiment;
    std::vector<Index> n;
    Index d = 0;
    Index sparsity = 0;
    std::vector<double> sigma;
    double epsilon = 0.0;
    Adversary adversary = ResponseFlip{};
    Design design = Design::Gaussian;
    double dof = 3.0;
    std::optional<RobustEstimator> estimator; // empty: parameter-driven default
    Algorithm algorithm = Algorithm::PCG;
    StepSchedule schedule = AdaptiveGap{};
    std::optional<StepSchedule> baseline_schedule; // heavy-tail sweep only
    Index max_iters = 500;
    Index reps = 1;
    std::uint64_t seed = 0;
    std::string out_dir = ".";
    double radius = 1.0;
    double signal_scale = 0.9;
    std::optional<CovarianceSpec> sigma_x;
    std::optional<Index> requested_d; // set when the dimension was remapped
};

// ---------------------------------------------------------------------------
// Config parsing
// ---------------------------------------------------------------------------

namespace detail {

[[noreturn]] inline void bad_key(const std::string& key, const std::string& why)
{
    throw ConfigError("config key '" + key + "': " + why);
}

inline double get_number(const json& j, const std::string& key)
{
    if (!j.is_number()) {
        bad_key(key, "expected a number");
    }
    return j.get<double>();
}

inline Index get_index(const json& j, const std::string& key, Index min_value)
{
    if (!j.is_number_integer() && !j.is_number_unsigned()) {
        bad_key(key, "expected an integer");
    }
    const auto v = j.get<std::int64_t>();
    if (v < min_value) {
        bad_key(key, "must be >= " + std::to_string(min_value));
    }
    return static_cast<Index>(v);
}

inline std::string get_string(const json& j, const std::string& key)
{
    if (!j.is_string()) {
        bad_key(key, "expected a string");
    }
    return j.get<std::string>();
}

inline void check_keys(const json& obj, const std::string& where, const std::set<std::string>& allowed)
{
    if (!obj.is_object()) {
        bad_key(where, "expected an object");
    }
    for (const auto& [k, v] : obj.items()) {
        if (!allowed.count(k)) {
            bad_key(where.empty() ? k : where + "." + k, "unknown key");
        }
    }
}

inline RobustEstimator parse_estimator(const json& j, const std::string& key)
{
    check_keys(j, key, {"kind", "blocks", "alpha"});
    if (!j.contains("kind")) {
        bad_key(key + ".kind", "missing required key");
    }
    const std::string kind = get_string(j["kind"], key + ".kind");
    if (kind == "mean") {
        return EmpiricalMean{};
    }
    if (kind == "mom") {
        if (!j.contains("blocks")) {
            return MedianOfMeans{0}; // resolved per run from the atom and sample counts
        }
        return MedianOfMeans{get_index(j["blocks"], key + ".blocks", 1)};
    }
    if (kind == "trm") {
        if (!j.contains("alpha")) {
            return TrimmedMean{-1.0}; // resolved per run from epsilon
        }
        const double a = get_number(j["alpha"], key + ".alpha");
        if (!(a >= 0.0 && a < 0.5)) {
            bad_key(key + ".alpha", "must lie in [0, 0.5)");
        }
        return TrimmedMean{a};
    }
    bad_key(key + ".kind", "expected one of mean, mom, trm");
}

inline StepSchedule parse_schedule(const json& j, const std::string& key)
{
    if (!j.is_object() || !j.contains("kind")) {
        bad_key(key + ".kind", "missing required key");
    }
    const std::string kind = get_string(j["kind"], key + ".kind");
    auto num = [&](const char* name, double fallback) {
        return j.contains(name) ? get_number(j[name], key + "." + name) : fallback;
    };
    StepSchedule out;
    if (kind == "adaptive-gap") {
        check_keys(j, key, {"kind", "multiplier", "source"});
        AdaptiveGap s;
        s.multiplier = num("multiplier", s.multiplier);
        if (j.contains("source")) {
            const std::string src = get_string(j["source"], key + ".source");
            if (src == "pairwise") {
                s.source = GapSource::Pairwise;
            } else if (src == "duality") {
                s.source = GapSource::Duality;
            } else {
                bad_key(key + ".source", "expected pairwise or duality");
            }
        }
        out = s;
    } else if (kind == "fixed-geometric") {
        check_keys(j, key, {"kind", "eta0", "rho"});
        out = FixedGeometric{num("eta0", 0.5), num("rho", 0.5)};
    } else if (kind == "theoretical-pcg") {
        check_keys(j, key, {"kind", "curvature", "strong_convexity", "h0", "psi"});
        out = TheoreticalPcg{num("curvature", 1.0), num("strong_convexity", 1.0), num("h0", 1.0), num("psi", 0.0)};
    } else if (kind == "theoretical-dicg") {
        check_keys(j, key, {"kind", "alpha_l", "alpha_u", "diameter", "card", "h0", "psi", "coefficient"});
        TheoreticalDicg s{num("alpha_l", 1.0), num("alpha_u", 1.0), num("diameter", 1.0), num("card", 1.0),
                          num("h0", 1.0),      num("psi", 0.0),     DicgCoefficient::Derivation};
        if (j.contains("coefficient")) {
            const std::string c = get_string(j["coefficient"], key + ".coefficient");
            if (c == "derivation") {
                s.coefficient = DicgCoefficient::Derivation;
            } else if (c == "stated") {
                s.coefficient = DicgCoefficient::Stated;
            } else {
                bad_key(key + ".coefficient", "expected derivation or stated");
            }
        }
        out = s;
    } else {
        bad_key(key + ".kind", "expected adaptive-gap, fixed-geometric, theoretical-pcg or theoretical-dicg");
    }
    try {
        validate(out);
    } catch (const ParameterError& e) {
        bad_key(key, e.what());
    }
    return out;
}

inline Adversary parse_adversary(const json& j, const std::string& key)
{
    if (j.is_string()) {
        return parse_adversary(json{{"kind", j}}, key);
    }
    check_keys(j, key, {"kind", "magnitude", "scale"});
    if (!j.contains("kind")) {
        bad_key(key + ".kind", "missing required key");
    }
    const std::string kind = get_string(j["kind"], key + ".kind");
    if (kind == "response-flip") {
        return ResponseFlip{j.contains("magnitude") ? get_number(j["magnitude"], key + ".magnitude") : 10.0};
    }
    if (kind == "leverage-point") {
        return LeveragePoint{j.contains("scale") ? get_number(j["scale"], key + ".scale") : 10.0};
    }
    if (kind == "oblivious-gaussian") {
        return ObliviousGaussian{j.contains("scale") ? get_number(j["scale"], key + ".scale") : 10.0};
    }
    bad_key(key + ".kind", "expected response-flip, leverage-point or oblivious-gaussian");
}

inline CovarianceSpec parse_sigma_x(const json& j, const std::string& key, Index d)
{
    if (j.is_string()) {
        if (j.get<std::string>() != "identity") {
            bad_key(key, "expected \"identity\" or an object");
        }
        return IdentityCovariance{1.0};
    }
    check_keys(j, key, {"kind", "scale", "diagonal"});
    const std::string kind = j.contains("kind") ? get_string(j["kind"], key + ".kind") : "";
    if (kind == "identity") {
        return IdentityCovariance{j.contains("scale") ? get_number(j["scale"], key + ".scale") : 1.0};
    }
    if (kind == "diagonal") {
        if (!j.contains("diagonal") || !j["diagonal"].is_array() ||
            static_cast<Index>(j["diagonal"].size()) != d) {
            bad_key(key + ".diagonal", "expected an array of d numbers");
        }
        Vector v(d);
        for (Index i = 0; i < d; ++i) {
            v[i] = get_number(j["diagonal"][static_cast<std::size_t>(i)], key + ".diagonal");
        }
        return DiagonalCovariance{v};
    }
    bad_key(key + ".kind", "expected identity or diagonal");
}

inline Algorithm parse_algorithm(const json& j, const std::string& key)
{
    const std::string a = get_string(j, key);
    if (a == "pcg") {
        return Algorithm::PCG;
    }
    if (a == "dicg") {
        return Algorithm::DICG;
    }
    if (a == "pcg2") {
        return Algorithm::PCG2;
    }
    if (a == "dicg2") {
        return Algorithm::DICG2;
    }
    bad_key(key, "expected pcg, dicg, pcg2 or dicg2");
}

inline ExperimentConfig defaults_for(const std::string& experiment)
{
    ExperimentConfig c;
    c.experiment = experiment;
    if (experiment == "lasso-convergence" || experiment == "rasc-audit") {
        c.n = {300};
        c.d = 500;
        c.sparsity = 20;
        c.epsilon = 0.1;
        c.sigma = experiment == "rasc-audit" ? std::vector<double>{0.0} : std::vector<double>{0.0, 1e-3, 1e-2, 1e-1};
    } else if (experiment == "heavy-tail-sweep") {
        c.n = {200, 400, 800, 1600};
        c.d = 1000;
        c.sparsity = 10;
        c.sigma = {0.01};
        c.design = Design::LogNormal;
        c.reps = 30;
    } else if (experiment == "haar-convergence") {
        c.n = {300};
        c.d = 512;
        c.requested_d = 500;
        c.sparsity = 25;
        c.epsilon = 0.1;
        c.sigma = {0.0, 1e-3, 1e-2, 1e-1};
    } else {
        bad_key("experiment", "unknown experiment '" + experiment + "'");
    }
    return c;
}

} // namespace detail

/// Parses a config document for `experiment` (the subcommand). Every key is
/// optional except where noted; errors name the offending key.
inline ExperimentConfig parse_config(const json& doc, const std::string& experiment)
{
    if (!doc.is_object()) {
        throw ConfigError("config: top level must be a JSON object");
    }
    using detail::bad_key;
    ExperimentConfig c = detail::defaults_for(experiment);
    detail::check_keys(doc, "",
                       {"experiment", "n", "d", "sparsity", "sigma", "epsilon", "adversary", "design", "dof",
                        "estimator", "algorithm", "schedule", "baseline_schedule", "max_iters", "reps", "seed", "seeds",
                        "out_dir", "radius", "signal_scale", "sigma_x", "description"});
    if (doc.contains("experiment")) {
        const std::string e = detail::get_string(doc["experiment"], "experiment");
        if (e != experiment) {
            bad_key("experiment", "config is for '" + e + "' but the subcommand is '" + experiment + "'");
        }
    }
    const bool sweep = experiment == "heavy-tail-sweep";
    if (doc.contains("n")) {
        const json& j = doc["n"];
        c.n.clear();
        if (j.is_array()) {
            if (!sweep) {
                bad_key("n", "a list is only allowed for heavy-tail-sweep");
            }
            for (const auto& v : j) {
                c.n.push_back(detail::get_index(v, "n", 1));
            }
            if (c.n.empty()) {
                bad_key("n", "list must not be empty");
            }
        } else {
            c.n.push_back(detail::get_index(j, "n", 1));
        }
    }
    if (doc.contains("d")) {
        c.d = detail::get_index(doc["d"], "d", 1);
        c.requested_d.reset();
    }
    if (experiment == "haar-convergence" && !is_power_of_two(c.d)) {
        bad_key("d", "must be a power of two for Haar atoms");
    }
    if (doc.contains("sparsity")) {
        c.sparsity = detail::get_index(doc["sparsity"], "sparsity", 1);
    }
    if (c.sparsity > c.d) {
        bad_key("sparsity", "must not exceed d");
    }
    if (doc.contains("sigma")) {
        const json& j = doc["sigma"];
        c.sigma.clear();
        if (j.is_array()) {
            if (sweep || experiment == "rasc-audit") {
                bad_key("sigma", "a list is not allowed for this experiment");
            }
            for (const auto& v : j) {
                c.sigma.push_back(detail::get_number(v, "sigma"));
            }
        } else {
            c.sigma.push_back(detail::get_number(j, "sigma"));
        }
        if (c.sigma.empty()) {
            bad_key("sigma", "list must not be empty");
        }
        for (double s : c.sigma) {
            if (!(s >= 0.0)) {
                bad_key("sigma", "must be >= 0");
            }
        }
    }
    if (doc.contains("epsilon")) {
        c.epsilon = detail::get_number(doc["epsilon"], "epsilon");
        if (!(c.epsilon >= 0.0 && c.epsilon < 0.5)) {
            bad_key("epsilon", "must lie in [0, 0.5)");
        }
    }
    if (doc.contains("adversary")) {
        c.adversary = detail::parse_adversary(doc["adversary"], "adversary");
    }
    if (doc.contains("design")) {
        const std::string d = detail::get_string(doc["design"], "design");
        if (d == "gaussian") {
            c.design = Design::Gaussian;
        } else if (d == "lognormal") {
            c.design = Design::LogNormal;
        } else if (d == "lognormal-uncentered") {
            c.design = Design::LogNormalUncentered;
        } else if (d == "student-t") {
            c.design = Design::StudentT;
        } else {
            bad_key("design", "expected gaussian, lognormal, lognormal-uncentered or student-t");
        }
    }
    if (doc.contains("dof")) {
        c.dof = detail::get_number(doc["dof"], "dof");
        if (!(c.dof > 0.0)) {
            bad_key("dof", "must be > 0");
        }
    }
    if (doc.contains("estimator")) {
        c.estimator = detail::parse_estimator(doc["estimator"], "estimator");
    }
    if (doc.contains("algorithm")) {
        c.algorithm = detail::parse_algorithm(doc["algorithm"], "algorithm");
    }
    if (doc.contains("schedule")) {
        c.schedule = detail::parse_schedule(doc["schedule"], "schedule");
    }
    if (doc.contains("baseline_schedule")) {
        if (!sweep) {
            bad_key("baseline_schedule", "only used by heavy-tail-sweep");
        }
        c.baseline_schedule = detail::parse_schedule(doc["baseline_schedule"], "baseline_schedule");
    }
    if (doc.contains("max_iters")) {
        c.max_iters = detail::get_index(doc["max_iters"], "max_iters", 1);
    }
    if (doc.contains("reps")) {
        c.reps = detail::get_index(doc["reps"], "reps", 1);
    }
    if (doc.contains("seed") && doc.contains("seeds")) {
        bad_key("seeds", "give either seed or seeds, not both");
    }
    for (const char* key : {"seed", "seeds"}) {
        if (!doc.contains(key)) {
            continue;
        }
        const json& j = doc[key];
        if (!j.is_number_unsigned() && !(j.is_number_integer() && j.get<std::int64_t>() >= 0)) {
            bad_key(key, "expected a nonnegative integer");
        }
        c.seed = j.get<std::uint64_t>();
    }
    if (doc.contains("out_dir")) {
        c.out_dir = detail::get_string(doc["out_dir"], "out_dir");
    }
    if (doc.contains("radius")) {
        c.radius = detail::get_number(doc["radius"], "radius");
        if (!(c.radius > 0.0)) {
            bad_key("radius", "must be > 0");
        }
    }
    if (doc.contains("signal_scale")) {
        c.signal_scale = detail::get_number(doc["signal_scale"], "signal_scale");
        if (!(c.signal_scale > 0.0 && c.signal_scale <= 1.0)) {
            bad_key("signal_scale", "must lie in (0, 1]");
        }
    }
    if (doc.contains("sigma_x")) {
        c.sigma_x = detail::parse_sigma_x(doc["sigma_x"], "sigma_x", c.d);
    } else if (experiment == "rasc-audit") {
        bad_key("sigma_x", "missing required key (the audit needs the design covariance)");
    }
    if (experiment == "haar-convergence" &&
        (c.algorithm == Algorithm::DICG || c.algorithm == Algorithm::DICG2)) {
        bad_key("algorithm", "DICG needs 0/1 atoms; Haar atoms support pcg and pcg2 only");
    }
    if (experiment == "rasc-audit" && c.sigma_x && c.design != Design::Gaussian) {
        bad_key("design", "the audit's population gradient assumes the Gaussian design");
    }
    return c;
}

inline ExperimentConfig load_config(const std::string& path, const std::string& experiment)
{
    std::ifstream in(path);
    if (!in) {
        throw ConfigError("cannot open config file '" + path + "'");
    }
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::parse_error& e) {
        throw ConfigError("config file '" + path + "' is not valid JSON: " + e.what());
    }
    return parse_config(doc, experiment);
}

// ---------------------------------------------------------------------------
// Seeds and worker pool
// ---------------------------------------------------------------------------

/// Independent per-run seed derived from the base seed and run coordinates.
inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t a, std::uint64_t b = 0)
{
    std::seed_seq seq{base, a, b, std::uint64_t{0xc0ffee}};
    std::uint32_t out[2];
    seq.generate(out, out + 2);
    return (static_cast<std::uint64_t>(out[0]) << 32) | out[1];
}

/// Worker count: hardware concurrency, capped by ROBUSTCG_THREADS when set.
inline unsigned worker_count(std::size_t tasks)
{
    unsigned workers = std::max(1u, std::thread::hardware_concurrency());
    if (const char* env = std::getenv("ROBUSTCG_THREADS"); env && *env) {
        char* end = nullptr;
        const long v = std::strtol(env, &end, 10);
        if (*end != '\0' || v < 1) {
            throw ConfigError("ROBUSTCG_THREADS must be a positive integer");
        }
        workers = std::min<unsigned>(workers, static_cast<unsigned>(v));
    }
    return static_cast<unsigned>(std::min<std::size_t>(workers, std::max<std::size_t>(tasks, 1)));
}

/// Runs task(i) for i in [0, count) on a worker pool; results land at index i.
template <class Result>
std::vector<Result> parallel_map(std::size_t count, const std::function<Result(std::size_t)>& task)
{
    std::vector<Result> results(count);
    std::atomic<std::size_t> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;
    auto worker = [&] {
        for (std::size_t i = next++; i < count; i = next++) {
            try {
                results[i] = task(i);
            } catch (...) {
                std::lock_guard lock(error_mutex);
                if (!error) {
                    error = std::current_exception();
                }
                next = count;
            }
        }
    };
    const unsigned workers = worker_count(count);
    if (workers <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (unsigned w = 0; w < workers; ++w) {
            pool.emplace_back(worker);
        }
        for (auto& t : pool) {
            t.join();
        }
    }
    if (error) {
        std::rethrow_exception(error);
    }
    return results;
}

// ---------------------------------------------------------------------------
// Runs
// ---------------------------------------------------------------------------

inline CorruptionSpec corruption_for(const ExperimentConfig& c, Design design)
{
    switch (design) {
    case Design::LogNormal: return HeavyTail{LogNormal{true}};
    case Design::LogNormalUncentered: return HeavyTail{LogNormal{false}};
    case Design::StudentT: return HeavyTail{StudentT{c.dof}};
    case Design::Gaussian: break;
    }
    if (c.epsilon > 0.0) {
        return HuberContamination{c.epsilon, c.adversary};
    }
    return NoCorruption{};
}

/// Resolves estimator defaults: TrM trims epsilon per tail, MOM uses the
/// log-atom-count rule clamped to n/4, and the heavy-tail arm defaults to MOM.
inline RobustEstimator resolve_estimator(const ExperimentConfig& c, const AtomSet& set, Index n)
{
    RobustEstimator e;
    if (c.estimator) {
        e = *c.estimator;
    } else if (c.design != Design::Gaussian) {
        e = MedianOfMeans{0};
    } else {
        e = TrimmedMean{-1.0};
    }
    if (auto* mom = std::get_if<MedianOfMeans>(&e); mom && mom->blocks == 0) {
        mom->blocks = default_mom_blocks(set.size(), n);
    }
    if (auto* trm = std::get_if<TrimmedMean>(&e); trm && trm->trim_fraction < 0.0) {
        trm->trim_fraction = c.epsilon;
    }
    return e;
}

struct RunResult {
    RegressionProblem problem;
    RunTrace trace;
};

/// Solves one problem. DICG variants on signed-basis atoms run on the lifted
/// simplex; traces report the folded iterate's distance to beta*.
inline RunTrace solve(const RegressionProblem& problem, const AtomSet& set, const SolverConfig& cfg, double radius)
{
    const bool dicg = cfg.algorithm == Algorithm::DICG || cfg.algorithm == Algorithm::DICG2;
    if (!dicg || set.on_hypercube()) {
        return run_solver(problem, set, cfg);
    }
    if (!set.signed_basis_params()) {
        throw ConfigError("config key 'algorithm': DICG needs 0/1 atoms or an l1 ball to lift");
    }
    const LiftedL1<RegressionProblem> lifted(problem, radius);
    const AtomSet simplex = AtomSet::simplex(2 * problem.dim());
    RunTrace trace = run_solver(lifted, simplex, cfg);
    for (auto& v : trace.iterates) {
        v = lifted.fold(v);
    }
    trace.final_iterate = lifted.fold(trace.final_iterate);
    return trace;
}

inline SolverConfig solver_config(const ExperimentConfig& c, const AtomSet& set, Index n, const StepSchedule& schedule)
{
    SolverConfig cfg;
    cfg.algorithm = c.algorithm;
    cfg.estimator = resolve_estimator(c, set, n);
    cfg.schedule = schedule;
    cfg.max_iters = c.max_iters;
    cfg.seed = c.seed;
    return cfg;
}

// ---------------------------------------------------------------------------
// Output helpers
// ---------------------------------------------------------------------------

inline std::filesystem::path prepare_out_dir(const std::string& dir)
{
    std::filesystem::path p(dir);
    std::error_code ec;
    std::filesystem::create_directories(p, ec);
    if (ec || !std::filesystem::is_directory(p)) {
        throw ConfigError("config key 'out_dir': cannot create directory '" + dir + "'");
    }
    return p;
}

inline void write_json(const std::filesystem::path& path, const json& j)
{
    write_text(path, j.dump(2) + "\n");
}

inline std::string trace_csv(const RunTrace& trace, bool with_rasc)
{
    CsvWriter csv;
    std::vector<std::string> columns = {"iter", "xdist", "gap", "eta"};
    if (with_rasc) {
        columns.push_back("rasc_gap");
    }
    csv.header(columns);
    for (const auto& r : trace.records) {
        csv.begin_row();
        csv.field(r.iter);
        csv.field(r.xdist);
        csv.field(r.gap);
        csv.field(r.eta);
        if (with_rasc) {
            csv.field(r.rasc_gap.value_or(0.0));
        }
        csv.end_row();
    }
    return csv.str();
}

inline std::vector<double> xdist_series(const RunTrace& trace)
{
    std::vector<double> out;
    out.reserve(trace.records.size());
    for (const auto& r : trace.records) {
        out.push_back(r.xdist);
    }
    return out;
}

inline json describe_config(const ExperimentConfig& c)
{
    json j;
    j["d"] = c.d;
    j["sparsity"] = c.sparsity;
    j["epsilon"] = c.epsilon;
    j["max_iters"] = c.max_iters;
    j["reps"] = c.reps;
    j["seed"] = c.seed;
    j["algorithm"] = to_string(c.algorithm);
    j["schedule"] = describe(c.schedule);
    j["signal_scale"] = c.signal_scale;
    j["radius"] = c.radius;
    return j;
}

// ---------------------------------------------------------------------------
// Commands
// ---------------------------------------------------------------------------

struct TraceJob {
    double sigma = 0.0;
    Index rep = 0;
};

/// Shared body of the convergence experiments: one trace CSV per (sigma, rep).
inline json run_convergence(const ExperimentConfig& c, const AtomSet& set, const std::string& prefix,
                            bool snapshot)
{
    const auto out = prepare_out_dir(c.out_dir);
    std::vector<TraceJob> jobs;
    for (double s : c.sigma) {
        for (Index r = 0; r < c.reps; ++r) {
            jobs.push_back({s, r});
        }
    }
    const Index n = c.n.front();
    auto results = parallel_map<RunResult>(jobs.size(), [&](std::size_t i) {
        const auto& job = jobs[i];
        const std::uint64_t seed = c.reps == 1 ? c.seed : derive_seed(c.seed, static_cast<std::uint64_t>(job.rep));
        RunResult res;
        res.problem = generate(set, n, c.d, c.sparsity, job.sigma, corruption_for(c, c.design), seed,
                               GenerateOptions{c.signal_scale});
        res.trace = solve(res.problem, set, solver_config(c, set, n, c.schedule), c.radius);
        return res;
    });

    json runs = json::array();
    for (std::size_t i = 0; i < jobs.size(); ++i) {
        const auto& job = jobs[i];
        const auto& res = results[i];
        std::string name = prefix + "_sigma_" + format_number(job.sigma);
        if (c.reps > 1) {
            name += "_rep_" + std::to_string(job.rep);
        }
        write_text(out / (name + ".csv"), trace_csv(res.trace, false));
        json r;
        r["sigma"] = job.sigma;
        r["rep"] = job.rep;
        r["trace"] = name + ".csv";
        r["final_xdist"] = res.trace.final_xdist();
        r["pre_plateau_slope"] = pre_plateau_slope(xdist_series(res.trace));
        if (snapshot) {
            const std::string snap = name + "_signal.csv";
            CsvWriter csv;
            csv.row({"index", "beta_star", "beta_hat"});
            for (Index k = 0; k < c.d; ++k) {
                csv.begin_row();
                csv.field(k);
                csv.field(res.problem.beta_star[k]);
                csv.field(res.trace.final_iterate[k]);
                csv.end_row();
            }
            write_text(out / snap, csv.str());
            r["signal_snapshot"] = snap;
            r["signal_nonzeros"] = (res.problem.beta_star.array().abs() > 1e-12).count();
        }
        runs.push_back(r);
    }
    json summary;
    summary["experiment"] = c.experiment;
    summary["n"] = n;
    summary["config"] = describe_config(c);
    summary["estimator"] = describe(resolve_estimator(c, set, n));
    summary["runs"] = runs;
    if (c.requested_d) {
        summary["dimension_remap"] = {{"requested", *c.requested_d}, {"used", c.d}};
    }
    write_json(out / "summary.json", summary);
    return summary;
}

inline json cmd_lasso_convergence(const ExperimentConfig& c)
{
    const AtomSet set = AtomSet::signed_basis(c.d, c.radius);
    return run_convergence(c, set, "lasso", false);
}

inline json cmd_haar_convergence(const ExperimentConfig& c)
{
    require_haar_dim(c.d);
    const AtomSet set = AtomSet::haar(c.d, c.radius);
    return run_convergence(c, set, "haar", true);
}

struct SweepRow {
    Index n = 0;
    Index rep = 0;
    std::string setting;
    double final_xdist = 0.0;
};

/// Robust arm (configured estimator, heavy-tailed design) against the Mean
/// estimator on Gaussian data, over the n grid.
inline json cmd_heavy_tail_sweep(const ExperimentConfig& c)
{
    const auto out = prepare_out_dir(c.out_dir);
    const AtomSet set = AtomSet::signed_basis(c.d, c.radius);
    const double sigma = c.sigma.front();
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
    ExperimentConfig baseline = c;
    baseline.design = Design::Gaussian;
    baseline.epsilon = 0.0;
    baseline.estimator = EmpiricalMean{};
    const StepSchedule baseline_schedule = c.baseline_schedule.value_or(c.schedule);

    auto rows = parallel_map<SweepRow>(jobs.size(), [&](std::size_t i) {
        const Job& job = jobs[i];
        const std::uint64_t seed =
            derive_seed(c.seed, static_cast<std::uint64_t>(job.n), static_cast<std::uint64_t>(job.rep));
        const ExperimentConfig& cfg = job.robust ? c : baseline;
        const RegressionProblem p = generate(set, job.n, c.d, c.sparsity, sigma, corruption_for(cfg, cfg.design),
                                             seed, GenerateOptions{c.signal_scale});
        const SolverConfig sc = solver_config(cfg, set, job.n, job.robust ? c.schedule : baseline_schedule);
        const RunTrace trace = solve(p, set, sc, c.radius);
        return SweepRow{job.n, job.rep, job.robust ? "robust_lognormal" : "mean_gaussian", trace.final_xdist()};
    });

    CsvWriter csv;
    csv.row({"n", "rep", "setting", "final_xdist"});
    for (const auto& r : rows) {
        csv.begin_row();
        csv.field(r.n);
        csv.field(r.rep);
        csv.field(r.setting);
        csv.field(r.final_xdist);
        csv.end_row();
    }
    write_text(out / "heavy_tail.csv", csv.str());

    json per_n = json::array();
    std::vector<double> ns, robust_means;
    for (Index n : c.n) {
        std::vector<double> robust, mean;
        for (const auto& r : rows) {
            if (r.n == n) {
                (r.setting == "robust_lognormal" ? robust : mean).push_back(r.final_xdist);
            }
        }
        const SampleSummary rs = summarize(robust);
        const SampleSummary ms = summarize(mean);
        per_n.push_back({{"n", n},
                         {"robust_lognormal_mean", rs.mean},
                         {"robust_lognormal_sd", rs.stddev},
                         {"mean_gaussian_mean", ms.mean},
                         {"mean_gaussian_sd", ms.stddev},
                         {"ratio", rs.mean / ms.mean},
                         {"estimator", describe(resolve_estimator(c, set, n))}});
        ns.push_back(static_cast<double>(n));
        robust_means.push_back(rs.mean);
    }
    json summary;
    summary["experiment"] = c.experiment;
    summary["config"] = describe_config(c);
    summary["sigma"] = sigma;
    summary["per_n"] = per_n;
    if (ns.size() >= 3) {
        summary["loglog_slope"] = loglog_slope(ns, robust_means);
    } else {
        summary["loglog_slope"] = nullptr;
    }
    write_json(out / "summary.json", summary);
    return summary;
}

/// Robust solver run with a per-iteration RASC audit against the exact
/// population gradient, then the (theta, psi) certificate fit.
inline json cmd_rasc_audit(const ExperimentConfig& c)
{
    if (!c.sigma_x) {
        throw ConfigError("config key 'sigma_x': missing required key");
    }
    const auto out = prepare_out_dir(c.out_dir);
    const AtomSet set = AtomSet::signed_basis(c.d, c.radius);
    const Index n = c.n.front();
    RegressionProblem p =
        generate(set, n, c.d, c.sparsity, c.sigma.front(), corruption_for(c, c.design), c.seed,
                 GenerateOptions{c.signal_scale});
    p.sigma_x = *c.sigma_x;
    SolverConfig sc = solver_config(c, set, n, c.schedule);
    sc.audit_rasc = true;
    const RunTrace trace = solve(p, set, sc, c.radius);
    write_text(out / "rasc_trace.csv", trace_csv(trace, true));

    const RascFit fit = fit_rasc(rasc_records(trace));
    std::vector<bool> clean(p.corrupted.size());
    for (std::size_t i = 0; i < clean.size(); ++i) {
        clean[i] = !p.corrupted[i];
    }
    const double alpha_l = restricted_min_eigenvalue(p.X, clean, set, p.signal.atoms);
    const double threshold = rasc_threshold(alpha_l, c.sparsity);

    json summary;
    summary["experiment"] = c.experiment;
    summary["config"] = describe_config(c);
    summary["estimator"] = describe(sc.estimator);
    summary["theta_hat"] = fit.theta_hat;
    summary["psi_hat"] = fit.psi_hat;
    summary["coverage"] = fit.coverage;
    summary["alpha_l"] = alpha_l;
    summary["threshold"] = threshold;
    summary["pass"] = fit.theta_hat <= threshold && fit.coverage >= 0.95;
    summary["final_xdist"] = trace.final_xdist();
    write_json(out / "summary.json", summary);
    return summary;
}

inline json run_experiment(const ExperimentConfig& c)
{
    if (c.experiment == "lasso-convergence") {
        return cmd_lasso_convergence(c);
    }
    if (c.experiment == "heavy-tail-sweep") {
        return cmd_heavy_tail_sweep(c);
    }
    if (c.experiment == "haar-convergence") {
        return cmd_haar_convergence(c);
    }
    if (c.experiment == "rasc-audit") {
        return cmd_rasc_audit(c);
    }
    throw ConfigError("config key 'experiment': unknown experiment '" + c.experiment + "'");
}

} // namespace robustcg::experiments
