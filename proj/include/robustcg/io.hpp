#pragma once

#include <robustcg/models.hpp>
#include <robustcg/types.hpp>

#include <json.hpp>

#include <charconv>
#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <sstream>
#include <string>
#include <system_error>
#include <vector>

namespace robustcg {

/// Locale-independent decimal with 17 significant digits (round-trips a double).
inline std::string format_double(double v)
{
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general, 17);
    return std::string(buf, res.ptr);
}

/// Shortest round-trip representation; used in file names.
inline std::string format_number(double v)
{
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

inline double parse_double(const std::string& s)
{
    double v = 0.0;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc{} || res.ptr != s.data() + s.size()) {
        throw ConfigError("not a number: '" + s + "'");
    }
    return v;
}

/// Comma-separated rows, newline-terminated, no quoting (fields never contain commas).
class CsvWriter {
public:
    void row(std::initializer_list<std::string> fields)
    {
        begin_row();
        for (const auto& f : fields) {
            field(f);
        }
        end_row();
    }

    void header(const std::vector<std::string>& fields)
    {
        begin_row();
        for (const auto& f : fields) {
            field(f);
        }
        end_row();
    }

    void begin_row() { first_ = true; }
    void end_row() { out_ += '\n'; }

    void field(const std::string& s)
    {
        sep();
        out_ += s;
    }
    void field(const char* s) { field(std::string(s)); }
    void field(double v)
    {
        sep();
        out_ += format_double(v);
    }
    void field(Index v)
    {
        sep();
        out_ += std::to_string(v);
    }
    void field(int v) { field(static_cast<Index>(v)); }

    const std::string& str() const noexcept { return out_; }

private:
    void sep()
    {
        if (!first_) {
            out_ += ',';
        }
        first_ = false;
    }

    std::string out_;
    bool first_ = true;
};

/// Writes the whole file in binary mode, replacing any previous content.
inline void write_text(const std::filesystem::path& path, const std::string& text)
{
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw ConfigError("cannot write '" + path.string() + "'");
    }
    out << text;
    if (!out) {
        throw ConfigError("failed writing '" + path.string() + "'");
    }
}

inline std::vector<std::vector<std::string>> read_csv(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw ConfigError("cannot open '" + path.string() + "'");
    }
    std::vector<std::vector<std::string>> rows;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') {
            line.pop_back();
        }
        if (line.empty()) {
            continue;
        }
        std::vector<std::string> fields;
        std::stringstream ss(line);
        std::string f;
        while (std::getline(ss, f, ',')) {
            fields.push_back(f);
        }
        rows.push_back(std::move(fields));
    }
    return rows;
}

// ---------------------------------------------------------------------------
// Problem export / import: X.csv, y.csv (`y,corrupted_flag`), meta.json
// ---------------------------------------------------------------------------

inline void save_problem(const std::filesystem::path& dir, const RegressionProblem& p)
{
    std::filesystem::create_directories(dir);
    CsvWriter x;
    for (Index i = 0; i < p.X.rows(); ++i) {
        x.begin_row();
        for (Index j = 0; j < p.X.cols(); ++j) {
            x.field(p.X(i, j));
        }
        x.end_row();
    }
    write_text(dir / "X.csv", x.str());

    CsvWriter y;
    for (Index i = 0; i < p.y.size(); ++i) {
        y.begin_row();
        y.field(p.y[i]);
        y.field(p.corrupted[static_cast<std::size_t>(i)] ? Index{1} : Index{0});
        y.end_row();
    }
    write_text(dir / "y.csv", y.str());

    nlohmann::json meta;
    meta["d"] = p.dim();
    meta["n"] = p.samples();
    meta["s"] = p.signal.atoms.size();
    meta["sigma"] = p.sigma;
    meta["epsilon"] = corruption_epsilon(p.corruption);
    meta["seed"] = p.seed;
    meta["beta_star"] = std::vector<double>(p.beta_star.data(), p.beta_star.data() + p.beta_star.size());
    write_text(dir / "meta.json", meta.dump(2) + "\n");
}

/// Restores X, y, flags, beta*, sigma and seed. The adversary and the signal
/// decomposition are not part of the exchange format.
inline RegressionProblem load_problem(const std::filesystem::path& dir)
{
    std::ifstream meta_in(dir / "meta.json");
    if (!meta_in) {
        throw ConfigError("cannot open '" + (dir / "meta.json").string() + "'");
    }
    const auto meta = nlohmann::json::parse(meta_in);
    const auto d = meta.at("d").get<Index>();
    const auto n = meta.at("n").get<Index>();

    RegressionProblem p;
    p.sigma = meta.at("sigma").get<double>();
    p.seed = meta.at("seed").get<std::uint64_t>();
    const auto beta = meta.at("beta_star").get<std::vector<double>>();
    require_same_dim(static_cast<Index>(beta.size()), d, "load_problem: beta_star");
    p.beta_star = Eigen::Map<const Vector>(beta.data(), d);

    const auto xrows = read_csv(dir / "X.csv");
    const auto yrows = read_csv(dir / "y.csv");
    require_same_dim(static_cast<Index>(xrows.size()), n, "load_problem: X rows");
    require_same_dim(static_cast<Index>(yrows.size()), n, "load_problem: y rows");
    p.X.resize(n, d);
    p.y.resize(n);
    p.corrupted.assign(static_cast<std::size_t>(n), false);
    for (Index i = 0; i < n; ++i) {
        const auto& xr = xrows[static_cast<std::size_t>(i)];
        require_same_dim(static_cast<Index>(xr.size()), d, "load_problem: X columns");
        for (Index j = 0; j < d; ++j) {
            p.X(i, j) = parse_double(xr[static_cast<std::size_t>(j)]);
        }
        const auto& yr = yrows[static_cast<std::size_t>(i)];
        if (yr.size() != 2) {
            throw ConfigError("load_problem: y.csv rows must be `y,corrupted_flag`");
        }
        p.y[i] = parse_double(yr[0]);
        p.corrupted[static_cast<std::size_t>(i)] = yr[1] == "1";
    }
    return p;
}

} // namespace robustcg
