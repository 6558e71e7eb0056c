#pragma once

// Command implementations behind the purifylab executable. Each command
// writes its table to a stream and returns a process exit code.

#include <charconv>
#include <cmath>
#include <cstdio>
#include <map>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "purifylab/ensembles.hpp"
#include "purifylab/metrics.hpp"
#include "purifylab/theory.hpp"

#ifndef PURIFYLAB_VERSION
#define PURIFYLAB_VERSION "0.1.0"
#endif

namespace purifylab::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitCheckFailed = 1;
inline constexpr int kExitUsage = 2;

inline constexpr std::string_view kVersion = PURIFYLAB_VERSION;

struct DeRange {
    std::size_t lo = 1;
    std::size_t hi = 1;
};

inline std::size_t parse_count(std::string_view text, std::string_view what)
{
    std::size_t v = 0;
    const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (ec != std::errc() || ptr != text.data() + text.size())
        throw Error(ErrorKind::ParseError, "bad " + std::string(what) + " '" + std::string(text) + "'");
    return v;
}

/// "4" or "1..25".
inline DeRange parse_de_range(std::string_view text)
{
    DeRange r;
    const auto dots = text.find("..");
    if (dots == std::string_view::npos) {
        r.lo = r.hi = parse_count(text, "d_E");
    } else {
        r.lo = parse_count(text.substr(0, dots), "d_E range start");
        r.hi = parse_count(text.substr(dots + 2), "d_E range end");
    }
    if (r.lo < 1 || r.hi < r.lo) throw Error(ErrorKind::InvalidDims, "d_E range must satisfy 1 <= lo <= hi");
    return r;
}

inline std::vector<std::string> split_list(std::string_view text, char sep = ',')
{
    std::vector<std::string> out;
    std::size_t start = 0;
    while (start <= text.size()) {
        const auto end = std::min(text.find(sep, start), text.size());
        const auto item = text.substr(start, end - start);
        if (!item.empty()) out.emplace_back(item);
        start = end + 1;
    }
    return out;
}

inline std::vector<std::size_t> parse_k_list(std::string_view text)
{
    std::vector<std::size_t> ks;
    for (const auto& item : split_list(text)) ks.push_back(parse_count(item, "copy budget"));
    return ks;
}

struct RunConfig {
    std::string command;
    EnsembleSpec spec{2, 2, 1, 1};
    DeRange de{1, 1};
    std::size_t n_samples = 2000;
    std::vector<std::string> strategies{"pure:omega", "append:optimal", "dep", "avg-ue"};
    std::string output;
    std::string format = "csv";
    bool plot = false;
    std::size_t workers = 1;
    std::vector<std::string> checks;
    std::size_t bins = 40;
    std::vector<std::size_t> ks{64, 128, 256, 512, 1024, 2048, 4096};
    std::string fixtures_path;

    EnsembleSpec spec_at(std::size_t d_env) const
    {
        EnsembleSpec s = spec;
        s.d_env = d_env;
        return s;
    }

    void validate() const
    {
        if (format != "csv" && format != "json") throw Error(ErrorKind::ParseError, "format must be csv or json");
        if (n_samples < 2) throw Error(ErrorKind::DomainError, "--n must be at least 2");
        if (workers < 1) throw Error(ErrorKind::DomainError, "--workers must be at least 1");
        if (de.lo < 1 || de.hi < de.lo) throw Error(ErrorKind::InvalidDims, "bad d_E range");
    }
};

/// %.12g.
inline std::string format_number(double x)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.12g", x);
    return buf;
}

inline std::string csv_field(std::string_view s)
{
    if (s.find_first_of(",\"\n\r") == std::string_view::npos) return std::string(s);
    std::string out = "\"";
    for (char ch : s) {
        if (ch == '"') out += '"';
        out += ch;
    }
    return out + "\"";
}

inline std::string join(const std::vector<std::string>& xs, std::string_view sep)
{
    std::string out;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        if (i) out += sep;
        out += xs[i];
    }
    return out;
}

inline nlohmann::json config_json(const RunConfig& c)
{
    nlohmann::json ks = nlohmann::json::array();
    for (auto k : c.ks) ks.push_back(k);
    return {{"command", c.command},
            {"d_I", c.spec.d_in},
            {"d_O", c.spec.d_out},
            {"d_E", c.de.lo == c.de.hi ? std::to_string(c.de.lo) : std::to_string(c.de.lo) + ".." + std::to_string(c.de.hi)},
            {"n", c.n_samples},
            {"seed", c.spec.seed},
            {"strategies", c.strategies},
            {"checks", c.checks},
            {"bins", c.bins},
            {"k", ks},
            {"format", c.format},
            {"workers", c.workers},
            {"version", std::string(kVersion)}};
}

/// One-line "# purifylab <version> key=value ..." echo of the full configuration.
inline std::string config_comment(const RunConfig& c)
{
    std::ostringstream os;
    os << "# purifylab " << kVersion << " command=" << c.command << " d_I=" << c.spec.d_in << " d_O=" << c.spec.d_out
       << " d_E=" << c.de.lo;
    if (c.de.hi != c.de.lo) os << ".." << c.de.hi;
    os << " n=" << c.n_samples << " seed=" << c.spec.seed << " workers=" << c.workers;
    if (c.command == "sweep") os << " strategies=" << join(c.strategies, ",");
    if (c.command == "validate" && !c.checks.empty()) os << " checks=" << join(c.checks, ",");
    if (c.command == "spectrum") os << " bins=" << c.bins;
    if (c.command == "tomo-scaling") {
        std::vector<std::string> ks;
        for (auto k : c.ks) ks.push_back(std::to_string(k));
        os << " k=" << join(ks, ",");
    }
    os << " format=" << c.format << "\n";
    return os.str();
}

// ---------------------------------------------------------------------------
// validate

struct CheckResult {
    std::string name;
    double expected = 0.0;
    double observed = 0.0;
    double tolerance = 0.0;
    bool passed = false;
    std::string detail;
};

inline const std::vector<std::string>& default_checks()
{
    static const std::vector<std::string> names{"purity", "dep-zero-variance", "avg-ue", "pure-separable",
                                                "append-bounds"};
    return names;
}

inline CheckResult run_check(std::string_view name, const RunConfig& cfg)
{
    const EnsembleSpec spec = cfg.spec_at(cfg.de.lo);
    const std::size_t n = cfg.n_samples;
    CheckResult r;
    r.name = std::string(name);
    if (name == "purity") {
        const auto m = estimate_moments(spec, n, cfg.workers);
        r.expected = theory::avg_purity(spec);
        r.observed = m.purity.mean;
        r.tolerance = 3.0 * m.purity.stderr + 1e-12;
        r.passed = std::abs(r.observed - r.expected) <= r.tolerance;
        r.detail = "3 stderr";
    } else if (name == "dep-zero-variance") {
        const auto rep = estimate_average_error("dep", spec, n, cfg.workers);
        r.expected = theory::eps_dep(spec);
        r.observed = rep.mean;
        r.tolerance = 1e-9;
        r.passed = rep.stderr == 0.0 && std::abs(r.observed - r.expected) <= r.tolerance;
        r.detail = "stderr=" + format_number(rep.stderr);
    } else if (name == "avg-ue") {
        const auto rep = estimate_average_error("avg-ue", spec, n, cfg.workers);
        r.expected = theory::eps_avg_ue(spec);
        r.observed = rep.mean;
        r.tolerance = 4.0 * rep.stderr + 1e-9;
        r.passed = rep.consistent();
        r.detail = "4 stderr";
    } else if (name == "pure-separable") {
        r.expected = theory::eps_pure_separable(spec);
        if (spec.d_out < spec.d_in) {
            r.observed = r.expected;
            r.passed = true;
            r.detail = "skipped: needs d_O >= d_I";
        } else {
            const auto rep = estimate_average_error("pure:separable", spec, n, cfg.workers);
            r.observed = rep.mean;
            r.tolerance = 4.0 * rep.stderr + 1e-9;
            r.passed = rep.consistent();
            r.detail = "4 stderr";
        }
    } else if (name == "append-bounds") {
        const auto rep = estimate_average_error("append:optimal", spec, n, cfg.workers);
        const auto b = theory::eps_app_bounds(spec);
        r.expected = 0.5 * (b.lower + b.upper);
        r.observed = rep.mean;
        r.tolerance = 0.5 * (b.upper - b.lower) + 3.0 * rep.stderr + 1e-9;
        r.passed = rep.mean >= b.lower - 3.0 * rep.stderr - 1e-9 && rep.mean <= b.upper + 3.0 * rep.stderr + 1e-9;
        r.detail = "bounds [" + format_number(b.lower) + ", " + format_number(b.upper) + "]";
    } else if (name == "second-moment") {
        const Matrix mc = second_moment_operator(spec, n, cfg.workers);
        const Matrix exact = second_moment_closed_form(spec);
        r.expected = 0.0;
        r.observed = (mc - exact).norm() / exact.norm();
        r.tolerance = 0.03;
        r.passed = r.observed < r.tolerance;
        r.detail = "relative Frobenius deviation";
    } else {
        throw Error(ErrorKind::ParseError, "unknown check '" + std::string(name) + "'");
    }
    return r;
}

inline std::vector<CheckResult> run_checks(const RunConfig& cfg)
{
    const auto& names = cfg.checks.empty() ? default_checks() : cfg.checks;
    std::vector<CheckResult> out;
    for (const auto& name : names) out.push_back(run_check(name, cfg));
    return out;
}

inline int cmd_validate(const RunConfig& cfg, std::ostream& os)
{
    cfg.validate();
    if (cfg.de.lo != cfg.de.hi) throw Error(ErrorKind::InvalidDims, "validate takes a single d_E");
    for (const auto& name : cfg.checks) {
        if (name != "second-moment" &&
            std::find(default_checks().begin(), default_checks().end(), name) == default_checks().end())
            throw Error(ErrorKind::ParseError, "unknown check '" + name + "'");
    }
    const auto results = run_checks(cfg);
    bool all = true;
    if (cfg.format == "json") {
        nlohmann::json arr = nlohmann::json::array();
        for (const auto& r : results) {
            arr.push_back({{"check", r.name},
                           {"expected", r.expected},
                           {"observed", r.observed},
                           {"tolerance", r.tolerance},
                           {"passed", r.passed},
                           {"detail", r.detail}});
            all = all && r.passed;
        }
        os << nlohmann::json{{"config", config_json(cfg)}, {"checks", arr}}.dump(2) << "\n";
    } else {
        os << config_comment(cfg) << "check,expected,observed,tolerance,passed,detail\n";
        for (const auto& r : results) {
            os << r.name << "," << format_number(r.expected) << "," << format_number(r.observed) << ","
               << format_number(r.tolerance) << "," << (r.passed ? "true" : "false") << "," << csv_field(r.detail)
               << "\n";
            all = all && r.passed;
        }
    }
    return all ? kExitOk : kExitCheckFailed;
}

// ---------------------------------------------------------------------------
// sweep

inline std::vector<ErrorReport> sweep_rows(const RunConfig& cfg)
{
    if (cfg.strategies.empty()) throw Error(ErrorKind::ParseError, "no strategies given");
    std::vector<StrategyRequest> reqs;
    for (const auto& s : cfg.strategies) reqs.push_back(parse_strategy(s));
    std::vector<ErrorReport> rows;
    for (std::size_t de = cfg.de.lo; de <= cfg.de.hi; ++de) {
        const EnsembleSpec spec = cfg.spec_at(de);
        for (const auto& req : reqs) {
            const Strategy strategy = resolve_strategy(req, spec, cfg.n_samples, cfg.workers);
            rows.push_back(estimate_average_error(strategy, spec, cfg.n_samples, closed_form_for(req, spec), cfg.workers));
        }
    }
    return rows;
}

/// Line chart of mean error against d_E, one polyline per strategy.
inline std::string sweep_svg(const std::vector<ErrorReport>& rows)
{
    constexpr double w = 640, h = 400, left = 60, right = 160, top = 20, bottom = 40;
    double x_lo = 1e300, x_hi = -1e300, y_hi = 0.0;
    std::map<std::string, std::vector<std::pair<double, double>>> lines;
    std::vector<std::string> order;
    for (const auto& r : rows) {
        if (!lines.count(r.strategy)) order.push_back(r.strategy);
        lines[r.strategy].emplace_back(static_cast<double>(r.spec.d_env), r.mean);
        x_lo = std::min(x_lo, static_cast<double>(r.spec.d_env));
        x_hi = std::max(x_hi, static_cast<double>(r.spec.d_env));
        y_hi = std::max(y_hi, r.mean);
    }
    if (x_hi <= x_lo) x_hi = x_lo + 1.0;
    if (y_hi <= 0.0) y_hi = 1.0;
    const auto px = [&](double x) { return left + (x - x_lo) / (x_hi - x_lo) * (w - left - right); };
    const auto py = [&](double y) { return h - bottom - y / y_hi * (h - top - bottom); };
    static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#17becf"};
    std::ostringstream os;
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w << "\" height=\"" << h << "\">\n"
       << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
       << "<line x1=\"" << left << "\" y1=\"" << h - bottom << "\" x2=\"" << w - right << "\" y2=\"" << h - bottom
       << "\" stroke=\"black\"/>\n"
       << "<line x1=\"" << left << "\" y1=\"" << top << "\" x2=\"" << left << "\" y2=\"" << h - bottom
       << "\" stroke=\"black\"/>\n"
       << "<text x=\"" << (w - right + left) / 2 << "\" y=\"" << h - 8 << "\" text-anchor=\"middle\">d_E</text>\n"
       << "<text x=\"" << left - 8 << "\" y=\"" << top + 10 << "\" text-anchor=\"end\">" << format_number(y_hi)
       << "</text>\n"
       << "<text x=\"" << left - 8 << "\" y=\"" << h - bottom << "\" text-anchor=\"end\">0</text>\n"
       << "<text x=\"" << left << "\" y=\"" << h - bottom + 16 << "\" text-anchor=\"middle\">" << x_lo << "</text>\n"
       << "<text x=\"" << w - right << "\" y=\"" << h - bottom + 16 << "\" text-anchor=\"middle\">" << x_hi
       << "</text>\n";
    for (std::size_t i = 0; i < order.size(); ++i) {
        const char* color = colors[i % std::size(colors)];
        os << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"2\" points=\"";
        for (const auto& [x, y] : lines[order[i]]) os << format_number(px(x)) << "," << format_number(py(y)) << " ";
        os << "\"/>\n<text x=\"" << w - right + 10 << "\" y=\"" << top + 20 * (i + 1) << "\" fill=\"" << color << "\">"
           << order[i] << "</text>\n";
    }
    os << "</svg>\n";
    return os.str();
}

inline int cmd_sweep(const RunConfig& cfg, std::ostream& os, std::ostream* svg = nullptr)
{
    cfg.validate();
    const auto rows = sweep_rows(cfg);
    if (cfg.format == "json") {
        nlohmann::json arr = nlohmann::json::array();
        for (const auto& r : rows) arr.push_back(to_json(r));
        os << nlohmann::json{{"config", config_json(cfg)}, {"rows", arr}}.dump(2) << "\n";
    } else {
        os << config_comment(cfg) << "d_E,strategy,mean,stderr,closed_form,n,seed\n";
        for (const auto& r : rows) {
            os << r.spec.d_env << "," << csv_field(r.strategy) << "," << format_number(r.mean) << ","
               << format_number(r.stderr) << "," << (r.closed_form ? format_number(*r.closed_form) : "") << ","
               << r.n_samples << "," << r.spec.seed << "\n";
        }
    }
    if (svg) *svg << sweep_svg(rows);
    return kExitOk;
}

// ---------------------------------------------------------------------------
// spectrum

struct SpectrumBin {
    double lo, hi, empirical_density, mp_density;
};

struct SpectrumResult {
    double ratio = 0.0;        // c = d_I d_O / d_E
    double atom_weight = 0.0;  // (1 - 1/c)_+
    double empirical_atom = 0.0;
    double ks = 0.0;
    std::size_t n_eigenvalues = 0;
    std::vector<SpectrumBin> bins;
};

/// Pooled spectrum of d_O C over n draws; eigenvalues below 1e-9 count toward the atom.
inline SpectrumResult spectrum_histogram(const EnsembleSpec& spec, std::size_t draws, std::size_t bins,
                                         std::size_t workers = 1)
{
    spec.validate();
    if (bins < 10) throw Error(ErrorKind::DomainError, "spectrum needs at least 10 bins");
    const double d_o = static_cast<double>(spec.d_out);
    const auto spectra = parallel_map<RealVector>(draws, workers, [&](std::size_t i) {
        RandomStream rs(spec.seed, i);
        return RealVector(d_o * sample_choi(spec, rs).choi.eigenvalues());
    });
    std::vector<double> pooled;
    for (const auto& s : spectra) pooled.insert(pooled.end(), s.data(), s.data() + s.size());

    SpectrumResult out;
    out.ratio = static_cast<double>(spec.joint_dim()) / static_cast<double>(spec.d_env);
    out.atom_weight = mp_atom(out.ratio);
    out.n_eigenvalues = pooled.size();
    out.ks = mp_ks_distance(pooled, out.ratio);

    const double top = std::max(mp_support(out.ratio).upper, *std::max_element(pooled.begin(), pooled.end())) * 1.000001;
    const double width = top / static_cast<double>(bins);
    std::vector<std::size_t> counts(bins, 0);
    std::size_t zeros = 0;
    for (double x : pooled) {
        if (x < 1e-9) {
            ++zeros;
            continue;
        }
        counts[std::min(bins - 1, static_cast<std::size_t>(x / width))]++;
    }
    const double total = static_cast<double>(pooled.size());
    out.empirical_atom = static_cast<double>(zeros) / total;
    for (std::size_t b = 0; b < bins; ++b) {
        const double lo = width * static_cast<double>(b), hi = lo + width;
        out.bins.push_back({lo, hi, static_cast<double>(counts[b]) / (total * width), mp_density(out.ratio, 0.5 * (lo + hi))});
    }
    return out;
}

inline int cmd_spectrum(const RunConfig& cfg, std::ostream& os)
{
    cfg.validate();
    const auto res = spectrum_histogram(cfg.spec_at(cfg.de.lo), cfg.n_samples, cfg.bins, cfg.workers);
    if (cfg.format == "json") {
        nlohmann::json arr = nlohmann::json::array();
        for (const auto& b : res.bins)
            arr.push_back({{"bin_lo", b.lo}, {"bin_hi", b.hi}, {"empirical_density", b.empirical_density},
                           {"mp_density", b.mp_density}, {"atom_weight", res.atom_weight}});
        os << nlohmann::json{{"config", config_json(cfg)},
                             {"bins", arr},
                             {"ratio", res.ratio},
                             {"empirical_atom", res.empirical_atom},
                             {"ks", res.ks}}
                  .dump(2)
           << "\n";
        return kExitOk;
    }
    os << config_comment(cfg) << "bin_lo,bin_hi,bin_center,empirical_density,mp_density,atom_weight\n";
    for (const auto& b : res.bins)
        os << format_number(b.lo) << "," << format_number(b.hi) << "," << format_number(0.5 * (b.lo + b.hi)) << ","
           << format_number(b.empirical_density) << "," << format_number(b.mp_density) << ","
           << format_number(res.atom_weight) << "\n";
    os << "# ratio=" << format_number(res.ratio) << " empirical_atom=" << format_number(res.empirical_atom)
       << " eigenvalues=" << res.n_eigenvalues << " ks=" << format_number(res.ks) << "\n";
    return kExitOk;
}

// ---------------------------------------------------------------------------
// tomo-scaling

struct TomoPoint {
    std::size_t k;
    Estimate error;
};

struct TomoScaling {
    std::vector<TomoPoint> points;
    double slope = 0.0;
};

/// Least-squares slope of log(mean) against log(k).
inline double loglog_slope(const std::vector<TomoPoint>& pts)
{
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    const double n = static_cast<double>(pts.size());
    for (const auto& p : pts) {
        const double x = std::log(static_cast<double>(p.k)), y = std::log(p.error.mean);
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
    }
    return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

inline TomoScaling tomo_scaling(const EnsembleSpec& spec, const std::vector<std::size_t>& ks, std::size_t n,
                                std::size_t workers = 1)
{
    if (ks.size() < 3) throw Error(ErrorKind::DomainError, "need at least three copy budgets");
    const auto [lo, hi] = std::minmax_element(ks.begin(), ks.end());
    if (*lo < 1 || *hi < 16 * *lo) throw Error(ErrorKind::DomainError, "copy budgets must span at least 16x");
    TomoScaling out;
    for (std::size_t k : ks) {
        const Strategy s{"tomo:k=" + std::to_string(k), Estimation{k}};
        const auto rep = estimate_average_error(s, spec, n, std::nullopt, workers);
        out.points.push_back({k, {rep.mean, rep.stderr}});
    }
    out.slope = loglog_slope(out.points);
    return out;
}

inline int cmd_tomo_scaling(const RunConfig& cfg, std::ostream& os)
{
    cfg.validate();
    const auto res = tomo_scaling(cfg.spec_at(cfg.de.lo), cfg.ks, cfg.n_samples, cfg.workers);
    if (cfg.format == "json") {
        nlohmann::json arr = nlohmann::json::array();
        for (const auto& p : res.points) arr.push_back({{"k", p.k}, {"mean", p.error.mean}, {"stderr", p.error.stderr}});
        os << nlohmann::json{{"config", config_json(cfg)}, {"rows", arr}, {"slope", res.slope}}.dump(2) << "\n";
        return kExitOk;
    }
    os << config_comment(cfg) << "k,mean,stderr\n";
    for (const auto& p : res.points)
        os << p.k << "," << format_number(p.error.mean) << "," << format_number(p.error.stderr) << "\n";
    os << "# loglog_slope=" << format_number(res.slope) << "\n";
    return kExitOk;
}

} // namespace purifylab::cli
