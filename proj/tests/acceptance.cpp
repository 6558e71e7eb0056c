// Acceptance suite: one PASS/FAIL line per criterion, non-zero exit on any failure.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include "purifylab/cli.hpp"
#include "purifylab/metrics.hpp"

using namespace purifylab;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0)
{
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

double combined(double a, double b) { return std::hypot(a, b); }

struct Verdict {
    bool passed;
    std::string detail;
};

std::string fmt(const char* f, auto... args)
{
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

Verdict average_purity()
{
    const auto t0 = Clock::now();
    const auto m = estimate_moments({2, 2, 4, 2024}, 20000);
    const double secs = seconds_since(t0);
    const double target = 12.0 / 7.0;
    const double z = std::abs(m.purity.mean - target) / m.purity.stderr;
    return {z <= 3.0 && secs < 30.0,
            fmt("mean %.6f target %.6f z %.2f runtime %.1fs", m.purity.mean, target, z, secs)};
}

Verdict depolarizing_exact()
{
    const auto r = estimate_average_error("dep", {2, 2, 3, 2024}, 100, 1, true);
    double worst = 0.0;
    bool identical = !r.per_sample.empty();
    for (double e : r.per_sample) {
        worst = std::max(worst, std::abs(e - (4.0 - 1.0 / 3.0)));
        identical = identical && e == r.per_sample.front();
    }
    // Identical samples have sample variance exactly zero.
    return {r.per_sample.size() == 100 && worst <= 1e-9 && identical && r.stderr == 0.0,
            fmt("max deviation %.3g; per-sample values %s; stderr %.3g", worst,
                identical ? "bit-identical" : "differ", r.stderr)};
}

Verdict trivial_environment()
{
    const EnsembleSpec spec{2, 2, 1, 2024};
    const auto mm = estimate_average_error("append:maxmixed", spec, 100);
    const auto ue = estimate_average_error("avg-ue", spec, 100);
    const auto om = estimate_average_error("pure:omega", spec, 100);
    return {mm.mean <= 1e-10 && ue.mean <= 1e-10 && std::abs(om.mean - 6.0) <= 1e-12 && om.stderr == 0.0,
            fmt("append:maxmixed %.3g avg-ue %.3g pure:omega %.17g (stderr %.3g)", mm.mean, ue.mean, om.mean,
                om.stderr)};
}

Verdict pure_output_ordering()
{
    const EnsembleSpec spec{2, 2, 4, 2024};
    const std::size_t n = 5000;
    std::vector<ChoiOperator> cs;
    cs.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        RandomStream rs(spec.seed, i);
        cs.push_back(sample_choi(spec, rs).choi);
    }
    auto evaluate = [&](const PurificationVector& w) {
        std::vector<double> xs(n);
        for (std::size_t i = 0; i < n; ++i) xs[i] = error_pure_output(cs[i], w);
        return summarize(xs);
    };
    const auto omega = evaluate(max_entangled_purification(2, 2));
    const auto sep_strategy = resolve_strategy(parse_strategy("pure:separable"), spec, 0);
    const auto sep = evaluate(std::get<PureOutput>(sep_strategy.kind).w);
    int violations = 0, hard_violations = 0;
    for (std::uint64_t j = 0; j < 50; ++j) {
        RandomStream wrs(9000 + j, 0);
        const auto w = evaluate(sample_choi(spec, wrs).purification);
        const bool low = omega.mean <= w.mean, high = w.mean <= sep.mean;
        if (!low || !high) ++violations;
        if ((!low && omega.mean - w.mean > 3.0 * combined(omega.stderr, w.stderr)) ||
            (!high && w.mean - sep.mean > 3.0 * combined(w.stderr, sep.stderr)))
            ++hard_violations;
    }
    const double z6 = std::abs(sep.mean - 6.0) / sep.stderr;
    return {hard_violations == 0 && z6 <= 3.0,
            fmt("omega %.4f separable %.4f (z vs 6: %.2f) violations %d beyond 3 sigma %d", omega.mean, sep.mean, z6,
                violations, hard_violations)};
}

Verdict balanced_hierarchy()
{
    const EnsembleSpec spec{2, 2, 4, 2024};
    const char* names[] = {"pure:omega", "append:optimal", "avg-ue", "dep"};
    std::vector<ErrorReport> r;
    for (const char* s : names) r.push_back(estimate_average_error(s, spec, 5000));
    bool ok = true;
    std::string detail;
    for (std::size_t i = 0; i < r.size(); ++i) {
        detail += fmt("%s %.4f+-%.4f ", names[i], r[i].mean, r[i].stderr);
        if (i > 0) {
            const double gap = r[i].mean - r[i - 1].mean;
            ok = ok && gap > 3.0 * combined(r[i].stderr, r[i - 1].stderr);
        }
    }
    return {ok, detail};
}

Verdict crossover()
{
    cli::RunConfig cfg;
    cfg.command = "sweep";
    cfg.spec = {2, 2, 1, 2024};
    cfg.de = {1, 25};
    cfg.n_samples = 2000;
    const auto t0 = Clock::now();
    const auto rows = cli::sweep_rows(cfg);
    const double secs = seconds_since(t0);
    auto find = [&](std::size_t de, const std::string& s) -> const ErrorReport& {
        for (const auto& r : rows)
            if (r.spec.d_env == de && r.strategy == s) return r;
        throw std::runtime_error("missing sweep row");
    };
    const auto& p2 = find(2, "pure:omega");
    const auto& a2 = find(2, "append:optimal");
    const auto& p16 = find(16, "pure:omega");
    const auto& a16 = find(16, "append:optimal");
    const bool cross2 = p2.mean - a2.mean > 3.0 * combined(p2.stderr, a2.stderr);
    const bool cross16 = a16.mean - p16.mean > 3.0 * combined(p16.stderr, a16.stderr);
    bool dep_ok = true, ue_ok = true;
    for (const auto& r : rows) {
        if (r.strategy == "dep") dep_ok = dep_ok && std::abs(r.mean - *r.closed_form) <= 1e-9;
        if (r.strategy == "avg-ue") ue_ok = ue_ok && std::abs(r.mean - *r.closed_form) <= 3.0 * r.stderr + 1e-12;
    }
    return {rows.size() == 100 && cross2 && cross16 && dep_ok && ue_ok && secs < 600.0,
            fmt("d_E=2 pure %.4f app %.4f; d_E=16 pure %.4f app %.4f; dep %s avg-ue %s; runtime %.1fs", p2.mean, a2.mean,
                p16.mean, a16.mean, dep_ok ? "exact" : "off", ue_ok ? "within 3 sigma" : "off", secs)};
}

Verdict optimizer_oracles()
{
    const EnsembleSpec spec{2, 2, 2, 2024};
    double worst_app = 0.0, worst_pure = 0.0, worst_grid = -INFINITY;
    for (std::uint64_t i = 0; i < 100; ++i) {
        RandomStream rs(spec.seed, i);
        const auto s = sample_choi(spec, rs);
        RandomStream aux = rs.derive("acceptance");
        const Matrix rho = sample_induced_state(2, 2, aux);
        const auto w = sample_choi(spec, aux).purification;
        const Matrix q_app = kron(s.choi.matrix(), rho);

        const auto app = error_orbit_numeric(q_app, s.purification, {}, aux);
        const auto pure = error_orbit_numeric(w.projector(), s.purification, {}, aux);
        worst_app = std::max(worst_app, std::abs(app.error - error_append(s.choi, rho)));
        worst_pure = std::max(worst_pure, std::abs(pure.error - error_pure_output(s.choi, w)));
        worst_grid = std::max(worst_grid, app.error - orbit_bruteforce(q_app, s.purification, 24));
        worst_grid = std::max(worst_grid, pure.error - orbit_bruteforce(w.projector(), s.purification, 24));
    }
    return {worst_app <= 1e-6 && worst_pure <= 1e-6 && worst_grid <= 1e-12,
            fmt("max |numeric - closed form| append %.2g pure %.2g; max (numeric - grid) %.2g", worst_app, worst_pure,
                worst_grid)};
}

Verdict second_moment()
{
    const EnsembleSpec spec{2, 2, 2, 2024};
    const Matrix closed = second_moment_closed_form(spec);
    const Matrix mc = second_moment_operator(spec, 50000);
    const double rel = (mc - closed).norm() / closed.norm();
    return {rel < 0.03, fmt("relative Frobenius deviation %.4f", rel)};
}

Verdict marchenko_pastur()
{
    const double mu = mp_mu(1.0);
    const double mu_err = std::abs(mu - 8.0 / (3.0 * std::numbers::pi));
    const auto spec = cli::spectrum_histogram({4, 4, 16, 2024}, 200, 40);
    std::vector<double> ratios;
    for (const EnsembleSpec s : {EnsembleSpec{2, 2, 4, 2024}, EnsembleSpec{3, 3, 9, 2024}, EnsembleSpec{4, 4, 16, 2024}}) {
        const auto m = estimate_moments(s, 2000);
        ratios.push_back(m.tr_sqrt_sq.mean / static_cast<double>(s.d_in * s.d_in * s.d_out));
    }
    const double target = mu * mu;
    const bool increasing = ratios[0] < ratios[1] && ratios[1] < ratios[2] && ratios[2] <= target * 1.15;
    const bool approaching = std::abs(ratios[0] - target) > std::abs(ratios[1] - target) &&
                             std::abs(ratios[1] - target) > std::abs(ratios[2] - target);
    const double rel = std::abs(ratios[2] - target) / target;
    return {mu_err <= 1e-10 && spec.ks < 0.08 && increasing && rel <= 0.15,
            fmt("mu(1) error %.2g; KS %.4f; ratios %.4f %.4f %.4f vs mu^2 %.4f (%.1f%% off); increasing %s; "
                "distance to mu^2 shrinking %s",
                mu_err, spec.ks, ratios[0], ratios[1], ratios[2], target, 100.0 * rel, increasing ? "yes" : "no",
                approaching ? "yes" : "no")};
}

Verdict estimation_scaling()
{
    const auto t0 = Clock::now();
    const auto res = cli::tomo_scaling({1, 2, 2, 2024}, {64, 128, 256, 512, 1024, 2048, 4096}, 200);
    const double secs = seconds_since(t0);
    return {res.slope >= -1.3 && res.slope <= -0.7 && secs < 600.0,
            fmt("log-log slope %.3f runtime %.1fs", res.slope, secs)};
}

std::string csv_body(const std::string& csv)
{
    std::istringstream in(csv);
    std::string line, out;
    while (std::getline(in, line))
        if (!line.starts_with("#")) out += line + "\n";
    return out;
}

Verdict reproducibility()
{
    std::vector<std::string> mismatched;
    auto compare = [&](const std::string& name, const std::function<void(cli::RunConfig&, std::ostream&)>& cmd,
                       cli::RunConfig cfg) {
        std::string bodies[2];
        const std::size_t workers[2] = {1, 4};
        for (int i = 0; i < 2; ++i) {
            cfg.workers = workers[i];
            std::ostringstream os;
            cmd(cfg, os);
            bodies[i] = csv_body(os.str());
        }
        if (bodies[0] != bodies[1] || bodies[0].empty()) mismatched.push_back(name);
    };
    cli::RunConfig sweep;
    sweep.command = "sweep";
    sweep.spec = {2, 2, 1, 2024};
    sweep.de = {1, 6};
    sweep.n_samples = 300;
    sweep.strategies = {"pure:omega", "pure:random", "append:optimal", "dep", "avg-ue", "tomo:k=32"};
    compare("sweep", [](cli::RunConfig& c, std::ostream& os) { cli::cmd_sweep(c, os); }, sweep);

    cli::RunConfig spectrum;
    spectrum.command = "spectrum";
    spectrum.spec = {3, 3, 9, 2024};
    spectrum.de = {9, 9};
    spectrum.n_samples = 100;
    compare("spectrum", [](cli::RunConfig& c, std::ostream& os) { cli::cmd_spectrum(c, os); }, spectrum);

    cli::RunConfig tomo;
    tomo.command = "tomo-scaling";
    tomo.spec = {1, 2, 2, 2024};
    tomo.de = {2, 2};
    tomo.n_samples = 50;
    tomo.ks = {16, 64, 256};
    compare("tomo-scaling", [](cli::RunConfig& c, std::ostream& os) { cli::cmd_tomo_scaling(c, os); }, tomo);

    cli::RunConfig validate;
    validate.command = "validate";
    validate.spec = {2, 2, 3, 2024};
    validate.de = {3, 3};
    validate.n_samples = 500;
    compare("validate", [](cli::RunConfig& c, std::ostream& os) { cli::cmd_validate(c, os); }, validate);

    return {mismatched.empty(),
            mismatched.empty() ? "sweep, spectrum, tomo-scaling, validate bodies identical for workers 1 and 4"
                               : "differing bodies: " + cli::join(mismatched, ", ")};
}

} // namespace

int main()
{
    const std::vector<std::pair<const char*, std::function<Verdict()>>> criteria{
        {"C1 average purity at (2,2,4)", average_purity},
        {"C2 map-to-depolarizing exact", depolarizing_exact},
        {"C3 trivial-environment optima", trivial_environment},
        {"C4 pure-output ordering", pure_output_ordering},
        {"C5 hierarchy at d_E = d_I d_O", balanced_hierarchy},
        {"C6 append/pure crossover sweep", crossover},
        {"C7 orbit optimizer oracles", optimizer_oracles},
        {"C8 second moment", second_moment},
        {"C9 Marchenko-Pastur", marchenko_pastur},
        {"C10 estimation scaling", estimation_scaling},
        {"C11 worker-count reproducibility", reproducibility},
    };
    int failures = 0;
    for (const auto& [name, check] : criteria) {
        Verdict v{false, ""};
        try {
            v = check();
        } catch (const std::exception& e) {
            v = {false, std::string("exception: ") + e.what()};
        }
        std::printf("%s %s: %s\n", v.passed ? "PASS" : "FAIL", name, v.detail.c_str());
        std::fflush(stdout);
        failures += v.passed ? 0 : 1;
    }
    std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failures, criteria.size());
    return failures == 0 ? 0 : 1;
}
