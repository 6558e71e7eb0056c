#pragma once

// Purification error of a machine output Q against the closest point of the
// purification orbit {(1 (x) U_E)|V><V|(1 (x) U_E^*)}, in squared
// Hilbert-Schmidt distance, plus Monte Carlo estimators over the ensemble.
//
//   min_U ||Q - V_U||_2^2 = tr(Q^2) + d_I^2 - 2 max_U <V_U|Q|V_U>
//
// Closed forms exist for pure outputs (Uhlmann) and appended environments
// (von Neumann trace inequality); everything else goes through the
// Riemannian optimizer, with a grid oracle for d_E <= 2.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "purifylab/channels.hpp"
#include "purifylab/ensembles.hpp"
#include "purifylab/parallel.hpp"
#include "purifylab/strategies.hpp"
#include "purifylab/theory.hpp"

namespace purifylab {

// ---------------------------------------------------------------------------
// Per-sample closed forms

/// 2 d_I^2 - 2 ||sqrt(C) sqrt(tr_E |W><W|)||_1^2.
inline double error_pure_output(const ChoiOperator& c, const PurificationVector& w)
{
    if (w.d_in() != c.d_in() || w.d_out() != c.d_out())
        throw Error(ErrorKind::InvalidDims, "pure output has mismatched (d_I, d_O)");
    const double di = static_cast<double>(c.d_in());
    const double overlap = trace_norm(psd_sqrt(c.matrix()) * psd_sqrt(w.marginal()));
    return std::clamp(2.0 * di * di - 2.0 * overlap * overlap, 0.0, 2.0 * di * di);
}

/// Exact orbit minimum for Q = C (x) rho_E:
/// d_I^2 + tr(C^2) tr(rho^2) - 2 sum_i (c_i)^2 lambda_i, both spectra descending.
inline double error_append(const ChoiOperator& c, const Matrix& rho_env)
{
    if (rho_env.rows() != rho_env.cols() || rho_env.rows() == 0)
        throw Error(ErrorKind::InvalidDims, "environment state must be square");
    const RealVector cs = c.eigenvalues();
    const RealVector lam = psd_eigvals(rho_env);
    const double di = static_cast<double>(c.d_in());
    double overlap = 0.0;
    for (Eigen::Index i = 0; i < std::min(cs.size(), lam.size()); ++i) overlap += cs(i) * cs(i) * lam(i);
    const double value = di * di + c.purity() * rho_env.squaredNorm() - 2.0 * overlap;
    return std::max(0.0, value);
}

/// d_I^2 - d_I / (d_O d_E), the same for every C.
inline double error_map_to_depolarizing(const ChoiOperator& c, std::size_t d_env)
{
    const double di = static_cast<double>(c.d_in());
    return di * di - di / static_cast<double>(c.d_out() * d_env);
}

// ---------------------------------------------------------------------------
// Orbit optimization

struct OrbitOptOptions {
    std::size_t restarts = 20;
    std::size_t max_iters = 500;
    double rel_tol = 1e-9;
    double initial_step = 1.0;
    double armijo = 1e-4;
    double shrink = 0.5;
    bool record_history = false;
};

struct OrbitResult {
    double error = 0.0;
    double overlap = 0.0;
    bool converged = false;
    Matrix best_unitary;
    /// Error after each accepted iteration, per start (identity first).
    std::vector<std::vector<double>> history;
    std::vector<double> start_errors;
};

namespace detail {

/// Embeds the environment factor of an operator on (D_AB x e_from) into e_to >= e_from.
inline Matrix pad_env_operator(const Matrix& q, std::size_t d_ab, std::size_t e_from, std::size_t e_to)
{
    if (e_to == e_from) return q;
    const auto n = static_cast<Eigen::Index>(d_ab * e_to);
    Matrix out = Matrix::Zero(n, n);
    const auto ef = static_cast<Eigen::Index>(e_from);
    const auto et = static_cast<Eigen::Index>(e_to);
    for (Eigen::Index a = 0; a < static_cast<Eigen::Index>(d_ab); ++a)
        for (Eigen::Index b = 0; b < static_cast<Eigen::Index>(d_ab); ++b)
            out.block(a * et, b * et, ef, ef) = q.block(a * ef, b * ef, ef, ef);
    return out;
}

/// Common-environment view of a (Q, V) pair.
struct OrbitProblem {
    Matrix q;
    Matrix v_mat;  // D_AB x e, |V> row-major
    std::size_t d_ab;
    std::size_t env;
    double q_purity;
    double d_in_sq;

    double overlap(const Matrix& x) const
    {
        const Vector y = vec_rowmajor(v_mat * x);
        return (y.adjoint() * q * y)(0, 0).real();
    }

    /// Euclidean gradient of the overlap with respect to conj(X).
    Matrix gradient(const Matrix& x) const
    {
        const Vector y = vec_rowmajor(v_mat * x);
        const Vector qy = q * y;
        return v_mat.adjoint() * unvec_rowmajor(qy, static_cast<Eigen::Index>(d_ab), static_cast<Eigen::Index>(env));
    }

    double error_from_overlap(double f) const { return q_purity + d_in_sq - 2.0 * f; }
};

inline OrbitProblem make_orbit_problem(const Matrix& q_out, const PurificationVector& v)
{
    const std::size_t d_ab = v.d_in() * v.d_out();
    if (q_out.rows() != q_out.cols() || q_out.rows() % static_cast<Eigen::Index>(d_ab) != 0)
        throw Error(ErrorKind::InvalidDims, "machine output does not act on A (x) B (x) E");
    if (!is_hermitian(q_out, 1e-10)) throw Error(ErrorKind::NotHermitian, "machine output must be Hermitian");
    const auto q_env = static_cast<std::size_t>(q_out.rows()) / d_ab;
    const std::size_t env = std::max(q_env, v.d_env());
    OrbitProblem p;
    p.q = pad_env_operator(q_out, d_ab, q_env, env);
    p.v_mat = v.padded(env).as_matrix();
    p.d_ab = d_ab;
    p.env = env;
    p.q_purity = q_out.squaredNorm();
    p.d_in_sq = static_cast<double>(v.d_in() * v.d_in());
    return p;
}

/// X skew(X^* G): projection onto the tangent space of U(e) at X.
inline Matrix tangent_projection(const Matrix& x, const Matrix& g)
{
    const Matrix xg = x.adjoint() * g;
    return x * (0.5 * (xg - xg.adjoint()));
}

} // namespace detail

/// Best-of-restarts Riemannian gradient ascent of the orbit overlap with a
/// polar retraction, Barzilai-Borwein trial steps and Armijo backtracking. Starts: identity, then
/// `restarts` Haar-random unitaries drawn from `rs`.
inline OrbitResult error_orbit_numeric(const Matrix& q_out, const PurificationVector& v, const OrbitOptOptions& opts,
                                       RandomStream& rs)
{
    if (opts.restarts < 1) throw Error(ErrorKind::DomainError, "need at least one restart");
    const auto prob = detail::make_orbit_problem(q_out, v);
    const auto e = static_cast<Eigen::Index>(prob.env);
    const double scale = 1.0 + std::abs(prob.d_in_sq);
    const double grad_tol = 1e-3 * std::sqrt(opts.rel_tol) * scale;

    OrbitResult result;
    result.overlap = -std::numeric_limits<double>::infinity();
    bool all_converged = true;

    for (std::size_t start = 0; start <= opts.restarts; ++start) {
        Matrix x = start == 0 ? Matrix(Matrix::Identity(e, e)) : sample_haar_unitary(prob.env, rs);
        double f = prob.overlap(x);
        result.start_errors.push_back(prob.error_from_overlap(f));
        std::vector<double> trace;
        if (opts.record_history) trace.push_back(prob.error_from_overlap(f));

        double step = opts.initial_step;
        bool converged = false;
        Matrix xi = detail::tangent_projection(x, prob.gradient(x));
        for (std::size_t it = 0; it < opts.max_iters; ++it) {
            const double slope = 2.0 * xi.squaredNorm();
            if (std::sqrt(0.5 * slope) <= grad_tol) {
                converged = true;
                break;
            }
            bool accepted = false;
            double f_new = f;
            Matrix x_new;
            for (int bt = 0; bt < 60; ++bt) {
                x_new = polar_factor(x + step * xi);
                f_new = prob.overlap(x_new);
                if (f_new >= f + opts.armijo * step * slope) {
                    accepted = true;
                    break;
                }
                step *= opts.shrink;
            }
            if (!accepted) {
                // No ascent left at machine precision.
                converged = true;
                break;
            }
            const double gain = f_new - f;
            Matrix xi_new = detail::tangent_projection(x_new, prob.gradient(x_new));
            // Barzilai-Borwein trial step for the next line search.
            const Matrix s_k = x_new - x;
            const double curv = -(s_k.adjoint() * (xi_new - detail::tangent_projection(x_new, xi))).trace().real();
            step = curv > 0.0 ? std::clamp(s_k.squaredNorm() / curv, 1e-6 * opts.initial_step, 1e6 * opts.initial_step)
                              : std::min(step * 2.0, 64.0 * opts.initial_step);
            x = std::move(x_new);
            xi = std::move(xi_new);
            f = f_new;
            if (opts.record_history) trace.push_back(prob.error_from_overlap(f));
            if (gain <= 1e-16 * scale) break;  // stalled short of the gradient test
        }
        all_converged = all_converged && converged;
        if (opts.record_history) result.history.push_back(std::move(trace));
        if (f > result.overlap) {
            result.overlap = f;
            result.best_unitary = x.transpose();
        }
    }
    result.error = std::max(0.0, prob.error_from_overlap(result.overlap));
    result.converged = all_converged;
    return result;
}

/// Deterministic grid over SU(2) / {+1, -1}: theta in [0, pi/2] with endpoints,
/// psi1 and psi2 in [0, 2 pi), `resolution` points each, with
/// U = [[cos(theta) e^{i(psi1+psi2)/2}, sin(theta) e^{i(psi1-psi2)/2}], ...].
/// The overlap is invariant under U -> -U. The minimum found upper-bounds the
/// orbit minimum.
inline double orbit_bruteforce(const Matrix& q_out, const PurificationVector& v, std::size_t resolution)
{
    if (resolution < 2) throw Error(ErrorKind::DomainError, "grid resolution must be at least 2");
    const auto prob = detail::make_orbit_problem(q_out, v);
    if (prob.env > 2) throw Error(ErrorKind::TooLarge, "grid oracle only covers d_E <= 2");
    if (prob.env == 1) return std::max(0.0, prob.error_from_overlap(prob.overlap(Matrix::Identity(1, 1))));

    // overlap(X) = x^* A x with x = vec_rowmajor(X), since vec(M X) is linear in x.
    const auto d_ab = static_cast<Eigen::Index>(prob.d_ab);
    Matrix lift = Matrix::Zero(2 * d_ab, 4);
    for (Eigen::Index a = 0; a < d_ab; ++a)
        for (Eigen::Index k = 0; k < 2; ++k)
            for (Eigen::Index j = 0; j < 2; ++j) lift(a * 2 + j, k * 2 + j) = prob.v_mat(a, k);
    const Matrix form = lift.adjoint() * prob.q * lift;

    const double pi = std::numbers::pi;
    const double res = static_cast<double>(resolution);
    double best = -std::numeric_limits<double>::infinity();
    Vector x(4);
    for (std::size_t i = 0; i < resolution; ++i) {
        const double theta = 0.5 * pi * static_cast<double>(i) / (res - 1.0);
        const double ct = std::cos(theta), st = std::sin(theta);
        for (std::size_t j = 0; j < resolution; ++j) {
            const double psi1 = 2.0 * pi * static_cast<double>(j) / res;
            for (std::size_t l = 0; l < resolution; ++l) {
                const double psi2 = 2.0 * pi * static_cast<double>(l) / res;
                const Complex a = std::polar(ct, 0.5 * (psi1 + psi2));
                const Complex b = std::polar(st, 0.5 * (psi1 - psi2));
                // X = U^T for U = [[a, b], [-conj(b), conj(a)]].
                x << a, -std::conj(b), b, std::conj(a);
                best = std::max(best, x.dot(form * x).real());
            }
        }
    }
    return std::max(0.0, prob.error_from_overlap(best));
}

// ---------------------------------------------------------------------------
// Monte Carlo

struct Estimate {
    double mean = 0.0;
    double stderr = 0.0;
};

/// Welford mean and standard error in index order; variance below 1e-20 reports stderr 0.
inline Estimate summarize(std::span<const double> xs)
{
    double mean = 0.0, m2 = 0.0;
    std::size_t n = 0;
    for (double x : xs) {
        ++n;
        const double delta = x - mean;
        mean += delta / static_cast<double>(n);
        m2 += delta * (x - mean);
    }
    if (n < 2) return {mean, 0.0};
    const double var = m2 / static_cast<double>(n - 1);
    return {mean, var < 1e-20 ? 0.0 : std::sqrt(var / static_cast<double>(n))};
}

struct ErrorReport {
    std::string strategy;
    EnsembleSpec spec;
    std::size_t n_samples = 0;
    double mean = 0.0;
    double stderr = 0.0;
    std::optional<double> closed_form;
    std::vector<double> per_sample;

    /// True unless a closed form exists and the mean sits more than 4 stderr away.
    bool consistent() const
    {
        if (!closed_form) return true;
        return std::abs(mean - *closed_form) <= 4.0 * stderr + 1e-9 * std::max(1.0, std::abs(*closed_form));
    }
};

inline nlohmann::json to_json(const ErrorReport& r)
{
    nlohmann::json j = {{"strategy", r.strategy},
                        {"d_I", r.spec.d_in},
                        {"d_O", r.spec.d_out},
                        {"d_E", r.spec.d_env},
                        {"n", r.n_samples},
                        {"seed", r.spec.seed},
                        {"mean", r.mean},
                        {"stderr", r.stderr}};
    j["closed_form"] = r.closed_form ? nlohmann::json(*r.closed_form) : nlohmann::json(nullptr);
    return j;
}

/// Per-sample Monte Carlo moments of the Choi spectrum.
struct MomentEstimates {
    std::size_t n_samples = 0;
    Estimate purity;                  // E tr(C^2)
    Estimate tr_sqrt_sq;              // E (tr sqrt C)^2
    Estimate cmax_sq;                 // E c_max^2
    std::vector<Estimate> ordered_sq; // E (c_i)^2, i < min(d_E, d_I d_O)

    std::vector<double> weights() const
    {
        std::vector<double> w;
        for (const auto& e : ordered_sq) w.push_back(e.mean);
        return w;
    }
};

inline MomentEstimates estimate_moments(const EnsembleSpec& spec, std::size_t n, std::size_t workers = 1)
{
    spec.validate();
    if (n < 2) throw Error(ErrorKind::DomainError, "need at least two samples");
    const std::size_t r = spec.generic_rank();
    const auto spectra = parallel_map<RealVector>(n, workers, [&](std::size_t i) {
        RandomStream rs(spec.seed, i);
        return sample_choi(spec, rs).choi.eigenvalues();
    });
    std::vector<double> purity(n), tr_sqrt(n), cmax(n);
    std::vector<std::vector<double>> ordered(r, std::vector<double>(n));
    for (std::size_t i = 0; i < n; ++i) {
        const RealVector& c = spectra[i];
        purity[i] = c.squaredNorm();
        const double s = c.cwiseSqrt().sum();
        tr_sqrt[i] = s * s;
        cmax[i] = c(0) * c(0);
        for (std::size_t k = 0; k < r; ++k) ordered[k][i] = c(static_cast<Eigen::Index>(k)) * c(static_cast<Eigen::Index>(k));
    }
    MomentEstimates out;
    out.n_samples = n;
    out.purity = summarize(purity);
    out.tr_sqrt_sq = summarize(tr_sqrt);
    out.cmax_sq = summarize(cmax);
    for (const auto& col : ordered) out.ordered_sq.push_back(summarize(col));
    return out;
}

inline constexpr std::string_view kPilotTag = "append:optimal/pilot";

/// Instantiates a parsed machine for an ensemble. Fixed random outputs draw from
/// streams derived from the ensemble seed; append:optimal estimates its weights
/// on an independent pilot run of `pilot_n` samples.
inline Strategy resolve_strategy(const StrategyRequest& req, const EnsembleSpec& spec, std::size_t pilot_n,
                                 std::size_t workers = 1)
{
    using K = StrategyRequest::Kind;
    spec.validate();
    const RandomStream base(spec.seed, 0);
    switch (req.kind) {
    case K::PureOmega:
        return {req.label, PureOutput{max_entangled_purification(spec.d_in, spec.d_out)}};
    case K::PureSeparable: {
        if (spec.d_out < spec.d_in)
            throw Error(ErrorKind::InvalidDims, "separable pure output needs an isometric channel, d_O >= d_I");
        RandomStream rs = base.derive("pure:separable");
        const EnsembleSpec iso{spec.d_in, spec.d_out, 1, spec.seed};
        const auto upsilon = sample_choi(iso, rs).purification;
        Vector psi = Vector::Zero(static_cast<Eigen::Index>(spec.d_env));
        psi(0) = 1.0;
        return {req.label, PureOutput{separable_purification(upsilon, psi)}};
    }
    case K::PureRandom: {
        RandomStream rs = base.derive("pure:random");
        return {req.label, PureOutput{sample_choi(spec, rs).purification}};
    }
    case K::AppendMaxMixed:
        return {req.label, AppendMaxMixed{spec.d_env}};
    case K::AppendPure: {
        const auto n = static_cast<Eigen::Index>(spec.d_env);
        Matrix rho = Matrix::Zero(n, n);
        rho(0, 0) = 1.0;
        return {req.label, AppendState{rho}};
    }
    case K::AppendOptimal: {
        EnsembleSpec pilot = spec;
        pilot.seed = base.derive(kPilotTag).seed();
        const auto moments = estimate_moments(pilot, std::max<std::size_t>(pilot_n, 2), workers);
        return {req.label, AppendOptimal{moments.weights(), spec.d_env}};
    }
    case K::Dep:
        return {req.label, MapToDepolarizing{spec.d_in, spec.d_out, spec.d_env}};
    case K::AvgUE:
        return {req.label, AverageOverUE{spec.d_env}};
    case K::Tomo:
        return {req.label, Estimation{req.copies}};
    }
    throw Error(ErrorKind::ParseError, "unhandled strategy kind");
}

/// Exact ensemble value where one exists without Monte Carlo moments.
inline std::optional<double> closed_form_for(const StrategyRequest& req, const EnsembleSpec& spec)
{
    using K = StrategyRequest::Kind;
    switch (req.kind) {
    case K::Dep: return theory::eps_dep(spec);
    case K::AvgUE:
    case K::AppendMaxMixed: return theory::eps_avg_ue(spec);
    case K::PureSeparable: return theory::eps_pure_separable(spec);
    case K::PureOmega:
        if (spec.d_env == 1) return theory::eps_pure(spec, static_cast<double>(spec.d_in));
        return std::nullopt;
    case K::AppendOptimal:
    case K::AppendPure:
        if (spec.d_env == 1) return 0.0;
        return std::nullopt;
    default: return std::nullopt;
    }
}

/// Error of one machine on sample `index` of the ensemble, by the tightest route.
inline double sample_error(const Strategy& strategy, const EnsembleSpec& spec, std::uint64_t index)
{
    RandomStream rs(spec.seed, index);
    const auto sample = sample_choi(spec, rs);
    RandomStream machine_rs = rs.derive("machine");
    const ChoiOperator& c = sample.choi;
    return std::visit(
        [&](const auto& s) -> double {
            using T = std::decay_t<decltype(s)>;
            if constexpr (std::is_same_v<T, PureOutput>) {
                return error_pure_output(c, s.w);
            } else if constexpr (std::is_same_v<T, AppendState>) {
                return error_append(c, s.rho_env);
            } else if constexpr (std::is_same_v<T, AppendMaxMixed>) {
                const auto n = static_cast<Eigen::Index>(s.d_env);
                return error_append(c, Matrix::Identity(n, n) / static_cast<double>(n));
            } else if constexpr (std::is_same_v<T, AppendOptimal>) {
                return error_append(c, env_state_of(s));
            } else if constexpr (std::is_same_v<T, MapToDepolarizing>) {
                return error_map_to_depolarizing(c, s.d_env);
            } else if constexpr (std::is_same_v<T, AverageOverUE>) {
                // ||C (x) 1/d_E - V_U||^2 at one Haar-random U_E.
                const auto u = sample_haar_unitary(s.d_env, machine_rs);
                const auto vu = apply_env_unitary(sample.purification, u);
                const Matrix q = apply(strategy, c, machine_rs);
                const double di = static_cast<double>(c.d_in());
                const double overlap = (vu.vector().adjoint() * q * vu.vector())(0, 0).real();
                return std::max(0.0, q.squaredNorm() + di * di - 2.0 * overlap);
            } else {
                return error_pure_output(c, tomography_estimate(c, s.copies, machine_rs));
            }
        },
        strategy.kind);
}

inline ErrorReport estimate_average_error(const Strategy& strategy, const EnsembleSpec& spec, std::size_t n,
                                          std::optional<double> closed_form = std::nullopt, std::size_t workers = 1,
                                          bool keep_per_sample = false)
{
    spec.validate();
    if (n < 2) throw Error(ErrorKind::DomainError, "need at least two samples");
    auto errors = parallel_map<double>(n, workers, [&](std::size_t i) { return sample_error(strategy, spec, i); });
    const auto est = summarize(errors);
    ErrorReport report;
    report.strategy = strategy.label;
    report.spec = spec;
    report.n_samples = n;
    report.mean = est.mean;
    report.stderr = est.stderr;
    report.closed_form = closed_form;
    if (keep_per_sample) report.per_sample = std::move(errors);
    return report;
}

/// Parses, instantiates and evaluates a machine; append:optimal pilots on n samples.
inline ErrorReport estimate_average_error(std::string_view strategy, const EnsembleSpec& spec, std::size_t n,
                                          std::size_t workers = 1, bool keep_per_sample = false)
{
    const auto req = parse_strategy(strategy);
    return estimate_average_error(resolve_strategy(req, spec, n, workers), spec, n, closed_form_for(req, spec),
                                  workers, keep_per_sample);
}

// ---------------------------------------------------------------------------
// Second moment of the purification vector

/// Unitary P with P|k_0 ... k_{n-1}> = |k_{perm[0]} ... k_{perm[n-1]}>.
inline Matrix subsystem_permutation(const SubsystemDims& dims, std::span<const std::size_t> perm)
{
    if (perm.size() != dims.size()) throw Error(ErrorKind::InvalidDims, "permutation length mismatch");
    const auto side = static_cast<Eigen::Index>(dims.total());
    const auto strides = purifylab::detail::strides_of(dims);
    Matrix p = Matrix::Zero(side, side);
    std::vector<std::size_t> digits(dims.size());
    for (Eigen::Index idx = 0; idx < side; ++idx) {
        auto rem = static_cast<std::size_t>(idx);
        for (std::size_t k = 0; k < dims.size(); ++k) {
            digits[k] = rem / strides[k];
            rem %= strides[k];
        }
        std::size_t target = 0;
        for (std::size_t k = 0; k < dims.size(); ++k) target += digits[perm[k]] * strides[k];
        p(static_cast<Eigen::Index>(target), idx) = 1.0;
    }
    return p;
}

inline constexpr std::size_t kSecondMomentMaxSide = 4096;

/// Haar average of |V><V| (x) |V><V| on (I O E) (x) (I' O' E'):
/// (1 + F_II' F_XX') / (D^2 - 1) - (F_II' + F_XX') / (D (D^2 - 1)), D = d_O d_E.
inline Matrix second_moment_closed_form(const EnsembleSpec& spec)
{
    spec.validate();
    const std::size_t x = spec.d_out * spec.d_env;
    const std::size_t side = spec.full_dim() * spec.full_dim();
    if (side > kSecondMomentMaxSide) throw Error(ErrorKind::TooLarge, "second moment exceeds dense size cap");
    const SubsystemDims dims{spec.d_in, x, spec.d_in, x};
    const std::size_t swap_in[] = {2, 1, 0, 3};
    const std::size_t swap_out[] = {0, 3, 2, 1};
    const Matrix f_in = subsystem_permutation(dims, swap_in);
    const Matrix f_out = subsystem_permutation(dims, swap_out);
    const Matrix f_all = flip_operator(spec.full_dim());
    const auto n = static_cast<Eigen::Index>(side);
    const double d = static_cast<double>(x);
    return (Matrix::Identity(n, n) + f_all) / (d * d - 1.0) - (f_in + f_out) / (d * (d * d - 1.0));
}

/// E[C (x) C] on (I O) (x) (I' O'), the environment-traced second moment.
inline Matrix choi_second_moment_closed_form(const EnsembleSpec& spec)
{
    spec.validate();
    const SubsystemDims dims{spec.d_in, spec.d_out, spec.d_in, spec.d_out};
    const std::size_t swap_in[] = {2, 1, 0, 3};
    const std::size_t swap_out[] = {0, 3, 2, 1};
    const Matrix f_in = subsystem_permutation(dims, swap_in);
    const Matrix f_out = subsystem_permutation(dims, swap_out);
    const auto n = static_cast<Eigen::Index>(dims.total());
    const Matrix id = Matrix::Identity(n, n);
    const double d = static_cast<double>(spec.d_out * spec.d_env);
    const double de = static_cast<double>(spec.d_env);
    return (de * de * id + de * f_in * f_out) / (d * d - 1.0) - (de * de * f_in + de * f_out) / (d * (d * d - 1.0));
}

/// Monte Carlo average of |V><V| (x) |V><V| over n Haar-Stinespring draws.
/// Summed in fixed blocks of 256 samples so the result is worker-independent.
inline Matrix second_moment_operator(const EnsembleSpec& spec, std::size_t n, std::size_t workers = 1)
{
    spec.validate();
    const std::size_t side = spec.full_dim() * spec.full_dim();
    if (side > kSecondMomentMaxSide) throw Error(ErrorKind::TooLarge, "second moment exceeds dense size cap");
    if (n < 2) throw Error(ErrorKind::DomainError, "need at least two samples");
    constexpr std::size_t block = 256;
    const std::size_t blocks = (n + block - 1) / block;
    const auto s = static_cast<Eigen::Index>(side);
    const auto partial = parallel_map<Matrix>(blocks, workers, [&](std::size_t b) {
        Matrix acc = Matrix::Zero(s, s);
        for (std::size_t i = b * block; i < std::min(n, (b + 1) * block); ++i) {
            RandomStream rs(spec.seed, i);
            const auto sample = sample_choi(spec, rs);
            const Vector vv = kron(sample.purification.vector(), sample.purification.vector());
            acc.noalias() += vv * vv.adjoint();
        }
        return acc;
    });
    Matrix total = Matrix::Zero(s, s);
    for (const auto& p : partial) total += p;
    return total / static_cast<double>(n);
}

} // namespace purifylab
