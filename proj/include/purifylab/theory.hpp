#pragma once

// Closed-form purification errors and bounds as functions of (d_I, d_O, d_E).
// Quantities that have no closed form (moments of the ordered spectrum,
// E(tr sqrt C)^2, E c_max^2) are always taken as Monte Carlo inputs.

#include <algorithm>
#include <cmath>
#include <optional>
#include <span>
#include <string>
#include <utility>

#include <nlohmann/json.hpp>

#include "purifylab/ensembles.hpp"

namespace purifylab::theory {

struct ClosedForm {
    double value = 0.0;
    std::string formula_id;
    nlohmann::json inputs;
};

inline void to_json(nlohmann::json& j, const ClosedForm& cf)
{
    j = {{"value", cf.value}, {"formula_id", cf.formula_id}, {"inputs", cf.inputs}};
}

namespace detail {
inline double sq(double x) { return x * x; }
inline nlohmann::json dims_json(const EnsembleSpec& s)
{
    return {{"d_I", s.d_in}, {"d_O", s.d_out}, {"d_E", s.d_env}};
}
} // namespace detail

/// E_C tr(C^2) over the Haar-Stinespring ensemble.
inline double avg_purity(const EnsembleSpec& s)
{
    const double di = static_cast<double>(s.d_in), d_o = static_cast<double>(s.d_out),
                 de = static_cast<double>(s.d_env);
    const double den = d_o * d_o * de * de - 1.0;
    if (den == 0.0) throw Error(ErrorKind::DomainError, "average purity undefined for d_O = d_E = 1");
    return (di * d_o * (de * de - 1.0) + di * di * de * (d_o * d_o - 1.0)) / den;
}

inline double eps_dep(const EnsembleSpec& s)
{
    const double di = static_cast<double>(s.d_in);
    return di * di - di / static_cast<double>(s.d_out * s.d_env);
}

/// Unitary-averaged upper bound d_I^2 - E tr(C^2) / d_E.
inline double eps_avg_ue(const EnsembleSpec& s)
{
    const double di = static_cast<double>(s.d_in);
    return di * di - avg_purity(s) / static_cast<double>(s.d_env);
}

/// Optimal pure output from a Monte Carlo estimate of E (tr sqrt C)^2.
inline double eps_pure(const EnsembleSpec& s, double moment_tr_sqrt_sq)
{
    const double di = static_cast<double>(s.d_in);
    return 2.0 * di * di - 2.0 / static_cast<double>(s.d_out) * moment_tr_sqrt_sq;
}

/// Error of any separable output |Upsilon>|psi>, independent of d_E.
inline double eps_pure_separable(const EnsembleSpec& s)
{
    const double di = static_cast<double>(s.d_in);
    return 2.0 * (di * di - di / static_cast<double>(s.d_out));
}

/// Optimal append-environment error from ordered-eigenvalue weights w_i = E (c_i)^2.
inline double eps_app(const EnsembleSpec& s, std::span<const double> weights)
{
    const double di = static_cast<double>(s.d_in);
    double sum_sq = 0.0;
    for (double w : weights) sum_sq += w * w;
    return di * di - sum_sq / avg_purity(s);
}

struct Bounds {
    double lower;
    double upper;
};

inline Bounds eps_app_bounds(const EnsembleSpec& s)
{
    const double di = static_cast<double>(s.d_in);
    const double p = avg_purity(s);
    return {di * di - p, di * di - p / static_cast<double>(s.d_env)};
}

/// Append a pure ancilla: d_I^2 + E tr(C^2) - 2 E c_max^2.
inline double eps_app_pure_ancilla(const EnsembleSpec& s, double moment_cmax_sq)
{
    const double di = static_cast<double>(s.d_in);
    return di * di + avg_purity(s) - 2.0 * moment_cmax_sq;
}

/// High-probability bound of the k-copy estimation strategy.
inline double eps_tomo_bound(const EnsembleSpec& s, double k, double delta, double kappa)
{
    if (!(delta > 0.0 && delta < 1.0)) throw Error(ErrorKind::DomainError, "delta must lie in (0, 1)");
    if (!(kappa > 0.0)) throw Error(ErrorKind::DomainError, "kappa must be positive");
    if (!(k > 0.0)) throw Error(ErrorKind::DomainError, "copy budget must be positive");
    const double di = static_cast<double>(s.d_in);
    const double r = static_cast<double>(s.generic_rank());
    const double rate = std::isinf(k) ? 0.0 : kappa * (di * static_cast<double>(s.d_out) * r + std::log(1.0 / delta)) / k;
    return 2.0 * di * di * (std::min(1.0, rate) + delta);
}

/// E(d_I, d_O): average purity at d_E = d_I d_O.
inline double balanced_purity(std::size_t d_in, std::size_t d_out)
{
    const double di = static_cast<double>(d_in), d_o = static_cast<double>(d_out);
    return (di * d_o * (di * di * d_o * d_o - 1.0) + di * di * di * d_o * (d_o * d_o - 1.0)) /
           (d_o * d_o * d_o * d_o * di * di - 1.0);
}

/// Large-d limit diagnostic: E(tr sqrt C)^2 / (d_I^2 d_O mu(c)^2), c = d_I d_O / d_E <= 1.
inline double tr_sqrt_asymptotic_ratio(const EnsembleSpec& s, double moment_tr_sqrt_sq)
{
    const double c = static_cast<double>(s.d_in * s.d_out) / static_cast<double>(s.d_env);
    const double mu = mp_mu(c);
    return moment_tr_sqrt_sq / (static_cast<double>(s.d_in * s.d_in * s.d_out) * mu * mu);
}

struct RegimeCell {
    std::optional<double> value;
    std::optional<Bounds> range;
    std::string note;
};

struct RegimeRow {
    std::string strategy;
    RegimeCell trivial_env;    // d_E = 1
    RegimeCell balanced_env;   // d_E = d_I d_O
    RegimeCell infinite_env;   // d_E -> infinity
};

/// Errors of every strategy in the three environment regimes.
inline std::vector<RegimeRow> table2_regime_values(std::size_t d_in, std::size_t d_out)
{
    const double di = static_cast<double>(d_in), d_o = static_cast<double>(d_out);
    const double e = balanced_purity(d_in, d_out);
    const double gen_upper = di * di - e / (di * d_o);
    std::vector<RegimeRow> rows;
    rows.push_back({"pure", {2.0 * (di * di - di / d_o), {}, ""}, {{}, {}, "requires MC moment"}, {0.0, {}, ""}});
    rows.push_back({"append", {0.0, {}, ""}, {{}, Bounds{di * di - e, gen_upper}, ""}, {di * di - 1.0 / (d_o * d_o), {}, ""}});
    rows.push_back({"dep", {di * di - di / d_o, {}, ""}, {di * di - 1.0 / (d_o * d_o), {}, ""}, {di * di, {}, ""}});
    rows.push_back({"avg-ue", {0.0, {}, ""}, {gen_upper, {}, ""}, {di * di, {}, ""}});
    return rows;
}

inline ClosedForm closed_form_avg_purity(const EnsembleSpec& s)
{
    return {avg_purity(s), "avg_purity", detail::dims_json(s)};
}

inline ClosedForm closed_form_dep(const EnsembleSpec& s)
{
    return {eps_dep(s), "eps_dep", detail::dims_json(s)};
}

inline ClosedForm closed_form_avg_ue(const EnsembleSpec& s)
{
    return {eps_avg_ue(s), "eps_avg_ue", detail::dims_json(s)};
}

inline ClosedForm closed_form_pure_separable(const EnsembleSpec& s)
{
    return {eps_pure_separable(s), "eps_pure_separable", detail::dims_json(s)};
}

} // namespace purifylab::theory
