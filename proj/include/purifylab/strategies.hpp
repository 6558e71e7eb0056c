#pragma once

// Purification machines. Each maps a Choi operator C to an operator Q(C) on
// A (x) B (x) E (the Choi operator of the machine's output channel).

#include <algorithm>
#include <charconv>
#include <cmath>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "purifylab/channels.hpp"
#include "purifylab/ensembles.hpp"
#include "purifylab/random.hpp"

namespace purifylab {

/// Always outputs the fixed pure Choi operator |W><W|.
struct PureOutput {
    PurificationVector w;
};

/// C (x) rho_E for a fixed environment state.
struct AppendState {
    Matrix rho_env;
};

struct AppendMaxMixed {
    std::size_t d_env;
};

/// Outputs 1 / (d_O d_E) regardless of C.
struct MapToDepolarizing {
    std::size_t d_in;
    std::size_t d_out;
    std::size_t d_env;
};

/// C (x) diag(lambda) with lambda the optimal spectrum for weights E (c_i)^2.
struct AppendOptimal {
    std::vector<double> weights;
    std::size_t d_env;
};

/// C (x) 1/d_E scored against a Haar-random point of the purification orbit
/// instead of the best one.
struct AverageOverUE {
    std::size_t d_env;
};

/// k-copy estimate-and-prepare.
struct Estimation {
    std::size_t copies;
};

using StrategyKind =
    std::variant<PureOutput, AppendState, AppendMaxMixed, MapToDepolarizing, AppendOptimal, AverageOverUE, Estimation>;

struct Strategy {
    std::string label;
    StrategyKind kind;
};

/// Probability vector lambda_i = w_i / purity; weights must be non-negative,
/// non-increasing and sum to `purity` within `rel_tol`.
inline std::vector<double> optimal_append_spectrum(std::span<const double> weights, double purity,
                                                   double rel_tol = 1e-6)
{
    if (weights.empty()) throw Error(ErrorKind::InvalidWeights, "no weights");
    if (!(purity > 0.0)) throw Error(ErrorKind::InvalidWeights, "purity must be positive");
    double sum = 0.0;
    for (std::size_t i = 0; i < weights.size(); ++i) {
        if (weights[i] < 0.0) throw Error(ErrorKind::InvalidWeights, "negative weight");
        if (i > 0 && weights[i] > weights[i - 1] * (1.0 + 1e-12))
            throw Error(ErrorKind::InvalidWeights, "weights must be non-increasing");
        sum += weights[i];
    }
    if (std::abs(sum - purity) > rel_tol * purity)
        throw Error(ErrorKind::InvalidWeights, "weights do not sum to the average purity");
    std::vector<double> out(weights.size());
    std::transform(weights.begin(), weights.end(), out.begin(), [&](double w) { return w / purity; });
    return out;
}

/// diag(spectrum) on d_env, truncated or zero-padded; renormalized to unit trace.
inline Matrix diagonal_state(std::span<const double> spectrum, std::size_t d_env)
{
    const auto n = static_cast<Eigen::Index>(d_env);
    RealVector diag = RealVector::Zero(n);
    for (Eigen::Index i = 0; i < std::min<Eigen::Index>(n, static_cast<Eigen::Index>(spectrum.size())); ++i)
        diag(i) = spectrum[static_cast<std::size_t>(i)];
    const double total = diag.sum();
    if (!(total > 0.0)) throw Error(ErrorKind::InvalidWeights, "empty environment spectrum");
    return (diag / total).cast<Complex>().asDiagonal();
}

inline Matrix env_state_of(const AppendOptimal& s)
{
    double total = 0.0;
    for (double w : s.weights) total += w;
    return diagonal_state(optimal_append_spectrum(s.weights, total), s.d_env);
}

/// Pure-state tomography surrogate: one random purification of C, k
/// single-copy measurements in independent Haar-random bases, linear
/// inversion, PSD projection, top eigenvector rescaled to norm sqrt(d_I).
/// The estimate lives on an environment of dimension rank(C). Its marginal is
/// not constrained to be trace preserving.
inline PurificationVector tomography_estimate(const ChoiOperator& c, std::size_t k, RandomStream& rs)
{
    if (k == 0) throw Error(ErrorKind::DomainError, "copy budget must be at least 1");
    const std::size_t r = c.rank();
    const PurificationVector target = apply_env_unitary(stinespring_from_choi(c, r), sample_haar_unitary(r, rs));
    const Vector psi = target.vector() / std::sqrt(static_cast<double>(c.d_in()));
    const auto dim = static_cast<std::size_t>(psi.size());

    Matrix counts = Matrix::Zero(psi.size(), psi.size());
    for (std::size_t shot = 0; shot < k; ++shot) {
        const Matrix basis = sample_haar_unitary(dim, rs);
        const Vector amp = basis.adjoint() * psi;
        double u = rs.uniform();
        Eigen::Index outcome = amp.size() - 1;
        for (Eigen::Index j = 0; j < amp.size(); ++j) {
            u -= std::norm(amp(j));
            if (u <= 0.0) {
                outcome = j;
                break;
            }
        }
        counts += basis.col(outcome) * basis.col(outcome).adjoint();
    }
    const double kd = static_cast<double>(k);
    const double dd = static_cast<double>(dim);
    Matrix estimator = ((dd + 1.0) * counts - kd * Matrix::Identity(psi.size(), psi.size())) / kd;
    estimator = 0.5 * (estimator + estimator.adjoint());

    const auto eig = herm_eig(estimator);
    const RealVector clipped = eig.values.cwiseMax(0.0);
    const Matrix projected = eig.vectors * clipped.cast<Complex>().asDiagonal() * eig.vectors.adjoint();
    Vector top = herm_eig(0.5 * (projected + projected.adjoint())).vectors.col(0);

    // Global phase: largest-magnitude entry real and positive.
    Eigen::Index pivot = 0;
    top.cwiseAbs().maxCoeff(&pivot);
    top *= std::conj(top(pivot)) / std::abs(top(pivot));
    top *= std::sqrt(static_cast<double>(c.d_in())) / top.norm();
    return PurificationVector::from_vector(c.d_in(), c.d_out(), r, std::move(top));
}

/// Q(C) for the given machine.
inline Matrix apply(const Strategy& strategy, const ChoiOperator& c, RandomStream& rs)
{
    return std::visit(
        [&](const auto& s) -> Matrix {
            using T = std::decay_t<decltype(s)>;
            if constexpr (std::is_same_v<T, PureOutput>) {
                if (s.w.d_in() != c.d_in() || s.w.d_out() != c.d_out())
                    throw Error(ErrorKind::InvalidDims, "pure output has mismatched (d_I, d_O)");
                return s.w.projector();
            } else if constexpr (std::is_same_v<T, AppendState>) {
                return kron(c.matrix(), s.rho_env);
            } else if constexpr (std::is_same_v<T, AppendMaxMixed> || std::is_same_v<T, AverageOverUE>) {
                const auto n = static_cast<Eigen::Index>(s.d_env);
                return kron(c.matrix(), Matrix(Matrix::Identity(n, n) / static_cast<double>(n)));
            } else if constexpr (std::is_same_v<T, MapToDepolarizing>) {
                if (s.d_in != c.d_in() || s.d_out != c.d_out())
                    throw Error(ErrorKind::InvalidDims, "depolarizing output has mismatched (d_I, d_O)");
                const auto n = static_cast<Eigen::Index>(s.d_in * s.d_out * s.d_env);
                return Matrix::Identity(n, n) / static_cast<double>(s.d_out * s.d_env);
            } else if constexpr (std::is_same_v<T, AppendOptimal>) {
                return kron(c.matrix(), env_state_of(s));
            } else {
                return tomography_estimate(c, s.copies, rs).projector();
            }
        },
        strategy.kind);
}

/// Parsed but not yet instantiated machine description.
struct StrategyRequest {
    enum class Kind { PureOmega, PureSeparable, PureRandom, AppendMaxMixed, AppendOptimal, AppendPure, Dep, AvgUE, Tomo };
    Kind kind;
    std::size_t copies = 0;
    std::string label;
};

/// Parses `pure:omega`, `pure:separable`, `pure:random`, `append:maxmixed`,
/// `append:optimal`, `append:pure`, `dep`, `avg-ue`, `tomo:k=<int>`.
inline StrategyRequest parse_strategy(std::string_view text)
{
    using K = StrategyRequest::Kind;
    const std::string label(text);
    if (text == "pure:omega") return {K::PureOmega, 0, label};
    if (text == "pure:separable") return {K::PureSeparable, 0, label};
    if (text == "pure:random") return {K::PureRandom, 0, label};
    if (text == "append:maxmixed") return {K::AppendMaxMixed, 0, label};
    if (text == "append:optimal") return {K::AppendOptimal, 0, label};
    if (text == "append:pure") return {K::AppendPure, 0, label};
    if (text == "dep") return {K::Dep, 0, label};
    if (text == "avg-ue") return {K::AvgUE, 0, label};
    constexpr std::string_view tomo_prefix = "tomo:k=";
    if (text.starts_with(tomo_prefix)) {
        const auto digits = text.substr(tomo_prefix.size());
        std::size_t k = 0;
        const auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), k);
        if (ec == std::errc() && ptr == digits.data() + digits.size() && k >= 1) return {K::Tomo, k, label};
    }
    throw Error(ErrorKind::ParseError, "unknown strategy '" + label + "'");
}

} // namespace purifylab
