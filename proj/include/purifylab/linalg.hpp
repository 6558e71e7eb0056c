#pragma once

// Dense complex kernels shared by the rest of the library. All functions are
// pure; matrices are Eigen column-major containers but every tensor-product
// index below is read row-major: factor 0 is the most significant digit.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <limits>
#include <numbers>
#include <numeric>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "purifylab/error.hpp"

namespace purifylab {

using Complex = std::complex<double>;
using Matrix = Eigen::MatrixXcd;
using Vector = Eigen::VectorXcd;
using RealVector = Eigen::VectorXd;

namespace tol {
inline constexpr double hermitian_rel = 1e-12;
inline constexpr double psd_clamp_abs = 1e-10;
inline constexpr double psd_error_rel = 1e-8;
// Eigenvalues below this fraction of the largest one are rounding residue.
inline constexpr double sqrt_cutoff_rel = 1e-12;
inline constexpr double trace_unit = 1e-9;
} // namespace tol

/// Ordered factor dimensions of a tensor-product space.
struct SubsystemDims {
    std::vector<std::size_t> dims;

    SubsystemDims() = default;
    SubsystemDims(std::initializer_list<std::size_t> d) : dims(d) {}
    explicit SubsystemDims(std::vector<std::size_t> d) : dims(std::move(d)) {}

    std::size_t size() const noexcept { return dims.size(); }
    std::size_t operator[](std::size_t i) const { return dims[i]; }

    std::size_t total() const noexcept
    {
        return std::accumulate(dims.begin(), dims.end(), std::size_t{1}, std::multiplies<>());
    }
};

inline double max_abs(const Matrix& m)
{
    return m.size() == 0 ? 0.0 : m.cwiseAbs().maxCoeff();
}

inline bool is_hermitian(const Matrix& m, double rel_tol = tol::hermitian_rel)
{
    if (m.rows() != m.cols()) return false;
    const double scale = max_abs(m);
    if (scale == 0.0) return true;
    return max_abs(m - m.adjoint()) <= rel_tol * scale;
}

inline bool is_unitary(const Matrix& u, double abs_tol = 1e-10)
{
    if (u.rows() != u.cols()) return false;
    return max_abs(u.adjoint() * u - Matrix::Identity(u.rows(), u.cols())) <= abs_tol;
}

inline Matrix kron(const Matrix& a, const Matrix& b)
{
    Matrix out(a.rows() * b.rows(), a.cols() * b.cols());
    for (Eigen::Index i = 0; i < a.rows(); ++i)
        for (Eigen::Index j = 0; j < a.cols(); ++j)
            out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
    return out;
}

inline Vector kron(const Vector& a, const Vector& b)
{
    Vector out(a.size() * b.size());
    for (Eigen::Index i = 0; i < a.size(); ++i)
        out.segment(i * b.size(), b.size()) = a(i) * b;
    return out;
}

namespace detail {

inline std::vector<std::size_t> strides_of(const SubsystemDims& dims)
{
    std::vector<std::size_t> strides(dims.size(), 1);
    for (std::size_t k = dims.size(); k-- > 1;)
        strides[k - 1] = strides[k] * dims[k];
    return strides;
}

inline void check_square_dims(const Matrix& m, const SubsystemDims& dims)
{
    if (m.rows() != m.cols())
        throw Error(ErrorKind::InvalidDims, "matrix is not square");
    if (dims.size() == 0 || static_cast<Eigen::Index>(dims.total()) != m.rows())
        throw Error(ErrorKind::InvalidDims, "subsystem dimensions do not match matrix side");
    for (auto d : dims.dims)
        if (d == 0) throw Error(ErrorKind::InvalidDims, "zero subsystem dimension");
}

} // namespace detail

/// Traces out every factor whose index is not listed in `keep`.
inline Matrix partial_trace(const Matrix& m, const SubsystemDims& dims, std::span<const std::size_t> keep)
{
    detail::check_square_dims(m, dims);
    const std::size_t n = dims.size();
    std::vector<bool> kept(n, false);
    for (auto k : keep) {
        if (k >= n) throw Error(ErrorKind::InvalidDims, "kept factor index out of range");
        kept[k] = true;
    }

    const auto strides = detail::strides_of(dims);
    std::vector<std::size_t> kept_dims, traced_dims, kept_strides, traced_strides;
    for (std::size_t k = 0; k < n; ++k) {
        if (kept[k]) {
            kept_dims.push_back(dims[k]);
            kept_strides.push_back(strides[k]);
        } else {
            traced_dims.push_back(dims[k]);
            traced_strides.push_back(strides[k]);
        }
    }

    // Full-space offsets of every kept (resp. traced) multi-index.
    auto offsets = [](const std::vector<std::size_t>& ds, const std::vector<std::size_t>& ss) {
        std::vector<std::size_t> out{0};
        for (std::size_t k = 0; k < ds.size(); ++k) {
            std::vector<std::size_t> next;
            next.reserve(out.size() * ds[k]);
            for (auto base : out)
                for (std::size_t i = 0; i < ds[k]; ++i) next.push_back(base + i * ss[k]);
            out = std::move(next);
        }
        return out;
    };
    const auto kept_off = offsets(kept_dims, kept_strides);
    const auto traced_off = offsets(traced_dims, traced_strides);

    const auto side = static_cast<Eigen::Index>(kept_off.size());
    Matrix out = Matrix::Zero(side, side);
    for (Eigen::Index r = 0; r < side; ++r)
        for (Eigen::Index c = 0; c < side; ++c) {
            Complex acc{0.0, 0.0};
            for (auto t : traced_off)
                acc += m(static_cast<Eigen::Index>(kept_off[r] + t), static_cast<Eigen::Index>(kept_off[c] + t));
            out(r, c) = acc;
        }
    return out;
}

inline Matrix partial_trace(const Matrix& m, const SubsystemDims& dims, std::initializer_list<std::size_t> keep)
{
    return partial_trace(m, dims, std::span<const std::size_t>(keep.begin(), keep.size()));
}

/// Reorders tensor factors: factor j of the result is factor perm[j] of the input.
inline Matrix permute_subsystems(const Matrix& m, const SubsystemDims& dims, std::span<const std::size_t> perm)
{
    detail::check_square_dims(m, dims);
    const std::size_t n = dims.size();
    if (perm.size() != n) throw Error(ErrorKind::InvalidDims, "permutation length mismatch");

    std::vector<std::size_t> new_dims(n);
    for (std::size_t j = 0; j < n; ++j) new_dims[j] = dims[perm[j]];
    const auto old_strides = detail::strides_of(dims);
    const auto new_strides = detail::strides_of(SubsystemDims(new_dims));

    const std::size_t side = dims.total();
    std::vector<Eigen::Index> map(side);
    for (std::size_t idx = 0; idx < side; ++idx) {
        std::size_t rem = idx, target = 0;
        for (std::size_t k = 0; k < n; ++k) {
            const std::size_t digit = rem / old_strides[k];
            rem %= old_strides[k];
            const auto pos = static_cast<std::size_t>(std::find(perm.begin(), perm.end(), k) - perm.begin());
            target += digit * new_strides[pos];
        }
        map[idx] = static_cast<Eigen::Index>(target);
    }
    Matrix out(m.rows(), m.cols());
    for (std::size_t r = 0; r < side; ++r)
        for (std::size_t c = 0; c < side; ++c)
            out(map[r], map[c]) = m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));
    return out;
}

inline Matrix permute_subsystems(const Matrix& m, const SubsystemDims& dims, std::initializer_list<std::size_t> perm)
{
    return permute_subsystems(m, dims, std::span<const std::size_t>(perm.begin(), perm.size()));
}

struct Eigensystem {
    RealVector values;  // non-increasing
    Matrix vectors;     // column i pairs with values[i]
};

/// Spectral decomposition of a Hermitian matrix, eigenvalues non-increasing.
/// Ties keep the solver's ascending-index order among equal values.
inline Eigensystem herm_eig(const Matrix& m)
{
    if (!is_hermitian(m))
        throw Error(ErrorKind::NotHermitian, "herm_eig requires a Hermitian matrix");
    const Matrix h = 0.5 * (m + m.adjoint());
    Eigen::SelfAdjointEigenSolver<Matrix> solver(h);
    const RealVector& ev = solver.eigenvalues();
    const auto n = ev.size();

    std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), Eigen::Index{0});
    std::stable_sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) { return ev(a) > ev(b); });

    Eigensystem out{RealVector(n), Matrix(n, n)};
    for (Eigen::Index i = 0; i < n; ++i) {
        out.values(i) = ev(order[static_cast<std::size_t>(i)]);
        out.vectors.col(i) = solver.eigenvectors().col(order[static_cast<std::size_t>(i)]);
    }
    return out;
}

inline RealVector herm_eigvals(const Matrix& m)
{
    if (!is_hermitian(m))
        throw Error(ErrorKind::NotHermitian, "herm_eigvals requires a Hermitian matrix");
    const Matrix h = 0.5 * (m + m.adjoint());
    RealVector ev = Eigen::SelfAdjointEigenSolver<Matrix>(h, Eigen::EigenvaluesOnly).eigenvalues();
    std::sort(ev.data(), ev.data() + ev.size(), std::greater<>());
    return ev;
}

namespace detail {

// Clamps drift below zero, rejects genuine negativity, and zeroes rounding
// residue far below the top of the spectrum.
inline RealVector clamp_psd_spectrum(const RealVector& values, double norm)
{
    RealVector out = values;
    const double top = values.size() ? std::max(values.maxCoeff(), 0.0) : 0.0;
    const double neg_limit = std::max(tol::psd_clamp_abs, tol::psd_error_rel * norm);
    for (Eigen::Index i = 0; i < out.size(); ++i) {
        if (out(i) < -neg_limit)
            throw Error(ErrorKind::NotPSD, "eigenvalue " + std::to_string(out(i)) + " below PSD tolerance");
        if (out(i) <= tol::sqrt_cutoff_rel * top) out(i) = 0.0;
    }
    return out;
}

} // namespace detail

/// Principal square root of a PSD matrix.
inline Matrix psd_sqrt(const Matrix& m)
{
    const auto eig = herm_eig(m);
    const double norm = eig.values.size() ? eig.values.cwiseAbs().maxCoeff() : 0.0;
    const RealVector lam = detail::clamp_psd_spectrum(eig.values, norm).cwiseSqrt();
    return eig.vectors * lam.cast<Complex>().asDiagonal() * eig.vectors.adjoint();
}

/// Eigenvalues of a PSD matrix with the same clamping rules as psd_sqrt.
inline RealVector psd_eigvals(const Matrix& m)
{
    const RealVector ev = herm_eigvals(m);
    const double norm = ev.size() ? ev.cwiseAbs().maxCoeff() : 0.0;
    return detail::clamp_psd_spectrum(ev, norm);
}

inline RealVector singular_values(const Matrix& m)
{
    return Eigen::JacobiSVD<Matrix>(m).singularValues();
}

inline double trace_norm(const Matrix& m)
{
    return m.size() == 0 ? 0.0 : singular_values(m).sum();
}

/// Squared Hilbert-Schmidt distance.
inline double hs_distance_sq(const Matrix& a, const Matrix& b)
{
    return (a - b).squaredNorm();
}

/// Uhlmann fidelity ||sqrt(rho) sqrt(sigma)||_1^2 of two density matrices.
inline double fidelity(const Matrix& rho, const Matrix& sigma)
{
    if (rho.rows() != sigma.rows() || rho.rows() != rho.cols() || sigma.rows() != sigma.cols())
        throw Error(ErrorKind::InvalidDims, "fidelity arguments must be square and equal-sized");
    for (const Matrix* x : {&rho, &sigma})
        if (std::abs(x->trace() - Complex(1.0, 0.0)) > tol::trace_unit)
            throw Error(ErrorKind::NotNormalized, "fidelity arguments must have unit trace");
    const double f = trace_norm(psd_sqrt(rho) * psd_sqrt(sigma));
    return std::clamp(f * f, 0.0, 1.0);
}

/// Swap operator on C^d (x) C^d: |a b> -> |b a>.
inline Matrix flip_operator(std::size_t d)
{
    if (d == 0) throw Error(ErrorKind::InvalidDims, "flip dimension must be positive");
    const auto n = static_cast<Eigen::Index>(d);
    Matrix f = Matrix::Zero(n * n, n * n);
    for (Eigen::Index a = 0; a < n; ++a)
        for (Eigen::Index b = 0; b < n; ++b) f(b * n + a, a * n + b) = 1.0;
    return f;
}

struct EllipticIntegrals {
    double K;
    double E;
};

/// Complete elliptic integrals of the first and second kind in the parameter
/// convention K(m) = int_0^{pi/2} (1 - m sin^2 t)^{-1/2} dt, via the AGM.
inline EllipticIntegrals complete_elliptic(double m)
{
    if (!(m >= 0.0 && m <= 1.0))
        throw Error(ErrorKind::DomainError, "elliptic parameter must lie in [0, 1]");
    if (m == 1.0) return {std::numeric_limits<double>::infinity(), 1.0};

    double a = 1.0;
    double b = std::sqrt(1.0 - m);
    double c = std::sqrt(m);
    double sum = 0.5 * c * c;  // 2^{n-1} c_n^2 at n = 0
    double weight = 0.5;
    for (int it = 0; it < 64 && std::abs(c) > 1e-17 * a; ++it) {
        const double an = 0.5 * (a + b);
        const double bn = std::sqrt(a * b);
        c = 0.5 * (a - b);
        a = an;
        b = bn;
        weight *= 2.0;
        sum += weight * c * c;
    }
    const double K = std::numbers::pi / (2.0 * a);
    return {K, K * (1.0 - sum)};
}

} // namespace purifylab
