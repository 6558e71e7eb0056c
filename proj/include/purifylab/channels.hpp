#pragma once

// Choi, Kraus and Stinespring descriptions of channels H_I -> H_O.
//
// Conventions: unnormalized Choi operators (trace d_I) on H_I (x) H_O, and
// purification vectors on H_I (x) H_O (x) H_E, all indexed row-major in that
// factor order. A Kraus operator K (d_O x d_I) has Choi vector
// sum_a |a> (x) K|a>, i.e. entry [a * d_O + o] = K(o, a).

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "purifylab/linalg.hpp"

namespace purifylab {

namespace tol {
inline constexpr double choi_tp = 1e-9;
inline constexpr double choi_trace = 1e-10;
inline constexpr double choi_psd = 1e-9;
inline constexpr double purification_norm = 1e-10;
inline constexpr double rank_rel = 1e-10;
} // namespace tol

/// Reshapes a vector on (rows * cols) into a rows x cols matrix, row-major.
inline Matrix unvec_rowmajor(const Vector& v, Eigen::Index rows, Eigen::Index cols)
{
    if (v.size() != rows * cols) throw Error(ErrorKind::InvalidDims, "vector length does not factor");
    return Eigen::Map<const Eigen::Matrix<Complex, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(v.data(), rows,
                                                                                                      cols);
}

inline Vector vec_rowmajor(const Matrix& m)
{
    Vector out(m.size());
    for (Eigen::Index r = 0; r < m.rows(); ++r)
        for (Eigen::Index c = 0; c < m.cols(); ++c) out(r * m.cols() + c) = m(r, c);
    return out;
}

/// Validated Choi operator of a CPTP map.
class ChoiOperator {
public:
    ChoiOperator() = default;

    /// Checks Hermiticity, PSD, tr_O C = 1 and tr C = d_I.
    static ChoiOperator from_matrix(std::size_t d_in, std::size_t d_out, Matrix m)
    {
        if (d_in == 0 || d_out == 0) throw Error(ErrorKind::InvalidDims, "Choi dimensions must be positive");
        const auto side = static_cast<Eigen::Index>(d_in * d_out);
        if (m.rows() != side || m.cols() != side)
            throw Error(ErrorKind::InvalidDims, "Choi matrix side must equal d_I * d_O");
        if (!is_hermitian(m)) throw Error(ErrorKind::NotHermitian, "Choi matrix is not Hermitian");
        const Matrix out_traced = partial_trace(m, {d_in, d_out}, {0});
        const auto id = Matrix::Identity(static_cast<Eigen::Index>(d_in), static_cast<Eigen::Index>(d_in));
        if (max_abs(out_traced - id) > tol::choi_tp)
            throw Error(ErrorKind::NotTracePreserving, "tr_O C differs from the identity");
        if (std::abs(m.trace().real() - static_cast<double>(d_in)) > tol::choi_trace)
            throw Error(ErrorKind::NotTracePreserving, "tr C differs from d_I");
        const RealVector ev = herm_eigvals(m);
        if (ev(ev.size() - 1) < -tol::choi_psd) throw Error(ErrorKind::NotPSD, "Choi matrix is not PSD");
        ChoiOperator c;
        c.d_in_ = d_in;
        c.d_out_ = d_out;
        c.matrix_ = std::move(m);
        return c;
    }

    std::size_t d_in() const noexcept { return d_in_; }
    std::size_t d_out() const noexcept { return d_out_; }
    const Matrix& matrix() const noexcept { return matrix_; }

    RealVector eigenvalues() const { return psd_eigvals(matrix_); }

    double purity() const { return matrix_.squaredNorm(); }

    std::size_t rank() const
    {
        const RealVector ev = eigenvalues();
        const double cut = tol::rank_rel * (ev.size() ? ev(0) : 0.0);
        return static_cast<std::size_t>((ev.array() > cut).count());
    }

private:
    std::size_t d_in_ = 0;
    std::size_t d_out_ = 0;
    Matrix matrix_;
};

/// Choi vector |V> of an isometry H_I -> H_O (x) H_E; squared norm d_I.
class PurificationVector {
public:
    PurificationVector() = default;

    static PurificationVector from_vector(std::size_t d_in, std::size_t d_out, std::size_t d_env, Vector v)
    {
        if (d_in == 0 || d_out == 0 || d_env == 0)
            throw Error(ErrorKind::InvalidDims, "purification dimensions must be positive");
        if (v.size() != static_cast<Eigen::Index>(d_in * d_out * d_env))
            throw Error(ErrorKind::InvalidDims, "purification vector length must be d_I * d_O * d_E");
        if (std::abs(v.squaredNorm() - static_cast<double>(d_in)) > tol::purification_norm * static_cast<double>(d_in))
            throw Error(ErrorKind::NotNormalized, "purification vector must have squared norm d_I");
        PurificationVector p;
        p.d_in_ = d_in;
        p.d_out_ = d_out;
        p.d_env_ = d_env;
        p.vector_ = std::move(v);
        return p;
    }

    std::size_t d_in() const noexcept { return d_in_; }
    std::size_t d_out() const noexcept { return d_out_; }
    std::size_t d_env() const noexcept { return d_env_; }
    const Vector& vector() const noexcept { return vector_; }

    /// |V> as a (d_I d_O) x d_E matrix.
    Matrix as_matrix() const
    {
        return unvec_rowmajor(vector_, static_cast<Eigen::Index>(d_in_ * d_out_), static_cast<Eigen::Index>(d_env_));
    }

    /// tr_E |V><V|.
    Matrix marginal() const
    {
        const Matrix m = as_matrix();
        return m * m.adjoint();
    }

    Matrix projector() const { return vector_ * vector_.adjoint(); }

    /// Same vector with the environment zero-padded to `d_env` (>= current).
    PurificationVector padded(std::size_t d_env) const
    {
        if (d_env < d_env_) throw Error(ErrorKind::InvalidDims, "cannot pad to a smaller environment");
        if (d_env == d_env_) return *this;
        Matrix m = Matrix::Zero(static_cast<Eigen::Index>(d_in_ * d_out_), static_cast<Eigen::Index>(d_env));
        m.leftCols(static_cast<Eigen::Index>(d_env_)) = as_matrix();
        PurificationVector p = *this;
        p.d_env_ = d_env;
        p.vector_ = vec_rowmajor(m);
        return p;
    }

private:
    std::size_t d_in_ = 0;
    std::size_t d_out_ = 0;
    std::size_t d_env_ = 0;
    Vector vector_;
};

struct KrausSet {
    std::size_t d_in = 0;
    std::size_t d_out = 0;
    std::vector<Matrix> operators;  // each d_out x d_in
};

inline Matrix completeness_residual(const KrausSet& k)
{
    const auto n = static_cast<Eigen::Index>(k.d_in);
    Matrix sum = Matrix::Zero(n, n);
    for (const auto& op : k.operators) sum += op.adjoint() * op;
    return sum - Matrix::Identity(n, n);
}

/// Choi vector sum_a |a> (x) K|a> of a single d_out x d_in operator.
inline Vector choi_vector_of(const Matrix& k)
{
    Vector v(k.size());
    for (Eigen::Index a = 0; a < k.cols(); ++a)
        for (Eigen::Index o = 0; o < k.rows(); ++o) v(a * k.rows() + o) = k(o, a);
    return v;
}

inline ChoiOperator choi_from_kraus(const KrausSet& k)
{
    for (const auto& op : k.operators)
        if (op.rows() != static_cast<Eigen::Index>(k.d_out) || op.cols() != static_cast<Eigen::Index>(k.d_in))
            throw Error(ErrorKind::InvalidDims, "Kraus operator must be d_O x d_I");
    if (k.operators.empty() || max_abs(completeness_residual(k)) > tol::choi_tp)
        throw Error(ErrorKind::NotTracePreserving, "Kraus operators are not complete");
    const auto side = static_cast<Eigen::Index>(k.d_in * k.d_out);
    Matrix c = Matrix::Zero(side, side);
    for (const auto& op : k.operators) {
        const Vector v = choi_vector_of(op);
        c += v * v.adjoint();
    }
    return ChoiOperator::from_matrix(k.d_in, k.d_out, std::move(c));
}

/// Kraus operators from the eigendecomposition of C, one per eigenvalue > tol.
inline KrausSet kraus_from_choi(const ChoiOperator& c, double tol = tol::rank_rel)
{
    const auto eig = herm_eig(c.matrix());
    const double cut = tol * std::max(eig.values(0), 0.0);
    KrausSet out{c.d_in(), c.d_out(), {}};
    const auto di = static_cast<Eigen::Index>(c.d_in());
    const auto d_o = static_cast<Eigen::Index>(c.d_out());
    for (Eigen::Index i = 0; i < eig.values.size(); ++i) {
        if (eig.values(i) <= cut) break;
        const Vector v = std::sqrt(eig.values(i)) * eig.vectors.col(i);
        Matrix op(d_o, di);
        for (Eigen::Index a = 0; a < di; ++a)
            for (Eigen::Index o = 0; o < d_o; ++o) op(o, a) = v(a * d_o + o);
        out.operators.push_back(std::move(op));
    }
    return out;
}

/// Canonical purification: sum_i sqrt(c_i) |e_i> (x) |i>_E, descending c_i.
inline PurificationVector stinespring_from_choi(const ChoiOperator& c, std::size_t d_env)
{
    if (d_env == 0) throw Error(ErrorKind::InvalidDims, "environment dimension must be positive");
    const std::size_t r = c.rank();
    if (d_env < r)
        throw Error(ErrorKind::EnvironmentTooSmall,
                    "d_E = " + std::to_string(d_env) + " below rank " + std::to_string(r));
    const auto eig = herm_eig(c.matrix());
    const auto side = static_cast<Eigen::Index>(c.d_in() * c.d_out());
    Matrix m = Matrix::Zero(side, static_cast<Eigen::Index>(d_env));
    for (Eigen::Index i = 0; i < static_cast<Eigen::Index>(r); ++i)
        m.col(i) = std::sqrt(std::max(eig.values(i), 0.0)) * eig.vectors.col(i);
    // Rank truncation drops mass below the rank threshold; restore the norm.
    Vector v = vec_rowmajor(m);
    v *= std::sqrt(static_cast<double>(c.d_in())) / v.norm();
    return PurificationVector::from_vector(c.d_in(), c.d_out(), d_env, std::move(v));
}

/// (1 (x) U_E)|V>.
inline PurificationVector apply_env_unitary(const PurificationVector& v, const Matrix& u)
{
    if (u.rows() != static_cast<Eigen::Index>(v.d_env()) || u.cols() != u.rows())
        throw Error(ErrorKind::InvalidDims, "environment unitary must be d_E x d_E");
    if (!is_unitary(u)) throw Error(ErrorKind::NotUnitary, "environment operator is not unitary");
    const Matrix m = v.as_matrix() * u.transpose();
    return PurificationVector::from_vector(v.d_in(), v.d_out(), v.d_env(), vec_rowmajor(m));
}

/// Choi operator 1/d_O of the completely depolarizing channel.
inline ChoiOperator depolarizing_choi(std::size_t d_in, std::size_t d_out)
{
    const auto side = static_cast<Eigen::Index>(d_in * d_out);
    return ChoiOperator::from_matrix(d_in, d_out, Matrix::Identity(side, side) / static_cast<double>(d_out));
}

/// (1/sqrt(d_O)) sum_m |m>_{IO} |m>_E with d_E = d_I d_O.
inline PurificationVector max_entangled_purification(std::size_t d_in, std::size_t d_out)
{
    const std::size_t n = d_in * d_out;
    const auto side = static_cast<Eigen::Index>(n);
    const Matrix m = Matrix::Identity(side, side) / std::sqrt(static_cast<double>(d_out));
    return PurificationVector::from_vector(d_in, d_out, n, vec_rowmajor(m));
}

/// |Upsilon> (x) |psi> for an isometric channel's Choi vector Upsilon.
inline PurificationVector separable_purification(const PurificationVector& upsilon, const Vector& psi)
{
    if (upsilon.d_env() != 1)
        throw Error(ErrorKind::InvalidDims, "separable purification needs an isometric (d_E = 1) factor");
    if (std::abs(psi.squaredNorm() - 1.0) > tol::purification_norm)
        throw Error(ErrorKind::NotNormalized, "environment state must be normalized");
    return PurificationVector::from_vector(upsilon.d_in(), upsilon.d_out(), static_cast<std::size_t>(psi.size()),
                                           kron(upsilon.vector(), psi));
}

inline ChoiOperator choi_of(const PurificationVector& v)
{
    return ChoiOperator::from_matrix(v.d_in(), v.d_out(), v.marginal());
}

// JSON: dims plus flat arrays of [re, im] pairs, row-major.

inline nlohmann::json complex_array_to_json(const Complex* data, std::size_t n)
{
    nlohmann::json arr = nlohmann::json::array();
    for (std::size_t i = 0; i < n; ++i) arr.push_back({data[i].real(), data[i].imag()});
    return arr;
}

inline std::vector<Complex> complex_array_from_json(const nlohmann::json& j)
{
    std::vector<Complex> out;
    out.reserve(j.size());
    for (const auto& e : j) out.emplace_back(e.at(0).get<double>(), e.at(1).get<double>());
    return out;
}

inline nlohmann::json matrix_to_json(const Matrix& m)
{
    const Vector v = vec_rowmajor(m);
    return complex_array_to_json(v.data(), static_cast<std::size_t>(v.size()));
}

inline Matrix matrix_from_json(const nlohmann::json& j, Eigen::Index rows, Eigen::Index cols)
{
    const auto vals = complex_array_from_json(j);
    if (static_cast<Eigen::Index>(vals.size()) != rows * cols)
        throw Error(ErrorKind::ParseError, "matrix entry count mismatch");
    Vector v = Eigen::Map<const Vector>(vals.data(), static_cast<Eigen::Index>(vals.size()));
    return unvec_rowmajor(v, rows, cols);
}

inline nlohmann::json to_json(const ChoiOperator& c)
{
    return {{"d_I", c.d_in()}, {"d_O", c.d_out()}, {"matrix", matrix_to_json(c.matrix())}};
}

inline ChoiOperator choi_from_json(const nlohmann::json& j)
{
    const auto di = j.at("d_I").get<std::size_t>();
    const auto d_o = j.at("d_O").get<std::size_t>();
    const auto side = static_cast<Eigen::Index>(di * d_o);
    return ChoiOperator::from_matrix(di, d_o, matrix_from_json(j.at("matrix"), side, side));
}

inline nlohmann::json to_json(const PurificationVector& v)
{
    return {{"d_I", v.d_in()},
            {"d_O", v.d_out()},
            {"d_E", v.d_env()},
            {"vector", complex_array_to_json(v.vector().data(), static_cast<std::size_t>(v.vector().size()))}};
}

inline PurificationVector purification_from_json(const nlohmann::json& j)
{
    const auto vals = complex_array_from_json(j.at("vector"));
    Vector v = Eigen::Map<const Vector>(vals.data(), static_cast<Eigen::Index>(vals.size()));
    return PurificationVector::from_vector(j.at("d_I").get<std::size_t>(), j.at("d_O").get<std::size_t>(),
                                           j.at("d_E").get<std::size_t>(), std::move(v));
}

} // namespace purifylab
