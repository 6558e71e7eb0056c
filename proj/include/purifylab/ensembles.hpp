#pragma once

// Random channel ensembles: Ginibre matrices, Haar isometries through the
// polar factor G (G^* G)^{-1/2}, Haar-Stinespring Choi operators, the
// normalized-Wishart route to the same law, and Marcenko-Pastur reference
// quantities.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <string>
#include <vector>

#include "purifylab/channels.hpp"
#include "purifylab/linalg.hpp"
#include "purifylab/random.hpp"

namespace purifylab {

/// Prior over input channels: dimensions of the Haar-Stinespring ensemble.
struct EnsembleSpec {
    std::size_t d_in = 1;
    std::size_t d_out = 2;
    std::size_t d_env = 1;
    std::uint64_t seed = 0;

    void validate() const
    {
        if (d_in < 1 || d_out < 2 || d_env < 1)
            throw Error(ErrorKind::InvalidDims, "need d_I >= 1, d_O >= 2, d_E >= 1");
        if (d_out * d_env < d_in)
            throw Error(ErrorKind::InvalidDims, "need d_O * d_E >= d_I for an isometry to exist");
    }

    std::size_t joint_dim() const noexcept { return d_in * d_out; }
    std::size_t full_dim() const noexcept { return d_in * d_out * d_env; }
    /// Generic rank of a sampled Choi operator.
    std::size_t generic_rank() const noexcept { return std::min(d_env, d_in * d_out); }
};

/// Entries i.i.d. complex normal with E|G_ij|^2 = 1.
inline Matrix sample_ginibre(std::size_t rows, std::size_t cols, RandomStream& rs)
{
    if (rows == 0 || cols == 0) throw Error(ErrorKind::InvalidDims, "Ginibre shape must be positive");
    const auto r = static_cast<Eigen::Index>(rows);
    const auto c = static_cast<Eigen::Index>(cols);
    Matrix g(r, c);
    const double s = std::sqrt(0.5);
    for (Eigen::Index i = 0; i < r; ++i)
        for (Eigen::Index j = 0; j < c; ++j) {
            const double re = rs.normal();
            const double im = rs.normal();
            g(i, j) = Complex(s * re, s * im);
        }
    return g;
}

/// Polar factor of a full-column-rank matrix, G (G^* G)^{-1/2}, evaluated as
/// U W^* from the thin SVD G = U S W^*.
inline Matrix polar_factor(const Matrix& g)
{
    Eigen::JacobiSVD<Matrix> svd(g, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const RealVector& s = svd.singularValues();
    if (s.size() == 0 || s(s.size() - 1) <= 1e-7 * s(0))
        throw Error(ErrorKind::SingularNormalizer, "polar factor of a rank-deficient matrix");
    return svd.matrixU() * svd.matrixV().adjoint();
}

/// Haar-distributed isometry C^{d_in} -> C^{d_out} (d_out x d_in matrix).
inline Matrix sample_haar_isometry(std::size_t d_in, std::size_t d_out, RandomStream& rs)
{
    if (d_in == 0 || d_out < d_in) throw Error(ErrorKind::InvalidDims, "Haar isometry needs d_out >= d_in >= 1");
    return polar_factor(sample_ginibre(d_out, d_in, rs));
}

inline Matrix sample_haar_unitary(std::size_t d, RandomStream& rs)
{
    return sample_haar_isometry(d, d, rs);
}

struct ChoiSample {
    ChoiOperator choi;
    PurificationVector purification;
};

/// |V> = (1 (x) V)|Phi+> for an isometry V given as a (d_O d_E) x d_I matrix.
inline PurificationVector purification_from_isometry(std::size_t d_in, std::size_t d_out, std::size_t d_env,
                                                     const Matrix& iso)
{
    const auto n_out = static_cast<Eigen::Index>(d_out * d_env);
    Vector v(static_cast<Eigen::Index>(d_in) * n_out);
    for (Eigen::Index i = 0; i < static_cast<Eigen::Index>(d_in); ++i) v.segment(i * n_out, n_out) = iso.col(i);
    return PurificationVector::from_vector(d_in, d_out, d_env, std::move(v));
}

/// Haar-Stinespring draw: the Choi vector of a Haar isometry and its marginal.
inline ChoiSample sample_choi(const EnsembleSpec& spec, RandomStream& rs)
{
    spec.validate();
    const Matrix iso = sample_haar_isometry(spec.d_in, spec.d_out * spec.d_env, rs);
    auto pv = purification_from_isometry(spec.d_in, spec.d_out, spec.d_env, iso);
    auto c = ChoiOperator::from_matrix(spec.d_in, spec.d_out, pv.marginal());
    return {std::move(c), std::move(pv)};
}

/// Same law through a Wishart matrix and partial normalization of tr_O.
inline ChoiOperator sample_wishart_choi(const EnsembleSpec& spec, RandomStream& rs)
{
    spec.validate();
    const Matrix g = sample_ginibre(spec.joint_dim(), spec.d_env, rs);
    const Matrix w = g * g.adjoint();
    const Matrix t = partial_trace(w, {spec.d_in, spec.d_out}, {0});
    const auto eig = herm_eig(t);
    if (eig.values(eig.values.size() - 1) <= 1e-14 * eig.values(0))
        throw Error(ErrorKind::SingularNormalizer, "tr_O of the Wishart matrix is singular");
    const RealVector inv_sqrt = eig.values.cwiseSqrt().cwiseInverse();
    const Matrix t_inv_sqrt = eig.vectors * inv_sqrt.cast<Complex>().asDiagonal() * eig.vectors.adjoint();
    const auto d_o = static_cast<Eigen::Index>(spec.d_out);
    const Matrix left = kron(t_inv_sqrt, Matrix::Identity(d_o, d_o));
    Matrix c = left * w * left;
    c = 0.5 * (c + c.adjoint());
    return ChoiOperator::from_matrix(spec.d_in, spec.d_out, std::move(c));
}

/// Induced-measure density matrix GG^* / tr(GG^*) with G d x k Ginibre.
inline Matrix sample_induced_state(std::size_t d, std::size_t k, RandomStream& rs)
{
    const Matrix g = sample_ginibre(d, k, rs);
    Matrix w = g * g.adjoint();
    w /= w.trace().real();
    return 0.5 * (w + w.adjoint());
}

inline Vector sample_unit_vector(std::size_t d, RandomStream& rs)
{
    Vector v = sample_ginibre(d, 1, rs).col(0);
    return v / v.norm();
}

// Marcenko-Pastur law with ratio c: atom (1 - 1/c)_+ at zero plus
// sqrt((x+ - x)(x - x-)) / (2 pi c x) on [x-, x+], x+- = (1 +- sqrt c)^2.

struct MpSupport {
    double lower;
    double upper;
};

inline MpSupport mp_support(double c)
{
    if (!(c > 0.0)) throw Error(ErrorKind::DomainError, "MP ratio must be positive");
    const double s = std::sqrt(c);
    return {(1.0 - s) * (1.0 - s), (1.0 + s) * (1.0 + s)};
}

inline double mp_atom(double c)
{
    if (!(c > 0.0)) throw Error(ErrorKind::DomainError, "MP ratio must be positive");
    return std::max(0.0, 1.0 - 1.0 / c);
}

inline double mp_density(double c, double x)
{
    const auto [lo, hi] = mp_support(c);
    if (x <= lo || x >= hi || x <= 0.0) return 0.0;
    return std::sqrt((hi - x) * (x - lo)) / (2.0 * std::numbers::pi * c * x);
}

/// Distribution function of the MP law, atom included.
inline double mp_cdf(double c, double x)
{
    const auto [lo, hi] = mp_support(c);
    const double atom = mp_atom(c);
    if (x < 0.0) return 0.0;
    if (x <= lo) return atom;
    const double total_cont = std::min(1.0, 1.0 / c);
    if (x >= hi) return atom + total_cont;

    // x = lo + (hi - lo) sin^2(phi) removes both square-root endpoint singularities.
    const double width = hi - lo;
    const double phi_end = std::asin(std::sqrt((x - lo) / width));
    auto integrand = [&](double phi) {
        const double s = std::sin(phi), co = std::cos(phi);
        const double xv = lo + width * s * s;
        if (xv <= 0.0) return width * width * 2.0 * co * co / (2.0 * std::numbers::pi * c * width);
        return width * width * 2.0 * s * s * co * co / (2.0 * std::numbers::pi * c * xv);
    };
    constexpr int panels = 1024;
    const double h = phi_end / panels;
    double acc = integrand(0.0) + integrand(phi_end);
    for (int i = 1; i < panels; ++i) acc += integrand(i * h) * (i % 2 ? 4.0 : 2.0);
    return atom + acc * h / 3.0;
}

/// Mean of sqrt(x) under MP_c, c in (0, 1], through complete elliptic integrals
/// with parameter m = 4 sqrt(c) / (1 + sqrt(c))^2.
inline double mp_mu(double c)
{
    if (!(c > 0.0 && c <= 1.0)) throw Error(ErrorKind::DomainError, "mp_mu requires c in (0, 1]");
    const double s = std::sqrt(c);
    const double m = std::min(1.0, 4.0 * s / ((1.0 + s) * (1.0 + s)));
    const auto [K, E] = complete_elliptic(m);
    const double gap = (1.0 - s) * (1.0 - s);
    const double k_term = gap == 0.0 ? 0.0 : gap * K;
    return 2.0 * (1.0 + s) / (3.0 * std::numbers::pi * c) * ((1.0 + c) * E - k_term);
}

/// Kolmogorov-Smirnov distance between an empirical sample and MP_c.
inline double mp_ks_distance(std::vector<double> xs, double c)
{
    if (xs.empty()) throw Error(ErrorKind::DomainError, "empty sample");
    std::sort(xs.begin(), xs.end());
    const double n = static_cast<double>(xs.size());
    double worst = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        const double f = mp_cdf(c, xs[i]);
        worst = std::max({worst, std::abs(f - static_cast<double>(i) / n), std::abs(f - static_cast<double>(i + 1) / n)});
    }
    return worst;
}

} // namespace purifylab
