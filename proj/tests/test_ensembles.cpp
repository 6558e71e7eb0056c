#include <algorithm>
#include <cmath>
#include <numbers>

#include <boost/math/quadrature/tanh_sinh.hpp>
#include <gtest/gtest.h>

#include "purifylab/ensembles.hpp"
#include "test_support.hpp"

using namespace purifylab;
using purifylab::testing::MatrixMoments;
using purifylab::testing::ScalarMoments;
using purifylab::testing::TestRng;

namespace {

/// Haar unitary from QR with phase fixing, seeded from the same stream type.
Matrix qr_haar_unitary(std::size_t d, RandomStream& rs)
{
    const Matrix g = sample_ginibre(d, d, rs);
    Eigen::HouseholderQR<Matrix> qr(g);
    Matrix q = qr.householderQ();
    const Matrix r = qr.matrixQR().triangularView<Eigen::Upper>();
    for (Eigen::Index i = 0; i < q.cols(); ++i) q.col(i) *= r(i, i) / std::abs(r(i, i));
    return q;
}

template <class F>
double quad(F f, double a, double b)
{
    boost::math::quadrature::tanh_sinh<double> integrator;
    return integrator.integrate(f, a, b, 1e-13);
}

} // namespace

TEST(Ginibre, MomentsAndDeterminism)
{
    const int n = 100000;
    ScalarMoments re, abs2;
    RandomStream rs(1, 0);
    for (int i = 0; i < n; ++i) {
        const Complex z = sample_ginibre(1, 1, rs)(0, 0);
        re.add(z.real());
        abs2.add(std::norm(z));
    }
    EXPECT_LT(std::abs(re.mean) / re.stderr_(), 4.0);
    EXPECT_LT(std::abs(abs2.mean - 1.0) / abs2.stderr_(), 4.0);
    EXPECT_NEAR(re.m2 / (n - 1), 0.5, 0.02);

    RandomStream a(9, 3), b(9, 3);
    EXPECT_EQ(sample_ginibre(3, 4, a), sample_ginibre(3, 4, b));
    EXPECT_THROW(sample_ginibre(0, 2, a), Error);
}

TEST(HaarIsometry, UnitaryAndIsometry)
{
    RandomStream rs(2, 0);
    for (int trial = 0; trial < 20; ++trial) {
        const Matrix u = sample_haar_unitary(4, rs);
        EXPECT_NEAR(std::abs(u.determinant()), 1.0, 1e-10);
        const Matrix v = sample_haar_isometry(2, 8, rs);
        EXPECT_LT(max_abs(v.adjoint() * v - Matrix::Identity(2, 2)), 1e-10);
    }
    EXPECT_THROW(sample_haar_isometry(3, 2, rs), Error);
}

TEST(HaarIsometry, AverageProjector)
{
    MatrixMoments mm;
    for (std::uint64_t i = 0; i < 10000; ++i) {
        RandomStream rs(3, i);
        const Matrix v = sample_haar_isometry(2, 4, rs);
        mm.add(v * v.adjoint());
    }
    EXPECT_LT(mm.max_z(Matrix::Identity(4, 4) * 0.5), 4.0);
}

// Fourth moment of a unitary entry: E|U_11|^4 = 2 / (d (d + 1)); compared with
// both the exact value and the QR sampler.
TEST(HaarIsometry, AgreesWithQrOracle)
{
    const std::size_t d = 3;
    ScalarMoments polar, qr;
    for (std::uint64_t i = 0; i < 20000; ++i) {
        RandomStream a(4, i), b(5, i);
        polar.add(std::pow(std::norm(sample_haar_unitary(d, a)(0, 0)), 2));
        qr.add(std::pow(std::norm(qr_haar_unitary(d, b)(0, 0)), 2));
    }
    const double exact = 2.0 / (d * (d + 1.0));
    EXPECT_LT(std::abs(polar.mean - exact) / polar.stderr_(), 4.0);
    EXPECT_LT(std::abs(qr.mean - exact) / qr.stderr_(), 4.0);
    EXPECT_LT(std::abs(polar.mean - qr.mean) / std::hypot(polar.stderr_(), qr.stderr_()), 4.0);
}

TEST(HaarIsometry, LeftInvariance)
{
    TestRng rng(6);
    const Matrix fixed = rng.unitary(4);
    MatrixMoments first_v, first_uv, second_v, second_uv;
    for (std::uint64_t i = 0; i < 10000; ++i) {
        RandomStream rs(6, i);
        const Matrix v = sample_haar_isometry(2, 4, rs);
        const Matrix uv = fixed * v;
        first_v.add(v);
        first_uv.add(uv);
        second_v.add(kron(Matrix(v.col(0) * v.col(0).adjoint()), Matrix(v.col(1) * v.col(1).adjoint())));
        second_uv.add(kron(Matrix(uv.col(0) * uv.col(0).adjoint()), Matrix(uv.col(1) * uv.col(1).adjoint())));
    }
    EXPECT_LT(first_v.max_z(Matrix::Zero(4, 2)), 4.5);
    EXPECT_LT(first_uv.max_z(Matrix::Zero(4, 2)), 4.5);
    // Each mean against the other's point estimate; the 4.5 sigma margin absorbs the many-entry maximum.
    EXPECT_LT(second_uv.max_z(second_v.mean()), 4.5 * std::sqrt(2.0));
}

TEST(SampleChoi, IsometricCase)
{
    RandomStream rs(7, 0);
    const auto s = sample_choi({2, 3, 1, 7}, rs);
    EXPECT_EQ(s.choi.rank(), 1u);
    EXPECT_NEAR(s.choi.eigenvalues()(0), 2.0, 1e-10);
}

TEST(SampleChoi, StateCaseIsInducedState)
{
    // d_I = 1: tr_O C = 1, so C is a density matrix; compare E tr C^2 with the
    // induced-measure value (d + k) / (d k + 1).
    ScalarMoments choi_p, induced_p;
    for (std::uint64_t i = 0; i < 5000; ++i) {
        RandomStream a(8, i), b(9, i);
        choi_p.add(sample_choi({1, 3, 4, 8}, a).choi.purity());
        induced_p.add(sample_induced_state(3, 4, b).squaredNorm());
    }
    const double exact = (3.0 + 4.0) / (3.0 * 4.0 + 1.0);
    EXPECT_LT(std::abs(choi_p.mean - exact) / choi_p.stderr_(), 4.0);
    EXPECT_LT(std::abs(induced_p.mean - exact) / induced_p.stderr_(), 4.0);
}

TEST(SampleChoi, MeanIsMaximallyMixed)
{
    MatrixMoments mm;
    for (std::uint64_t i = 0; i < 10000; ++i) {
        RandomStream rs(10, i);
        mm.add(sample_choi({2, 2, 4, 10}, rs).choi.matrix());
    }
    EXPECT_LT(mm.max_z(Matrix::Identity(4, 4) * 0.5), 4.0);
}

TEST(SampleChoi, InvariantsAndPurityBounds)
{
    for (std::size_t de : {1u, 2u, 3u, 5u, 9u}) {
        const EnsembleSpec spec{2, 3, de, 11};
        for (std::uint64_t i = 0; i < 50; ++i) {
            RandomStream rs(11, i);
            const auto s = sample_choi(spec, rs);
            EXPECT_LT(max_abs(partial_trace(s.choi.matrix(), {2, 3}, {0}) - Matrix::Identity(2, 2)), 1e-9);
            EXPECT_NEAR(s.choi.matrix().trace().real(), 2.0, 1e-10);
            EXPECT_GE(s.choi.purity(), 2.0 / 3.0 - 1e-10);
            EXPECT_LE(s.choi.purity(), 4.0 + 1e-10);
        }
    }
}

TEST(EnsembleSpec, Validation)
{
    EXPECT_THROW((EnsembleSpec{2, 1, 4, 0}.validate()), Error);
    EXPECT_THROW((EnsembleSpec{5, 2, 2, 0}.validate()), Error);
    EXPECT_NO_THROW((EnsembleSpec{4, 2, 2, 0}.validate()));
}

TEST(Wishart, TraceAndPurityAgreement)
{
    const EnsembleSpec spec{2, 2, 2, 12};
    ScalarMoments stine, wish;
    for (std::uint64_t i = 0; i < 10000; ++i) {
        RandomStream a(12, i), b(13, i);
        stine.add(sample_choi(spec, a).choi.purity());
        const auto c = sample_wishart_choi(spec, b);
        EXPECT_NEAR(c.matrix().trace().real(), 2.0, 1e-10);
        wish.add(c.purity());
    }
    EXPECT_LT(std::abs(stine.mean - wish.mean) / std::hypot(stine.stderr_(), wish.stderr_()), 3.0);
}

TEST(Wishart, FullRankWhenEnvironmentLarge)
{
    for (std::uint64_t i = 0; i < 100; ++i) {
        RandomStream rs(14, i);
        const auto c = sample_wishart_choi({2, 2, 4, 14}, rs);
        EXPECT_GT(herm_eigvals(c.matrix())(3), 0.0);
    }
}

TEST(MarcenkoPastur, DensitySupportAndNormalization)
{
    EXPECT_EQ(mp_density(0.5, 0.01), 0.0);
    EXPECT_EQ(mp_density(0.5, 3.0), 0.0);
    EXPECT_EQ(mp_density(2.0, -1.0), 0.0);
    for (double c : {0.5, 1.0, 2.0}) {
        const auto [lo, hi] = mp_support(c);
        const double mass = quad([c](double x) { return mp_density(c, x); }, lo, hi);
        EXPECT_NEAR(mass + mp_atom(c), 1.0, 1e-6) << c;
    }
    for (double x : {0.1, 1.0, 3.5})
        EXPECT_NEAR(mp_density(1.0, x), std::sqrt((4.0 - x) / x) / (2.0 * std::numbers::pi), 1e-14);
    EXPECT_EQ(mp_atom(2.0), 0.5);
    EXPECT_EQ(mp_atom(0.5), 0.0);
}

TEST(MarcenkoPastur, CdfAgreesWithQuadrature)
{
    for (double c : {0.3, 1.0, 2.5}) {
        const auto [lo, hi] = mp_support(c);
        for (double t : {0.1, 0.5, 0.9}) {
            const double x = lo + t * (hi - lo);
            const double ref = mp_atom(c) + quad([c](double y) { return mp_density(c, y); }, lo, x);
            EXPECT_NEAR(mp_cdf(c, x), ref, 1e-6) << c << " " << x;
        }
        EXPECT_NEAR(mp_cdf(c, hi + 1.0), 1.0, 1e-12);
    }
}

TEST(MarcenkoPastur, Mu)
{
    EXPECT_NEAR(mp_mu(1.0), 8.0 / (3.0 * std::numbers::pi), 1e-12);
    EXPECT_NEAR(mp_mu(0.05), 1.0 - 0.05 / 8.0, 1e-3);
    for (double c : {0.5, 0.2, 0.9}) {
        const auto [lo, hi] = mp_support(c);
        const double ref = quad([c](double x) { return std::sqrt(x) * mp_density(c, x); }, lo, hi);
        EXPECT_NEAR(mp_mu(c), ref, 1e-8) << c;
    }
    EXPECT_THROW(mp_mu(0.0), Error);
    EXPECT_THROW(mp_mu(1.5), Error);
}

TEST(MarcenkoPastur, SpectrumConvergence)
{
    std::vector<double> pooled;
    for (std::uint64_t i = 0; i < 200; ++i) {
        RandomStream rs(15, i);
        const RealVector ev = sample_choi({4, 4, 16, 15}, rs).choi.eigenvalues();
        for (Eigen::Index j = 0; j < ev.size(); ++j) pooled.push_back(4.0 * ev(j));
    }
    std::sort(pooled.begin(), pooled.end());
    double ks = 0.0;
    const double n = static_cast<double>(pooled.size());
    for (std::size_t i = 0; i < pooled.size(); ++i) {
        const double f = mp_cdf(1.0, pooled[i]);
        ks = std::max({ks, std::abs(f - i / n), std::abs(f - (i + 1) / n)});
    }
    EXPECT_LT(ks, 0.08);
}
