#include <cmath>
#include <numbers>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <gtest/gtest.h>

#include "purifylab/ensembles.hpp"
#include "purifylab/linalg.hpp"
#include "test_support.hpp"

using namespace purifylab;
using purifylab::testing::TestRng;

namespace {

Matrix pauli_x()
{
    Matrix x(2, 2);
    x << 0, 1, 1, 0;
    return x;
}

Matrix diag(std::initializer_list<double> xs)
{
    RealVector d(static_cast<Eigen::Index>(xs.size()));
    Eigen::Index i = 0;
    for (double x : xs) d(i++) = x;
    return d.cast<Complex>().asDiagonal();
}

} // namespace

TEST(Kron, IdentityAndScalar)
{
    EXPECT_TRUE(kron(Matrix(Matrix::Identity(2, 2)), Matrix(Matrix::Identity(2, 2))).isApprox(Matrix::Identity(4, 4)));
    EXPECT_TRUE(kron(pauli_x(), Matrix::Constant(1, 1, 1.0)).isApprox(pauli_x()));
}

TEST(Kron, MixedProduct)
{
    TestRng rng(1);
    for (int trial = 0; trial < 20; ++trial) {
        const Matrix a = rng.gaussian(2, 2), b = rng.gaussian(2, 2), c = rng.gaussian(2, 2), d = rng.gaussian(2, 2);
        EXPECT_LT(max_abs(kron(a, b) * kron(c, d) - kron(Matrix(a * c), Matrix(b * d))), 1e-12);
    }
}

TEST(PartialTrace, ProductAndEntangled)
{
    Matrix p00 = Matrix::Zero(4, 4);
    p00(0, 0) = 1.0;
    Matrix p0 = Matrix::Zero(2, 2);
    p0(0, 0) = 1.0;
    EXPECT_TRUE(partial_trace(p00, {2, 2}, {0}).isApprox(p0));

    Vector phi = Vector::Zero(4);
    phi(0) = phi(3) = 1.0;
    EXPECT_LT(max_abs(partial_trace(phi * phi.adjoint(), {2, 2}, {0}) - Matrix::Identity(2, 2)), 1e-15);
}

TEST(PartialTrace, AgreesWithDirectKronStructure)
{
    TestRng rng(2);
    const Matrix a = rng.density(2), b = rng.density(3), c = rng.density(2);
    const Matrix abc = kron(kron(a, b), c);
    EXPECT_LT(max_abs(partial_trace(abc, {2, 3, 2}, {1}) - b), 1e-12);
    EXPECT_LT(max_abs(partial_trace(abc, {2, 3, 2}, {0, 2}) - kron(a, c)), 1e-12);
    EXPECT_LT(max_abs(partial_trace(abc, {2, 3, 2}, {0, 1, 2}) - abc), 1e-15);
}

TEST(PartialTrace, PreservesTrace)
{
    TestRng rng(3);
    for (int trial = 0; trial < 20; ++trial) {
        const Matrix m = rng.psd(12);
        const double t = m.trace().real();
        for (auto keep : {std::vector<std::size_t>{0}, {1}, {2}, {0, 2}}) {
            const Matrix r = partial_trace(m, {2, 3, 2}, keep);
            EXPECT_NEAR(r.trace().real(), t, 1e-12 * t);
        }
    }
}

TEST(PartialTrace, InvalidDims)
{
    try {
        partial_trace(Matrix::Identity(4, 4), {2, 3}, {0});
        FAIL() << "expected InvalidDims";
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::InvalidDims);
    }
    EXPECT_THROW(partial_trace(Matrix::Identity(4, 4), {2, 2}, {5}), Error);
}

TEST(PartialTrace, SampledPurificationReproducesChoi)
{
    RandomStream rs(11, 0);
    const EnsembleSpec spec{2, 2, 3, 11};
    const auto s = sample_choi(spec, rs);
    const Matrix proj = s.purification.projector();
    EXPECT_LT(max_abs(partial_trace(proj, {2, 2, 3}, {0, 1}) - s.choi.matrix()), 1e-10);
}

TEST(PermuteSubsystems, SwapIsConjugationByFlip)
{
    TestRng rng(4);
    const Matrix m = rng.gaussian(9, 9);
    const Matrix f = flip_operator(3);
    EXPECT_LT(max_abs(permute_subsystems(m, {3, 3}, {1, 0}) - f * m * f), 1e-14);
}

TEST(HermEig, DiagonalAndIdentity)
{
    const auto e = herm_eig(diag({1, 3, 2}));
    EXPECT_NEAR(e.values(0), 3.0, 1e-14);
    EXPECT_NEAR(e.values(1), 2.0, 1e-14);
    EXPECT_NEAR(e.values(2), 1.0, 1e-14);
    const auto id = herm_eig(Matrix::Identity(5, 5));
    for (Eigen::Index i = 0; i < 5; ++i) EXPECT_NEAR(id.values(i), 1.0, 1e-14);
}

TEST(HermEig, ReconstructionAndOrthonormality)
{
    TestRng rng(5);
    for (int trial = 0; trial < 20; ++trial) {
        const Matrix h = rng.hermitian(7);
        const auto e = herm_eig(h);
        const Matrix rec = e.vectors * e.values.cast<Complex>().asDiagonal() * e.vectors.adjoint();
        const double norm2 = singular_values(h)(0);
        EXPECT_LE(singular_values(h - rec)(0), 1e-10 * norm2);
        EXPECT_LT(max_abs(e.vectors.adjoint() * e.vectors - Matrix::Identity(7, 7)), 1e-10);
        for (Eigen::Index i = 1; i < 7; ++i) EXPECT_GE(e.values(i - 1), e.values(i));
    }
}

TEST(HermEig, RejectsNonHermitian)
{
    Matrix m = Matrix::Zero(2, 2);
    m(0, 1) = 1.0;
    try {
        herm_eig(m);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::NotHermitian);
    }
}

TEST(PsdSqrt, Examples)
{
    EXPECT_LT(max_abs(psd_sqrt(diag({4, 9})) - diag({2, 3})), 1e-14);
    TestRng rng(6);
    const Vector v = rng.unit_vector(4);
    const Matrix p = v * v.adjoint();
    EXPECT_LT(max_abs(psd_sqrt(p) - p), 1e-12);
}

TEST(PsdSqrt, IsometricChoiHasSingleRootEigenvalue)
{
    RandomStream rs(3, 0);
    const auto s = sample_choi({3, 2, 2, 3}, rs);
    const PurificationVector& v = s.purification;
    EXPECT_NEAR(psd_sqrt(v.projector()).trace().real(), std::sqrt(3.0), 1e-10);
}

TEST(PsdSqrt, SquareRoundTrip)
{
    TestRng rng(7);
    for (int trial = 0; trial < 20; ++trial) {
        const Matrix p = rng.psd(6, 3);
        const Matrix s = psd_sqrt(p);
        EXPECT_LT(max_abs(s * s - p), 1e-9 * max_abs(p));
        const Matrix s2 = rng.psd(5);
        EXPECT_LT(max_abs(psd_sqrt(s2 * s2) - s2), 1e-9 * max_abs(s2));
    }
}

TEST(PsdSqrt, ClampsDriftRejectsNegative)
{
    EXPECT_NO_THROW(psd_sqrt(diag({1.0, -5e-11})));
    EXPECT_EQ(psd_sqrt(diag({1.0, -5e-11}))(1, 1), Complex(0.0, 0.0));
    try {
        psd_sqrt(diag({1.0, -1e-3}));
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::NotPSD);
    }
}

TEST(TraceNorm, Examples)
{
    EXPECT_NEAR(trace_norm(diag({1, -2})), 3.0, 1e-14);
    TestRng rng(8);
    EXPECT_NEAR(trace_norm(rng.unitary(5)), 5.0, 1e-12);
    for (int trial = 0; trial < 20; ++trial) {
        const Matrix m = rng.gaussian(4, 4);
        EXPECT_GE(trace_norm(m) + 1e-12, std::abs(m.trace()));
    }
}

TEST(Fidelity, Examples)
{
    TestRng rng(9);
    const Matrix rho = rng.density(3);
    EXPECT_NEAR(fidelity(rho, rho), 1.0, 1e-10);
    const Matrix p0 = diag({1, 0}), p1 = diag({0, 1});
    EXPECT_NEAR(fidelity(p0, p1), 0.0, 1e-14);
    EXPECT_NEAR(fidelity(p0, Matrix(Matrix::Identity(2, 2) / 2.0)), 0.5, 1e-14);
}

TEST(Fidelity, SymmetryAndUnitaryInvariance)
{
    TestRng rng(10);
    for (int trial = 0; trial < 30; ++trial) {
        const Matrix rho = rng.density(4), sigma = rng.density(4, 2);
        const Matrix u = rng.unitary(4);
        const double f = fidelity(rho, sigma);
        EXPECT_NEAR(f, fidelity(sigma, rho), 1e-10);
        EXPECT_NEAR(f, fidelity(u * rho * u.adjoint(), u * sigma * u.adjoint()), 1e-10);
        EXPECT_GE(f, 0.0);
        EXPECT_LE(f, 1.0);
    }
}

TEST(Fidelity, TraceNormFormDominatesOverlap)
{
    TestRng rng(11);
    for (int trial = 0; trial < 30; ++trial) {
        const Matrix x = rng.psd(4), z = rng.psd(4, 2);
        const double tn = trace_norm(psd_sqrt(x) * psd_sqrt(z));
        EXPECT_GE(tn * tn + 1e-10, (x * z).trace().real());
    }
}

TEST(Fidelity, RejectsUnnormalized)
{
    try {
        fidelity(Matrix::Identity(2, 2), Matrix::Identity(2, 2) / 2.0);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::NotNormalized);
    }
}

TEST(Flip, Properties)
{
    EXPECT_TRUE(flip_operator(1).isApprox(Matrix::Identity(1, 1)));
    for (std::size_t d : {2u, 3u}) {
        const Matrix f = flip_operator(d);
        EXPECT_NEAR(f.trace().real(), static_cast<double>(d), 1e-15);
        EXPECT_LT(max_abs(f * f - Matrix::Identity(f.rows(), f.cols())), 1e-15);
        EXPECT_LT(max_abs(f - f.adjoint()), 1e-15);
    }
    TestRng rng(12);
    for (int trial = 0; trial < 10; ++trial) {
        const Matrix x = rng.gaussian(2, 2), y = rng.gaussian(2, 2);
        EXPECT_LT(std::abs((kron(x, y) * flip_operator(2)).trace() - (x * y).trace()), 1e-12);
    }
}

namespace {

double quad_K(double m)
{
    auto f = [m](double t) { return 1.0 / std::sqrt(1.0 - m * std::sin(t) * std::sin(t)); };
    return boost::math::quadrature::gauss_kronrod<double, 61>::integrate(f, 0.0, std::numbers::pi / 2, 15, 1e-14);
}

double quad_E(double m)
{
    auto f = [m](double t) { return std::sqrt(1.0 - m * std::sin(t) * std::sin(t)); };
    return boost::math::quadrature::gauss_kronrod<double, 61>::integrate(f, 0.0, std::numbers::pi / 2, 15, 1e-14);
}

} // namespace

TEST(CompleteElliptic, EndpointValues)
{
    const auto z = complete_elliptic(0.0);
    EXPECT_NEAR(z.K, std::numbers::pi / 2, 1e-15);
    EXPECT_NEAR(z.E, std::numbers::pi / 2, 1e-15);
    const auto one = complete_elliptic(1.0);
    EXPECT_TRUE(std::isinf(one.K));
    EXPECT_EQ(one.E, 1.0);
}

TEST(CompleteElliptic, MatchesQuadrature)
{
    for (double m : {0.1, 0.5, 0.9, 0.999}) {
        const auto v = complete_elliptic(m);
        EXPECT_NEAR(v.K, quad_K(m), 1e-10 * quad_K(m)) << m;
        EXPECT_NEAR(v.E, quad_E(m), 1e-10 * quad_E(m)) << m;
    }
    const auto half = complete_elliptic(0.5);
    EXPECT_NEAR(half.K, quad_K(0.5), 1e-8);
    EXPECT_NEAR(half.E, quad_E(0.5), 1e-8);
}

TEST(CompleteElliptic, DomainError)
{
    for (double m : {-0.1, 1.5, std::nan("")}) {
        try {
            complete_elliptic(m);
            FAIL();
        } catch (const Error& e) {
            EXPECT_EQ(e.kind(), ErrorKind::DomainError);
        }
    }
}
