#include <gtest/gtest.h>

#include "spinguard/hamiltonians.hpp"
#include "spinguard/spinops.hpp"

using namespace spinguard;
using namespace std::complex_literals;

namespace {
const double kSpins[] = {0.5, 1.0, 1.5, 2.0, 2.5, 3.5};
}

TEST(SpinMatrices, SpinHalfIsPauliOverTwo) {
    const auto s = spin_matrices(0.5);
    Eigen::Matrix2cd sx, sy, sz;
    sx << 0, 0.5, 0.5, 0;
    sy << 0, -0.5i, 0.5i, 0;
    sz << 0.5, 0, 0, -0.5;
    EXPECT_LT(max_abs(s.sx - SpinMatrix(sx)), 1e-15);
    EXPECT_LT(max_abs(s.sy - SpinMatrix(sy)), 1e-15);
    EXPECT_LT(max_abs(s.sz - SpinMatrix(sz)), 1e-15);
}

TEST(SpinMatrices, CommutatorAndCasimir) {
    for (double spin : kSpins) {
        const auto s = spin_matrices(spin);
        const SpinMatrix comm = s.sx * s.sy - s.sy * s.sx;
        EXPECT_LT(max_abs(comm - 1i * s.sz), 1e-12) << spin;
        const SpinMatrix cas = s.sx * s.sx + s.sy * s.sy + s.sz * s.sz;
        EXPECT_LT(max_abs(cas - spin * (spin + 1) * identity(s.sz.rows())), 1e-12) << spin;
        EXPECT_EQ(max_abs(s.splus.adjoint() - s.sminus), 0.0);
        EXPECT_TRUE(is_hermitian(s.sx, 1e-15));
        EXPECT_TRUE(is_hermitian(s.sy, 1e-15));
    }
}

TEST(SpinMatrices, LadderElementFiveHalves) {
    const auto s = spin_matrices(2.5);
    ASSERT_EQ(s.sz.rows(), 6);
    // <+5/2| S+ |+3/2> = sqrt(35/4 - 15/4) = sqrt(5)
    EXPECT_NEAR(std::real(s.splus(0, 1)), std::sqrt(5.0), 1e-14);
    EXPECT_NEAR(std::real(s.sz(0, 0)), 2.5, 0);
}

TEST(SpinMatrices, RejectsNonHalfInteger) {
    EXPECT_THROW(spin_matrices(0.7), InvalidArgument);
    EXPECT_THROW(spin_matrices(0.0), InvalidArgument);
    EXPECT_THROW(spin_matrices(-1.5), InvalidArgument);
}

TEST(Stevens, RankTwoTextbookForm) {
    const Spin s = Spin::from_value(3.5);
    const auto ops = spin_matrices(s);
    const SpinMatrix expect = 3.0 * ops.sz * ops.sz - 15.75 * identity(8);
    EXPECT_LT(max_abs(stevens_operator(2, 0, s) - expect), 1e-12);
}

TEST(Stevens, TabulatedDiagonalsForSpinTwo) {
    // O40 for S = 2: diag(12, -48, 72, -48, 12)
    const SpinMatrix o40 = stevens_operator(4, 0, Spin::from_value(2.0));
    const double expect[] = {12, -48, 72, -48, 12};
    for (int i = 0; i < 5; ++i) EXPECT_NEAR(std::real(o40(i, i)), expect[i], 1e-12);
    // O44: S+^4 from m=-2 to m=+2 is 2*sqrt(6)*sqrt(6)*2 = 24, halved
    const SpinMatrix o44 = stevens_operator(4, 4, Spin::from_value(2.0));
    EXPECT_NEAR(std::real(o44(0, 4)), 12.0, 1e-12);
    EXPECT_NEAR(std::real(o44(4, 0)), 12.0, 1e-12);
}

TEST(Stevens, O44FromLadderOracle) {
    const Spin s = Spin::from_value(3.5);
    const auto ops = spin_matrices(s);
    SpinMatrix p4 = identity(8), m4 = identity(8);
    for (int i = 0; i < 4; ++i) {
        p4 = p4 * ops.splus;
        m4 = m4 * ops.sminus;
    }
    EXPECT_LT(max_abs(stevens_operator(4, 4, s) - 0.5 * (p4 + m4)), 1e-10);
}

TEST(Stevens, HermitianAndTraceless) {
    const Spin s = Spin::from_value(3.5);
    for (auto [k, q] : {std::pair{2, 0}, {4, 0}, {4, 4}, {6, 0}, {6, 4}}) {
        const SpinMatrix o = stevens_operator(k, q, s);
        EXPECT_LT(hermiticity_error(o), 1e-12) << k << q;
        EXPECT_LT(std::abs(o.trace()), 1e-9 * std::max(1.0, max_abs(o))) << k << q;
    }
}

TEST(Stevens, O60MatchesRankSixDiagonal) {
    // independent check: for S = 3 the m = 0 entry of O60 is -5X^3 + 40X^2 - 60X with X = 12
    const double x = 12.0;
    const SpinMatrix o60 = stevens_operator(6, 0, Spin::from_value(3.0));
    EXPECT_NEAR(std::real(o60(3, 3)), -5 * x * x * x + 40 * x * x - 60 * x, 1e-9);
}

TEST(Stevens, Errors) {
    EXPECT_THROW(stevens_operator(2, 1, Spin::from_value(3.5)), UnsupportedOperator);
    EXPECT_THROW(stevens_operator(3, 0, Spin::from_value(3.5)), UnsupportedOperator);
    EXPECT_THROW(stevens_operator(4, 0, Spin::from_value(1.0)), InvalidArgument);
}

TEST(HermitianEig, DiagonalAndPauli) {
    SpinMatrix d = SpinMatrix::Zero(3, 3);
    d.diagonal() << 3.0, 1.0, 2.0;
    const auto e = hermitian_eig(d);
    EXPECT_NEAR(e.values(0), 1.0, 1e-15);
    EXPECT_NEAR(e.values(2), 3.0, 1e-15);
    const auto p = hermitian_eig(spin_matrices(0.5).sx);
    EXPECT_NEAR(p.values(0), -0.5, 1e-15);
    EXPECT_NEAR(p.values(1), 0.5, 1e-15);
}

TEST(HermitianEig, RejectsNonHermitian) {
    SpinMatrix m = SpinMatrix::Zero(2, 2);
    m(0, 1) = 1.0;
    EXPECT_THROW(hermitian_eig(m), InvalidArgument);
}

TEST(HermitianEig, GdHamiltonianReconstruction) {
    const auto gd = preset_gd_cawo4();
    const SpinMatrix h = build_hamiltonian(gd.system, 377.0);
    const auto e = hermitian_eig(h);
    ASSERT_EQ(e.values.size(), 8);
    const double res = max_abs(h * e.vectors - e.vectors * e.values.asDiagonal());
    EXPECT_LT(res, 1e-9 * max_abs(h));
    for (int i = 1; i < 8; ++i) EXPECT_LE(e.values(i - 1), e.values(i));
}

TEST(MatrixExp, IdentityAtZeroAndClosedForm) {
    const auto s = spin_matrices(0.5);
    EXPECT_LT(max_abs(matrix_exp_unitary(s.sz, 0.0) - identity(2)), 1e-15);
    const double f = 3.0, t = 1.0 / (2 * f);
    const SpinMatrix u = matrix_exp_unitary(f * s.sz, t);
    // exp(-i 2 pi f t m) for m = +-1/2 at f t = 1/2: exp(-+ i pi/2)
    EXPECT_LT(std::abs(u(0, 0) - std::exp(-1i * units::pi / 2.0)), 1e-12);
    EXPECT_LT(std::abs(u(1, 1) - std::exp(1i * units::pi / 2.0)), 1e-12);
    EXPECT_LT(std::abs(u(0, 1)), 1e-15);
}

TEST(MatrixExp, UnitaryAndGroupProperty) {
    const Spin s = Spin::from_value(2.5);
    const auto ops = spin_matrices(s);
    const SpinMatrix h = 1.3 * ops.sx + 0.4 * ops.sz * ops.sz - 0.7 * ops.sy;
    const SpinMatrix u1 = matrix_exp_unitary(h, 0.37), u2 = matrix_exp_unitary(h, 0.81);
    EXPECT_LT(max_abs(u1.adjoint() * u1 - identity(6)), 1e-10);
    EXPECT_LT(max_abs(u1 * u2 - matrix_exp_unitary(h, 1.18)), 1e-9);
    SpinVector v = SpinVector::Random(6);
    EXPECT_NEAR((u1 * v).norm(), v.norm(), 1e-10);
}

TEST(Kron, Dimensions) {
    const auto s = spin_matrices(2.5);
    EXPECT_EQ(kron(s.sz, identity(6)).rows(), 36);
}
