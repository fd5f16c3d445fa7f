#include "nbmc/linalg.hpp"
#include "oracles.hpp"

#include <gtest/gtest.h>

#include <vector>

namespace nbmc {
namespace {

double orthonormality_error(const DenseMatrix& q) {
    return (q.transpose() * q - DenseMatrix::Identity(q.cols(), q.cols())).norm();
}

double prox_objective(const DenseMatrix& x, const DenseMatrix& z, double lambda) {
    return nuclear_norm(x) + 0.5 / lambda * (x - z).squaredNorm();
}

TEST(MakeMatrix, RowMajorOrder) {
    const std::vector<double> v{1, 2, 3, 4, 5, 6};
    const DenseMatrix m = make_matrix(2, 3, v);
    EXPECT_EQ(m(0, 2), 3);
    EXPECT_EQ(m(1, 0), 4);
}

TEST(MakeMatrix, RejectsNonFiniteAndBadShape) {
    const std::vector<double> v{1, std::nan(""), 3, 4};
    EXPECT_THROW(make_matrix(2, 2, v), std::invalid_argument);
    EXPECT_THROW(make_matrix(3, 2, v), std::invalid_argument);
    EXPECT_THROW(make_matrix(0, 4, v), std::invalid_argument);
}

TEST(Svd, Identity) {
    const auto f = svd(DenseMatrix::Identity(3, 3));
    EXPECT_EQ(f.rank(), 3);
    for (Index i = 0; i < 3; ++i) EXPECT_NEAR(f.singular_values(i), 1.0, 1e-14);
}

TEST(Svd, DiagonalMatrix) {
    DenseMatrix a(2, 2);
    a << 3, 0, 0, 1;
    const auto f = svd(a);
    EXPECT_NEAR(f.singular_values(0), 3.0, 1e-14);
    EXPECT_NEAR(f.singular_values(1), 1.0, 1e-14);
    // Columns are signed unit vectors along the axes.
    EXPECT_NEAR(std::abs(f.u(0, 0)), 1.0, 1e-14);
    EXPECT_NEAR(std::abs(f.u(1, 1)), 1.0, 1e-14);
    EXPECT_NEAR(std::abs(f.v(0, 0)), 1.0, 1e-14);
    EXPECT_NEAR(std::abs(f.v(1, 1)), 1.0, 1e-14);
}

TEST(Svd, RandomFactorsReconstructAndAreOrthonormal) {
    Rng rng(5);
    for (auto [m, n] : {std::pair<Index, Index>{5, 4}, {4, 5}, {7, 7}, {64, 20}}) {
        const DenseMatrix a = oracle::random_matrix(rng, m, n);
        const auto f = svd(a);
        EXPECT_EQ(f.rank(), std::min(m, n));
        EXPECT_LT(orthonormality_error(f.u), 1e-10);
        EXPECT_LT(orthonormality_error(f.v), 1e-10);
        EXPECT_LT((f.reconstruct() - a).norm() / a.norm(), 1e-8);
        for (Index i = 1; i < f.rank(); ++i) EXPECT_GE(f.singular_values(i - 1), f.singular_values(i));
        EXPECT_GE(f.singular_values.minCoeff(), 0.0);
    }
}

TEST(Svd, KeepsZeroSingularValuesButReportsNumericalRank) {
    Rng rng(6);
    const DenseMatrix a = oracle::random_matrix(rng, 6, 2) * oracle::random_matrix(rng, 2, 5);
    const auto f = svd(a);
    EXPECT_EQ(f.rank(), 5);
    EXPECT_EQ(f.numerical_rank(), 2);
}

TEST(Svd, RejectsNonFinite) {
    DenseMatrix a = DenseMatrix::Ones(2, 2);
    a(0, 1) = std::numeric_limits<double>::infinity();
    EXPECT_THROW(svd(a), std::invalid_argument);
}

TEST(Svt, DiagonalSoftThreshold) {
    DenseMatrix z(2, 2);
    z << 3, 0, 0, 1;
    DenseMatrix expected(2, 2);
    expected << 1, 0, 0, 0;
    EXPECT_LT((svt(z, 2.0) - expected).norm(), 1e-12);
}

TEST(Svt, ZeroThresholdIsIdentity) {
    Rng rng(8);
    const DenseMatrix z = oracle::random_matrix(rng, 6, 4);
    EXPECT_LT((svt(z, 0.0) - z).norm(), 1e-10);
}

TEST(Svt, NegativeThresholdThrows) {
    EXPECT_THROW(svt(DenseMatrix::Ones(2, 2), -0.1), std::invalid_argument);
}

TEST(Svt, LargeThresholdGivesZero) {
    Rng rng(9);
    const DenseMatrix z = oracle::random_matrix(rng, 3, 3);
    EXPECT_EQ(svt(z, 100.0).norm(), 0.0);
}

TEST(Svt, MatchesFactoredProxOracle) {
    Rng rng(10);
    const DenseMatrix z = oracle::random_matrix(rng, 4, 3);
    const DenseMatrix ref = oracle::prox_nuclear_als(z, 0.5);
    EXPECT_LT((svt(z, 0.5) - ref).norm(), 1e-6);
}

TEST(Svt, ReportsNuclearNormOfResult) {
    Rng rng(11);
    const DenseMatrix z = oracle::random_matrix(rng, 5, 4);
    const auto res = svt_with_norm(z, 0.3);
    EXPECT_NEAR(res.nuclear_norm, nuclear_norm(res.value), 1e-10);
}

TEST(SvtProperty, ShrinksEverySingularValue) {
    Rng rng(12);
    for (int trial = 0; trial < 20; ++trial) {
        const DenseMatrix z = oracle::random_matrix(rng, 6, 5, -5.0, 5.0);
        const Vector sz = singular_values(z);
        for (double lambda : {0.1, 1.0, 10.0}) {
            const Vector sx = singular_values(svt(z, lambda));
            for (Index i = 0; i < sz.size(); ++i) EXPECT_NEAR(sx(i), std::max(sz(i) - lambda, 0.0), 1e-8);
        }
    }
}

TEST(SvtProperty, OptimalAgainstPerturbations) {
    Rng rng(13);
    for (int trial = 0; trial < 20; ++trial) {
        const DenseMatrix z = oracle::random_matrix(rng, 5, 4);
        const double lambda = 0.5;
        const DenseMatrix x = svt(z, lambda);
        const double best = prox_objective(x, z, lambda);
        for (int p = 0; p < 100; ++p) {
            DenseMatrix dir = oracle::random_matrix(rng, 5, 4);
            dir *= 1e-3 / dir.norm();
            EXPECT_LE(best, prox_objective(x + dir, z, lambda) + 1e-12);
        }
    }
}

TEST(SvtProperty, Nonexpansive) {
    Rng rng(14);
    for (int trial = 0; trial < 50; ++trial) {
        const DenseMatrix z1 = oracle::random_matrix(rng, 5, 4, -3.0, 3.0);
        const DenseMatrix z2 = oracle::random_matrix(rng, 5, 4, -3.0, 3.0);
        const double lambda = 0.2 + rng.uniform();
        EXPECT_LE((svt(z1, lambda) - svt(z2, lambda)).norm(), (z1 - z2).norm() + 1e-12);
    }
}

TEST(SvtProperty, RepeatedSingularValuesNeedNoBasisChoice) {
    // sigma = (2, 2, 1): any basis of the repeated pair gives the same output.
    Rng rng(15);
    const DenseMatrix q1 = oracle::random_matrix(rng, 3, 3).householderQr().householderQ();
    const DenseMatrix q2 = oracle::random_matrix(rng, 3, 3).householderQr().householderQ();
    const Vector sigma = (Vector(3) << 2.0, 2.0, 1.0).finished();
    const DenseMatrix z = q1 * sigma.asDiagonal() * q2.transpose();
    const Vector shrunk = (Vector(3) << 1.5, 1.5, 0.5).finished();
    const DenseMatrix expected = q1 * shrunk.asDiagonal() * q2.transpose();
    EXPECT_LT((svt(z, 0.5) - expected).norm(), 1e-10);
}

TEST(LowRankApprox, FullRankReproducesInput) {
    Rng rng(16);
    const DenseMatrix a = oracle::random_matrix(rng, 6, 4);
    EXPECT_LT((low_rank_approx(a, 4) - a).norm(), 1e-8);
}

TEST(LowRankApprox, EckartYoungTailError) {
    Rng rng(17);
    const DenseMatrix a = oracle::random_matrix(rng, 6, 5);
    const Vector s = singular_values(a);
    const double tail = std::sqrt(s(2) * s(2) + s(3) * s(3) + s(4) * s(4));
    const DenseMatrix approx = low_rank_approx(a, 2);
    EXPECT_NEAR((a - approx).norm(), tail, 1e-8);
    EXPECT_EQ(svd(approx).numerical_rank(), 2);
}

TEST(LowRankApprox, TailFormulaOnRandomShapes) {
    Rng rng(18);
    for (int trial = 0; trial < 10; ++trial) {
        const Index m = 3 + static_cast<Index>(rng.below(8));
        const Index n = 3 + static_cast<Index>(rng.below(8));
        const Index k = 1 + static_cast<Index>(rng.below(static_cast<std::uint64_t>(std::min(m, n))));
        const DenseMatrix a = oracle::random_matrix(rng, m, n);
        const Vector s = singular_values(a);
        EXPECT_NEAR((a - low_rank_approx(a, k)).norm(), s.tail(s.size() - k).norm(), 1e-8);
    }
}

TEST(LowRankApprox, RankOutOfRangeThrows) {
    const DenseMatrix a = DenseMatrix::Ones(3, 4);
    EXPECT_THROW(low_rank_approx(a, 0), std::invalid_argument);
    EXPECT_THROW(low_rank_approx(a, 4), std::invalid_argument);
}

}  // namespace
}  // namespace nbmc
