#include "qlasso/geometry.hpp"
#include "qlasso/verify.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace qlasso;

namespace {

Vector vec(std::initializer_list<double> v) {
    Vector out(static_cast<long>(v.size()));
    long i = 0;
    for (double x : v)
        out[i++] = x;
    return out;
}

Vector gaussian(long n, Stream &rng, double scale = 1.0) {
    Vector g(n);
    for (long i = 0; i < n; ++i)
        g[i] = scale * rng.normal();
    return g;
}

} // namespace

TEST(L1Projection, HandExamples) {
    EXPECT_TRUE(project_l1_ball(vec({3, 0}), 1.0).isApprox(vec({1, 0})));
    EXPECT_TRUE(project_l1_ball(vec({1, 1}), 1.0).isApprox(vec({0.5, 0.5})));
    EXPECT_EQ(project_l1_ball(vec({0.3, -0.2}), 1.0), vec({0.3, -0.2}));
    EXPECT_TRUE(project_l1_ball(vec({-2, 0.5, 0}), 1.0).isApprox(vec({-1, 0, 0})));
    EXPECT_THROW(project_l1_ball(vec({1}), 0.0), InvalidSpec);
}

TEST(L1Projection, TiesAtThresholdAreSymmetric) {
    const Vector p = project_l1_ball(vec({2, -2, 2, 0.1}), 3.0);
    EXPECT_NEAR(p[0], 1.0, 1e-15);
    EXPECT_NEAR(p[1], -1.0, 1e-15);
    EXPECT_NEAR(p[2], 1.0, 1e-15);
    EXPECT_EQ(p[3], 0.0);
}

TEST(L1Projection, MatchesFaceEnumerationOracle) {
    Stream rng{1};
    for (int t = 0; t < 400; ++t) {
        const long n = 1 + t % 8;
        const Vector v = gaussian(n, rng, 2.0);
        const double radius = 0.05 + 3 * rng.uniform();
        const Vector p = project_l1_ball(v, radius);
        ASSERT_LE((p - oracle::l1_projection_by_faces(v, radius)).norm(), 1e-6);
        ASSERT_LE(p.lpNorm<1>(), radius + 1e-12);
    }
}

TEST(L1Projection, IdempotentAndFeasible) {
    Stream rng{2};
    for (int t = 0; t < 200; ++t) {
        const Vector v = gaussian(50, rng, 3.0);
        const Vector p = project_l1_ball(v, 5.0);
        EXPECT_LE(p.lpNorm<1>(), 5.0 + 1e-12);
        EXPECT_LE((project_l1_ball(p, 5.0) - p).norm(), 1e-12);
    }
}

TEST(NuclearProjection, HandExamples) {
    const Vector I = vec({1, 0, 0, 1});
    EXPECT_TRUE(project_nuclear_ball(I, 2.0, 2).isApprox(I, 1e-12));
    const Vector p = project_nuclear_ball(vec({3, 0, 0, 0}), 1.0, 2);
    EXPECT_NEAR((p - vec({1, 0, 0, 0})).norm(), 0.0, 1e-12);
    EXPECT_THROW(project_nuclear_ball(vec({1, 2, 3}), 1.0, 2), DimensionMismatch);
    EXPECT_THROW(project_nuclear_ball(I, -1.0, 2), InvalidSpec);
}

TEST(NuclearProjection, DominatesRandomFeasibleCandidates) {
    Stream rng{3};
    const long d = 4;
    const double radius = 2.0;
    const Vector v = gaussian(d * d, rng, 2.0);
    const Vector p = project_nuclear_ball(v, radius, d);
    EXPECT_LE(nuclear_norm(p, d), radius + 1e-9);
    const double dist = (p - v).norm();
    for (long k = 0; k < 100000; ++k) {
        const Vector c = k % 2 == 0 ? oracle::random_nuclear_feasible(d, radius, rng)
                                    : oracle::nearby_nuclear_feasible(p, d, radius, 0.05, rng);
        ASSERT_GE((c - v).norm(), dist - 1e-12);
    }
}

TEST(NuclearProjection, Idempotent) {
    Stream rng{4};
    for (int t = 0; t < 50; ++t) {
        const Vector v = gaussian(25, rng, 2.0);
        const Vector p = project_nuclear_ball(v, 1.5, 5);
        EXPECT_LE((project_nuclear_ball(p, 1.5, 5) - p).norm(), 1e-9);
    }
}

TEST(Projection, Nonexpansive) {
    Stream rng{5};
    for (int k = 0; k < 10000; ++k) {
        const bool nuclear = k % 2 == 1;
        const long n = nuclear ? 9 : 7;
        const Vector u = gaussian(n, rng, 2.0), w = gaussian(n, rng, 2.0);
        const ConstraintSet K =
            nuclear ? ConstraintSet{NuclearBall{1.0, 3}} : ConstraintSet{L1Ball{1.0}};
        ASSERT_LE((project(K, u) - project(K, w)).norm(), (u - w).norm() + 1e-12);
    }
}

TEST(WidthBounds, SparseFormula) {
    // sqrt(2·25·ln 4 + 37.5) = sqrt(106.8147...)
    EXPECT_NEAR(gw_bound_sparse(100, 25), 10.33512, 1e-5);
    EXPECT_NEAR(gw_bound_sparse(40, 40), std::sqrt(60.0), 1e-12);
    // sqrt(2 ln 100 + 1.5) = sqrt(10.71034)
    EXPECT_NEAR(gw_bound_sparse(100, 1), 3.27267, 1e-5);
    EXPECT_THROW(gw_bound_sparse(10, 11), InvalidSpec);
    EXPECT_THROW(gw_bound_sparse(10, 0), InvalidSpec);
}

TEST(WidthBounds, SparseNondecreasingBelowNOverE) {
    for (long n : {50L, 100L, 1000L})
        for (long s = 1; s + 1 <= static_cast<long>(n / std::exp(1.0)); ++s)
            ASSERT_LE(gw_bound_sparse(n, s), gw_bound_sparse(n, s + 1)) << n << "," << s;
}

TEST(WidthBounds, LowRankFormula) {
    EXPECT_NEAR(gw_bound_lowrank(100, 5), 54.77226, 1e-5);
    EXPECT_NEAR(gw_bound_lowrank(1, 1), std::sqrt(6.0), 1e-15);
    EXPECT_NEAR(gw_bound_lowrank(10, 10), std::sqrt(600.0), 1e-12);
    EXPECT_THROW(gw_bound_lowrank(3, 4), InvalidSpec);
}

TEST(DescentDirections, UnconstrainedAreUnitGaussianDirections) {
    Stream a{6}, b{6};
    const Vector x0 = vec({1, -2, 0, 0.5});
    const auto dirs = sample_descent_directions(Unconstrained{}, x0, 100, a);
    ASSERT_EQ(dirs.size(), 100u);
    for (const auto &w : dirs) {
        EXPECT_NEAR(w.norm(), 1.0, 1e-12);
        const Vector g = gaussian(4, b);
        EXPECT_LE((w - g.normalized()).norm(), 1e-12);
    }
}

TEST(DescentDirections, InteriorAnchorBehavesLikeWholeSpace) {
    Stream a{7}, b{7};
    const Vector x0 = vec({1, 0, -1, 0, 0});
    const auto inside = sample_descent_directions(L1Ball{2 * x0.lpNorm<1>()}, x0, 200, a);
    const auto free = sample_descent_directions(Unconstrained{}, x0, 200, b);
    for (std::size_t i = 0; i < inside.size(); ++i)
        EXPECT_LE((inside[i] - free[i]).norm(), 1e-12);
}

TEST(DescentDirections, BoundaryDirectionsAreFeasibleDisplacements) {
    Stream rng{8};
    Vector x0 = Vector::Zero(20);
    x0[2] = 3;
    x0[7] = -1;
    const double radius = x0.lpNorm<1>();
    const auto dirs = sample_descent_directions(L1Ball{radius}, x0, 300, rng);
    for (const auto &w : dirs) {
        EXPECT_NEAR(w.norm(), 1.0, 1e-12);
        // First-order: the ℓ1 norm cannot increase along a descent direction.
        const double slope = w[2] - w[7] + (w.cwiseAbs().sum() - std::abs(w[2]) - std::abs(w[7]));
        EXPECT_LE(slope, 1e-9);
    }
}

TEST(DescentDirections, RejectsInfeasibleAnchor) {
    Stream rng{9};
    EXPECT_THROW(sample_descent_directions(L1Ball{1.0}, vec({2, 0}), 5, rng), InvalidSpec);
}

TEST(SmallBall, IsotropicTallMatrixNearOne) {
    Stream rng{10};
    const long n = 20, m = 50 * n;
    const auto A = sample_measurements(EnsembleKind::gaussian(), m, n, rng);
    const double v = estimate_smallball_inf(A, Unconstrained{}, Vector::Zero(n), 500, rng);
    EXPECT_GE(v, 0.5);
    EXPECT_LE(v, 1.5);
}

TEST(SmallBall, SingleRowCanBeNearZero) {
    Stream rng{11};
    const auto A = sample_measurements(EnsembleKind::gaussian(), 1, 2, rng);
    const double v = estimate_smallball_inf(A, Unconstrained{}, Vector::Zero(2), 2000, rng);
    EXPECT_GE(v, 0.0);
    EXPECT_LT(v, 1e-3 * A.entries.squaredNorm());
}

TEST(SmallBall, IsometryGivesExactlyOne) {
    Stream rng{12};
    const long n = 6;
    MeasurementMatrix A{Matrix(std::sqrt(6.0) * Eigen::MatrixXd::Identity(n, n)),
                        EnsembleKind::gaussian(), 0};
    const double v = estimate_smallball_inf(A, Unconstrained{}, Vector::Zero(n), 100, rng);
    EXPECT_NEAR(v, 1.0, 1e-12);
}

TEST(ConeDiagnostics, SparseAnchorReportsBoundAndPositiveSmallBall) {
    Stream rng{13};
    const auto spec = SignalSpec::sparse(50, 5, 2.0);
    const Vector x0 = gen_sparse_signal(spec, rng);
    const auto A = sample_measurements(EnsembleKind::rademacher(), 400, 50, rng);
    const auto diag = cone_diagnostics(A, L1Ball{x0.lpNorm<1>()}, x0, spec, 200, rng);
    EXPECT_DOUBLE_EQ(diag.width_bound, gw_bound_sparse(50, 5));
    EXPECT_GT(diag.smallball_inf, 0.1);
    EXPECT_EQ(diag.num_directions, 200);
}

TEST(ConeDiagnostics, WidthLowerEstimateBelowBound) {
    Stream rng{14};
    const auto spec = SignalSpec::sparse(100, 10, 1.0);
    const Vector x0 = gen_sparse_signal(spec, rng);
    const double lower = estimate_width_lower(L1Ball{x0.lpNorm<1>()}, x0, 2000, 200, rng);
    EXPECT_GT(lower, 0.0);
    EXPECT_LT(lower, gw_bound_sparse(100, 10));
}
