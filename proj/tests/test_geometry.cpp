#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "foliate/geometry.hpp"
#include "foliate/sampling.hpp"

using namespace foliate;

namespace {

Vec v4(double a, double b, double c, double d) {
    Vec x(4);
    x << a, b, c, d;
    return x;
}

// Dense sample of the disc for brute-force oracles.
double brute_distance(const TangentBall& t, const Vec& p, int per_axis) {
    const Eigen::MatrixXd basis = complement_basis(t.center());
    double best = std::numeric_limits<double>::infinity();
    const int k = per_axis;
    for (int i = -k; i <= k; ++i)
        for (int j = -k; j <= k; ++j)
            for (int l = -k; l <= k; ++l) {
                Eigen::Vector3d u(i, j, l);
                u *= t.radius() / k;
                if (u.norm() > t.radius()) continue;
                best = std::min(best, (t.center() + basis * u - p).norm());
            }
    return best;
}

}  // namespace

TEST(ComplexCoordinates, RoundTrip) {
    const Vec x = v4(0.1, -0.2, 0.3, 0.4);
    const CVec z = to_complex(x);
    EXPECT_DOUBLE_EQ(z[0].real(), 0.1);
    EXPECT_DOUBLE_EQ(z[0].imag(), -0.2);
    EXPECT_DOUBLE_EQ(z[1].real(), 0.3);
    EXPECT_DOUBLE_EQ(z[1].imag(), 0.4);
    EXPECT_TRUE(to_real(z).isApprox(x));
}

TEST(Shell, RejectsBadRadii) {
    EXPECT_THROW(Shell(0.8, 0.7), ConfigError);
    EXPECT_THROW(Shell(-0.1, 0.7), ConfigError);
    EXPECT_DOUBLE_EQ(Shell(0.75, 0.78125).thickness(), 0.03125);
}

TEST(DistToTangentBall, InteriorPointIsZero) {
    const TangentBall t(v4(0.8, 0, 0, 0), 0.1);
    EXPECT_NEAR(dist_to_tangent_ball(t, v4(0.8, 0.05, 0, 0)), 0.0, 1e-15);
}

TEST(DistToTangentBall, PureNormalOffset) {
    const TangentBall t(v4(0.8, 0, 0, 0), 0.1);
    EXPECT_NEAR(dist_to_tangent_ball(t, v4(0.9, 0, 0, 0)), 0.1, 1e-15);
}

TEST(DistToTangentBall, OffsetPastRimMatchesBruteForce) {
    const TangentBall t(v4(0.8, 0, 0, 0), 0.1);
    const Vec p = v4(0.85, 0.15, 0, 0);
    const double d = dist_to_tangent_ball(t, p);
    EXPECT_NEAR(d, 0.070711, 1e-6);
    // Oracle: nearest point over a dense grid of the disc.
    EXPECT_NEAR(brute_distance(t, p, 60), d, 2e-3);
    EXPECT_LE(d, brute_distance(t, p, 60) + 1e-12);
}

TEST(DistToTangentBall, RandomPointsAgreeWithBruteForce) {
    Rng rng(4);
    std::normal_distribution<double> g;
    for (int trial = 0; trial < 20; ++trial) {
        const Vec c = 0.8 * random_direction(rng, 4);
        const TangentBall t(c, 0.05 + 0.05 * (trial % 3));
        const Vec p = c + 0.1 * Vec::NullaryExpr(4, [&] { return g(rng); });
        const double d = dist_to_tangent_ball(t, p);
        const double b = brute_distance(t, p, 24);
        EXPECT_LE(d, b + 1e-12);
        EXPECT_NEAR(d, b, 0.01);
        EXPECT_NEAR((t.project(p) - p).norm(), d, 1e-12);
    }
}

TEST(OutermostRadius, MatchesSampledBoundary) {
    for (auto [norm, a, expected] : {std::tuple{0.8, 0.1, 0.806226}, std::tuple{0.76, 0.05, 0.761643}}) {
        const TangentBall t(v4(norm, 0, 0, 0), a);
        EXPECT_NEAR(outermost_radius(t), expected, 1e-6);
        double brute = 0.0;
        for (const auto& p : disc_samples(t, 4000)) brute = std::max(brute, p.norm());
        EXPECT_NEAR(brute, outermost_radius(t), 1e-9);
    }
}

TEST(OutermostRadius, DegenerateBall) {
    const TangentBall t(v4(0, 0.7, 0, 0), 0.0);
    EXPECT_DOUBLE_EQ(outermost_radius(t), 0.7);
}

TEST(SegmentDistance, MatchesDenseSampling) {
    Rng rng(9);
    for (int trial = 0; trial < 20; ++trial) {
        const TangentBall t(0.78 * random_direction(rng, 4), 0.04);
        const Vec a = 0.74 * random_direction(rng, 4);
        const Vec b = 0.82 * random_direction(rng, 4);
        double dense = std::numeric_limits<double>::infinity();
        for (int k = 0; k <= 4000; ++k) dense = std::min(dense, dist_to_tangent_ball(t, a + (b - a) * (k / 4000.0)));
        const double d = segment_distance(t, a, b);
        EXPECT_LE(d, dense + 1e-12);
        EXPECT_NEAR(d, dense, 1e-3);
    }
}

TEST(BallDistance, ParallelDiscsOnOneAxis) {
    const TangentBall s(v4(0.77, 0, 0, 0), 0.05);
    const TangentBall t(v4(0.81, 0, 0, 0), 0.05);
    EXPECT_NEAR(ball_distance(s, t), 0.04, 1e-9);
}

TEST(BallDistance, NearlyParallelIntersectingDiscs) {
    // normals 0.01 rad apart; the planes meet about 0.004 from both centers
    const TangentBall s(v4(0.77, 0, 0, 0), 0.02);
    const TangentBall t(Vec(0.77 * v4(1, 0.01, 0, 0).normalized()), 0.02);
    EXPECT_EQ(ball_distance(s, t), 0.0);
    EXPECT_EQ(ball_distance(t, s), 0.0);
}

TEST(BallDistance, MatchesSampledMinimum) {
    // exact point-to-disc distance minimised over a dense grid of the other disc
    Rng rng(41);
    std::uniform_real_distribution<double> rad(0.7, 0.9), size(0.01, 0.15);
    for (int trial = 0; trial < 40; ++trial) {
        const TangentBall s(Vec(rad(rng) * random_direction(rng, 4)), size(rng));
        Vec dir = random_direction(rng, 4);
        if (trial % 2 == 0) dir = (s.normal() + 0.2 * dir).normalized();  // nearby, often overlapping
        const TangentBall t(Vec(rad(rng) * dir), size(rng));
        const Eigen::MatrixXd basis = complement_basis(s.center());
        double sampled = std::numeric_limits<double>::infinity();
        const int k = 12;
        for (int i = -k; i <= k; ++i)
            for (int j = -k; j <= k; ++j)
                for (int l = -k; l <= k; ++l) {
                    Eigen::Vector3d w(i, j, l);
                    w *= s.radius() / k;
                    if (w.norm() > s.radius()) continue;
                    sampled = std::min(sampled, dist_to_tangent_ball(t, Vec(s.center() + basis * w)));
                }
        const double d = ball_distance(s, t);
        EXPECT_LE(d, sampled + 1e-12);
        // 1-Lipschitz: every disc point is within sqrt(3) spacings of a grid point
        EXPECT_NEAR(d, sampled, std::sqrt(3.0) * s.radius() / k);
        EXPECT_NEAR(d, ball_distance(t, s), 1e-12);
    }
}

TEST(ValidateTidy, NestedLevelsPass) {
    std::vector<TangentBall> balls{TangentBall(v4(0.76, 0, 0, 0), 0.05), TangentBall(v4(0, 0.78, 0, 0), 0.05)};
    const auto cert = validate_tidy(balls, Shell(0.75, 0.8));
    ASSERT_EQ(cert.radial_levels.size(), 2u);
    EXPECT_TRUE(cert.nesting_ok[0]);
    EXPECT_LT(outermost_radius(balls[0]), 0.78);
    EXPECT_NEAR(outermost_radius(balls[0]), 0.761643, 1e-6);
}

TEST(ValidateTidy, EqualNormUnequalRadiiRejected) {
    std::vector<TangentBall> balls{TangentBall(v4(0.77, 0, 0, 0), 0.05), TangentBall(v4(0, 0, 0.77, 0), 0.06)};
    try {
        validate_tidy(balls, Shell(0.75, 0.85));
        FAIL() << "expected TidyViolation";
    } catch (const TidyViolation& e) {
        EXPECT_EQ(e.rule(), TidyViolation::Rule::UnequalRadiiOnLevel);
    }
}

TEST(ValidateTidy, SingleBallInsideShell) {
    std::vector<TangentBall> balls{TangentBall(v4(0.77, 0, 0, 0), 0.01)};
    const auto cert = validate_tidy(balls, Shell(0.75, 0.8));
    EXPECT_EQ(cert.radial_levels.size(), 1u);
    EXPECT_DOUBLE_EQ(cert.per_level_radius[0], 0.01);
}

TEST(ValidateTidy, NotNestedRejected) {
    std::vector<TangentBall> balls{TangentBall(v4(0.76, 0, 0, 0), 0.2), TangentBall(v4(0, 0.78, 0, 0), 0.05)};
    try {
        validate_tidy(balls, Shell(0.75, 0.95));
        FAIL() << "expected TidyViolation";
    } catch (const TidyViolation& e) {
        EXPECT_EQ(e.rule(), TidyViolation::Rule::NotNested);
    }
}

TEST(ValidateTidy, OverlapOnOneLevelRejected) {
    std::vector<TangentBall> balls{TangentBall(v4(0.77, 0, 0, 0), 0.02),
                                   TangentBall(Vec(0.77 * v4(1, 0, 0.01, 0).normalized()), 0.02)};
    try {
        validate_tidy(balls, Shell(0.75, 0.8));
        FAIL() << "expected TidyViolation";
    } catch (const TidyViolation& e) {
        EXPECT_EQ(e.rule(), TidyViolation::Rule::SameLevelOverlap);
    }
}

TEST(ValidateTidy, OutsideShellRejected) {
    std::vector<TangentBall> balls{TangentBall(v4(0.77, 0, 0, 0), 0.3)};
    try {
        validate_tidy(balls, Shell(0.75, 0.8));
        FAIL() << "expected TidyViolation";
    } catch (const TidyViolation& e) {
        EXPECT_EQ(e.rule(), TidyViolation::Rule::OutsideShell);
    }
}

TEST(GeometryJson, RoundTrip) {
    const TangentBall t(v4(0.1, 0.2, 0.3, 0.4), 0.05);
    const json j = t;
    const TangentBall back = tangent_ball_from_json(j);
    EXPECT_EQ(back.center(), t.center());
    EXPECT_EQ(back.radius(), t.radius());
    const Shell s(0.5, 0.9);
    const Shell sb = shell_from_json(json(s));
    EXPECT_EQ(sb.inner(), 0.5);
    EXPECT_EQ(sb.outer(), 0.9);
}
