#include <gtest/gtest.h>

#include <cmath>

#include "foliate/labyrinth.hpp"
#include "foliate/verify.hpp"

using namespace foliate;

namespace {

Vec v4(double a, double b, double c, double d) {
    Vec x(4);
    x << a, b, c, d;
    return x;
}

Divisor z1_divisor() {
    Divisor d;
    d.h.push_back(MultiPoly::coordinate(2, 0));
    return d;
}

TangentLabyrinth manual(std::vector<TangentBall> balls, Shell shell) {
    TangentLabyrinth lab;
    lab.shell = shell;
    lab.components = std::move(balls);
    lab.tidy = validate_tidy(lab.components, shell);
    for (const auto& t : lab.components) {
        const auto& lv = lab.tidy.radial_levels;
        lab.level.push_back(static_cast<int>(std::lower_bound(lv.begin(), lv.end(), t.center_norm() - 1e-9) - lv.begin()));
    }
    return lab;
}

BuildConfig quick_build() {
    BuildConfig cfg;
    cfg.search.restarts = 8;
    cfg.search.roadmap_nodes = 600;
    cfg.search.shortening_sweeps = 40;
    return cfg;
}

}  // namespace

TEST(ReducedRadius, BelowPythagorasBound) {
    const Shell s(0.5, 0.9);
    const double r0 = reduced_outer_radius(s, 0.2, 0.98);
    EXPECT_GT(r0, 0.5);
    EXPECT_LT(r0, std::sqrt(0.25 + 0.01));
    EXPECT_LT(std::sqrt(0.25 + 0.01), 0.509902);
    // diameter bound 2 sqrt(R0^2 - r^2) at R0 = 0.509
    EXPECT_NEAR(2.0 * std::sqrt(0.509 * 0.509 - 0.25), 0.190589, 1e-6);
    EXPECT_LT(2.0 * std::sqrt(r0 * r0 - 0.25), 0.2);
}

TEST(PlaceLevels, ReducedShellStaysInsideR0) {
    const Shell s(0.5, 0.9);
    const double eta = 0.2;
    const double r0 = reduced_outer_radius(s, eta, 0.98);
    const auto lab = place_levels(s, 0.5, r0, 3, eta, 2, quick_build(), 1);
    ASSERT_FALSE(lab.empty());
    for (const auto& t : lab.components) {
        EXPECT_LT(outermost_radius(t), r0);
        EXPECT_LT(t.diameter(), 2.0 * std::sqrt(r0 * r0 - 0.25) + 1e-12);
        EXPECT_LT(t.diameter(), eta);
    }
    EXPECT_NO_THROW(validate_tidy(lab.components, s));
}

TEST(PlaceLevels, TidyForManySeedsAndLevelCounts) {
    const Shell s(0.75, 0.8125);
    for (int levels : {1, 2, 4}) {
        for (std::uint64_t seed = 1; seed <= 4; ++seed) {
            BuildConfig cfg = quick_build();
            cfg.placement = Placement::FullShell;
            const auto lab = place_levels(s, s.inner(), s.outer(), levels, 0.225, 2, cfg, seed);
            const auto cert = validate_tidy(lab.components, s);
            EXPECT_EQ(static_cast<int>(cert.radial_levels.size()), levels);
            for (const auto& t : lab.components) EXPECT_LT(t.diameter(), 0.225);
            for (std::size_t l = 0; l + 1 < cert.radial_levels.size(); ++l) EXPECT_TRUE(cert.nesting_ok[l]);
        }
    }
}

TEST(PlaceLevels, DeterministicInSeed) {
    const Shell s(0.75, 0.8125);
    const auto a = place_levels(s, 0.75, 0.8125, 2, 0.225, 2, quick_build(), 7);
    const auto b = place_levels(s, 0.75, 0.8125, 2, 0.225, 2, quick_build(), 7);
    ASSERT_EQ(a.components.size(), b.components.size());
    for (std::size_t i = 0; i < a.components.size(); ++i) EXPECT_EQ(a.components[i].center(), b.components[i].center());
}

TEST(Build, ZeroDeltaAcceptsOneLevel) {
    const auto lab = build(Shell(0.5, 0.9), 0.0, 0.2, 2, quick_build());
    EXPECT_TRUE(lab.certified);
    EXPECT_EQ(lab.tidy.radial_levels.size(), 1u);
    EXPECT_EQ(lab.history.size(), 1u);
}

TEST(Build, BudgetExceededCarriesHistory) {
    BuildConfig cfg = quick_build();
    cfg.max_components = 400;
    try {
        build(Shell(0.75, 0.78125), 1.0, 0.05625, 2, cfg);
        FAIL() << "expected BuildBudgetExceeded";
    } catch (const BuildBudgetExceeded& e) {
        for (const auto& r : e.rounds()) EXPECT_LE(r.components, cfg.max_components);
    }
}

TEST(Split, DiscThroughDivisorIsLambdaV) {
    const Divisor v = z1_divisor();
    const auto lab = manual({TangentBall(v4(0, 0, 0.77, 0), 0.05)}, Shell(0.75, 0.8));
    const auto sp = split(lab, &v, SplitConfig{});
    EXPECT_EQ(sp.lambda_V, std::vector<std::size_t>{0});
    EXPECT_TRUE(sp.lambda_0.empty());
    EXPECT_LT(sp.min_abs_h[0], 1e-12);
}

TEST(Split, DiscAcrossFromDivisorIsLambda0) {
    const Divisor v = z1_divisor();
    const auto lab = manual({TangentBall(v4(0.77, 0, 0, 0), 0.05)}, Shell(0.75, 0.8));
    const auto sp = split(lab, &v, SplitConfig{});
    EXPECT_EQ(sp.lambda_0, std::vector<std::size_t>{0});
    EXPECT_NEAR(sp.min_abs_h[0], 0.77, 1e-9);
}

TEST(Split, EmptyDivisorPutsEverythingInLambda0) {
    const auto lab = manual({TangentBall(v4(0.77, 0, 0, 0), 0.01), TangentBall(v4(0, 0, 0, 0.77), 0.01)},
                            Shell(0.75, 0.8));
    const auto sp = split(lab, nullptr, SplitConfig{});
    EXPECT_TRUE(sp.lambda_V.empty());
    EXPECT_EQ(sp.lambda_0.size(), 2u);
}

TEST(Split, DiscGrazingDivisorNearItsRim) {
    // V = {z1 = 0} meets this disc only in a thin cap near the rim.
    const Divisor v = z1_divisor();
    const Vec c = v4(-0.044642684801641595, 0.03252714757327466, -0.798220028295273, -0.09896363464799218);
    const TangentBall t(c, 0.056249943749999996);
    for (std::size_t samples : {64u, 256u}) EXPECT_LT(min_abs_on_disc(v, t, samples, 60), 1e-12);
}

TEST(MinAbsOnDisc, NeverBelowTrueMinimum) {
    // A dense grid of the disc can only overestimate the minimum.
    const Divisor v = z1_divisor();
    Rng rng(12);
    for (int trial = 0; trial < 15; ++trial) {
        const TangentBall t(0.8 * random_direction(rng, 4), 0.03 + 0.01 * (trial % 4));
        const double m = min_abs_on_disc(v, t, 128, 60);
        double grid = std::numeric_limits<double>::infinity();
        for (const auto& p : disc_samples(t, 20000)) grid = std::min(grid, std::hypot(p[0], p[1]));
        EXPECT_LE(m, grid + 1e-12);
        EXPECT_GE(m, 0.0);
    }
}

TEST(Inflate, GapBetweenTwoComponents) {
    const auto lab = manual({TangentBall(v4(0.77, 0, 0, 0), 0.05), TangentBall(v4(0.81, 0, 0, 0), 0.05)},
                            Shell(0.75, 0.85));
    const auto sp = split(lab, nullptr, SplitConfig{});
    const auto inf = inflate(sp, lab, nullptr, 0.5, InflateConfig{});
    EXPECT_NEAR(inf.mu, 0.01, 1e-7);
    EXPECT_EQ(inf.limiting_term, "lambda_0 pairwise");
}

TEST(Inflate, SingleComponentLimitedByInnerBall) {
    const auto lab = manual({TangentBall(v4(0.77, 0, 0, 0), 0.05)}, Shell(0.75, 0.85));
    const auto sp = split(lab, nullptr, SplitConfig{});
    const auto inf = inflate(sp, lab, nullptr, 0.7, InflateConfig{});
    EXPECT_NEAR(inf.mu, 0.25 * 0.07, 1e-7);
    EXPECT_EQ(inf.limiting_term, "inner ball");
}

TEST(Inflate, EmptyLambda0GivesEmptyPair) {
    const Divisor v = z1_divisor();
    const auto lab = manual({TangentBall(v4(0, 0, 0.77, 0), 0.05)}, Shell(0.75, 0.8));
    const auto sp = split(lab, &v, SplitConfig{});
    EXPECT_TRUE(inflate(sp, lab, &v, 0.5, InflateConfig{}).empty());
}

TEST(Inflate, TwiceInflatedSetsStayApart) {
    const Divisor v = z1_divisor();
    const auto lab = manual({TangentBall(v4(0.77, 0, 0, 0), 0.02), TangentBall(v4(-0.78, 0, 0, 0), 0.02),
                             TangentBall(v4(0, 0, 0.79, 0), 0.02)},
                            Shell(0.75, 0.82));
    const auto sp = split(lab, &v, SplitConfig{});
    ASSERT_EQ(sp.lambda_0.size(), 2u);
    const auto inf = inflate(sp, lab, &v, 0.7, InflateConfig{});
    // T_{a,2} must miss the inner ball, V and the Lambda_V disc.
    for (auto i : inf.members) {
        const auto& t = lab.components[i];
        EXPECT_GT(t.center_norm() - 2.0 * inf.mu, 0.7);
        EXPECT_GT(min_abs_on_disc(v, t, 256, 60), 2.0 * inf.mu);
        EXPECT_GT(ball_distance(t, lab.components[2]), 2.0 * inf.mu);
    }
}

TEST(Nesting, OneLevelCertificate) {
    const auto lab = manual({TangentBall(v4(0.77, 0, 0, 0), 0.05)}, Shell(0.75, 0.85));
    const auto cert = nesting_order(lab, 0.75);
    ASSERT_EQ(cert.radii.size(), 2u);
    EXPECT_GT(cert.radii[0], 0.75);
    EXPECT_LT(cert.radii[0], 0.77);
    EXPECT_GT(cert.radii[1], 0.761643);
    EXPECT_LT(cert.radii[1], 0.85);
}

TEST(Nesting, TwoLevelsInterleave) {
    const auto lab = manual({TangentBall(v4(0.76, 0, 0, 0), 0.005), TangentBall(v4(0, 0.78, 0, 0), 0.005)},
                            Shell(0.75, 0.8));
    const auto cert = nesting_order(lab, 0.75);
    ASSERT_EQ(cert.radii.size(), 3u);
    EXPECT_LT(0.75, cert.radii[0]);
    EXPECT_LT(cert.radii[0], 0.76);
    EXPECT_LT(std::hypot(0.76, 0.005), cert.radii[1]);
    EXPECT_LT(cert.radii[1], 0.78);
    EXPECT_LT(std::hypot(0.78, 0.005), cert.radii[2]);
}

TEST(Nesting, EmptyLabyrinth) {
    TangentLabyrinth lab;
    EXPECT_TRUE(nesting_order(lab, 0.5).radii.empty());
}

TEST(Nesting, BallReachingFirstLevelFails) {
    const auto lab = manual({TangentBall(v4(0.77, 0, 0, 0), 0.05)}, Shell(0.75, 0.85));
    EXPECT_THROW(nesting_order(lab, 0.78), NoSeparation);
}

TEST(Avoidance, HalfOfMuAndContainment) {
    const auto lab = manual({TangentBall(v4(0.77, 0, 0, 0), 0.02)}, Shell(0.75, 0.8));
    const auto o = avoidance_neighborhood(lab, 0.01);
    EXPECT_DOUBLE_EQ(o.nu, 0.005);
    EXPECT_TRUE(o.contains(v4(0.772, 0.01, 0, 0)));
    EXPECT_FALSE(o.contains(v4(0.79, 0, 0, 0)));
}

TEST(LabyrinthJson, RoundTrip) {
    const auto lab = place_levels(Shell(0.75, 0.8125), 0.75, 0.8125, 2, 0.225, 2, quick_build(), 3);
    const auto back = labyrinth_from_json(json(lab));
    ASSERT_EQ(back.components.size(), lab.components.size());
    EXPECT_EQ(back.level, lab.level);
    EXPECT_EQ(back.components.back().center(), lab.components.back().center());
}
