#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "foliate/polynomial.hpp"
#include "foliate/sampling.hpp"

using namespace foliate;

namespace {

Divisor z1_divisor(int n = 2) {
    Divisor d;
    d.h.push_back(MultiPoly::coordinate(n, 0));
    return d;
}

CVec c2(cplx a, cplx b) {
    CVec z(2);
    z << a, b;
    return z;
}

MultiPoly random_poly(Rng& rng, int n, int degree, double scale) {
    std::normal_distribution<double> g;
    MultiPoly p(n, scale);
    for (const auto& a : MultiPoly::graded_exponents(n, degree)) p.add_term(a, cplx(g(rng), g(rng)) / 4.0);
    return p;
}

// Direct sum of c * prod (z_k / scale)^alpha_k with std::pow, no shared powers.
cplx naive_eval(const MultiPoly& p, const CVec& z) {
    cplx acc = 0.0;
    for (std::size_t i = 0; i < p.term_count(); ++i) {
        cplx m = p.coeff(i);
        const auto a = p.exponent(i);
        for (int k = 0; k < p.dimension(); ++k) m *= std::pow(z[k] / p.scale(), a[static_cast<std::size_t>(k)]);
        acc += m;
    }
    return acc;
}

}  // namespace

TEST(MultiPoly, GradedExponentCount) {
    // binomial(n + d, d) exponents of total degree <= d
    EXPECT_EQ(MultiPoly::graded_exponents(2, 4).size(), 15u);
    EXPECT_EQ(MultiPoly::graded_exponents(3, 2).size(), 10u);
    const auto e = MultiPoly::graded_exponents(2, 3);
    for (std::size_t i = 1; i < e.size(); ++i) EXPECT_LE(e[i - 1][0] + e[i - 1][1], e[i][0] + e[i][1]);
}

TEST(MultiPoly, MatchesNaiveSummation) {
    Rng rng(3);
    for (int trial = 0; trial < 10; ++trial) {
        const MultiPoly p = random_poly(rng, 2, 7, 0.8);
        const CVec z = to_complex(Vec(0.7 * random_direction(rng, 4)));
        EXPECT_LT(std::abs(p.eval(z) - naive_eval(p, z)), 1e-12 * (1.0 + std::abs(p.eval(z))));
    }
}

TEST(MultiPoly, AddTermAccumulatesAndDropsZero) {
    MultiPoly p(2);
    const std::vector<int> a{1, 2};
    p.add_term(a, cplx(1.0, 0.0));
    p.add_term(a, cplx(-1.0, 0.0));
    EXPECT_TRUE(p.is_zero());
    p.add_term(a, cplx(0.0, 2.0));
    EXPECT_EQ(p.degree(), 3);
}

TEST(MultiPoly, JsonRoundTripIsExact) {
    Rng rng(5);
    const MultiPoly p = random_poly(rng, 2, 5, 0.875);
    const MultiPoly q = MultiPoly::from_json(json(p), 2);
    const CVec z = c2(cplx(0.3, -0.1), cplx(0.2, 0.4));
    EXPECT_EQ(p.eval(z), q.eval(z));
    EXPECT_EQ(q.scale(), 0.875);
}

TEST(CandidateMap, ExtendsDivisorWhenWIsZero) {
    const CandidateMap f(z1_divisor(), 2);
    EXPECT_EQ(f.eval(c2(0.3, 0.0))[0], cplx(0.3));
}

TEST(CandidateMap, VanishesOnDivisor) {
    const CandidateMap f(z1_divisor(), 2, {MultiPoly::constant(2, cplx(0.7, -1.3))});
    for (cplx w : {cplx(0.0), cplx(0.5, 0.5), cplx(-0.9, 0.1)}) EXPECT_EQ(f.eval(c2(0.0, w))[0], cplx(0.0));
}

TEST(CandidateMap, QuadraticAnsatzArithmetic) {
    const CandidateMap f(z1_divisor(), 2, {MultiPoly::constant(2, 1.0)});
    const CVec z = c2(0.5, 0.0);
    EXPECT_NEAR(std::abs(f.eval(z)[0] - cplx(0.75)), 0.0, 1e-15);
    // naive: h + h^2 W with W summed term by term
    const cplx h = z[0];
    EXPECT_NEAR(std::abs(f.eval(z)[0] - (h + h * h * naive_eval(f.correction()[0], z))), 0.0, 1e-15);
}

TEST(CandidateMap, JacobianAgreesWithDivisorOnV) {
    const cplx c(0.4, 0.2);
    const CandidateMap f(z1_divisor(), 2, {MultiPoly::constant(2, c)});
    const CVec on_v = c2(0.0, cplx(0.3, 0.1));
    const CMat j = f.jacobian(on_v);
    EXPECT_NEAR(std::abs(j(0, 0) - cplx(1.0)), 0.0, 1e-15);
    EXPECT_NEAR(std::abs(j(0, 1)), 0.0, 1e-15);
    // off V the row is (1 + 2 c z1, 0)
    const CVec off = c2(cplx(0.2, 0.1), 0.3);
    EXPECT_NEAR(std::abs(f.jacobian(off)(0, 0) - (1.0 + 2.0 * c * off[0])), 0.0, 1e-14);
}

TEST(CandidateMap, ZeroCorrectionJacobianIsDh) {
    const CandidateMap f(z1_divisor(), 2);
    Rng rng(1);
    for (int k = 0; k < 5; ++k) {
        const CMat j = f.jacobian(Vec(0.9 * random_direction(rng, 4)));
        EXPECT_EQ(j(0, 0), cplx(1.0));
        EXPECT_EQ(j(0, 1), cplx(0.0));
    }
}

TEST(CandidateMap, JacobianMatchesCentralDifferences) {
    Rng rng(17);
    for (int trial = 0; trial < 10; ++trial) {
        Divisor d;
        d.h.push_back(random_poly(rng, 2, 2, 1.0));
        const CandidateMap f(d, 2, {random_poly(rng, 2, 4, 0.9)});
        const Vec x = 0.6 * random_direction(rng, 4);
        const CMat jac = f.jacobian(x);
        const double h = 1e-5;
        for (int k = 0; k < 2; ++k) {
            // holomorphic: dF/dz_k = dF/dx_{2k}
            Vec xp = x, xm = x;
            xp[2 * k] += h;
            xm[2 * k] -= h;
            const cplx fd = (f.eval(xp)[0] - f.eval(xm)[0]) / (2.0 * h);
            EXPECT_LT(std::abs(fd - jac(0, k)), 1e-6 * std::max(1.0, std::abs(jac(0, k))));
        }
    }
}

TEST(CandidateMap, ExtraFactorGradientMatchesDifferences) {
    Rng rng(23);
    const CandidateMap f(z1_divisor(), 2, {random_poly(rng, 2, 3, 1.0)});
    const CVec z = c2(cplx(0.2, -0.3), cplx(0.1, 0.25));
    CVec grad;
    const cplx v = f.extra_factor_grad(0, z, grad);
    EXPECT_NEAR(std::abs(v - f.extra_factor(z)[0]), 0.0, 1e-14);
    const double h = 1e-6;
    for (int k = 0; k < 2; ++k) {
        CVec zp = z, zm = z;
        zp[k] += h;
        zm[k] -= h;
        const cplx fd = (f.extra_factor(zp)[0] - f.extra_factor(zm)[0]) / (2.0 * h);
        EXPECT_LT(std::abs(fd - grad[k]), 1e-7);
    }
}

TEST(RankMargin, IdentityDivisorIsOne) {
    const CandidateMap f(z1_divisor(), 2);
    const auto pts = ball_samples(500, 4, 0.9, 0.5);
    EXPECT_DOUBLE_EQ(min_rank_margin(f, pts), 1.0);
}

TEST(RankMargin, ConstructedCriticalPoint) {
    // 1 + 2 z1 W = 0 at z1 = 0.5 for W = -1
    const CandidateMap f(z1_divisor(), 2, {MultiPoly::constant(2, -1.0)});
    std::vector<Vec> pts{to_real(c2(0.5, 0.1)), to_real(c2(0.1, 0.1))};
    EXPECT_NEAR(min_rank_margin(f, pts), 0.0, 1e-15);
}

TEST(RankMargin, SampledMinimumConvergesUnderRefinement) {
    Rng rng(31);
    const CandidateMap f(z1_divisor(), 2, {random_poly(rng, 2, 3, 1.0)});
    const double coarse = min_rank_margin(f, ball_samples(10000, 4, 0.5, 0.5));
    const double fine = min_rank_margin(f, ball_samples(40000, 4, 0.5, 0.5, 777));
    EXPECT_LE(std::abs(coarse - fine), 0.05 * std::max(fine, 1e-3));
}

TEST(CauchyEpsilon, PlugIn) {
    EXPECT_DOUBLE_EQ(cauchy_epsilon_from_margin(0.5, 0.70, 0.75, 1.0, 4.0), 0.5 * (0.75 - 0.70) / 8.0);
    EXPECT_NEAR(cauchy_epsilon_from_margin(0.5, 0.70, 0.75, 1.0, 4.0), 0.003125, 1e-15);
}

TEST(CauchyEpsilon, HalvingDominatesForSmallPrevious) {
    for (double prev : {1e-3, 1e-6, 1e-9}) EXPECT_LT(cauchy_epsilon_from_margin(1.0, 0.5, 0.75, prev, 4.0), prev / 2.0);
}

TEST(CauchyEpsilon, ZeroMarginIsAnError) {
    EXPECT_THROW(cauchy_epsilon_from_margin(0.0, 0.5, 0.75, 1.0, 4.0), DegenerateMargin);
    EXPECT_THROW(cauchy_epsilon_from_margin(1.0, 0.8, 0.75, 1.0, 4.0), ConfigError);
}

TEST(EpsilonBudget, HalvingFlags) {
    EpsilonBudget b{{0.1, 0.04, 0.019}};
    EXPECT_TRUE(b.halving_ok());
    b.values.push_back(0.01);
    EXPECT_FALSE(b.halving_ok());
    EXPECT_EQ(b.halving_flags(), (std::vector<bool>{true, true, false}));
}

TEST(Divisor, ProjectionLandsOnV) {
    Divisor d;
    MultiPoly h(2);
    h.add_term(std::vector<int>{1, 0}, 1.0);
    h.add_term(std::vector<int>{0, 2}, 0.5);  // z1 + z2^2 / 2
    d.h.push_back(h);
    const auto z = project_to_divisor(d, c2(cplx(0.05, 0.02), cplx(0.3, -0.1)));
    ASSERT_TRUE(z.has_value());
    EXPECT_LT(d.eval(*z).norm(), 1e-12);
    for (const auto& p : divisor_samples(d, 200, 0.8)) {
        EXPECT_LT(d.eval(to_complex(p)).norm(), 1e-12);
        EXPECT_LE(p.norm(), 0.8 + 1e-12);
    }
}

TEST(CandidateMapJson, RoundTrip) {
    Rng rng(8);
    const CandidateMap f(z1_divisor(), 2, {random_poly(rng, 2, 4, 0.875)});
    const CandidateMap g = candidate_from_json(json(f));
    const CVec z = c2(cplx(0.1, 0.2), cplx(-0.3, 0.4));
    EXPECT_EQ(f.eval(z)[0], g.eval(z)[0]);
    EXPECT_EQ(g.order(), 2);
}
