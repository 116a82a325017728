#include <gtest/gtest.h>

#include <random>

#include "oracles.hpp"
#include "ragattack/errors.hpp"
#include "ragattack/stats.hpp"

using namespace ragattack;

TEST(TTest, DiffsOneTwoThree) {
    std::vector<double> before{0, 0, 0}, after{1, 2, 3};
    auto s = paired_ttest(before, after);
    EXPECT_DOUBLE_EQ(s.mean_diff, 2.0);
    EXPECT_NEAR(s.std_error, 0.57735, 1e-5);
    EXPECT_NEAR(s.t_stat, 3.4641, 1e-4);
    EXPECT_NEAR(s.p_value, 0.0742, 1e-3);
    EXPECT_NEAR(s.ci_low, -0.4841, 1e-3);
    EXPECT_NEAR(s.ci_high, 4.4841, 1e-3);
    EXPECT_EQ(s.n, 3u);
    EXPECT_FALSE(s.degenerate);
}

TEST(TTest, IdenticalListsDegenerate) {
    std::vector<double> a{1, 2, 3};
    auto s = paired_ttest(a, a);
    EXPECT_TRUE(s.degenerate);
    EXPECT_EQ(s.mean_diff, 0.0);
    EXPECT_EQ(s.p_value, 1.0);
}

TEST(TTest, ConstantShiftDegenerate) {
    std::vector<double> a{1, 2, 3}, b{3, 4, 5};
    auto s = paired_ttest(a, b);
    EXPECT_TRUE(s.degenerate);
    EXPECT_EQ(s.p_value, 0.0);
    EXPECT_TRUE(std::isinf(s.t_stat));
    EXPECT_TRUE(to_json(s)["t_stat"].is_null());
}

TEST(TTest, InvalidInputs) {
    std::vector<double> one{1}, two{1, 2};
    EXPECT_THROW(paired_ttest(one, one), InvalidInputError);
    EXPECT_THROW(paired_ttest(one, two), InvalidInputError);
}

TEST(TTest, MatchesReferenceOnRandomFixtures) {
    std::mt19937_64 rng(99);
    for (int trial = 0; trial < 100; ++trial) {
        std::size_t n = 2 + rng() % 60;
        std::normal_distribution<double> noise(0.0, 0.5 + (rng() % 10));
        double shift = std::uniform_real_distribution<double>(-2, 2)(rng);
        std::vector<double> a(n), b(n);
        for (std::size_t i = 0; i < n; ++i) {
            a[i] = noise(rng);
            b[i] = a[i] + shift + noise(rng);
        }
        auto s = paired_ttest(a, b);
        auto ref = oracle::paired(a, b);
        EXPECT_NEAR(s.mean_diff, ref.mean, 1e-9);
        EXPECT_NEAR(s.std_error, ref.se, 1e-9);
        EXPECT_NEAR(s.p_value, ref.p, 1e-6) << n;
        EXPECT_NEAR(s.ci_low, ref.lo, 1e-6) << n;
        EXPECT_NEAR(s.ci_high, ref.hi, 1e-6) << n;
    }
}

TEST(Distribution, CdfAndQuantileAgainstBoost) {
    for (double df : {1.0, 2.0, 3.5, 10.0, 99.0, 1000.0}) {
        boost::math::students_t dist(df);
        for (double t : {-30.0, -4.0, -1.0, -0.1, 0.0, 0.5, 2.0, 8.0}) EXPECT_NEAR(student_t_cdf(t, df), boost::math::cdf(dist, t), 1e-10);
        for (double p : {0.001, 0.025, 0.3, 0.5, 0.9, 0.975, 0.999})
            EXPECT_NEAR(student_t_quantile(p, df), boost::math::quantile(dist, p), 1e-7 * std::max(1.0, std::fabs(boost::math::quantile(dist, p))));
    }
}

TEST(Distribution, IncompleteBetaEdges) {
    EXPECT_EQ(incomplete_beta(2, 3, 0.0), 0.0);
    EXPECT_EQ(incomplete_beta(2, 3, 1.0), 1.0);
    EXPECT_NEAR(incomplete_beta(1, 1, 0.3), 0.3, 1e-14);
    EXPECT_NEAR(incomplete_beta(2, 2, 0.5), 0.5, 1e-14);
}
