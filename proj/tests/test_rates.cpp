#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include <monoent/rates.hpp>

using namespace monoent;

TEST(EntropyExponent, Examples) {
    const auto a = entropy_exponent(2, 1);
    EXPECT_EQ(a.alpha, 2.0);
    EXPECT_EQ(a.regime, Regime::subcritical);
    const auto b = entropy_exponent(3, 2);
    EXPECT_EQ(b.alpha, 4.0);
    EXPECT_EQ(b.regime, Regime::supercritical);
    const auto c = entropy_exponent(2, 2);
    EXPECT_EQ(c.alpha, 2.0);
    EXPECT_EQ(c.regime, Regime::critical);
    EXPECT_EQ(entropy_exponent(1, 3).alpha, 1.0);
    EXPECT_EQ(entropy_exponent(1, 3).regime, Regime::subcritical);
}

TEST(EntropyExponent, TableOverDimensionAndExponent) {
    for (int d = 1; d <= 4; ++d) {
        std::vector<double> ps{1.0, 2.0, 3.0};
        if (d > 1) ps.push_back(static_cast<double>(d) / (d - 1));
        for (double p : ps) {
            const auto r = entropy_exponent(d, p);
            const double s = (d - 1) * p - d;
            EXPECT_NEAR(r.alpha, std::max<double>(d, (d - 1) * p), 1e-12) << d << " " << p;
            const Regime expect = std::abs(s) < 1e-9 ? Regime::critical : s < 0 ? Regime::subcritical : Regime::supercritical;
            EXPECT_EQ(r.regime, expect) << d << " " << p;
        }
    }
    // p = 4/3 is not representable; still critical for d = 4
    EXPECT_EQ(classify(4, 4.0 / 3.0), Regime::critical);
    EXPECT_EQ(entropy_exponent(4, 4.0 / 3.0).alpha, 4.0);
}

TEST(EntropyExponent, MonotoneInBothArguments) {
    for (int d = 1; d <= 4; ++d) {
        EXPECT_EQ(entropy_exponent(d, 1).alpha, d);
        double prev = 0;
        for (double p = 1.0; p <= 6.0; p += 0.25) {
            const double a = entropy_exponent(d, p).alpha;
            EXPECT_GE(a, prev);
            prev = a;
            if (d < 4) EXPECT_LE(a, entropy_exponent(d + 1, p).alpha);
            if (d > 1 && p >= static_cast<double>(d) / (d - 1)) EXPECT_NEAR(a, (d - 1) * p, 1e-12);
        }
    }
}

TEST(EntropyExponent, RateDescriptors) {
    const auto sub = entropy_exponent(2, 1);
    EXPECT_DOUBLE_EQ(sub.gap_rate(0.125), 0.125);
    const auto crit = entropy_exponent(2, 2);
    EXPECT_DOUBLE_EQ(crit.gap_rate(0.125), 0.125 * std::pow(std::log(8.0), 0.5));
    EXPECT_DOUBLE_EQ(crit.entropy_rate.log_power, 1.0 + 2.0 / 2.0);
    const auto sup = entropy_exponent(3, 2);
    EXPECT_DOUBLE_EQ(sup.gap_rate.power, 2.5 / 3.0);
    EXPECT_DOUBLE_EQ(sup.entropy_rate.power, -4.0);
    EXPECT_THROW(entropy_exponent(0, 1), DomainError);
    EXPECT_THROW(entropy_exponent(2, 0.9), DomainError);
    EXPECT_THROW(beta_exponent(2, 1.0), DomainError);
}

TEST(BracketingIntegral, NoEntropyTermIsIntervalLength) {
    BracketingIntegralOptions opt;
    opt.c2 = 0.0;
    for (double delta : {0.5, 0.1, 0.01}) EXPECT_DOUBLE_EQ(bracketing_integral(3, delta, 1.0, opt), delta - delta * delta);
    opt.c = 0.5;
    EXPECT_DOUBLE_EQ(bracketing_integral(2, 0.2, 1.0, opt), 0.2 - 0.5 * 0.04);
}

TEST(BracketingIntegral, MatchesClosedFormWithoutTheOne) {
    BracketingIntegralOptions opt;
    opt.include_one = false;
    for (int d = 2; d <= 5; ++d)
        for (double B : {1.0, 2.0})
            for (double delta : {0.5, 0.25, 0.1, 0.03, 0.01, 1e-3}) {
                const double q = bracketing_integral(d, delta, B, opt);
                const double exact = bracketing_integral_closed_form(d, delta, B);
                EXPECT_NEAR(q / exact, 1.0, 1e-6) << d << " " << B << " " << delta;
            }
}

TEST(BracketingIntegral, OrderIsBoundedAlongDyadicDeltas) {
    for (int d = 2; d <= 4; ++d) {
        double lo = 1e300, hi = 0;
        for (int k = 2; k <= 14; ++k) {
            const double delta = std::ldexp(1.0, -k);
            const double r = bracketing_integral(d, delta, 1.0) / bracketing_integral_order(d, delta);
            lo = std::min(lo, r);
            hi = std::max(hi, r);
        }
        EXPECT_GT(lo, 0.0);
        EXPECT_LT(hi / lo, 4.0) << d;
    }
}

TEST(BracketingIntegral, DomainErrors) {
    EXPECT_THROW(bracketing_integral(3, 1.0, 1.0), DomainError);
    EXPECT_THROW(bracketing_integral(3, 0.0, 1.0), DomainError);
    EXPECT_THROW(bracketing_integral(1, 0.5, 1.0), DomainError);
    BracketingIntegralOptions opt;
    opt.c = 3.0;
    EXPECT_THROW(bracketing_integral(3, 0.5, 1.0, opt), DomainError);
}

TEST(RateCheck, DimensionThreeHandArithmetic) {
    const auto r = phi_and_rate_check(3, 256);
    EXPECT_EQ(r.r_n, 2.0);
    EXPECT_EQ(phi_n(3, 256, 0.5), 8.0);
    EXPECT_EQ(r.lhs, 32.0);
    EXPECT_EQ(r.rhs, 16.0);
    EXPECT_EQ(r.ratio, 2.0);
}

TEST(RateCheck, RatioIsTwoAtPerfectEighthPowers) {
    for (std::uint64_t k = 2; k <= 12; ++k) {
        std::uint64_t n = 1;
        for (int i = 0; i < 8; ++i) n *= k;
        const auto r = phi_and_rate_check(3, n);
        EXPECT_EQ(r.r_n, static_cast<double>(k));
        EXPECT_EQ(r.ratio, 2.0) << n;
    }
}

TEST(RateCheck, BoundedForAllSampleSizes) {
    for (std::uint64_t n = 2; n < 5000; n += 7) EXPECT_LE(phi_and_rate_check(3, n).ratio, 4.0);
    for (int d = 4; d <= 5; ++d)
        for (std::uint64_t n : {2ull, 100ull, 12345ull, 1ull << 40}) EXPECT_NEAR(phi_and_rate_check(d, n).ratio, 2.0, 1e-9);
    for (double e = 2; e <= 9; e += 0.5) {
        const auto n = static_cast<std::uint64_t>(std::pow(10.0, e));
        const auto r = phi_and_rate_check(2, n);
        EXPECT_TRUE(std::isfinite(r.ratio));
        EXPECT_GT(r.ratio, 0.0);
        EXPECT_LE(r.ratio, 4.0);
    }
    const auto e4 = phi_and_rate_check(2, static_cast<std::uint64_t>(std::round(std::exp(4.0))));
    EXPECT_TRUE(std::isfinite(e4.ratio));
}

TEST(RateCheck, DomainErrors) {
    EXPECT_THROW(phi_and_rate_check(1, 100), DomainError);
    EXPECT_THROW(phi_and_rate_check(3, 1), DomainError);
    EXPECT_THROW(phi_and_rate_check(2, 2), DomainError);
    EXPECT_NO_THROW(phi_and_rate_check(2, 3));
}

TEST(PredictedMleRate, Examples) {
    EXPECT_DOUBLE_EQ(predicted_mle_rate(3).hellinger_exponent, 1.0 / 8);
    EXPECT_EQ(predicted_mle_rate(3).log_power, 0.0);
    EXPECT_DOUBLE_EQ(predicted_mle_rate(2).hellinger_exponent, 0.25);
    EXPECT_EQ(predicted_mle_rate(2).log_power, 1.0);
    EXPECT_DOUBLE_EQ(predicted_mle_rate(4).minimax_l1_exponent, 1.0 / 6);
    EXPECT_THROW(predicted_mle_rate(1), DomainError);
}

TEST(SlopeFit, ExactPowerLaw) {
    std::vector<std::pair<double, double>> pts;
    for (double s : {0.5, 0.25, 0.125, 0.0625}) pts.emplace_back(s, s * s);
    const auto f = loglog_slope_fit(pts);
    EXPECT_NEAR(f.slope, 2.0, 1e-12);
    EXPECT_NEAR(f.std_error, 0.0, 1e-12);
}

TEST(SlopeFit, ConstantValues) {
    const auto f = loglog_slope_fit({{1, 3}, {2, 3}, {4, 3}});
    EXPECT_NEAR(f.slope, 0.0, 1e-15);
    EXPECT_NEAR(f.intercept, std::log(3.0), 1e-15);
}

TEST(SlopeFit, RecoversPlantedExponentUnderNoise) {
    std::mt19937_64 rng(4);
    std::normal_distribution<double> noise(0.0, 0.01);
    for (double alpha : {1.0, 2.0, 3.0, 4.0})
        for (int rep = 0; rep < 20; ++rep) {
            std::vector<std::pair<double, double>> pts;
            for (int n = 1; n <= 6; ++n) {
                const double eps = std::ldexp(1.0, -n);
                pts.emplace_back(eps, std::pow(eps, -alpha) * (1.0 + noise(rng)));
            }
            const auto f = loglog_slope_fit(pts);
            EXPECT_NEAR(f.slope, -alpha, 0.1);
            EXPECT_LE(std::abs(f.slope + alpha), 6 * f.std_error + 1e-3);
        }
}

TEST(SlopeFit, RejectsBadInput) {
    EXPECT_THROW(loglog_slope_fit({{1, 1}, {2, 2}}), DomainError);
    EXPECT_THROW(loglog_slope_fit({{1, 1}, {2, 0}, {3, 1}}), DomainError);
    EXPECT_THROW(loglog_slope_fit({{1, 1}, {-2, 1}, {3, 1}}), DomainError);
    EXPECT_THROW(loglog_slope_fit({{2, 1}, {2, 2}, {2, 3}}), DomainError);
}

TEST(Quadrature, SimpsonOnPolynomialAndLog) {
    EXPECT_NEAR(adaptive_simpson([](double x) { return x * x * x; }, 0.0, 2.0, 1e-12), 4.0, 1e-12);
    EXPECT_NEAR(integrate_geometric([](double x) { return 1.0 / x; }, 1e-6, 1.0, 1e-10), std::log(1e6), 1e-8);
}
