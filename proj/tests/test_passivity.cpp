#include "passiguard/passivity.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <vector>

using namespace passiguard;

namespace {

PassivityEstimate feed(PassivityEstimator& est, double dt, double t_end, double (*e)(double), double (*y)(double)) {
    const auto n = static_cast<int>(std::lround(t_end / dt));
    for (int k = 0; k <= n; ++k) est.update(e(k * dt), y(k * dt), dt);
    return est.estimate();
}

}  // namespace

TEST(Estimator, ConstantSignals) {
    PassivityEstimator est({1e-9, 0.0, std::nullopt});
    const auto r = feed(est, 0.01, 10.0, [](double) { return 1.0; }, [](double) { return 1.0; });
    EXPECT_NEAR(*r.rho_bar, 1.0, 1e-12);
    EXPECT_NEAR(*r.nu_bar, 1.0, 1e-12);
    EXPECT_NEAR(r.i_ey, 10.0, 1e-9);
}

TEST(Estimator, RatioArithmetic) {
    PassivityEstimator est({1e-9, 0.0, std::nullopt});
    const auto r = feed(est, 0.01, 10.0, [](double) { return 1.0; }, [](double) { return 2.0; });
    EXPECT_NEAR(*r.rho_bar, 0.5, 1e-12);
    EXPECT_NEAR(*r.nu_bar, 2.0, 1e-12);
}

TEST(Estimator, AntiPhaseSine) {
    PassivityEstimator est({1e-9, 0.0, std::nullopt});
    const double dt = 2.0 * std::numbers::pi / 1000.0;
    for (int k = 0; k <= 1000; ++k) est.update(std::sin(k * dt), -std::sin(k * dt), dt);
    EXPECT_NEAR(*est.estimate().rho_bar, -1.0, 1e-12);
    EXPECT_NEAR(*est.estimate().nu_bar, -1.0, 1e-12);
}

TEST(Estimator, UndefinedUntilEnergy) {
    PassivityEstimator est;
    est.update(0.0, 0.0, 0.01);
    est.update(0.0, 0.0, 0.01);
    EXPECT_FALSE(est.estimate().rho_bar);
    EXPECT_FALSE(est.estimate().nu_bar);
    EXPECT_EQ(detect(est.estimate(), {}), Verdict::indeterminate);
}

TEST(Estimator, WarmupGatesDetection) {
    PassivityEstimator est({1e-9, 1.0, std::nullopt});
    for (int k = 0; k <= 50; ++k) est.update(1.0, -1.0, 0.01);
    EXPECT_FALSE(est.estimate().warmed_up);
    EXPECT_EQ(detect(est.estimate(), {}), Verdict::indeterminate);
    for (int k = 0; k <= 60; ++k) est.update(1.0, -1.0, 0.01);
    EXPECT_EQ(detect(est.estimate(), {}), Verdict::both_low);
}

TEST(Estimator, NonFiniteInputFreezes) {
    PassivityEstimator est({1e-9, 0.0, std::nullopt});
    for (int k = 0; k < 10; ++k) est.update(1.0, 1.0, 0.1);
    const double before = *est.estimate().rho_bar;
    est.update(std::nan(""), 1.0, 0.1);
    EXPECT_TRUE(est.estimate().signal_fault);
    est.update(1.0, -5.0, 0.1);
    EXPECT_EQ(*est.estimate().rho_bar, before);
    EXPECT_EQ(detect(est.estimate(), {}), Verdict::indeterminate);
}

// a window at least as long as the run reproduces the cumulative estimate
TEST(Estimator, LongWindowEqualsCumulative) {
    PassivityEstimator cum({1e-9, 0.0, std::nullopt});
    PassivityEstimator win({1e-9, 0.0, 50.0});
    const double dt = 0.01;
    for (int k = 0; k <= 3000; ++k) {
        const double t = k * dt;
        const double e = std::sin(0.7 * t) + 0.3 * std::cos(3.1 * t);
        const double y = 0.5 * std::sin(0.7 * t - 0.4) + 0.1;
        const auto& a = cum.update(e, y, dt);
        const auto& b = win.update(e, y, dt);
        ASSERT_EQ(a.rho_bar.has_value(), b.rho_bar.has_value());
        if (a.rho_bar) {
            ASSERT_EQ(*a.rho_bar, *b.rho_bar) << "t=" << t;
            ASSERT_EQ(*a.nu_bar, *b.nu_bar) << "t=" << t;
        }
    }
}

TEST(Estimator, WindowForgetsOldData) {
    PassivityEstimator est({1e-9, 0.0, 1.0});
    for (int k = 0; k <= 500; ++k) est.update(1.0, -1.0, 0.01);
    for (int k = 0; k <= 200; ++k) est.update(1.0, 1.0, 0.01);
    EXPECT_NEAR(*est.estimate().rho_bar, 1.0, 1e-9);
}

TEST(Estimator, ConfigValidation) {
    EXPECT_THROW(PassivityEstimator({0.0, 1.0, std::nullopt}), std::invalid_argument);
    EXPECT_THROW(PassivityEstimator({1e-9, -1.0, std::nullopt}), std::invalid_argument);
    EXPECT_THROW(PassivityEstimator({1e-9, 1.0, 0.0}), std::invalid_argument);
}

struct DetectCase {
    double rho;
    double nu;
    Verdict expected;
};

class DetectRegions : public ::testing::TestWithParam<DetectCase> {};

TEST_P(DetectRegions, Classify) {
    const auto c = GetParam();
    PassivityEstimate est;
    est.rho_bar = c.rho;
    est.nu_bar = c.nu;
    est.warmed_up = true;
    EXPECT_EQ(detect(est, {-0.15, -0.15, 0.05}), c.expected);
    EXPECT_EQ(classify(c.rho, c.nu, {-0.15, -0.15, 0.05}), c.expected);
}

INSTANTIATE_TEST_SUITE_P(Table, DetectRegions,
                         ::testing::Values(DetectCase{-0.2, 0.5, Verdict::rho_low},
                                           DetectCase{0.9, 0.9, Verdict::nominal},
                                           DetectCase{-0.2, -0.3, Verdict::both_low},
                                           DetectCase{0.4, -0.16, Verdict::nu_low},
                                           DetectCase{-0.15, -0.15, Verdict::nominal}));

TEST(Detect, IndeterminateWithoutEstimate) {
    PassivityEstimate est;
    est.warmed_up = true;
    est.rho_bar = -1.0;
    EXPECT_EQ(detect(est, {}), Verdict::indeterminate);
}

TEST(Dissipativity, IdentityTraceIsPassive) {
    std::vector<double> u(101);
    for (std::size_t i = 0; i < u.size(); ++i) u[i] = std::sin(0.1 * static_cast<double>(i));
    const double r = verify_dissipativity(u, u, 0.1, 0.0, 0.0);
    double uu = 0.0;
    for (std::size_t i = 1; i < u.size(); ++i) uu += 0.05 * (u[i - 1] * u[i - 1] + u[i] * u[i]);
    EXPECT_NEAR(r, uu, 1e-12);
    EXPECT_GE(r, 0.0);
}

TEST(Dissipativity, ConstantIntegrand) {
    const std::vector<double> one(1001, 1.0);
    EXPECT_NEAR(verify_dissipativity(one, one, 0.01, 0.5, 0.5), 2.5, 1e-12);
}

TEST(Dissipativity, ReducesToEstimatorIntegral) {
    PassivityEstimator est({1e-9, 0.0, std::nullopt});
    std::vector<double> u, y;
    for (int k = 0; k <= 800; ++k) {
        const double t = k * 0.01;
        u.push_back(std::cos(1.3 * t));
        y.push_back(std::sin(0.4 * t) - 0.2);
        est.update(u.back(), y.back(), 0.01);
    }
    EXPECT_NEAR(verify_dissipativity(u, y, 0.01, 0.0, 0.0), est.estimate().i_ey, 1e-12);
}

TEST(Dissipativity, RejectsMismatchedTraces) {
    const std::vector<double> a(3, 1.0), b(4, 1.0);
    EXPECT_THROW(verify_dissipativity(a, b, 0.1, 0.0, 0.0), std::invalid_argument);
}
