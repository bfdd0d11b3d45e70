#include "passiguard/plants.hpp"
#include "passiguard/reconfig.hpp"

#include <gtest/gtest.h>

using namespace passiguard;

namespace {

const Thresholds kTh{-0.15, -0.15, 0.05};
constexpr double kGamma = 1.37;

PassivityEstimate estimate(double rho, double nu) {
    PassivityEstimate e;
    e.rho_bar = rho;
    e.nu_bar = nu;
    e.warmed_up = true;
    return e;
}

}  // namespace

TEST(CompensationTarget, Arithmetic) {
    EXPECT_DOUBLE_EQ(compensation_target(0.05, -0.2), 0.25);
    EXPECT_DOUBLE_EQ(compensation_target(0.05, 0.0), 0.05);
    // a watermark above eps never asks for less than eps
    EXPECT_DOUBLE_EQ(compensation_target(0.05, 0.3), 0.05);
}

TEST(Tick, RhoLowDesignsIfp) {
    ReconfigState st;
    const auto out = tick(st, estimate(-0.2, 0.5), kTh, kGamma, 40.0);
    EXPECT_EQ(out.verdict, Verdict::rho_low);
    EXPECT_EQ(out.action, Action::compensate_ifp);
    ASSERT_TRUE(out.proposal);
    EXPECT_EQ(out.proposal->kind, WrapperCase::ifp);
    EXPECT_DOUBLE_EQ(*out.proposal->nu_target, 0.05 + 0.2);
    EXPECT_GT(*out.proposal->nu_claim + -0.2, 0.05);
    EXPECT_DOUBLE_EQ(st.rho_min, -0.2);
    EXPECT_EQ(st.nu_min, std::numeric_limits<double>::infinity());
    ASSERT_EQ(st.fault_log.size(), 1u);
    EXPECT_EQ(st.fault_log[0].action, Action::compensate_ifp);
}

TEST(Tick, AboveWatermarkIsAlreadyCompensated) {
    ReconfigState st;
    tick(st, estimate(-0.2, 0.5), kTh, kGamma, 40.0);
    const auto out = tick(st, estimate(-0.18, 0.5), kTh, kGamma, 40.001);
    EXPECT_EQ(out.action, Action::already_compensated);
    EXPECT_FALSE(out.proposal);
    EXPECT_DOUBLE_EQ(st.rho_min, -0.2);
    // verdict did not change, nothing more logged
    EXPECT_EQ(st.fault_log.size(), 1u);
}

TEST(Tick, NuLowDesignsOfp) {
    ReconfigState st;
    const auto out = tick(st, estimate(0.4, -0.3), kTh, kGamma, 1.0);
    EXPECT_EQ(out.action, Action::compensate_ofp);
    EXPECT_EQ(out.proposal->kind, WrapperCase::ofp);
    EXPECT_DOUBLE_EQ(*out.proposal->rho_target, 0.05 + 0.3);
    EXPECT_DOUBLE_EQ(st.nu_min, -0.3);
}

TEST(Tick, BothLowDesignsIfofp) {
    ReconfigState st;
    const auto out = tick(st, estimate(-0.2, -0.3), kTh, kGamma, 1.0);
    EXPECT_EQ(out.action, Action::compensate_ifofp);
    EXPECT_EQ(out.proposal->kind, WrapperCase::ifofp);
    // OFP level answers nu_bar, IFP level answers rho_bar
    EXPECT_DOUBLE_EQ(*out.proposal->rho_target, 0.35);
    EXPECT_DOUBLE_EQ(*out.proposal->nu_target, 0.25);
    EXPECT_DOUBLE_EQ(st.rho_min, -0.2);
    EXPECT_DOUBLE_EQ(st.nu_min, -0.3);
}

TEST(Tick, BothLowKeepsLowerWatermark) {
    ReconfigState st;
    tick(st, estimate(-0.5, 0.5), kTh, kGamma, 1.0);
    const auto out = tick(st, estimate(-0.2, -0.3), kTh, kGamma, 2.0);
    EXPECT_EQ(out.action, Action::compensate_ifofp);
    EXPECT_DOUBLE_EQ(st.rho_min, -0.5);
    EXPECT_DOUBLE_EQ(*out.proposal->nu_target, 0.55);
}

TEST(Tick, WatermarksAreMonotone) {
    ReconfigState st;
    double last_rho = st.rho_min, last_nu = st.nu_min;
    const double seq[][2] = {{-0.2, 0.5}, {-0.3, 0.5}, {-0.25, -0.2}, {0.1, -0.4}, {-0.6, -0.1}, {0.3, 0.3}};
    for (int i = 0; i < 6; ++i) {
        tick(st, estimate(seq[i][0], seq[i][1]), kTh, kGamma, i);
        EXPECT_LE(st.rho_min, last_rho);
        EXPECT_LE(st.nu_min, last_nu);
        last_rho = st.rho_min;
        last_nu = st.nu_min;
    }
}

TEST(Tick, BranchesAreExclusive) {
    for (auto [rho, nu] : {std::pair{-0.2, 0.5}, std::pair{0.5, -0.2}, std::pair{-0.2, -0.2}}) {
        ReconfigState st;
        const auto out = tick(st, estimate(rho, nu), kTh, kGamma, 0.0);
        int synthesized = 0;
        for (auto a : {Action::compensate_ifp, Action::compensate_ofp, Action::compensate_ifofp})
            synthesized += out.action == a;
        EXPECT_EQ(synthesized, 1);
        EXPECT_EQ(st.fault_log.size(), 1u);
    }
}

TEST(Tick, NominalForever) {
    ReconfigState st;
    for (int i = 0; i < 100; ++i) {
        const auto out = tick(st, estimate(0.9, 0.9), kTh, kGamma, i);
        EXPECT_EQ(out.action, Action::none);
    }
    EXPECT_EQ(st.current.kind, WrapperCase::identity);
    EXPECT_TRUE(st.fault_log.empty());
}

TEST(Tick, ManualOverrideOnlyMonitors) {
    ReconfigState st;
    st.manual_override = true;
    const auto out = tick(st, estimate(-0.2, -0.3), kTh, kGamma, 1.0);
    EXPECT_EQ(out.action, Action::monitor_only);
    EXPECT_FALSE(out.proposal);
    tick(st, estimate(-0.4, -0.5), kTh, kGamma, 2.0);
    EXPECT_EQ(st.fault_log.size(), 1u);
    EXPECT_EQ(st.rho_min, std::numeric_limits<double>::infinity());
}

TEST(Tick, PositiveThresholdsStillDesign) {
    const Thresholds th{0.1, 0.95, 0.05};
    ReconfigState st;
    const auto out = tick(st, estimate(0.3, 0.6), th, kGamma, 1.0);
    EXPECT_EQ(out.action, Action::compensate_ofp);
    EXPECT_DOUBLE_EQ(*out.proposal->rho_target, 0.05);
}

TEST(Install, RefusesIllPosedWrapper) {
    Reference r;
    // controller with unit feedthrough: m11 + m12 = 0 is singular
    auto loop = wire_wrapped(plant_ex1({}), StateSpaceModel::static_gain(1.0), Wrapper{}, r);
    ReconfigState st;
    MMatrix bad;
    bad.m = {1.0, -1.0, 0.0, 1.0};
    EXPECT_FALSE(install(loop, st, bad, 3.0));
    EXPECT_EQ(loop.wrapper(), Wrapper{});
    ASSERT_EQ(st.fault_log.size(), 1u);
    EXPECT_EQ(st.fault_log[0].action, Action::install_refused);
    EXPECT_TRUE(st.installs.empty());
}

TEST(Install, AcceptsDesign) {
    Reference r;
    auto loop = wire_wrapped(plant_ex1({}), tf_to_ss(ex1_controller_tf()), Wrapper{}, r);
    ReconfigState st;
    const MMatrix mm = design_ofp(kGamma, 0.3);
    EXPECT_TRUE(install(loop, st, mm, 40.0));
    EXPECT_EQ(loop.wrapper(), mm.m);
    ASSERT_EQ(st.installs.size(), 1u);
    EXPECT_EQ(st.installs[0].t, 40.0);
}
