#include "passiguard/scenario.hpp"

#include <gtest/gtest.h>

#include <sstream>

using namespace passiguard;

namespace {

std::string bundled(const std::string& name) { return std::string(PASSIGUARD_SCENARIO_DIR) + "/" + name + ".cfg"; }

const char* kMinimal = R"(
[plant]
kind = ex1
[controller]
num = 1.37 1.2467
den = 1 1.08
)";

std::string csv_of(const RunLog& log) {
    std::ostringstream out;
    write_run_csv(out, log);
    write_events_csv(out, log.events);
    return out.str();
}

template <class Fn>
std::string error_of(Fn&& fn) {
    try {
        fn();
    } catch (const ConfigError& e) {
        return e.what();
    }
    return {};
}

}  // namespace

TEST(ConfigDocument, ParsesSectionsAndComments) {
    const auto doc = ConfigDocument::parse("# top\n[a]\nx = 1 ; trailing\n y=two words \n\n[b]\nx = 3\n");
    const auto& e = doc.entries();
    ASSERT_EQ(e.size(), 3u);
    EXPECT_EQ(e.at("a.x").value, "1");
    EXPECT_EQ(e.at("a.y").value, "two words");
    EXPECT_EQ(e.at("b.x").line, 7);
}

TEST(ConfigDocument, Diagnostics) {
    EXPECT_NE(error_of([] { ConfigDocument::parse("[a]\nx = 1\nx = 2\n"); }).find("line 3"), std::string::npos);
    EXPECT_NE(error_of([] { ConfigDocument::parse("[a]\njunk\n"); }).find("line 2"), std::string::npos);
    EXPECT_NE(error_of([] { ConfigDocument::parse("x = 1\n"); }).find("outside"), std::string::npos);
    EXPECT_NE(error_of([] { ConfigDocument::parse("[a\n"); }).find("unterminated"), std::string::npos);
}

TEST(ConfigDocument, OverrideAliases) {
    auto doc = ConfigDocument::parse("[run]\nmitigation = on\n");
    doc.set("mitigation=off");
    doc.set("solver.dt = 0.01");
    EXPECT_EQ(doc.entries().at("run.mitigation").value, "off");
    EXPECT_EQ(doc.entries().at("solver.dt").value, "0.01");
    EXPECT_THROW(doc.set("bogus=1"), ConfigError);
    EXPECT_THROW(doc.set("no-equals"), ConfigError);
}

TEST(LoadScenario, EmptyFileIsSchemaError) {
    EXPECT_NE(error_of([] { load_scenario(std::string()); }).find("plant.kind"), std::string::npos);
}

TEST(LoadScenario, UnknownKeyRejectedWithLine) {
    const std::string text = std::string(kMinimal) + "[thresholds]\nrho_0 = -0.15\n";
    const std::string msg = error_of([&] { load_scenario(text); });
    EXPECT_NE(msg.find("unknown key 'thresholds.rho_0'"), std::string::npos) << msg;
    EXPECT_NE(msg.find("line 8"), std::string::npos) << msg;
}

TEST(LoadScenario, BadValues) {
    EXPECT_THROW(load_scenario(std::string(kMinimal) + "[solver]\ndt = fast\n"), ConfigError);
    EXPECT_THROW(load_scenario(std::string(kMinimal) + "[solver]\nmethod = midpoint\n"), ConfigError);
    EXPECT_THROW(load_scenario(std::string(kMinimal) + "[run]\nmitigation = maybe\n"), ConfigError);
    EXPECT_THROW(load_scenario(std::string(kMinimal) + "[fault]\nkind = dynamics_swap\n"), ConfigError);
    EXPECT_THROW(load_scenario("[plant]\nkind = ex1\n[controller]\nnum = 1 0 0\nden = 1 1\n"), ConfigError);
    EXPECT_THROW(load_scenario("[plant]\nkind = ex1\n"), ConfigError);
}

TEST(LoadScenario, FaultMustEndBeforeRun) {
    const std::string text = std::string(kMinimal) +
                             "[fault]\nkind = input_delay_ramp\nt_start = 35\nt_full = 40\nmagnitude = 0.5\n"
                             "[solver]\nt_end = 30\n";
    EXPECT_THROW(load_scenario(text), ConfigError);
}

TEST(LoadScenario, Ex1Bundle) {
    const Scenario s = load_scenario_file(bundled("ex1_delay"));
    EXPECT_EQ(s.plant, PlantKind::ex1);
    EXPECT_EQ(s.controller.num, (std::vector<double>{1.37, 1.2467}));
    EXPECT_EQ(s.controller.den, (std::vector<double>{1.0, 1.08}));
    EXPECT_EQ(s.fault.kind, FaultKind::input_delay_ramp);
    EXPECT_EQ(s.fault.t_start, 35.0);
    EXPECT_EQ(s.fault.t_full, 40.0);
    EXPECT_EQ(s.fault.magnitude, 0.5);
}

TEST(LoadScenario, Ex3Bundle) {
    const Scenario s = load_scenario_file(bundled("ex3_spring"));
    EXPECT_EQ(s.plant, PlantKind::ex3);
    EXPECT_EQ(s.spring.m, 2.0);
    EXPECT_EQ(s.spring.c, 3.0);
    EXPECT_EQ(s.spring.k, 10.0);
    EXPECT_EQ(s.controller.num, (std::vector<double>{4.8, 14.4288}));
    EXPECT_EQ(s.controller.den, (std::vector<double>{1.0, 2.485}));
    EXPECT_EQ(s.fault.kind, FaultKind::spring_softening);
    EXPECT_EQ(s.fault.t_start, 40.0);
    EXPECT_EQ(s.fault.t_full, 50.0);
    EXPECT_EQ(s.fault.magnitude, -1.0);
    EXPECT_EQ(s.thresholds.rho0, -0.15);
    EXPECT_EQ(s.thresholds.nu0, -0.15);
}

TEST(LoadScenario, Ex1AndEx2ShareParameters) {
    const Scenario a = load_scenario_file(bundled("ex1_delay"));
    const Scenario b = load_scenario_file(bundled("ex2_nonlinear"));
    EXPECT_EQ(a.thresholds.rho0, b.thresholds.rho0);
    EXPECT_EQ(a.thresholds.nu0, b.thresholds.nu0);
    EXPECT_EQ(a.thresholds.eps_margin, b.thresholds.eps_margin);
    EXPECT_EQ(a.estimator.window, b.estimator.window);
    EXPECT_EQ(a.estimator.warmup, b.estimator.warmup);
    EXPECT_EQ(a.reference.amplitude, b.reference.amplitude);
    EXPECT_EQ(a.reference.period, b.reference.period);
    EXPECT_EQ(a.controller.num, b.controller.num);
    EXPECT_EQ(a.design.ifp_slack, b.design.ifp_slack);
    EXPECT_EQ(a.design.ofp_slack, b.design.ofp_slack);
    EXPECT_EQ(a.design.ifofp_rho_boost, b.design.ifofp_rho_boost);
}

TEST(LoadScenario, CanonicalRoundTrip) {
    for (const char* name : {"ex1_delay", "ex2_nonlinear", "ex3_spring"}) {
        const Scenario s = load_scenario_file(bundled(name));
        const Scenario again = load_scenario(to_config(s));
        EXPECT_EQ(to_config(s), to_config(again)) << name;
        EXPECT_EQ(scenario_hash(s), scenario_hash(again)) << name;
    }
}

TEST(LoadScenario, OverrideRoundTrip) {
    const Scenario s = load_scenario(kMinimal, {"estimator.window=2.5", "rho0=-0.3", "design.ofp_slack=4"});
    EXPECT_EQ(*s.estimator.window, 2.5);
    EXPECT_EQ(s.thresholds.rho0, -0.3);
    EXPECT_EQ(s.design.ofp_slack, 4.0);
    const Scenario again = load_scenario(to_config(s));
    EXPECT_EQ(scenario_hash(s), scenario_hash(again));
    EXPECT_NE(scenario_hash(s), scenario_hash(load_scenario(kMinimal)));
    EXPECT_FALSE(load_scenario(kMinimal, {"window=none"}).estimator.window);
}

TEST(Run, NominalOnlyHasNoReconfiguration) {
    const Scenario s = load_scenario(kMinimal, {"solver.t_end=30"});
    const RunLog log = run(s);
    const Summary sum = report(log);
    EXPECT_EQ(sum.reconfigurations, 0u);
    EXPECT_FALSE(sum.diverged);
    EXPECT_TRUE(log.events.empty());
    EXPECT_EQ(log.rows.size(), s.solver.steps() + 1);
}

TEST(Run, ZeroMagnitudeFaultIsSilent) {
    const RunLog log = run(load_scenario_file(bundled("ex1_delay"), {"fault.magnitude=0", "solver.t_end=60"}));
    EXPECT_TRUE(log.events.empty());
    EXPECT_TRUE(log.installs.empty());
    for (const auto& r : log.rows) ASSERT_EQ(r.m, Wrapper{});
}

TEST(Run, DeterministicCsv) {
    const Scenario s = load_scenario_file(bundled("ex1_delay"), {"solver.t_end=45"});
    EXPECT_EQ(csv_of(run(s)), csv_of(run(s)));
}

TEST(Run, OffAndOnAgreeBeforeFirstFault) {
    for (const char* name : {"ex1_delay", "ex2_nonlinear", "ex3_spring"}) {
        const RunLog off = run(load_scenario_file(bundled(name), {"mitigation=off"}));
        const RunLog on = run(load_scenario_file(bundled(name), {"mitigation=on"}));
        const double until = on.installs.empty() ? on.rows.back().t : on.installs.front().t;
        const std::size_t n = std::min(off.rows.size(), on.rows.size());
        for (std::size_t i = 0; i < n && on.rows[i].t <= until; ++i) {
            ASSERT_EQ(off.rows[i].y, on.rows[i].y) << name << " t=" << on.rows[i].t;
            ASSERT_EQ(off.rows[i].u, on.rows[i].u) << name << " t=" << on.rows[i].t;
            ASSERT_EQ(off.rows[i].verdict, on.rows[i].verdict) << name << " t=" << on.rows[i].t;
        }
    }
}

TEST(Run, Ex1Contrast) {
    const RunLog off = run(load_scenario_file(bundled("ex1_delay"), {"mitigation=off"}));
    const Summary s_off = report(off);
    ASSERT_TRUE(s_off.diverged);
    EXPECT_LT(*s_off.divergence_time, 120.0);
    EXPECT_TRUE(off.rows.back().diverged);

    const Summary s_on = report(run(load_scenario_file(bundled("ex1_delay"), {"mitigation=on"})));
    EXPECT_FALSE(s_on.diverged);
    EXPECT_LE(s_on.sup_y, 20.0);
    EXPECT_GE(s_on.reconfigurations, 1u);
    ASSERT_TRUE(s_on.first_fault_time);
    EXPECT_GE(*s_on.first_fault_time, 35.0);
    EXPECT_LE(*s_on.first_fault_time, 45.0);
}

TEST(Report, SummaryText) {
    const RunLog log = run(load_scenario_file(bundled("ex1_delay"), {"mitigation=off"}));
    const std::string text = format_summary(report(log), log);
    EXPECT_NE(text.find("diverged: yes"), std::string::npos);
    EXPECT_NE(text.find("scenario_hash = "), std::string::npos);
}

TEST(Report, CsvHeaders) {
    RunLog log;
    std::ostringstream a, b;
    write_run_csv(a, log);
    write_events_csv(b, log.events);
    EXPECT_EQ(a.str(), "t,r,e,y,u,rho_bar,nu_bar,verdict,m11,m12,m21,m22,diverged\n");
    EXPECT_EQ(b.str(), "t,verdict,rho_bar,nu_bar,action,m11,m12,m21,m22\n");
}
