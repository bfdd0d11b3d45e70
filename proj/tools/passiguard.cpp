// passiguard command-line front end.
//
//   passiguard run CONFIG [--out DIR] [--set section.key=value]... [--window S] [--dt S]
//   passiguard suite [--scenarios DIR] [--out DIR] [--set ...] [--window S] [--dt S]
//   passiguard certify --num ... --den ... --case ifp|ofp|ifofp|passive [--rho R] [--nu N]
//   passiguard oracle --num ... --den ...
//
// Exit codes: 0 success, 1 configuration/usage error or failed check, 2 divergence.

#include "passiguard/scenario.hpp"

#include <CLI11.hpp>
#include <fmt/format.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using namespace passiguard;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitError = 1;
constexpr int kExitDiverged = 2;

#ifndef PASSIGUARD_SCENARIO_DIR
#define PASSIGUARD_SCENARIO_DIR "scenarios"
#endif

const std::vector<std::string> kSuite = {"ex1_delay", "ex2_nonlinear", "ex3_spring"};

struct Common {
    std::string out;
    std::vector<std::string> sets;
    std::optional<double> window;
    std::optional<double> dt;

    std::vector<std::string> overrides() const {
        std::vector<std::string> all = sets;
        if (window) all.push_back("estimator.window=" + fmt::format("{:.17g}", *window));
        if (dt) all.push_back("solver.dt=" + fmt::format("{:.17g}", *dt));
        return all;
    }

    fs::path out_dir() const {
        if (!out.empty()) return out;
        if (const char* env = std::getenv("PASSIGUARD_DEFAULT_OUT"); env && *env) return env;
        return ".";
    }
};

void add_common(CLI::App* app, Common& c) {
    app->add_option("--out", c.out, "output directory (default $PASSIGUARD_DEFAULT_OUT or .)");
    app->add_option("--set", c.sets, "override section.key=value; repeatable")->take_all();
    app->add_option("--window", c.window, "estimator window in seconds");
    app->add_option("--dt", c.dt, "solver step in seconds");
}

void write_file(const fs::path& path, const std::string& text) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw ConfigError("cannot write " + path.string());
    f << text;
}

fs::path prepare_out(const fs::path& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (!fs::is_directory(dir)) throw ConfigError("output directory " + dir.string() + " is not writable");
    return dir;
}

Summary write_outputs(const fs::path& dir, const std::string& stem, const RunLog& log) {
    std::ostringstream csv, events;
    write_run_csv(csv, log);
    write_events_csv(events, log.events);
    const Summary s = report(log);
    write_file(dir / (stem + ".csv"), csv.str());
    write_file(dir / (stem + ".events.csv"), events.str());
    write_file(dir / (stem + ".summary.txt"), format_summary(s, log));
    return s;
}

int cmd_run(const std::string& config, const Common& c) {
    const Scenario sc = load_scenario_file(config, c.overrides());
    const fs::path dir = prepare_out(c.out_dir());
    const RunLog log = run(sc);
    const Summary s = write_outputs(dir, sc.name, log);
    std::cout << format_summary(s, log);
    return s.diverged ? kExitDiverged : kExitOk;
}

int cmd_suite(const std::string& scenario_dir, const Common& c) {
    const fs::path dir = prepare_out(c.out_dir());
    std::string table = "scenario,mode,sup_abs_y,diverged,divergence_t,first_fault_t,reconfigurations\n";
    for (const auto& name : kSuite) {
        for (const bool mitigation : {false, true}) {
            auto overrides = c.overrides();
            overrides.push_back(std::string("run.mitigation=") + (mitigation ? "on" : "off"));
            const Scenario sc = load_scenario_file((fs::path(scenario_dir) / (name + ".cfg")).string(), overrides);
            const RunLog log = run(sc);
            const std::string mode = mitigation ? "on" : "off";
            const Summary s = write_outputs(dir, sc.name + "_" + mode, log);
            table += fmt::format("{},{},{},{},{},{},{}\n", sc.name, mode, fmt_value(s.sup_y), s.diverged ? 1 : 0,
                                 fmt_value(s.divergence_time), fmt_value(s.first_fault_time), s.reconfigurations);
        }
    }
    write_file(dir / "suite.csv", table);
    std::cout << table;
    return kExitOk;
}

RationalTF read_tf(const std::vector<double>& num, const std::vector<double>& den) {
    if (num.empty() || den.empty()) throw ConfigError("--num and --den are required");
    return RationalTF(num, den);
}

int cmd_oracle(const std::vector<double>& num, const std::vector<double>& den, const FrequencySweep& sweep) {
    const StateSpaceModel sys = tf_to_ss(read_tf(num, den));
    require_stable(sys, "oracle");
    const IndexOracle idx = true_indices_lti(sys, sweep);
    const double gain = l2_gain(sys, sweep);
    fmt::print("nu: {}\nrho: {}\nl2_gain: {}\nskipped_points: {}\ngrid: {} .. {} rad/s, {} points/decade\n",
               fmt_value(idx.nu), fmt_value(idx.rho), fmt_value(gain), idx.skipped, fmt_value(sweep.omega_min),
               fmt_value(sweep.omega_max), sweep.points_per_decade);
    fmt::print("note: grid values are upper bounds on the true indices\n");
    return kExitOk;
}

int cmd_certify(const std::vector<double>& num, const std::vector<double>& den, const std::string& which,
                std::optional<double> rho, std::optional<double> nu, double duration) {
    const StateSpaceModel ctrl = tf_to_ss(read_tf(num, den));
    require_stable(ctrl, "certify");
    const double gamma = gain_bound(ctrl);
    auto need = [](const std::optional<double>& v, const char* flag) {
        if (!v) throw ConfigError(std::string(flag) + " is required for this case");
        return *v;
    };
    MMatrix mm;
    if (which == "ifp")
        mm = design_ifp(gamma, need(nu, "--nu"));
    else if (which == "ofp")
        mm = design_ofp(gamma, need(rho, "--rho"));
    else if (which == "ifofp")
        mm = design_ifofp(gamma, need(rho, "--rho"), need(nu, "--nu"));
    else if (which == "passive")
        mm = design_passive(gamma);
    else
        throw ConfigError("unknown case '" + which + "'");

    const ConstraintCheck cc = check_constraints(mm);
    CertifyOptions opt;
    opt.duration = duration;
    opt.solver.t_end = duration;
    const Certificate cert = certify(mm, ctrl, opt);

    fmt::print("gamma: {}\ncase: {}\nM: [[{}, {}], [{}, {}]]\n", fmt_value(gamma), to_string(mm.kind),
               fmt_value(mm.m.m11), fmt_value(mm.m.m12), fmt_value(mm.m.m21), fmt_value(mm.m.m22));
    fmt::print("rho_claim: {}\nnu_claim: {}\n", fmt_value(mm.rho_claim), fmt_value(mm.nu_claim));
    for (const auto& w : mm.warnings) fmt::print("warning: {}\n", w);
    for (const auto& item : cc.items) fmt::print("constraint {}: margin {}\n", item.name, fmt_value(item.slack));
    for (const auto& [probe, r] : cert.residuals) fmt::print("probe {}: residual {}\n", probe, fmt_value(r));
    fmt::print("constraints: {}\ncertified: {}\n", cc.ok() ? "ok" : "FAILED", cert.passed ? "yes" : "no");
    return cc.ok() && cert.passed ? kExitOk : kExitError;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"passiguard: passivity-index fault detection and M-matrix reconfiguration"};
    app.require_subcommand(1);

    Common common;
    std::string config;
    auto* run_cmd = app.add_subcommand("run", "run one scenario");
    run_cmd->add_option("config", config, "scenario config file")->required();
    add_common(run_cmd, common);

    std::string scenario_dir = PASSIGUARD_SCENARIO_DIR;
    auto* suite_cmd = app.add_subcommand("suite", "run the bundled scenarios with mitigation off and on");
    suite_cmd->add_option("--scenarios", scenario_dir, "directory holding the bundled configs");
    add_common(suite_cmd, common);

    std::vector<double> num, den;
    FrequencySweep sweep;
    auto* oracle_cmd = app.add_subcommand("oracle", "grid passivity indices and L2 gain of a stable TF");
    oracle_cmd->add_option("--num", num, "numerator coefficients, highest power first")->required();
    oracle_cmd->add_option("--den", den, "denominator coefficients, highest power first")->required();
    oracle_cmd->add_option("--omega-min", sweep.omega_min);
    oracle_cmd->add_option("--omega-max", sweep.omega_max);
    oracle_cmd->add_option("--points-per-decade", sweep.points_per_decade);

    std::string which;
    std::optional<double> rho, nu;
    double duration = 20.0;
    auto* certify_cmd = app.add_subcommand("certify", "design a wrapper for a controller and certify it on probes");
    certify_cmd->add_option("--num", num, "controller numerator")->required();
    certify_cmd->add_option("--den", den, "controller denominator")->required();
    certify_cmd->add_option("--case", which, "ifp, ofp, ifofp or passive")->required();
    certify_cmd->add_option("--rho", rho, "OFP target");
    certify_cmd->add_option("--nu", nu, "IFP target");
    certify_cmd->add_option("--duration", duration, "probe length in seconds");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitError;
    }

    try {
        if (*run_cmd) return cmd_run(config, common);
        if (*suite_cmd) return cmd_suite(scenario_dir, common);
        if (*oracle_cmd) return cmd_oracle(num, den, sweep);
        if (*certify_cmd) return cmd_certify(num, den, which, rho, nu, duration);
    } catch (const std::exception& e) {
        std::cerr << "passiguard: " << e.what() << "\n";
        return kExitError;
    }
    return kExitError;
}
