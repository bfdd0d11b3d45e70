#pragma once

// Declarative scenarios: a sectioned key-value config describing plant,
// controller, reference, fault, thresholds and solver settings; a runner that
// wires the loop, estimator and reconfiguration; CSV logging and summaries.

#include "passiguard/linsys.hpp"
#include "passiguard/mmatrix.hpp"
#include "passiguard/passivity.hpp"
#include "passiguard/plants.hpp"
#include "passiguard/reconfig.hpp"
#include "passiguard/simcore.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

namespace passiguard {

inline constexpr const char* kVersion = "0.1.0";

// ---------------------------------------------------------------------------
// Config text

/// Ordered `section.key -> value` entries with the line each came from.
class ConfigDocument {
public:
    struct Entry {
        std::string value;
        int line = 0;  ///< 0 for entries injected by overrides
    };

    static ConfigDocument parse(const std::string& text) {
        ConfigDocument doc;
        std::istringstream in(text);
        std::string raw;
        std::string section;
        int lineno = 0;
        while (std::getline(in, raw)) {
            ++lineno;
            std::string line = strip_comment(raw);
            line = trim(line);
            if (line.empty()) continue;
            if (line.front() == '[') {
                if (line.back() != ']')
                    throw ConfigError(fmt::format("line {}: unterminated section header '{}'", lineno, line));
                section = trim(line.substr(1, line.size() - 2));
                if (section.empty()) throw ConfigError(fmt::format("line {}: empty section name", lineno));
                continue;
            }
            const auto eq = line.find('=');
            if (eq == std::string::npos)
                throw ConfigError(fmt::format("line {}: expected 'key = value', got '{}'", lineno, line));
            if (section.empty())
                throw ConfigError(fmt::format("line {}: key outside of any [section]", lineno));
            const std::string key = trim(line.substr(0, eq));
            const std::string value = trim(line.substr(eq + 1));
            if (key.empty()) throw ConfigError(fmt::format("line {}: empty key", lineno));
            const std::string full = section + "." + key;
            if (doc.entries_.count(full))
                throw ConfigError(fmt::format("line {}: duplicate key '{}' (first set on line {})", lineno, full,
                                              doc.entries_.at(full).line));
            doc.entries_[full] = {value, lineno};
        }
        return doc;
    }

    /// Applies `section.key=value`.
    void set(const std::string& assignment) {
        const auto eq = assignment.find('=');
        if (eq == std::string::npos) throw ConfigError("override '" + assignment + "' is not KEY=VALUE");
        std::string key = trim(assignment.substr(0, eq));
        const std::string value = trim(assignment.substr(eq + 1));
        if (key.find('.') == std::string::npos && key_section_.count(key)) key = key_section_.at(key) + "." + key;
        if (key.find('.') == std::string::npos)
            throw ConfigError("override key '" + key + "' must be written as section.key");
        entries_[key] = {value, 0};
    }

    const std::map<std::string, Entry>& entries() const { return entries_; }

private:
    static std::string trim(const std::string& s) {
        const auto b = s.find_first_not_of(" \t\r\n");
        if (b == std::string::npos) return {};
        const auto e = s.find_last_not_of(" \t\r\n");
        return s.substr(b, e - b + 1);
    }
    static std::string strip_comment(const std::string& s) {
        const auto p = s.find_first_of("#;");
        return p == std::string::npos ? s : s.substr(0, p);
    }

    std::map<std::string, Entry> entries_;
    // Short aliases accepted by --set for unambiguous keys.
    inline static const std::map<std::string, std::string> key_section_ = {
        {"mitigation", "run"}, {"seed", "run"}, {"dt", "solver"}, {"t_end", "solver"},
        {"method", "solver"}, {"window", "estimator"}, {"warmup", "estimator"},
        {"rho0", "thresholds"}, {"nu0", "thresholds"}, {"eps_margin", "thresholds"}, {"name", "scenario"},
    };
};

// ---------------------------------------------------------------------------
// Scenario

enum class PlantKind { ex1, ex2, ex3, tf };

inline const char* to_string(PlantKind k) {
    switch (k) {
        case PlantKind::ex1: return "ex1";
        case PlantKind::ex2: return "ex2";
        case PlantKind::ex3: return "ex3";
        case PlantKind::tf: return "tf";
    }
    return "?";
}

struct Scenario {
    std::string name = "scenario";
    PlantKind plant = PlantKind::tf;
    std::optional<RationalTF> plant_tf;  ///< only for PlantKind::tf
    MassDamperSpring spring;             ///< only for PlantKind::ex3
    RationalTF controller = RationalTF::gain(1.0);
    Reference reference;
    FaultSchedule fault;
    Thresholds thresholds;
    EstimatorConfig estimator;
    SolverConfig solver;
    DesignOptions design;
    double gain_safety_factor = kDefaultGainInflation;
    FrequencySweep sweep;
    bool mitigation = true;
    std::uint64_t seed = 1;

    void validate() const {
        if (plant == PlantKind::tf && !plant_tf) throw ConfigError("plant.kind = tf needs plant.num and plant.den");
        spring.validate();
        fault.validate();
        thresholds.validate();
        estimator.validate();
        solver.validate();
        design.validate();
        sweep.validate();
        if (!(gain_safety_factor >= 1.0)) throw ConfigError("design.gain_safety_factor must be >= 1");
        if (reference.kind == Reference::Kind::square || reference.kind == Reference::Kind::sine)
            if (!(reference.period > 0.0)) throw ConfigError("reference.period must be > 0");
        if (fault.enabled() && !(solver.t_end > fault.t_full))
            throw ConfigError("solver.t_end must exceed fault.t_full when a fault is configured");
        const bool ok = [&] {
            switch (plant) {
                case PlantKind::ex1: return fault.kind == FaultKind::none || fault.kind == FaultKind::input_delay_ramp;
                case PlantKind::ex2: return fault.kind == FaultKind::none || fault.kind == FaultKind::dynamics_swap;
                case PlantKind::ex3: return fault.kind == FaultKind::none || fault.kind == FaultKind::spring_softening;
                case PlantKind::tf: return fault.kind == FaultKind::none || fault.kind == FaultKind::input_delay_ramp;
            }
            return false;
        }();
        if (!ok)
            throw ConfigError(std::string("fault kind ") + to_string(fault.kind) + " does not apply to plant " +
                              to_string(plant));
    }

    std::shared_ptr<const Plant> make_plant() const {
        switch (plant) {
            case PlantKind::ex1: return plant_ex1(fault);
            case PlantKind::ex2: return plant_ex2(fault);
            case PlantKind::ex3: return plant_ex3(spring, fault);
            case PlantKind::tf: return std::make_shared<const LtiPlant>(tf_to_ss(*plant_tf), fault);
        }
        throw ConfigError("unknown plant kind");
    }
};

namespace detail {

inline std::string fmt_num(double v) { return fmt::format("{:.17g}", v); }

inline std::string fmt_list(const std::vector<double>& v) {
    std::string out;
    for (double c : v) out += (out.empty() ? "" : " ") + fmt_num(c);
    return out;
}

inline std::uint64_t fnv1a(const std::string& s) {
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

}  // namespace detail

/// Canonical config text; every field written explicitly.
inline std::string to_config(const Scenario& s) {
    using detail::fmt_list;
    using detail::fmt_num;
    std::string o;
    o += "[scenario]\nname = " + s.name + "\n\n";
    o += std::string("[plant]\nkind = ") + to_string(s.plant) + "\n";
    if (s.plant_tf) o += "num = " + fmt_list(s.plant_tf->num) + "\nden = " + fmt_list(s.plant_tf->den) + "\n";
    if (s.plant == PlantKind::ex3)
        o += "mass = " + fmt_num(s.spring.m) + "\ndamping = " + fmt_num(s.spring.c) +
             "\nstiffness = " + fmt_num(s.spring.k) + "\n";
    o += "\n[controller]\nnum = " + fmt_list(s.controller.num) + "\nden = " + fmt_list(s.controller.den) + "\n\n";
    o += std::string("[reference]\nkind = ") + to_string(s.reference.kind) + "\namplitude = " +
         fmt_num(s.reference.amplitude) + "\nperiod = " + fmt_num(s.reference.period) +
         "\noffset = " + fmt_num(s.reference.offset) + "\n\n";
    o += std::string("[fault]\nkind = ") + to_string(s.fault.kind) + "\nt_start = " + fmt_num(s.fault.t_start) +
         "\nt_full = " + fmt_num(s.fault.t_full) + "\nmagnitude = " + fmt_num(s.fault.magnitude) + "\n\n";
    o += "[thresholds]\nrho0 = " + fmt_num(s.thresholds.rho0) + "\nnu0 = " + fmt_num(s.thresholds.nu0) +
         "\neps_margin = " + fmt_num(s.thresholds.eps_margin) + "\n\n";
    o += "[estimator]\nwindow = " + (s.estimator.window ? fmt_num(*s.estimator.window) : std::string("none")) +
         "\nwarmup = " + fmt_num(s.estimator.warmup) + "\neps_den = " + fmt_num(s.estimator.eps_den) + "\n\n";
    o += "[solver]\ndt = " + fmt_num(s.solver.dt) + "\nt_end = " + fmt_num(s.solver.t_end) +
         "\nmethod = " + to_string(s.solver.method) + "\n\n";
    o += "[design]\ngain_slack = " + fmt_num(s.design.gain_slack) + "\nifp_slack = " +
         fmt_num(s.design.ifp_slack) + "\nofp_slack = " + fmt_num(s.design.ofp_slack) +
         "\nifofp_slack = " + fmt_num(s.design.ifofp_slack) +
         "\nifofp_rho_boost = " + fmt_num(s.design.ifofp_rho_boost) +
         "\na_cap = " + fmt_num(s.design.a_cap) + "\ngamma_inflation = " + fmt_num(s.design.gamma_inflation) +
         "\ngain_safety_factor = " + fmt_num(s.gain_safety_factor) + "\n\n";
    o += "[sweep]\nomega_min = " + fmt_num(s.sweep.omega_min) + "\nomega_max = " + fmt_num(s.sweep.omega_max) +
         "\npoints_per_decade = " + std::to_string(s.sweep.points_per_decade) + "\n\n";
    o += std::string("[run]\nmitigation = ") + (s.mitigation ? "on" : "off") + "\nseed = " + std::to_string(s.seed) +
         "\n";
    return o;
}

inline std::string scenario_hash(const Scenario& s) { return fmt::format("{:016x}", detail::fnv1a(to_config(s))); }

namespace detail {

class FieldReader {
public:
    explicit FieldReader(const ConfigDocument& doc) : doc_(doc) {}

    bool has(const std::string& key) const { return doc_.entries().count(key) != 0; }

    std::string where(const std::string& key) const {
        const auto& e = doc_.entries().at(key);
        return e.line > 0 ? fmt::format("line {}: {}", e.line, key) : fmt::format("override {}", key);
    }

    const std::string& raw(const std::string& key) {
        used_.insert(key);
        return doc_.entries().at(key).value;
    }

    double number(const std::string& key) {
        const std::string& v = raw(key);
        try {
            std::size_t pos = 0;
            const double d = std::stod(v, &pos);
            if (pos != v.size() || !std::isfinite(d)) throw std::invalid_argument(v);
            return d;
        } catch (const std::exception&) {
            throw ConfigError(where(key) + ": expected a finite number, got '" + v + "'");
        }
    }

    void number(const std::string& key, double& out) {
        if (has(key)) out = number(key);
    }

    std::vector<double> list(const std::string& key) {
        std::string v = raw(key);
        std::replace(v.begin(), v.end(), ',', ' ');
        std::istringstream in(v);
        std::vector<double> out;
        std::string tok;
        while (in >> tok) {
            try {
                std::size_t pos = 0;
                const double d = std::stod(tok, &pos);
                if (pos != tok.size() || !std::isfinite(d)) throw std::invalid_argument(tok);
                out.push_back(d);
            } catch (const std::exception&) {
                throw ConfigError(where(key) + ": bad coefficient '" + tok + "'");
            }
        }
        if (out.empty()) throw ConfigError(where(key) + ": empty coefficient list");
        return out;
    }

    template <class Enum>
    Enum choice(const std::string& key, const std::vector<std::pair<std::string, Enum>>& options) {
        const std::string& v = raw(key);
        for (const auto& [name, value] : options)
            if (name == v) return value;
        std::string allowed;
        for (const auto& o : options) allowed += (allowed.empty() ? "" : ", ") + o.first;
        throw ConfigError(where(key) + ": '" + v + "' is not one of {" + allowed + "}");
    }

    void require(const std::string& key) const {
        if (!has(key)) throw ConfigError("missing required key " + key);
    }

    void reject_unknown() const {
        for (const auto& [key, entry] : doc_.entries())
            if (!used_.count(key))
                throw ConfigError((entry.line > 0 ? fmt::format("line {}: ", entry.line) : std::string("override: ")) +
                                  "unknown key '" + key + "'");
    }

    template <class Fn>
    auto guarded(const std::string& key, Fn&& fn) -> decltype(fn()) {
        try {
            return fn();
        } catch (const ConfigError&) {
            throw;
        } catch (const std::exception& ex) {
            throw ConfigError(where(key) + ": " + ex.what());
        }
    }

private:
    const ConfigDocument& doc_;
    std::set<std::string> used_;
};

}  // namespace detail

/// Builds and validates a Scenario. Unknown keys are errors.
inline Scenario load_scenario(const ConfigDocument& doc) {
    detail::FieldReader f(doc);
    Scenario s;
    if (doc.entries().empty()) throw ConfigError("empty config: missing required key plant.kind");

    if (f.has("scenario.name")) s.name = f.raw("scenario.name");
    if (f.has("scenario.description")) f.raw("scenario.description");

    f.require("plant.kind");
    s.plant = f.choice<PlantKind>(
        "plant.kind", {{"ex1", PlantKind::ex1}, {"ex2", PlantKind::ex2}, {"ex3", PlantKind::ex3}, {"tf", PlantKind::tf}});
    if (s.plant == PlantKind::tf) {
        f.require("plant.num");
        f.require("plant.den");
        auto num = f.list("plant.num");
        auto den = f.list("plant.den");
        s.plant_tf = f.guarded("plant.den", [&] { return RationalTF(num, den); });
    }
    f.number("plant.mass", s.spring.m);
    f.number("plant.damping", s.spring.c);
    f.number("plant.stiffness", s.spring.k);

    f.require("controller.num");
    f.require("controller.den");
    {
        auto num = f.list("controller.num");
        auto den = f.list("controller.den");
        s.controller = f.guarded("controller.den", [&] { return RationalTF(num, den); });
    }

    if (f.has("reference.kind"))
        s.reference.kind = f.choice<Reference::Kind>("reference.kind", {{"zero", Reference::Kind::zero},
                                                                        {"step", Reference::Kind::step},
                                                                        {"square", Reference::Kind::square},
                                                                        {"sine", Reference::Kind::sine}});
    f.number("reference.amplitude", s.reference.amplitude);
    f.number("reference.period", s.reference.period);
    f.number("reference.offset", s.reference.offset);

    if (f.has("fault.kind"))
        s.fault.kind = f.choice<FaultKind>("fault.kind", {{"none", FaultKind::none},
                                                          {"input_delay_ramp", FaultKind::input_delay_ramp},
                                                          {"dynamics_swap", FaultKind::dynamics_swap},
                                                          {"spring_softening", FaultKind::spring_softening}});
    f.number("fault.t_start", s.fault.t_start);
    f.number("fault.t_full", s.fault.t_full);
    f.number("fault.magnitude", s.fault.magnitude);

    f.number("thresholds.rho0", s.thresholds.rho0);
    f.number("thresholds.nu0", s.thresholds.nu0);
    f.number("thresholds.eps_margin", s.thresholds.eps_margin);

    if (f.has("estimator.window")) {
        if (f.raw("estimator.window") == "none")
            s.estimator.window.reset();
        else
            s.estimator.window = f.number("estimator.window");
    }
    f.number("estimator.warmup", s.estimator.warmup);
    f.number("estimator.eps_den", s.estimator.eps_den);

    f.number("solver.dt", s.solver.dt);
    f.number("solver.t_end", s.solver.t_end);
    if (f.has("solver.method"))
        s.solver.method = f.choice<Method>("solver.method", {{"rk4", Method::rk4}, {"euler", Method::euler}});

    f.number("design.gain_slack", s.design.gain_slack);
    f.number("design.ifp_slack", s.design.ifp_slack);
    f.number("design.ofp_slack", s.design.ofp_slack);
    f.number("design.ifofp_rho_boost", s.design.ifofp_rho_boost);
    f.number("design.ifofp_slack", s.design.ifofp_slack);
    f.number("design.a_cap", s.design.a_cap);
    f.number("design.gamma_inflation", s.design.gamma_inflation);
    f.number("design.gain_safety_factor", s.gain_safety_factor);

    f.number("sweep.omega_min", s.sweep.omega_min);
    f.number("sweep.omega_max", s.sweep.omega_max);
    if (f.has("sweep.points_per_decade")) {
        const double p = f.number("sweep.points_per_decade");
        if (p != std::floor(p) || p < 1.0)
            throw ConfigError(f.where("sweep.points_per_decade") + ": expected a positive integer");
        s.sweep.points_per_decade = static_cast<int>(p);
    }

    if (f.has("run.mitigation")) s.mitigation = f.choice<bool>("run.mitigation", {{"on", true}, {"off", false}});
    if (f.has("run.seed")) {
        const double seed = f.number("run.seed");
        if (seed < 0.0 || seed != std::floor(seed)) throw ConfigError(f.where("run.seed") + ": expected an integer >= 0");
        s.seed = static_cast<std::uint64_t>(seed);
    }

    f.reject_unknown();
    try {
        s.validate();
    } catch (const ConfigError&) {
        throw;
    } catch (const std::exception& ex) {
        throw ConfigError(ex.what());
    }
    return s;
}

inline Scenario load_scenario(const std::string& text, const std::vector<std::string>& overrides = {}) {
    ConfigDocument doc = ConfigDocument::parse(text);
    for (const auto& o : overrides) doc.set(o);
    return load_scenario(doc);
}

inline Scenario load_scenario_file(const std::string& path, const std::vector<std::string>& overrides = {}) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return load_scenario(ss.str(), overrides);
}

// ---------------------------------------------------------------------------
// Running

struct RunRow {
    double t = 0.0;
    double r = 0.0;
    double e = 0.0;
    double y = 0.0;
    double u = 0.0;
    std::optional<double> rho_bar;
    std::optional<double> nu_bar;
    Verdict verdict = Verdict::indeterminate;
    Wrapper m;
    bool diverged = false;
};

struct RunLog {
    std::string name;
    bool mitigation = true;
    double dt = 0.0;
    std::vector<RunRow> rows;
    std::vector<FaultEvent> events;
    std::vector<Installation> installs;
    std::optional<Divergence> divergence;
    std::vector<std::pair<std::string, std::string>> metadata;

    bool diverged() const { return divergence.has_value(); }
};

/// Runs the scenario from rest. Divergence stops the run and truncates the log.
inline RunLog run(const Scenario& s) {
    s.validate();
    const auto plant = s.make_plant();
    const StateSpaceModel ctrl = tf_to_ss(s.controller);
    if (!ctrl.is_stable()) throw ConfigError("controller must be stable to bound its gain");
    const double gamma = gain_bound(ctrl, s.sweep, s.gain_safety_factor);

    ClosedLoop loop = s.mitigation ? wire_wrapped(plant, ctrl, Wrapper{}, s.reference, s.solver)
                                   : wire_nominal(plant, ctrl, s.reference, s.solver);
    PassivityEstimator estimator(s.estimator);
    ReconfigState state;
    state.manual_override = !s.mitigation;

    RunLog log;
    log.name = s.name;
    log.mitigation = s.mitigation;
    log.dt = s.solver.dt;
    const std::size_t steps = s.solver.steps();
    log.rows.reserve(steps + 1);

    for (std::size_t k = 0; k <= steps; ++k) {
        const LoopSample& smp = loop.step();
        const PassivityEstimate& est = estimator.update(smp.e, smp.y, s.solver.dt);
        RunRow row{smp.t, smp.r, smp.e, smp.y, smp.u, est.rho_bar, est.nu_bar, Verdict::indeterminate,
                   loop.wrapper(), false};
        const TickOutcome out = tick(state, est, s.thresholds, gamma, smp.t, s.design);
        row.verdict = out.verdict;
        if (out.proposal) {
            if (!install(loop, state, *out.proposal, smp.t)) {
                // install() already logged the refusal
            }
        }
        if (loop.diverged()) {
            row.diverged = true;
            log.rows.push_back(row);
            log.divergence = loop.divergence();
            break;
        }
        log.rows.push_back(row);
    }
    log.events = std::move(state.fault_log);
    log.installs = std::move(state.installs);

    auto& md = log.metadata;
    md.emplace_back("version", kVersion);
    md.emplace_back("scenario", s.name);
    md.emplace_back("scenario_hash", scenario_hash(s));
    md.emplace_back("mitigation", s.mitigation ? "on" : "off");
    md.emplace_back("plant", to_string(s.plant));
    md.emplace_back("dt", detail::fmt_num(s.solver.dt));
    md.emplace_back("t_end", detail::fmt_num(s.solver.t_end));
    md.emplace_back("method", to_string(s.solver.method));
    md.emplace_back("steps", std::to_string(steps));
    md.emplace_back("partial_step_truncated", s.solver.truncates() ? "yes" : "no");
    md.emplace_back("input_hold", "zero-order");
    md.emplace_back("fault", to_string(s.fault.kind));
    md.emplace_back("fault_ramp", "linear");
    md.emplace_back("reference", fmt::format("{} amplitude={} period={} offset={}", to_string(s.reference.kind),
                                             detail::fmt_num(s.reference.amplitude),
                                             detail::fmt_num(s.reference.period),
                                             detail::fmt_num(s.reference.offset)));
    md.emplace_back("gamma", detail::fmt_num(gamma));
    md.emplace_back("gain_safety_factor", detail::fmt_num(s.gain_safety_factor));
    md.emplace_back("rho0", detail::fmt_num(s.thresholds.rho0));
    md.emplace_back("nu0", detail::fmt_num(s.thresholds.nu0));
    md.emplace_back("eps_margin", detail::fmt_num(s.thresholds.eps_margin));
    md.emplace_back("estimator_window", s.estimator.window ? detail::fmt_num(*s.estimator.window) : "none");
    md.emplace_back("estimator_warmup", detail::fmt_num(s.estimator.warmup));
    md.emplace_back("estimator_eps_den", detail::fmt_num(s.estimator.eps_den));
    md.emplace_back("quadrature", "trapezoid");
    md.emplace_back("design_gain_slack", detail::fmt_num(s.design.gain_slack));
    md.emplace_back("design_ifp_slack", detail::fmt_num(s.design.ifp_slack));
    md.emplace_back("design_ofp_slack", detail::fmt_num(s.design.ofp_slack));
    md.emplace_back("design_ifofp_rho_boost", detail::fmt_num(s.design.ifofp_rho_boost));
    md.emplace_back("design_ifofp_slack", detail::fmt_num(s.design.ifofp_slack));
    md.emplace_back("design_a_cap", detail::fmt_num(s.design.a_cap));
    md.emplace_back("design_gamma_inflation", detail::fmt_num(s.design.gamma_inflation));
    md.emplace_back("divergence_limit", detail::fmt_num(kDivergenceLimit));
    return log;
}

// ---------------------------------------------------------------------------
// Output

inline std::string fmt_value(double v) { return fmt::format("{:.15g}", v); }
inline std::string fmt_value(const std::optional<double>& v) { return v ? fmt_value(*v) : std::string("nan"); }

inline void write_run_csv(std::ostream& out, const RunLog& log) {
    out << "t,r,e,y,u,rho_bar,nu_bar,verdict,m11,m12,m21,m22,diverged\n";
    for (const auto& r : log.rows) {
        out << fmt::format("{},{},{},{},{},{},{},{},{},{},{},{},{}\n", fmt_value(r.t), fmt_value(r.r), fmt_value(r.e),
                           fmt_value(r.y), fmt_value(r.u), fmt_value(r.rho_bar), fmt_value(r.nu_bar),
                           to_string(r.verdict), fmt_value(r.m.m11), fmt_value(r.m.m12), fmt_value(r.m.m21),
                           fmt_value(r.m.m22), r.diverged ? 1 : 0);
    }
}

inline void write_events_csv(std::ostream& out, const std::vector<FaultEvent>& events) {
    out << "t,verdict,rho_bar,nu_bar,action,m11,m12,m21,m22\n";
    for (const auto& e : events) {
        out << fmt::format("{},{},{},{},{},{},{},{},{}\n", fmt_value(e.t), to_string(e.verdict), fmt_value(e.rho_bar),
                           fmt_value(e.nu_bar), to_string(e.action), fmt_value(e.m.m11), fmt_value(e.m.m12),
                           fmt_value(e.m.m21), fmt_value(e.m.m22));
    }
}

struct Summary {
    std::string name;
    bool mitigation = true;
    bool diverged = false;
    std::optional<double> divergence_time;
    double sup_y = 0.0;
    double t_last = 0.0;
    std::optional<double> first_fault_time;
    std::size_t reconfigurations = 0;
    MMatrix final_m = MMatrix::identity();
    std::optional<double> final_reconfiguration_time;
    /// min over t after the final reconfiguration of rho_bar + nu_c and nu_bar + rho_c,
    /// for the indices the installed wrapper claims
    std::optional<double> min_margin_rho;
    std::optional<double> min_margin_nu;
    std::size_t critical_events = 0;
};

/// Lemma-1 style loop margins rho_bar + nu_c(new) and nu_bar + rho_c(new) at one sample.
inline std::pair<std::optional<double>, std::optional<double>> loop_margins(const RunRow& row, const MMatrix& m) {
    std::optional<double> mr, mn;
    if (row.rho_bar && m.nu_claim) mr = *row.rho_bar + *m.nu_claim;
    if (row.nu_bar && m.rho_claim) mn = *row.nu_bar + *m.rho_claim;
    return {mr, mn};
}

inline Summary report(const RunLog& log) {
    Summary s;
    s.name = log.name;
    s.mitigation = log.mitigation;
    s.diverged = log.diverged();
    if (log.divergence) s.divergence_time = log.divergence->t;
    for (const auto& r : log.rows) s.sup_y = std::max(s.sup_y, std::abs(r.y));
    if (!log.rows.empty()) s.t_last = log.rows.back().t;
    for (const auto& e : log.events) {
        if (e.action == Action::synthesis_failed || e.action == Action::install_refused) ++s.critical_events;
        if (!s.first_fault_time && is_fault(e.verdict)) s.first_fault_time = e.t;
    }
    s.reconfigurations = log.installs.size();
    if (!log.installs.empty()) {
        const auto& last = log.installs.back();
        s.final_m = last.m;
        s.final_reconfiguration_time = last.t;
        for (const auto& r : log.rows) {
            if (!(r.t > last.t) || r.diverged) continue;
            const auto [mr, mn] = loop_margins(r, last.m);
            if (mr) s.min_margin_rho = s.min_margin_rho ? std::min(*s.min_margin_rho, *mr) : *mr;
            if (mn) s.min_margin_nu = s.min_margin_nu ? std::min(*s.min_margin_nu, *mn) : *mn;
        }
    }
    return s;
}

inline std::string format_summary(const Summary& s, const RunLog& log) {
    auto opt = [](const std::optional<double>& v) { return v ? fmt_value(*v) : std::string("n/a"); };
    std::string o;
    o += "scenario: " + s.name + "\n";
    o += std::string("mitigation: ") + (s.mitigation ? "on" : "off") + "\n";
    o += std::string("diverged: ") + (s.diverged ? "yes" : "no") + "\n";
    o += "divergence_time: " + opt(s.divergence_time) + "\n";
    o += "last_time: " + fmt_value(s.t_last) + "\n";
    o += "sup_abs_y: " + fmt_value(s.sup_y) + "\n";
    o += "first_fault_time: " + opt(s.first_fault_time) + "\n";
    o += "reconfigurations: " + std::to_string(s.reconfigurations) + "\n";
    o += "critical_events: " + std::to_string(s.critical_events) + "\n";
    o += "final_reconfiguration_time: " + opt(s.final_reconfiguration_time) + "\n";
    o += std::string("final_m_case: ") + to_string(s.final_m.kind) + "\n";
    o += fmt::format("final_m: [[{}, {}], [{}, {}]]\n", fmt_value(s.final_m.m.m11), fmt_value(s.final_m.m.m12),
                     fmt_value(s.final_m.m.m21), fmt_value(s.final_m.m.m22));
    o += "final_m_rho_claim: " + opt(s.final_m.rho_claim) + "\n";
    o += "final_m_nu_claim: " + opt(s.final_m.nu_claim) + "\n";
    o += "min_margin_rho_bar_plus_nu_c: " + opt(s.min_margin_rho) + "\n";
    o += "min_margin_nu_bar_plus_rho_c: " + opt(s.min_margin_nu) + "\n";
    o += "\n[metadata]\n";
    for (const auto& [k, v] : log.metadata) o += k + " = " + v + "\n";
    return o;
}

}  // namespace passiguard
