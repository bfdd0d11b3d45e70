#pragma once

// Passivation wrappers. Given a finite-gain controller C (gain <= gamma), the
// system Sigma0 obtained from [Sigma0_in; Sigma0_out] = M [C_in; C_out] is
// passive, OFP(rho0), IFP(nu0) or IF-OFP(nu0, rho0) when the entries of M
// satisfy the corresponding inequality set. Each designer pins the free
// entries deterministically and re-checks its inequalities before returning.

#include "passiguard/linsys.hpp"
#include "passiguard/passivity.hpp"
#include "passiguard/simcore.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace passiguard {

class DesignError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

enum class WrapperCase { identity, passive, ofp, ifp, ifofp };

inline const char* to_string(WrapperCase c) {
    switch (c) {
        case WrapperCase::identity: return "IDENTITY";
        case WrapperCase::passive: return "PASSIVE";
        case WrapperCase::ofp: return "OFP";
        case WrapperCase::ifp: return "IFP";
        case WrapperCase::ifofp: return "IFOFP";
    }
    return "?";
}

struct MMatrix {
    Wrapper m;
    WrapperCase kind = WrapperCase::identity;
    std::optional<double> a;  ///< IF-OFP trade-off parameter in (0, 1)
    double gamma_used = 0.0;
    std::optional<double> rho_target;
    std::optional<double> nu_target;
    std::optional<double> rho_claim;  ///< OFP index of Sigma0 implied by the entries
    std::optional<double> nu_claim;   ///< IFP index of Sigma0 implied by the entries
    std::vector<std::string> warnings;

    static MMatrix identity() { return {}; }
    double det() const { return m.det(); }
};

/// Free-parameter pinning for the designers.
struct DesignOptions {
    double gain_slack = 2.0;        ///< IFP: m12 = 1/(gain_slack*gamma); OFP: m21 = gain_slack*gamma
    double ifp_slack = 1.0;         ///< IFP: m21 = (1+s) m11 m22/m12
    double ofp_slack = 1.0;         ///< OFP: m11 = (1+s) m12 m21/m22
    double ifofp_slack = 0.01;      ///< a = 4 rho nu (1 + slack)
    double ifofp_rho_boost = 1.0;   ///< IF-OFP: OFP level designed at boost*rho_target while a < a_cap allows
    double a_cap = 0.99;            ///< largest admissible a
    double gamma_inflation = 1.05;  ///< passive m11 and IF-OFP m21 margin over the bound

    void validate() const {
        if (!(gain_slack >= 1.0)) throw DesignError("gain_slack must be >= 1");
        if (!(ifp_slack > 0.0)) throw DesignError("ifp_slack must be > 0");
        if (!(ofp_slack > 0.0)) throw DesignError("ofp_slack must be > 0");
        if (!(ifofp_rho_boost >= 1.0)) throw DesignError("ifofp_rho_boost must be >= 1");
        if (!(ifofp_slack >= 0.0)) throw DesignError("ifofp_slack must be >= 0");
        if (!(a_cap > 0.0 && a_cap < 1.0)) throw DesignError("a_cap must be in (0, 1)");
        if (!(gamma_inflation >= 1.0)) throw DesignError("gamma_inflation must be >= 1");
    }
};

namespace detail {

inline void require_positive(double v, const char* what) {
    if (!(v > 0.0) || !std::isfinite(v)) throw DesignError(std::string(what) + " must be a finite value > 0");
}

}  // namespace detail

inline constexpr double kConstraintMargin = 1e-12;

struct ConstraintCheck {
    struct Item {
        std::string name;
        double slack;  ///< lhs - rhs; equalities report -|lhs - rhs|
        bool equality;
    };
    std::vector<Item> items;

    double min_margin() const {
        double m = std::numeric_limits<double>::infinity();
        for (const auto& it : items)
            if (!it.equality) m = std::min(m, it.slack);
        return m;
    }
    bool ok(double margin = kConstraintMargin) const {
        for (const auto& it : items) {
            if (it.equality ? it.slack != 0.0 : !(it.slack >= margin)) return false;
        }
        return true;
    }
    std::vector<std::string> failed(double margin = kConstraintMargin) const {
        std::vector<std::string> out;
        for (const auto& it : items)
            if (it.equality ? it.slack != 0.0 : !(it.slack >= margin)) out.push_back(it.name);
        return out;
    }
};

/// Re-evaluates the inequality set of the wrapper's case against gamma_used.
inline ConstraintCheck check_constraints(const MMatrix& mm) {
    const auto& [m11, m12, m21, m22] = mm.m;
    const double g = mm.gamma_used;
    ConstraintCheck c;
    auto ineq = [&](std::string name, double slack) { c.items.push_back({std::move(name), slack, false}); };
    auto eq = [&](std::string name, double lhs, double rhs) {
        c.items.push_back({std::move(name), -std::abs(lhs - rhs), true});
    };
    ineq("det(M) != 0", std::abs(mm.det()));
    switch (mm.kind) {
        case WrapperCase::identity: break;
        case WrapperCase::passive:
            eq("m11 = m21", m11, m21);
            eq("m22 = -m12", m22, -m12);
            ineq("m11 >= |m22| gamma", m11 - std::abs(m22) * g);
            ineq("|m22| gamma > 0", std::abs(m22) * g);
            break;
        case WrapperCase::ofp:
            ineq("m21 >= m22 gamma", m21 - m22 * g);
            ineq("m22 gamma > 0", m22 * g);
            ineq("m11 m22 > m12 m21", m11 * m22 - m12 * m21);
            ineq("m12 m21 > 0", m12 * m21);
            break;
        case WrapperCase::ifp:
            ineq("m11 >= m12 gamma", m11 - m12 * g);
            ineq("m12 gamma > 0", m12 * g);
            ineq("m12 m21 > m11 m22", m12 * m21 - m11 * m22);
            ineq("m11 m22 > 0", m11 * m22);
            break;
        case WrapperCase::ifofp: {
            const double a = mm.a.value_or(std::numeric_limits<double>::quiet_NaN());
            ineq("a > 0", a);
            ineq("a < 1", 1.0 - a);
            ineq("m11 > 0", m11);
            eq("m12 = 0", m12, 0.0);
            const double bound = m22 * g / std::sqrt(1.0 - a);
            ineq("m21 >= m22 gamma / sqrt(1 - a)", m21 - bound);
            ineq("m22 gamma / sqrt(1 - a) > 0", bound);
            break;
        }
    }
    return c;
}

namespace detail {

inline MMatrix finalize(MMatrix mm) {
    const auto check = check_constraints(mm);
    if (!check.ok()) {
        std::string names;
        for (const auto& n : check.failed()) names += (names.empty() ? "" : ", ") + n;
        throw DesignError(std::string(to_string(mm.kind)) + " wrapper violates: " + names);
    }
    return mm;
}

}  // namespace detail

/// IFP(nu0) wrapper with nu0 = (m21/m11 + m22/m12)/2 >= nu_target.
inline MMatrix design_ifp(double gamma, double nu_target, const DesignOptions& opt = {}) {
    opt.validate();
    detail::require_positive(gamma, "gamma");
    detail::require_positive(nu_target, "IFP target");
    MMatrix mm;
    mm.kind = WrapperCase::ifp;
    mm.gamma_used = gamma;
    mm.nu_target = nu_target;
    auto& m = mm.m;
    m.m11 = 1.0;
    m.m12 = 1.0 / (opt.gain_slack * gamma);
    m.m22 = m.m12 * nu_target;
    m.m21 = std::max((1.0 + opt.ifp_slack) * m.m11 * m.m22 / m.m12, nu_target);
    mm.nu_claim = 0.5 * (m.m21 / m.m11 + m.m22 / m.m12);
    return detail::finalize(std::move(mm));
}

/// OFP(rho0) wrapper with rho0 = (m11/m21 + m12/m22)/2 >= rho_target.
inline MMatrix design_ofp(double gamma, double rho_target, const DesignOptions& opt = {}) {
    opt.validate();
    detail::require_positive(gamma, "gamma");
    detail::require_positive(rho_target, "OFP target");
    MMatrix mm;
    mm.kind = WrapperCase::ofp;
    mm.gamma_used = gamma;
    mm.rho_target = rho_target;
    auto& m = mm.m;
    m.m22 = 1.0;
    m.m21 = opt.gain_slack * gamma;
    m.m12 = m.m22 * rho_target;
    m.m11 = std::max((1.0 + opt.ofp_slack) * m.m12 * m.m21 / m.m22, rho_target * m.m21);
    mm.rho_claim = 0.5 * (m.m11 / m.m21 + m.m12 / m.m22);
    return detail::finalize(std::move(mm));
}

/// IF-OFP wrapper with OFP index delta0 = m11/(2 m21) and IFP index
/// eps0 = (a/2) m21/m11. Since delta0 * eps0 = a/4 < 1/4, joint targets whose
/// product is too large are scaled down (keeping their ratio) with a warning.
inline MMatrix design_ifofp(double gamma, double rho_target, double nu_target, const DesignOptions& opt = {}) {
    opt.validate();
    detail::require_positive(gamma, "gamma");
    detail::require_positive(rho_target, "OFP target");
    detail::require_positive(nu_target, "IFP target");
    MMatrix mm;
    mm.kind = WrapperCase::ifofp;
    mm.gamma_used = gamma;
    mm.rho_target = rho_target;
    mm.nu_target = nu_target;

    double rho = rho_target;
    double nu = nu_target;
    const double needed = 4.0 * rho * nu * (1.0 + opt.ifofp_slack);
    if (needed > opt.a_cap) {
        const double shrink = std::sqrt(opt.a_cap / needed);
        rho *= shrink;
        nu *= shrink;
        mm.warnings.push_back("IF-OFP targets (" + std::to_string(rho_target) + ", " + std::to_string(nu_target) +
                              ") exceed the product bound rho*nu < a/4 <= " + std::to_string(opt.a_cap / 4.0) +
                              "; scaled to (" + std::to_string(rho) + ", " + std::to_string(nu) + ")");
    }
    if (opt.ifofp_rho_boost > 1.0)
        rho = std::max(rho, std::min(rho * opt.ifofp_rho_boost, opt.a_cap / (4.0 * nu * (1.0 + opt.ifofp_slack))));
    const double a = std::min(4.0 * rho * nu * (1.0 + opt.ifofp_slack), opt.a_cap);
    if (!(a > 0.0 && a < 1.0))
        throw DesignError("IF-OFP design infeasible: a = " + std::to_string(a) + " outside (0, 1), product bound 1/4");
    mm.a = a;
    auto& m = mm.m;
    m.m22 = 1.0;
    m.m12 = 0.0;
    m.m21 = opt.gamma_inflation * m.m22 * gamma / std::sqrt(1.0 - a);
    m.m11 = 2.0 * rho * m.m21;
    mm.rho_claim = 0.5 * m.m11 / m.m21;
    mm.nu_claim = 0.5 * a * m.m21 / m.m11;
    return detail::finalize(std::move(mm));
}

/// Passivating wrapper m21 = m11, m22 = -m12, m11 >= |m22| gamma.
inline MMatrix design_passive(double gamma, const DesignOptions& opt = {}) {
    opt.validate();
    detail::require_positive(gamma, "gamma");
    MMatrix mm;
    mm.kind = WrapperCase::passive;
    mm.gamma_used = gamma;
    mm.m.m11 = opt.gamma_inflation * gamma;
    mm.m.m12 = 1.0;
    mm.m.m21 = mm.m.m11;
    mm.m.m22 = -mm.m.m12;
    mm.rho_claim = 0.0;
    mm.nu_claim = 0.0;
    return detail::finalize(std::move(mm));
}

/// Sigma0 : y -> u as an LTI model, i.e. the controller seen through the wrapper.
inline StateSpaceModel wrapped_controller(const StateSpaceModel& ctrl, const Wrapper& m) {
    if (!ctrl.is_siso()) throw ModelError("wrapped_controller requires a SISO controller");
    const double dc = ctrl.feedthrough();
    const double den = m.m11 + m.m12 * dc;
    if (std::abs(den) < kWellPosedTolerance) throw ConfigError("ill-posed wrapper: m11 + m12*D_c = 0");
    const double slope = (m.m21 + m.m22 * dc) / den;
    Matrix A = ctrl.A - ctrl.B * ctrl.C * (m.m12 / den);
    Matrix B = ctrl.B / den;
    Matrix C = m.m22 * ctrl.C - slope * m.m12 * ctrl.C;
    return {std::move(A), std::move(B), std::move(C), Matrix::Constant(1, 1, slope)};
}

/// Steps Sigma0 with its input supplied directly (no plant in the loop), using
/// the same held-input integration as the closed loop.
class WrappedControllerProbe {
public:
    WrappedControllerProbe(StateSpaceModel ctrl, const Wrapper& m, SolverConfig solver)
        : ctrl_(std::move(ctrl)), m_(m), solver_(solver), x_(Vector::Zero(ctrl_.order())) {
        check_well_posed(m_, ctrl_.feedthrough(), 0.0);
    }

    double step(double t, double y) {
        const double a = ctrl_.order() > 0 ? (ctrl_.C * x_)(0) : 0.0;
        const double den = m_.m11 + m_.m12 * ctrl_.feedthrough();
        const double c_in = (y - m_.m12 * a) / den;
        const double c_out = a + ctrl_.feedthrough() * c_in;
        const double u = m_.m21 * c_in + m_.m22 * c_out;
        if (ctrl_.order() > 0) {
            auto field = [this](double, const Vector& x, double in) -> Vector {
                return ctrl_.A * x + ctrl_.B.col(0) * in;
            };
            x_ = step_ode(field, t, x_, c_in, solver_.dt, solver_.method);
        }
        return u;
    }

private:
    StateSpaceModel ctrl_;
    Wrapper m_;
    SolverConfig solver_;
    Vector x_;
};

struct ProbeSignal {
    std::string name;
    std::vector<double> samples;
};

/// Twenty deterministic excitation signals: steps, sines, square waves, a
/// chirp, a pulse, a multisine and low-pass filtered noise.
inline std::vector<ProbeSignal> standard_probes(double duration, double dt, std::uint64_t seed = 7) {
    const auto n = static_cast<std::size_t>(std::floor(duration / dt + 1e-9)) + 1;
    auto make = [&](std::string name, auto&& fn) {
        ProbeSignal p{std::move(name), std::vector<double>(n)};
        for (std::size_t i = 0; i < n; ++i) p.samples[i] = fn(static_cast<double>(i) * dt);
        return p;
    };
    std::vector<ProbeSignal> out;
    for (double amp : {1.0, -2.0, 0.5}) out.push_back(make("step " + std::to_string(amp), [amp](double) { return amp; }));
    for (double w : {0.1, 0.5, 1.0, 2.0, 5.0, 10.0, 50.0})
        out.push_back(make("sine w=" + std::to_string(w), [w](double t) { return std::sin(w * t); }));
    for (double period : {1.0, 5.0})
        out.push_back(make("square T=" + std::to_string(period),
                           [period](double t) { return std::fmod(t, period) < 0.5 * period ? 1.0 : -1.0; }));
    out.push_back(make("chirp", [duration](double t) { return std::sin(0.05 * t + 0.5 * 20.0 / duration * t * t); }));
    out.push_back(make("pulse", [](double t) { return t < 1.0 ? 3.0 : 0.0; }));
    out.push_back(make("multisine", [](double t) {
        return std::sin(0.3 * t) + 0.5 * std::sin(3.1 * t + 1.0) + 0.25 * std::sin(17.0 * t + 2.0);
    }));
    out.push_back(make("ramp-hold", [](double t) { return std::min(t, 2.0) - 1.0; }));
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> noise(0.0, 1.0);
    for (double bandwidth : {0.5, 2.0, 10.0, 100.0}) {
        ProbeSignal p{"noise bw=" + std::to_string(bandwidth), std::vector<double>(n)};
        double state = 0.0;
        const double alpha = 1.0 - std::exp(-bandwidth * dt);
        for (std::size_t i = 0; i < n; ++i) {
            state += alpha * (noise(rng) - state);
            p.samples[i] = state;
        }
        out.push_back(std::move(p));
    }
    return out;
}

struct CertifyOptions {
    double duration = 20.0;
    SolverConfig solver{1e-3, 20.0, Method::rk4};
    double tolerance = 1e-6;
    std::uint64_t seed = 7;
};

struct Certificate {
    double eps = 0.0;    ///< IFP level checked
    double delta = 0.0;  ///< OFP level checked
    std::vector<std::pair<std::string, double>> residuals;
    double min_residual = std::numeric_limits<double>::infinity();
    bool passed = false;
};

/// Drives Sigma0 from rest with each probe and evaluates the IF-OFP supply
/// integral at the levels the wrapper claims. Identity wrappers are checked
/// for plain passivity.
inline Certificate certify(const MMatrix& mm, const StateSpaceModel& ctrl, const CertifyOptions& opt = {}) {
    if (!ctrl.is_siso()) throw ModelError("certify requires a SISO controller");
    require_stable(ctrl, "certify");
    Certificate cert;
    cert.eps = mm.nu_claim.value_or(0.0);
    cert.delta = mm.rho_claim.value_or(0.0);
    const double dt = opt.solver.dt;
    for (const auto& probe : standard_probes(opt.duration, dt, opt.seed)) {
        WrappedControllerProbe sigma0(ctrl, mm.m, opt.solver);
        std::vector<double> out(probe.samples.size());
        for (std::size_t i = 0; i < probe.samples.size(); ++i)
            out[i] = sigma0.step(static_cast<double>(i) * dt, probe.samples[i]);
        double r = verify_dissipativity(probe.samples, out, dt, cert.eps, cert.delta);
        if (!std::isfinite(r)) r = -std::numeric_limits<double>::infinity();
        cert.residuals.emplace_back(probe.name, r);
        cert.min_residual = std::min(cert.min_residual, r);
    }
    cert.passed = cert.min_residual >= -opt.tolerance;
    return cert;
}

}  // namespace passiguard
