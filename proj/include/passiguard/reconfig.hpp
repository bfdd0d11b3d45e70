#pragma once

// Detection and reconfiguration state machine. Tracks the lowest index
// estimates seen so far and synthesizes a new wrapper only when an estimate
// below its threshold also drops below its watermark.

#include "passiguard/mmatrix.hpp"
#include "passiguard/passivity.hpp"
#include "passiguard/simcore.hpp"

#include <algorithm>
#include <limits>
#include <optional>
#include <string>
#include <vector>

namespace passiguard {

enum class Action {
    none,
    already_compensated,
    compensate_ifp,
    compensate_ofp,
    compensate_ifofp,
    monitor_only,
    synthesis_failed,
    install_refused,
};

inline const char* to_string(Action a) {
    switch (a) {
        case Action::none: return "none";
        case Action::already_compensated: return "already_compensated";
        case Action::compensate_ifp: return "compensate_ifp";
        case Action::compensate_ofp: return "compensate_ofp";
        case Action::compensate_ifofp: return "compensate_ifofp";
        case Action::monitor_only: return "monitor_only";
        case Action::synthesis_failed: return "CRITICAL_synthesis_failed";
        case Action::install_refused: return "CRITICAL_install_refused";
    }
    return "?";
}

inline bool is_synthesis(Action a) {
    return a == Action::compensate_ifp || a == Action::compensate_ofp || a == Action::compensate_ifofp;
}

struct FaultEvent {
    double t = 0.0;
    Verdict verdict = Verdict::nominal;
    double rho_bar = 0.0;
    double nu_bar = 0.0;
    Action action = Action::none;
    Wrapper m;
    std::string detail;
};

struct Installation {
    double t;
    MMatrix m;
};

struct ReconfigState {
    double rho_min = std::numeric_limits<double>::infinity();
    double nu_min = std::numeric_limits<double>::infinity();
    MMatrix current = MMatrix::identity();
    std::vector<FaultEvent> fault_log;
    std::vector<Installation> installs;
    bool manual_override = false;
    Verdict last_verdict = Verdict::indeterminate;
};

struct TickOutcome {
    Verdict verdict = Verdict::indeterminate;
    Action action = Action::none;
    std::optional<MMatrix> proposal;
};

/// Compensation level required of the new controller index so that
/// level + watermark > eps. A watermark already above eps leaves any positive
/// level admissible; eps itself is used then.
inline double compensation_target(double eps, double watermark) { return std::max(eps - watermark, eps); }

/// One pass of the detection loop at time t. Under manual override faults are
/// still indicated but nothing is synthesized. Fault indications are logged
/// when the verdict changes or when a synthesis is attempted.
inline TickOutcome tick(ReconfigState& st, const PassivityEstimate& est, const Thresholds& th, double gamma, double t,
                        const DesignOptions& opt = {}) {
    TickOutcome out;
    out.verdict = detect(est, th);
    const bool edge = out.verdict != st.last_verdict;
    st.last_verdict = out.verdict;
    if (!is_fault(out.verdict)) return out;

    const double rho = *est.rho_bar;
    const double nu = *est.nu_bar;
    auto log = [&](Action a, std::string detail = {}) {
        FaultEvent ev{t, out.verdict, rho, nu, a, st.current.m, std::move(detail)};
        if (out.proposal) ev.m = out.proposal->m;
        st.fault_log.push_back(std::move(ev));
    };

    if (st.manual_override) {
        out.action = Action::monitor_only;
        if (edge) log(out.action);
        return out;
    }

    try {
        switch (out.verdict) {
            case Verdict::rho_low:
                if (rho < st.rho_min) {
                    st.rho_min = rho;
                    out.action = Action::compensate_ifp;
                    out.proposal = design_ifp(gamma, compensation_target(th.eps_margin, st.rho_min), opt);
                }
                break;
            case Verdict::nu_low:
                if (nu < st.nu_min) {
                    st.nu_min = nu;
                    out.action = Action::compensate_ofp;
                    out.proposal = design_ofp(gamma, compensation_target(th.eps_margin, st.nu_min), opt);
                }
                break;
            case Verdict::both_low:
                if (rho < st.rho_min || nu < st.nu_min) {
                    st.rho_min = std::min(st.rho_min, rho);
                    st.nu_min = std::min(st.nu_min, nu);
                    out.action = Action::compensate_ifofp;
                    out.proposal = design_ifofp(gamma, compensation_target(th.eps_margin, st.nu_min),
                                             compensation_target(th.eps_margin, st.rho_min), opt);
                }
                break;
            default: break;
        }
    } catch (const std::exception& ex) {
        out.action = Action::synthesis_failed;
        out.proposal.reset();
        log(out.action, ex.what());
        return out;
    }

    if (out.action == Action::none) {
        out.action = Action::already_compensated;
        if (edge) log(out.action);
    } else {
        std::string detail;
        for (const auto& w : out.proposal->warnings) detail += w;
        log(out.action, std::move(detail));
    }
    return out;
}

/// Swaps the wrapper of a running loop between steps. A wrapper that makes the
/// algebraic loop ill-posed is refused and the previous one stays in place.
inline bool install(ClosedLoop& loop, ReconfigState& st, const MMatrix& m, double t) {
    try {
        loop.install(m.m);
    } catch (const std::exception& ex) {
        st.fault_log.push_back({t, st.last_verdict, 0.0, 0.0, Action::install_refused, m.m, ex.what()});
        return false;
    }
    st.current = m;
    st.installs.push_back({t, m});
    return true;
}

}  // namespace passiguard
