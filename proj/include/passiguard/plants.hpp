#pragma once

// Example plants and their time-scheduled faults: an LTI plant behind a
// growing input delay, the same plant switching to nonlinear dynamics, and a
// base-excited mass-damper-spring whose spring softens.

#include "passiguard/linsys.hpp"
#include "passiguard/simcore.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <string>

namespace passiguard {

enum class FaultKind { none, input_delay_ramp, dynamics_swap, spring_softening };

inline const char* to_string(FaultKind k) {
    switch (k) {
        case FaultKind::none: return "none";
        case FaultKind::input_delay_ramp: return "input_delay_ramp";
        case FaultKind::dynamics_swap: return "dynamics_swap";
        case FaultKind::spring_softening: return "spring_softening";
    }
    return "?";
}

/// Fault onset at t_start, reaching `magnitude` at t_full. Ramped faults
/// interpolate linearly in between; the dynamics swap is a step at t_start.
struct FaultSchedule {
    FaultKind kind = FaultKind::none;
    double t_start = 0.0;
    double t_full = 0.0;
    double magnitude = 0.0;

    void validate() const {
        if (!(t_start <= t_full)) throw ConfigError("fault schedule needs t_start <= t_full");
        if (kind == FaultKind::input_delay_ramp && magnitude < 0.0)
            throw ConfigError("input delay magnitude must be >= 0");
        if (kind == FaultKind::spring_softening && magnitude > 0.0)
            throw ConfigError("spring softening magnitude must be <= 0");
    }

    bool enabled() const {
        if (kind == FaultKind::none) return false;
        if (kind == FaultKind::dynamics_swap) return true;
        return magnitude != 0.0;
    }

    double ramp(double t) const {
        if (t < t_start) return 0.0;
        if (t >= t_full) return magnitude;
        return magnitude * (t - t_start) / (t_full - t_start);
    }

    bool active(double t) const { return kind != FaultKind::none && t >= t_start; }
};

/// LTI plant with an optional input delay ramp.
class LtiPlant final : public Plant {
public:
    LtiPlant(StateSpaceModel model, FaultSchedule delay = {}) : model_(std::move(model)), delay_(delay) {
        if (!model_.is_siso()) throw ModelError("plant must be SISO");
        delay_.validate();
        if (delay_.kind != FaultKind::none && delay_.kind != FaultKind::input_delay_ramp)
            throw ConfigError(std::string("an LTI plant only supports input_delay_ramp faults, got ") +
                              to_string(delay_.kind));
    }

    Eigen::Index order() const override { return model_.order(); }
    double feedthrough() const override { return model_.feedthrough(); }
    double output(const Vector& x) const override { return model_.order() > 0 ? (model_.C * x)(0) : 0.0; }
    Vector derivative(double, const Vector& x, double v) const override {
        return model_.A * x + model_.B.col(0) * v;
    }
    double input_delay(double t) const override {
        return delay_.kind == FaultKind::input_delay_ramp ? delay_.ramp(t) : 0.0;
    }
    double max_input_delay() const override {
        return delay_.kind == FaultKind::input_delay_ramp ? delay_.magnitude : 0.0;
    }

    const StateSpaceModel& model() const { return model_; }

private:
    StateSpaceModel model_;
    FaultSchedule delay_;
};

inline RationalTF ex1_plant_tf() { return RationalTF({1.0, 3.0, 2.0}, {1.0, 1.0, 2.0}); }
inline RationalTF ex1_controller_tf() { return RationalTF({1.37, 1.37 * 0.91}, {1.0, 1.08}); }
inline RationalTF ex3_controller_tf() { return RationalTF({4.8, 4.8 * 3.006}, {1.0, 2.485}); }

inline std::shared_ptr<const LtiPlant> plant_ex1(const FaultSchedule& schedule) {
    if (schedule.kind != FaultKind::input_delay_ramp && schedule.kind != FaultKind::none)
        throw ConfigError("plant ex1 takes an input_delay_ramp fault");
    return std::make_shared<const LtiPlant>(tf_to_ss(ex1_plant_tf()), schedule);
}

/// xdot1 = -x1 - 2 x2 + 2v, xdot2 = x1 (- 0.5 x2^2 once faulted), y = x1 + v.
class SwitchedQuadraticPlant final : public Plant {
public:
    explicit SwitchedQuadraticPlant(FaultSchedule schedule) : schedule_(schedule) {
        schedule_.validate();
        if (schedule_.kind != FaultKind::dynamics_swap && schedule_.kind != FaultKind::none)
            throw ConfigError("plant ex2 takes a dynamics_swap fault");
    }

    Eigen::Index order() const override { return 2; }
    double feedthrough() const override { return 1.0; }
    double output(const Vector& x) const override { return x(0); }
    Vector derivative(double t, const Vector& x, double v) const override {
        Vector dx(2);
        dx(0) = -x(0) - 2.0 * x(1) + 2.0 * v;
        dx(1) = schedule_.active(t) ? x(0) - 0.5 * x(1) * x(1) : x(0);
        return dx;
    }

private:
    FaultSchedule schedule_;
};

inline std::shared_ptr<const SwitchedQuadraticPlant> plant_ex2(const FaultSchedule& schedule) {
    return std::make_shared<const SwitchedQuadraticPlant>(schedule);
}

struct MassDamperSpring {
    double m = 2.0;
    double c = 3.0;
    double k = 10.0;

    void validate() const {
        if (!(m > 0.0)) throw ConfigError("mass must be > 0");
        if (!(c >= 0.0)) throw ConfigError("damping must be >= 0");
        if (!(k > 0.0)) throw ConfigError("stiffness must be > 0");
    }
};

/// m(y'' - u'') + c(y' - u') + k(y - u) + alpha(t)(y - u)^3 = 0 with base
/// displacement u = v. State is (y, w) with w = y' - (c/m) v, which removes
/// every derivative of v from the right-hand side:
///   y' = w + (c/m) v
///   w' = -(c y' + k (y - v) + alpha (y - v)^3) / m
class BaseExcitedSpringPlant final : public Plant {
public:
    BaseExcitedSpringPlant(MassDamperSpring params, FaultSchedule schedule) : p_(params), schedule_(schedule) {
        p_.validate();
        schedule_.validate();
        if (schedule_.kind != FaultKind::spring_softening && schedule_.kind != FaultKind::none)
            throw ConfigError("plant ex3 takes a spring_softening fault");
    }

    Eigen::Index order() const override { return 2; }
    double feedthrough() const override { return 0.0; }
    double output(const Vector& x) const override { return x(0); }
    Vector derivative(double t, const Vector& x, double v) const override {
        const double alpha = this->alpha(t);
        const double ydot = x(1) + p_.c / p_.m * v;
        const double z = x(0) - v;
        Vector dx(2);
        dx(0) = ydot;
        dx(1) = -(p_.c * ydot + p_.k * z + alpha * z * z * z) / p_.m;
        return dx;
    }

    double alpha(double t) const { return schedule_.kind == FaultKind::spring_softening ? schedule_.ramp(t) : 0.0; }
    const MassDamperSpring& params() const { return p_; }

    /// Linear part y/u = (c s + k) / (m s^2 + c s + k).
    RationalTF linear_tf() const { return RationalTF({p_.c, p_.k}, {p_.m, p_.c, p_.k}); }

private:
    MassDamperSpring p_;
    FaultSchedule schedule_;
};

inline std::shared_ptr<const BaseExcitedSpringPlant> plant_ex3(const MassDamperSpring& params,
                                                               const FaultSchedule& schedule) {
    return std::make_shared<const BaseExcitedSpringPlant>(params, schedule);
}

}  // namespace passiguard
