#pragma once

// Fixed-step simulation of the SISO feedback loop r -> e -> G -> y -> C -> u,
// e = r - u, with an optional input-output wrapper M around the controller.

#include "passiguard/linsys.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <deque>
#include <iterator>
#include <limits>
#include <memory>
#include <numbers>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>

namespace passiguard {

enum class Method { rk4, euler };

inline const char* to_string(Method m) { return m == Method::rk4 ? "rk4" : "euler"; }

class ConfigError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

struct SolverConfig {
    double dt = 1e-3;
    double t_end = 120.0;
    Method method = Method::rk4;

    void validate() const {
        if (!(dt > 0.0) || !std::isfinite(dt)) throw ConfigError("solver dt must be > 0");
        if (!(t_end >= dt) || !std::isfinite(t_end)) throw ConfigError("solver t_end must be >= dt");
    }

    /// Number of whole steps in [0, t_end]; a trailing partial step is dropped.
    std::size_t steps() const {
        validate();
        return static_cast<std::size_t>(std::floor(t_end / dt + 1e-9));
    }

    bool truncates() const {
        const double covered = static_cast<double>(steps()) * dt;
        return t_end - covered > 1e-9 * dt;
    }
};

/// One explicit step of xdot = f(t, x, u) with u held over the step (zero-order hold).
template <class Field>
Vector step_ode(const Field& f, double t, const Vector& x, double u, double dt, Method method) {
    if (method == Method::euler) return x + dt * f(t, x, u);
    const Vector k1 = f(t, x, u);
    const Vector k2 = f(t + 0.5 * dt, x + 0.5 * dt * k1, u);
    const Vector k3 = f(t + 0.5 * dt, x + 0.5 * dt * k2, u);
    const Vector k4 = f(t + dt, x + dt * k3, u);
    return x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

inline constexpr double kDivergenceLimit = 1e6;

struct Divergence {
    double t;
    double state_norm;
};

/// Transport delay buffer with linear interpolation and zero pre-history.
class DelayLine {
public:
    DelayLine(double capacity, double dt) : capacity_(capacity), dt_(dt) {
        if (!(capacity >= 0.0)) throw ConfigError("delay line capacity must be >= 0");
        if (!(dt > 0.0)) throw ConfigError("delay line dt must be > 0");
    }

    void push(double t, double value) {
        if (!samples_.empty() && !(t > samples_.back().t))
            throw std::logic_error("delay line timestamps must be strictly increasing");
        samples_.push_back({t, value});
        const double keep_from = t - capacity_ - 2.0 * dt_;
        while (samples_.size() > 2 && samples_[1].t <= keep_from) {
            samples_.pop_front();
            trimmed_ = true;
        }
    }

    /// Value at time t - tau. Reads before t = 0 return 0; reads newer than the
    /// newest sample hold the newest sample.
    double read(double t, double tau) const {
        if (tau < 0.0) throw std::invalid_argument("delay must be >= 0");
        if (tau > capacity_ + 1e-12)
            throw std::out_of_range("delay " + std::to_string(tau) + " s exceeds delay line capacity " +
                                    std::to_string(capacity_) + " s");
        const double q = t - tau;
        if (q < 0.0 || samples_.empty()) return 0.0;
        if (q >= samples_.back().t) return samples_.back().value;
        if (q < samples_.front().t) {
            if (trimmed_) throw std::out_of_range("delayed read precedes retained history");
            return 0.0;
        }
        auto hi = std::upper_bound(samples_.begin(), samples_.end(), q,
                                   [](double tq, const Sample& s) { return tq < s.t; });
        auto lo = std::prev(hi);
        const double w = (q - lo->t) / (hi->t - lo->t);
        return lo->value + w * (hi->value - lo->value);
    }

    double capacity() const { return capacity_; }
    std::size_t size() const { return samples_.size(); }

private:
    struct Sample {
        double t;
        double value;
    };
    double capacity_;
    double dt_;
    std::deque<Sample> samples_;
    bool trimmed_ = false;
};

/// Reference signal r(t).
struct Reference {
    enum class Kind { zero, step, square, sine };
    Kind kind = Kind::square;
    double amplitude = 1.0;
    double period = 20.0;
    double offset = 0.0;

    double operator()(double t) const {
        switch (kind) {
            case Kind::zero: return 0.0;
            case Kind::step: return offset + amplitude;
            case Kind::square: {
                const double phase = std::fmod(t, period);
                return offset + (phase < 0.5 * period ? amplitude : -amplitude);
            }
            case Kind::sine: return offset + amplitude * std::sin(2.0 * std::numbers::pi * t / period);
        }
        return 0.0;
    }
};

inline const char* to_string(Reference::Kind k) {
    switch (k) {
        case Reference::Kind::zero: return "zero";
        case Reference::Kind::step: return "step";
        case Reference::Kind::square: return "square";
        case Reference::Kind::sine: return "sine";
    }
    return "?";
}

/// A SISO plant xdot = f(t, x, v), y = h(x) + D v, with an optional input
/// transport delay tau(t) applied to v.
class Plant {
public:
    virtual ~Plant() = default;
    virtual Eigen::Index order() const = 0;
    virtual double feedthrough() const = 0;
    virtual double output(const Vector& x) const = 0;
    virtual Vector derivative(double t, const Vector& x, double v) const = 0;
    virtual double input_delay(double /*t*/) const { return 0.0; }
    virtual double max_input_delay() const { return 0.0; }
};

/// Coefficients of the 2x2 input-output transformation around the controller:
/// y = m11 c_in + m12 c_out and u = m21 c_in + m22 c_out, where c_in/c_out are
/// the controller's own input and output and (y, u) are what the loop sees.
struct Wrapper {
    double m11 = 1.0;
    double m12 = 0.0;
    double m21 = 0.0;
    double m22 = 1.0;

    double det() const { return m11 * m22 - m12 * m21; }
    bool operator==(const Wrapper&) const = default;
};

inline constexpr double kWellPosedTolerance = 1e-9;

/// Checks the algebraic loop created by the controller feedthrough and the wrapper.
inline void check_well_posed(const Wrapper& m, double controller_feedthrough, double plant_feedthrough) {
    const double den = m.m11 + m.m12 * controller_feedthrough;
    if (std::abs(den) < kWellPosedTolerance)
        throw ConfigError("ill-posed wrapper: m11 + m12*D_c = " + std::to_string(den));
    const double slope = (m.m21 + m.m22 * controller_feedthrough) / den;
    const double loop = 1.0 + plant_feedthrough * slope;
    if (std::abs(loop) < kWellPosedTolerance)
        throw ConfigError("ill-posed feedback loop: 1 + D_p*dK = " + std::to_string(loop));
}

struct LoopSample {
    double t = 0.0;
    double r = 0.0;
    double e = 0.0;  ///< commanded plant input r - u
    double y = 0.0;
    double u = 0.0;  ///< feedback signal subtracted from r
    double v = 0.0;  ///< plant input actually applied (e after the delay)
};

enum class Wiring { nominal, wrapped };

/// Stateful loop stepper. Each call to step() samples all signals at the
/// current time and then integrates plant and controller over one dt with the
/// sampled inputs held.
class ClosedLoop {
public:
    ClosedLoop(std::shared_ptr<const Plant> plant, StateSpaceModel controller, Reference reference,
               SolverConfig solver, Wiring wiring, Wrapper m = {})
        : plant_(std::move(plant)),
          ctrl_(std::move(controller)),
          ref_(reference),
          solver_(solver),
          wiring_(wiring),
          m_(m),
          xp_(Vector::Zero(plant_->order())),
          xc_(Vector::Zero(ctrl_.order())),
          delay_(plant_->max_input_delay(), solver.dt) {
        solver_.validate();
        if (!ctrl_.is_siso()) throw ConfigError("controller must be SISO");
        if (wiring_ == Wiring::nominal) {
            if (std::abs(1.0 + plant_->feedthrough() * ctrl_.feedthrough()) < kWellPosedTolerance)
                throw ConfigError("ill-posed feedback loop: 1 + D_p*D_c = 0");
        } else {
            check_well_posed(m_, ctrl_.feedthrough(), plant_->feedthrough());
        }
    }

    /// Replace the wrapper between steps; controller and plant states are kept.
    void install(const Wrapper& m) {
        if (wiring_ != Wiring::wrapped) throw ConfigError("install requires a wrapped loop");
        check_well_posed(m, ctrl_.feedthrough(), plant_->feedthrough());
        m_ = m;
    }

    const LoopSample& step() {
        const double t = static_cast<double>(k_) * solver_.dt;
        sample(t);
        advance(t);
        ++k_;
        return last_;
    }

    const LoopSample& last() const { return last_; }
    const std::optional<Divergence>& divergence() const { return divergence_; }
    bool diverged() const { return divergence_.has_value(); }
    double time() const { return static_cast<double>(k_) * solver_.dt; }
    std::size_t steps_taken() const { return k_; }
    const Wrapper& wrapper() const { return m_; }
    Wiring wiring() const { return wiring_; }
    const Vector& plant_state() const { return xp_; }
    const Vector& controller_state() const { return xc_; }
    const StateSpaceModel& controller() const { return ctrl_; }

private:
    void sample(double t) {
        const double r = ref_(t);
        const double a = ctrl_.order() > 0 ? (ctrl_.C * xc_)(0) : 0.0;
        const double dc = ctrl_.feedthrough();
        const double h = plant_->output(xp_);
        const double dp = plant_->feedthrough();
        const double tau = plant_->input_delay(t);

        LoopSample s;
        s.t = t;
        s.r = r;
        if (wiring_ == Wiring::nominal) {
            if (tau > 0.0) {
                s.v = delay_.read(t, tau);
                s.y = h + dp * s.v;
                s.u = a + dc * s.y;
                s.e = r - s.u;
            } else {
                s.y = (h + dp * (r - a)) / (1.0 + dp * dc);
                s.u = a + dc * s.y;
                s.e = r - s.u;
                s.v = s.e;
            }
            c_in_ = s.y;
        } else {
            // c_in = (y - m12 a) / den, u = au + bu * y
            const double den = m_.m11 + m_.m12 * dc;
            const double bu = (m_.m21 + m_.m22 * dc) / den;
            const double au = m_.m22 * a - (m_.m21 + m_.m22 * dc) * m_.m12 * a / den;
            if (tau > 0.0) {
                s.v = delay_.read(t, tau);
                s.y = h + dp * s.v;
                s.u = au + bu * s.y;
                s.e = r - s.u;
            } else {
                s.y = (h + dp * (r - au)) / (1.0 + dp * bu);
                s.u = au + bu * s.y;
                s.e = r - s.u;
                s.v = s.e;
            }
            c_in_ = (s.y - m_.m12 * a) / den;
        }
        delay_.push(t, s.e);
        last_ = s;
    }

    void advance(double t) {
        const double dt = solver_.dt;
        auto plant_field = [this](double tt, const Vector& x, double v) { return plant_->derivative(tt, x, v); };
        xp_ = step_ode(plant_field, t, xp_, last_.v, dt, solver_.method);
        if (ctrl_.order() > 0) {
            auto ctrl_field = [this](double, const Vector& x, double in) -> Vector {
                return ctrl_.A * x + ctrl_.B.col(0) * in;
            };
            xc_ = step_ode(ctrl_field, t, xc_, c_in_, dt, solver_.method);
        }
        double norm = 0.0;
        bool finite = std::isfinite(last_.y) && std::isfinite(last_.u) && std::isfinite(last_.e);
        for (Eigen::Index i = 0; i < xp_.size(); ++i) {
            finite = finite && std::isfinite(xp_(i));
            norm = std::max(norm, std::abs(xp_(i)));
        }
        for (Eigen::Index i = 0; i < xc_.size(); ++i) {
            finite = finite && std::isfinite(xc_(i));
            norm = std::max(norm, std::abs(xc_(i)));
        }
        norm = std::max({norm, std::abs(last_.y), std::abs(last_.u), std::abs(last_.e)});
        if (!finite || norm > kDivergenceLimit)
            divergence_ = Divergence{t + dt, finite ? norm : std::numeric_limits<double>::infinity()};
    }

    std::shared_ptr<const Plant> plant_;
    StateSpaceModel ctrl_;
    Reference ref_;
    SolverConfig solver_;
    Wiring wiring_;
    Wrapper m_;
    Vector xp_;
    Vector xc_;
    DelayLine delay_;
    LoopSample last_{};
    double c_in_ = 0.0;
    std::size_t k_ = 0;
    std::optional<Divergence> divergence_;
};

inline ClosedLoop wire_nominal(std::shared_ptr<const Plant> plant, StateSpaceModel controller, Reference reference,
                               SolverConfig solver = {}) {
    return {std::move(plant), std::move(controller), reference, solver, Wiring::nominal};
}

inline ClosedLoop wire_wrapped(std::shared_ptr<const Plant> plant, StateSpaceModel controller, const Wrapper& m,
                               Reference reference, SolverConfig solver = {}) {
    return {std::move(plant), std::move(controller), reference, solver, Wiring::wrapped, m};
}

}  // namespace passiguard
