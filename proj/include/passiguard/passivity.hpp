#pragma once

// Online passivity-index estimation from plant input/output samples:
//   rho_bar(t) = int e*y / int y*y,   nu_bar(t) = int e*y / int e*e
// accumulated with the trapezoid rule, cumulatively or over a moving window.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <deque>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>

namespace passiguard {

/// Kahan-Babuska (Neumaier) compensated accumulator.
class CompensatedSum {
public:
    void add(double x) {
        const double t = sum_ + x;
        if (std::abs(sum_) >= std::abs(x))
            comp_ += (sum_ - t) + x;
        else
            comp_ += (x - t) + sum_;
        sum_ = t;
    }
    double value() const { return sum_ + comp_; }

private:
    double sum_ = 0.0;
    double comp_ = 0.0;
};

struct EstimatorConfig {
    double eps_den = 1e-9;
    double warmup = 1.0;
    std::optional<double> window;  ///< seconds; empty means cumulative

    void validate() const {
        if (!(eps_den > 0.0)) throw std::invalid_argument("estimator eps_den must be > 0");
        if (!(warmup >= 0.0)) throw std::invalid_argument("estimator warmup must be >= 0");
        if (window && !(*window > 0.0)) throw std::invalid_argument("estimator window must be > 0");
    }
};

struct PassivityEstimate {
    double i_ey = 0.0;
    double i_yy = 0.0;
    double i_ee = 0.0;
    std::optional<double> rho_bar;
    std::optional<double> nu_bar;
    std::optional<double> window;
    double elapsed = 0.0;
    bool warmed_up = false;
    bool signal_fault = false;
};

class PassivityEstimator {
public:
    explicit PassivityEstimator(EstimatorConfig config = {}) : cfg_(config) {
        cfg_.validate();
        est_.window = cfg_.window;
    }

    /// Adds the sample (e, y) taken dt after the previous one. The first sample
    /// only seeds the trapezoid.
    const PassivityEstimate& update(double e, double y, double dt) {
        if (est_.signal_fault) return est_;
        if (!(dt > 0.0)) throw std::invalid_argument("estimator dt must be > 0");
        if (!std::isfinite(e) || !std::isfinite(y)) {
            est_.signal_fault = true;
            return est_;
        }
        if (has_prev_) {
            const Increment inc{0.5 * dt * (prev_e_ * prev_y_ + e * y), 0.5 * dt * (prev_y_ * prev_y_ + y * y),
                                0.5 * dt * (prev_e_ * prev_e_ + e * e)};
            ey_.add(inc.ey);
            yy_.add(inc.yy);
            ee_.add(inc.ee);
            if (cfg_.window) {
                history_.push_back(inc);
                const auto keep = static_cast<std::size_t>(std::llround(*cfg_.window / dt));
                while (history_.size() > keep) {
                    const Increment& old = history_.front();
                    ey_.add(-old.ey);
                    yy_.add(-old.yy);
                    ee_.add(-old.ee);
                    history_.pop_front();
                }
            }
            est_.elapsed += dt;
        }
        prev_e_ = e;
        prev_y_ = y;
        has_prev_ = true;

        est_.i_ey = ey_.value();
        est_.i_yy = std::max(0.0, yy_.value());
        est_.i_ee = std::max(0.0, ee_.value());
        est_.rho_bar = est_.i_yy > cfg_.eps_den ? std::optional<double>(est_.i_ey / est_.i_yy) : std::nullopt;
        est_.nu_bar = est_.i_ee > cfg_.eps_den ? std::optional<double>(est_.i_ey / est_.i_ee) : std::nullopt;
        est_.warmed_up = est_.elapsed > cfg_.warmup;
        return est_;
    }

    const PassivityEstimate& estimate() const { return est_; }
    const EstimatorConfig& config() const { return cfg_; }

private:
    struct Increment {
        double ey;
        double yy;
        double ee;
    };
    EstimatorConfig cfg_;
    PassivityEstimate est_;
    CompensatedSum ey_, yy_, ee_;
    std::deque<Increment> history_;
    double prev_e_ = 0.0;
    double prev_y_ = 0.0;
    bool has_prev_ = false;
};

struct Thresholds {
    double rho0 = -0.15;
    double nu0 = -0.15;
    double eps_margin = 0.05;

    void validate() const {
        if (!(eps_margin > 0.0)) throw std::invalid_argument("eps_margin must be > 0");
    }
};

enum class Verdict { nominal, rho_low, nu_low, both_low, indeterminate };

inline const char* to_string(Verdict v) {
    switch (v) {
        case Verdict::nominal: return "NOMINAL";
        case Verdict::rho_low: return "RHO_LOW";
        case Verdict::nu_low: return "NU_LOW";
        case Verdict::both_low: return "BOTH_LOW";
        case Verdict::indeterminate: return "INDETERMINATE";
    }
    return "?";
}

inline bool is_fault(Verdict v) { return v == Verdict::rho_low || v == Verdict::nu_low || v == Verdict::both_low; }

inline Verdict classify(double rho_bar, double nu_bar, const Thresholds& th) {
    const bool rho_low = rho_bar < th.rho0;
    const bool nu_low = nu_bar < th.nu0;
    if (rho_low && nu_low) return Verdict::both_low;
    if (rho_low) return Verdict::rho_low;
    if (nu_low) return Verdict::nu_low;
    return Verdict::nominal;
}

inline Verdict detect(const PassivityEstimate& est, const Thresholds& th) {
    if (est.signal_fault || !est.warmed_up || !est.rho_bar || !est.nu_bar) return Verdict::indeterminate;
    return classify(*est.rho_bar, *est.nu_bar, th);
}

/// Trapezoid integral of (1 + eps*delta) u y - delta y^2 - eps u^2 over a
/// uniformly sampled input/output trace. A value below zero refutes
/// IF-OFP(eps, delta) for a trajectory started from rest.
inline double verify_dissipativity(std::span<const double> input, std::span<const double> output, double dt,
                                   double eps, double delta) {
    if (input.empty() || input.size() != output.size())
        throw std::invalid_argument("dissipativity trace must be nonempty with matching lengths");
    auto supply = [&](std::size_t i) {
        const double u = input[i];
        const double y = output[i];
        return (1.0 + eps * delta) * (u * y) - delta * (y * y) - eps * (u * u);
    };
    CompensatedSum acc;
    double prev = supply(0);
    for (std::size_t i = 1; i < input.size(); ++i) {
        const double cur = supply(i);
        acc.add(0.5 * dt * (prev + cur));
        prev = cur;
    }
    return acc.value();
}

}  // namespace passiguard
