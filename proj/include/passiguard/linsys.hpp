#pragma once

// LTI models for SISO plants and compensators: rational transfer functions,
// state-space realizations, frequency response and frequency-grid oracles for
// the L2 gain and the IFP/OFP passivity indices.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

namespace passiguard {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using Complex = std::complex<double>;
using ComplexMatrix = Eigen::MatrixXcd;

/// Thrown for malformed or unsupported models (improper TF, bad dimensions,
/// unstable system where a gain is requested, MIMO where SISO is required).
class ModelError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Thrown when jwI - A is singular at the queried frequency.
class FrequencyResponseError : public std::domain_error {
public:
    FrequencyResponseError(const std::string& what, double omega)
        : std::domain_error(what), omega_(omega) {}
    double omega() const noexcept { return omega_; }

private:
    double omega_;
};

namespace detail {

inline Complex polyval(const std::vector<double>& coeffs, Complex s) {
    Complex acc{0.0, 0.0};
    for (double c : coeffs) acc = acc * s + c;
    return acc;
}

inline std::vector<double> strip_leading_zeros(std::vector<double> p) {
    auto first = std::find_if(p.begin(), p.end(), [](double c) { return c != 0.0; });
    if (first == p.end()) return {0.0};
    p.erase(p.begin(), first);
    return p;
}

}  // namespace detail

/// SISO transfer function num(s)/den(s), coefficients in descending powers.
struct RationalTF {
    std::vector<double> num;
    std::vector<double> den;

    RationalTF(std::vector<double> numerator, std::vector<double> denominator)
        : num(detail::strip_leading_zeros(std::move(numerator))), den(std::move(denominator)) {
        if (den.empty()) throw ModelError("transfer function denominator is empty");
        if (den.front() == 0.0) throw ModelError("transfer function denominator has a zero leading coefficient");
        for (double c : num)
            if (!std::isfinite(c)) throw ModelError("transfer function numerator is not finite");
        for (double c : den)
            if (!std::isfinite(c)) throw ModelError("transfer function denominator is not finite");
        if (num.size() > den.size())
            throw ModelError("improper transfer function: numerator degree " + std::to_string(num.size() - 1) +
                             " exceeds denominator degree " + std::to_string(den.size() - 1));
    }

    static RationalTF gain(double k) { return RationalTF({k}, {1.0}); }

    std::size_t order() const { return den.size() - 1; }

    Complex eval(Complex s) const { return detail::polyval(num, s) / detail::polyval(den, s); }
};

/// Continuous-time realization xdot = A x + B u, y = C x + D u.
struct StateSpaceModel {
    Matrix A;
    Matrix B;
    Matrix C;
    Matrix D;

    StateSpaceModel(Matrix a, Matrix b, Matrix c, Matrix d)
        : A(std::move(a)), B(std::move(b)), C(std::move(c)), D(std::move(d)) {
        if (A.rows() != A.cols()) throw ModelError("state matrix A must be square");
        const auto n = A.rows();
        if (B.rows() != n) throw ModelError("input matrix B must have as many rows as A");
        if (C.cols() != n) throw ModelError("output matrix C must have as many columns as A");
        if (D.rows() != C.rows() || D.cols() != B.cols())
            throw ModelError("feedthrough matrix D must be outputs x inputs");
    }

    static StateSpaceModel static_gain(double k) {
        return {Matrix(0, 0), Matrix(0, 1), Matrix(1, 0), Matrix::Constant(1, 1, k)};
    }

    Eigen::Index order() const { return A.rows(); }
    Eigen::Index inputs() const { return B.cols(); }
    Eigen::Index outputs() const { return C.rows(); }
    bool is_siso() const { return inputs() == 1 && outputs() == 1; }

    /// All eigenvalues of A strictly in the open left half-plane.
    bool is_stable() const {
        if (order() == 0) return true;
        const Eigen::VectorXcd ev = A.eigenvalues();
        return (ev.real().array() < 0.0).all();
    }

    double feedthrough() const { return D(0, 0); }
};

/// Controllable-companion realization. The input column carries the first
/// nonzero coefficient of the strictly proper remainder so that, e.g.,
/// (s^2+3s+2)/(s^2+s+2) yields xdot1 = -x1 - 2 x2 + 2u, xdot2 = x1, y = x1 + u.
inline StateSpaceModel tf_to_ss(const RationalTF& tf) {
    const std::size_t n = tf.order();
    const double lead = tf.den.front();
    std::vector<double> den(tf.den.size());
    std::transform(tf.den.begin(), tf.den.end(), den.begin(), [lead](double c) { return c / lead; });
    std::vector<double> num(n + 1, 0.0);
    std::transform(tf.num.begin(), tf.num.end(), num.end() - static_cast<std::ptrdiff_t>(tf.num.size()),
                   [lead](double c) { return c / lead; });

    const double d = num[0];
    std::vector<double> rem(n);
    for (std::size_t i = 0; i < n; ++i) rem[i] = num[i + 1] - d * den[i + 1];
    auto nz = std::find_if(rem.begin(), rem.end(), [](double c) { return c != 0.0; });
    const double beta = nz == rem.end() ? 1.0 : *nz;

    const auto ni = static_cast<Eigen::Index>(n);
    Matrix A = Matrix::Zero(ni, ni);
    Matrix B = Matrix::Zero(ni, 1);
    Matrix C = Matrix::Zero(1, ni);
    for (Eigen::Index j = 0; j < ni; ++j) {
        A(0, j) = -den[static_cast<std::size_t>(j) + 1];
        C(0, j) = rem[static_cast<std::size_t>(j)] / beta;
    }
    for (Eigen::Index i = 1; i < ni; ++i) A(i, i - 1) = 1.0;
    if (ni > 0) B(0, 0) = beta;
    return {std::move(A), std::move(B), std::move(C), Matrix::Constant(1, 1, d)};
}

/// C (jwI - A)^-1 B + D.
inline ComplexMatrix freq_response(const StateSpaceModel& sys, double omega) {
    const ComplexMatrix D = sys.D.cast<Complex>();
    if (sys.order() == 0) return D;
    ComplexMatrix resolvent = -sys.A.cast<Complex>();
    resolvent.diagonal().array() += Complex{0.0, omega};
    Eigen::FullPivLU<ComplexMatrix> lu(resolvent);
    lu.setThreshold(1e-13);
    if (!lu.isInvertible())
        throw FrequencyResponseError("resolvent jwI - A is singular at omega = " + std::to_string(omega), omega);
    const ComplexMatrix x = lu.solve(sys.B.cast<Complex>());
    return sys.C.cast<Complex>() * x + D;
}

inline Complex freq_response_siso(const StateSpaceModel& sys, double omega) {
    return freq_response(sys, omega)(0, 0);
}

/// Log-spaced evaluation grid for the frequency-domain oracles.
struct FrequencySweep {
    double omega_min = 1e-3;
    double omega_max = 1e4;
    int points_per_decade = 200;

    void validate() const {
        if (!(omega_min > 0.0)) throw ModelError("frequency sweep needs omega_min > 0");
        if (!(omega_min < omega_max)) throw ModelError("frequency sweep needs omega_min < omega_max");
        if (points_per_decade < 1) throw ModelError("frequency sweep needs points_per_decade >= 1");
    }

    std::vector<double> grid() const {
        validate();
        const double lo = std::log10(omega_min);
        const double hi = std::log10(omega_max);
        const auto intervals = static_cast<std::size_t>(std::ceil((hi - lo) * points_per_decade));
        std::vector<double> w(intervals + 1);
        for (std::size_t i = 0; i <= intervals; ++i)
            w[i] = std::pow(10.0, lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(intervals));
        return w;
    }
};

inline void require_stable(const StateSpaceModel& sys, const char* what) {
    if (!sys.is_stable()) throw ModelError(std::string(what) + " requires a stable system (A has eigenvalues with Re >= 0)");
}

/// Largest singular value of the frequency response over the grid, plus the
/// DC and high-frequency (D) limits. A lower bound on the H-infinity norm.
inline double l2_gain(const StateSpaceModel& sys, const FrequencySweep& sweep = {}) {
    require_stable(sys, "l2_gain");
    auto sigma_max = [](const ComplexMatrix& h) {
        return Eigen::JacobiSVD<ComplexMatrix>(h).singularValues()(0);
    };
    double g = sigma_max(sys.D.cast<Complex>());
    g = std::max(g, sigma_max(freq_response(sys, 0.0)));
    for (double w : sweep.grid()) g = std::max(g, sigma_max(freq_response(sys, w)));
    return g;
}

inline constexpr double kDefaultGainInflation = 1.05;

/// Grid gain inflated by a safety factor; used as gamma in the M-matrix constraints.
inline double gain_bound(const StateSpaceModel& sys, const FrequencySweep& sweep = {},
                         double inflation = kDefaultGainInflation) {
    return inflation * l2_gain(sys, sweep);
}

struct IndexOracle {
    double nu;             ///< min Re G(jw) over the grid (IFP index upper bound)
    double rho;            ///< min Re 1/G(jw) over the grid (OFP index upper bound)
    std::size_t skipped;   ///< grid points with G(jw) == 0, excluded from rho
};

/// Frequency-grid upper bounds on the IFP and OFP indices of a stable SISO LTI system.
inline IndexOracle true_indices_lti(const StateSpaceModel& sys, const FrequencySweep& sweep = {}) {
    if (!sys.is_siso()) throw ModelError("true_indices_lti supports SISO systems only");
    require_stable(sys, "true_indices_lti");
    IndexOracle out{std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity(), 0};
    auto visit = [&](Complex g) {
        out.nu = std::min(out.nu, g.real());
        if (std::abs(g) == 0.0) {
            ++out.skipped;
            return;
        }
        out.rho = std::min(out.rho, (1.0 / g).real());
    };
    visit(freq_response_siso(sys, 0.0));
    for (double w : sweep.grid()) visit(freq_response_siso(sys, w));
    return out;
}

/// Series connection u -> first -> second -> y.
inline StateSpaceModel series(const StateSpaceModel& first, const StateSpaceModel& second) {
    if (first.outputs() != second.inputs()) throw ModelError("series: dimension mismatch");
    const auto n1 = first.order();
    const auto n2 = second.order();
    Matrix A = Matrix::Zero(n1 + n2, n1 + n2);
    A.topLeftCorner(n1, n1) = first.A;
    A.bottomLeftCorner(n2, n1) = second.B * first.C;
    A.bottomRightCorner(n2, n2) = second.A;
    Matrix B(n1 + n2, first.inputs());
    B << first.B, second.B * first.D;
    Matrix C(second.outputs(), n1 + n2);
    C << second.D * first.C, second.C;
    return {std::move(A), std::move(B), std::move(C), second.D * first.D};
}

}  // namespace passiguard
