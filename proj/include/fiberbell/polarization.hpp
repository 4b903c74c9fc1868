/**
 * @file polarization.hpp
 * @brief Pump polarization, the two-photon polarization state and
 *        projective analyzer probabilities.
 *
 * Conventions:
 *  - analyzer and pump angles are in degrees at every public entry point,
 *    phases are always radians;
 *  - H and V are the two fiber polarization axes;
 *  - the generated state is amp_h |H_s H_i> + amp_v e^{i phi} |V_s V_i>;
 *  - the signal analyzer setting theta_s projects onto the linear
 *    polarization at 90 deg - theta_s, the idler setting theta_i onto
 *    theta_i. With this convention the projector algebra reproduces the
 *    coincidence law
 *        R_c = sin^2 ts cos^2 ti + cos^2 ts sin^2 ti
 *              + 2 cos(phi) sin ts cos ts sin ti cos ti
 *    term for term (p_pp = R_c / 2 for the balanced state).
 */
#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <numbers>
#include <string>
#include <string_view>

#include "fiberbell/errors.hpp"

namespace fiberbell {

inline constexpr double pi = std::numbers::pi;
inline constexpr double two_pi = 2.0 * std::numbers::pi;
inline constexpr double infinity = std::numeric_limits<double>::infinity();

inline constexpr double normalization_tolerance = 1e-12;
inline constexpr double default_bell_tolerance = 0.05;

inline double deg_to_rad(double deg) { return deg * (pi / 180.0); }
inline double rad_to_deg(double rad) { return rad * (180.0 / pi); }

/// Wraps to [0, 2pi).
inline double wrap_two_pi(double x)
{
    double r = std::fmod(x, two_pi);
    if (r < 0.0) r += two_pi;
    if (r >= two_pi) r = 0.0;
    return r;
}

/// Wraps to (-pi, pi].
inline double wrap_pi(double x)
{
    double r = wrap_two_pi(x);
    return r > pi ? r - two_pi : r;
}

/// Shortest signed distance a - b on the circle.
inline double circular_difference(double a, double b) { return wrap_pi(a - b); }

enum class Handedness { right, left };
enum class LongAxis { plus45, minus45 };
enum class Arm { signal, idler };
enum class BellState { psi_plus, psi_minus, none };

inline double sign(Handedness h) { return h == Handedness::right ? 1.0 : -1.0; }

inline std::string_view to_string(Handedness h) { return h == Handedness::right ? "right" : "left"; }
inline std::string_view to_string(LongAxis a) { return a == LongAxis::plus45 ? "+45" : "-45"; }

inline std::string_view to_string(BellState b)
{
    switch (b) {
    case BellState::psi_plus: return "psi-plus";
    case BellState::psi_minus: return "psi-minus";
    default: return "none";
    }
}

inline Handedness parse_handedness(std::string_view s)
{
    if (s == "right" || s == "+" || s == "R") return Handedness::right;
    if (s == "left" || s == "-" || s == "L") return Handedness::left;
    throw ValidationError("handedness must be 'right' or 'left', got '" + std::string(s) + "'");
}

inline LongAxis parse_long_axis(std::string_view s)
{
    if (s == "+45" || s == "45" || s == "plus45") return LongAxis::plus45;
    if (s == "-45" || s == "minus45") return LongAxis::minus45;
    throw ValidationError("long_axis must be '+45' or '-45', got '" + std::string(s) + "'");
}

/// Pump polarization ellipse launched into the fiber.
struct PumpState {
    double per_db = infinity;  ///< extinction ratio of the ellipse, infinite for linear
    Handedness handedness = Handedness::right;
    LongAxis long_axis = LongAxis::plus45;
    double theta_p_deg = 45.0;  ///< angle of the major axis from H (mirrored for -45)

    bool is_linear() const { return std::isinf(per_db); }

    void validate() const
    {
        if (std::isnan(per_db) || per_db < 0.0)
            throw ValidationError("pump.per_db must be >= 0 or inf");
        if (!(theta_p_deg >= 0.0 && theta_p_deg <= 90.0))
            throw ValidationError("pump.theta_p_deg must lie in [0, 90]");
    }
};

/// amp_h |H_s H_i> + amp_v e^{i phase} |V_s V_i>
struct PairState {
    double amp_h = std::numbers::sqrt2 / 2.0;
    double amp_v = std::numbers::sqrt2 / 2.0;
    double phase = 0.0;

    static PairState balanced(double phase)
    {
        return {std::numbers::sqrt2 / 2.0, std::numbers::sqrt2 / 2.0, wrap_two_pi(phase)};
    }

    /// Pump at theta_p from H: amplitudes weighted cos^2 : sin^2, then normalized.
    static PairState from_pump_angle(double theta_p_deg, double phase)
    {
        double c = std::cos(deg_to_rad(theta_p_deg));
        double s = std::sin(deg_to_rad(theta_p_deg));
        double wh = c * c;
        double wv = s * s;
        double norm = std::hypot(wh, wv);
        return {wh / norm, wv / norm, wrap_two_pi(phase)};
    }

    void validate() const
    {
        if (!(amp_h >= 0.0 && amp_v >= 0.0))
            throw ValidationError("pair state amplitudes must be non-negative");
        if (std::abs(amp_h * amp_h + amp_v * amp_v - 1.0) > normalization_tolerance)
            throw ValidationError("pair state is not normalized");
        if (!std::isfinite(phase)) throw ValidationError("pair state phase must be finite");
    }
};

/// Fiber description. Only phi_b enters the model; the rest is metadata.
struct FiberParams {
    double phi_b = 0.0;  ///< birefringent phase offset, radians
    double phase_birefringence = 3.5e-5;
    double group_birefringence_ps_per_m = 0.158;
    double length_m = 25.0;
    double pump_wavelength_nm = 1552.75;
    double signal_wavelength_nm = 1555.6;
    double idler_wavelength_nm = 1549.9;

    void validate() const
    {
        if (!(phi_b >= 0.0 && phi_b < two_pi)) throw ValidationError("fiber.phi_b must lie in [0, 2pi)");
    }
};

/// Analyzer directions, degrees.
struct AnalyzerSetting {
    double theta_s_deg = 0.0;
    double theta_i_deg = 0.0;

    void validate() const
    {
        if (!(theta_s_deg >= 0.0 && theta_s_deg < 360.0))
            throw ValidationError("analyzers.theta_s_deg must lie in [0, 360)");
        if (!(theta_i_deg >= 0.0 && theta_i_deg < 360.0))
            throw ValidationError("analyzers.theta_i_deg must lie in [0, 360)");
    }
};

/// Linear polarization (radians from H) that an analyzer setting projects onto.
inline double projection_angle(Arm arm, double theta_deg)
{
    return arm == Arm::signal ? deg_to_rad(90.0 - theta_deg) : deg_to_rad(theta_deg);
}

/// phi_p = +-atan(10^(-PER/10)); zero for a linear pump.
inline double pump_phase_from_per(double per_db, Handedness handedness)
{
    if (std::isnan(per_db) || per_db < 0.0)
        throw ValidationError("invalid extinction ratio: per_db must be >= 0 or inf");
    return sign(handedness) * std::atan(std::pow(10.0, -per_db / 10.0));
}

inline double pump_phase(const PumpState& pump) { return pump_phase_from_per(pump.per_db, pump.handedness); }

/// phi = 2 phi_p + phi_b, plus pi on the -45 deg axis branch; wrapped to [0, 2pi).
inline double total_phase(double phi_p, const FiberParams& fiber, LongAxis axis)
{
    double axis_offset = axis == LongAxis::minus45 ? pi : 0.0;
    return wrap_two_pi(2.0 * phi_p + fiber.phi_b + axis_offset);
}

inline double total_phase(const PumpState& pump, const FiberParams& fiber)
{
    return total_phase(pump_phase(pump), fiber, pump.long_axis);
}

inline PairState pair_state(const PumpState& pump, const FiberParams& fiber)
{
    return PairState::from_pump_angle(pump.theta_p_deg, total_phase(pump, fiber));
}

/// Normalized coincidence rate of the pairs behind two analyzers.
inline double coincidence_probability(double theta_s_deg, double theta_i_deg, double phi)
{
    double ss = std::sin(deg_to_rad(theta_s_deg));
    double cs = std::cos(deg_to_rad(theta_s_deg));
    double si = std::sin(deg_to_rad(theta_i_deg));
    double ci = std::cos(deg_to_rad(theta_i_deg));
    return ss * ss * ci * ci + cs * cs * si * si + 2.0 * std::cos(phi) * ss * cs * si * ci;
}

struct JointOutcome {
    double pass_pass = 0.0;
    double pass_fail = 0.0;  ///< signal passes, idler blocked
    double fail_pass = 0.0;
    double fail_fail = 0.0;
};

namespace detail {

inline double projection_probability(double alpha_s, double alpha_i, const PairState& state)
{
    std::complex<double> amp = state.amp_h * std::cos(alpha_s) * std::cos(alpha_i) +
                               state.amp_v * std::polar(1.0, state.phase) * std::sin(alpha_s) * std::sin(alpha_i);
    return std::norm(amp);
}

}  // namespace detail

/// Outcome probabilities of projecting both photons of a pair. The "fail"
/// outcome is the orthogonal polarization (the other PBS port).
inline JointOutcome joint_pair_outcome_probs(double theta_s_deg, double theta_i_deg, const PairState& state)
{
    state.validate();
    double as = projection_angle(Arm::signal, theta_s_deg);
    double ai = projection_angle(Arm::idler, theta_i_deg);
    double q = pi / 2.0;
    return {detail::projection_probability(as, ai, state), detail::projection_probability(as, ai + q, state),
            detail::projection_probability(as + q, ai, state), detail::projection_probability(as + q, ai + q, state)};
}

/// Pass probability of one photon of the pair, from its reduced (mixed) state.
inline double single_side_pair_probability(Arm arm, double theta_deg, const PairState& state)
{
    state.validate();
    double a = projection_angle(arm, theta_deg);
    double c = std::cos(a);
    double s = std::sin(a);
    return state.amp_h * state.amp_h * c * c + state.amp_v * state.amp_v * s * s;
}

/// Raman photons share the pump polarization: |<analyzer|pump ellipse>|^2.
/// The ellipse has its major axis at +-theta_p and a minor/major power
/// ratio of 10^(-PER/10); handedness does not affect a linear analyzer.
inline double raman_pass_probability(Arm arm, double theta_deg, const PumpState& pump)
{
    pump.validate();
    double major = deg_to_rad(pump.long_axis == LongAxis::plus45 ? pump.theta_p_deg : -pump.theta_p_deg);
    double ratio = std::pow(10.0, -pump.per_db / 10.0);
    double d = projection_angle(arm, theta_deg) - major;
    double c = std::cos(d);
    double s = std::sin(d);
    return (c * c + ratio * s * s) / (1.0 + ratio);
}

inline BellState classify_bell(double phi, double tol = default_bell_tolerance)
{
    if (!(tol > 0.0 && tol < pi / 4.0)) throw ValidationError("classify_bell tolerance must lie in (0, pi/4)");
    if (std::abs(wrap_pi(phi)) <= tol) return BellState::psi_plus;
    if (std::abs(wrap_pi(phi - pi)) <= tol) return BellState::psi_minus;
    return BellState::none;
}

inline double bell_phase(BellState b)
{
    if (b == BellState::none) throw ValidationError("no phase for BellState::none");
    return b == BellState::psi_plus ? 0.0 : pi;
}

/// Pump ellipse (theta_p = 45) whose total phase equals target. The +45
/// axis covers phi_b + [-pi/2, pi/2]; the rest of the circle uses -45.
inline PumpState solve_pump_for_phase(double target, const FiberParams& fiber)
{
    if (!std::isfinite(target)) throw ValidationError("target phase must be finite");
    double delta = wrap_pi(target - fiber.phi_b);
    PumpState pump;
    if (std::abs(delta) > pi / 2.0) {
        pump.long_axis = LongAxis::minus45;
        delta = wrap_pi(delta - pi);
    }
    double phi_p = delta / 2.0;
    if (phi_p == 0.0) {
        pump.per_db = infinity;
        pump.handedness = Handedness::right;
    } else {
        pump.handedness = phi_p > 0.0 ? Handedness::right : Handedness::left;
        pump.per_db = std::max(0.0, -10.0 * std::log10(std::tan(std::abs(phi_p))));
    }
    return pump;
}

}  // namespace fiberbell
