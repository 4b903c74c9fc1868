/**
 * @file counting.hpp
 * @brief Closed-form per-pulse detection model, its inversion and
 *        fringe visibility.
 *
 * All rates are per pump pulse and valid in the low-gain regime where the
 * mean photon number per pulse is much smaller than one. With unit pass
 * probabilities forward_rates() is exactly
 *
 *   N_s  = eta_s (R + R_s) + d_s
 *   N_i  = eta_i (R + R_i) + d_i
 *   N_co = eta_s eta_i (R + R R_s + R R_i + R_s R_i)
 *          + eta_s (R + R_s) d_i + eta_i (R + R_i) d_s
 *   N_ac = eta_s eta_i (R^2 + R R_s + R R_i + R_s R_i)
 *          + eta_s (R + R_s) d_i + eta_i (R + R_i) d_s
 */
#pragma once

#include <cmath>
#include <limits>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "fiberbell/errors.hpp"
#include "fiberbell/polarization.hpp"

namespace fiberbell {

struct DetectorParams {
    double eta_s = 0.0;  ///< signal collection x detection efficiency
    double eta_i = 0.0;
    double d_s = 0.0;  ///< dark-count probability per gate
    double d_i = 0.0;

    /// Values characterized on the original setup.
    static DetectorParams measured() { return {0.0336, 0.0238, 5.98e-5, 4.67e-5}; }

    void validate() const
    {
        auto efficiency = [](double v, const char* name) {
            if (!(v >= 0.0 && v <= 1.0)) throw ValidationError(std::string(name) + " must lie in [0, 1]");
        };
        auto dark = [](double v, const char* name) {
            if (!(v >= 0.0 && v < 1.0)) throw ValidationError(std::string(name) + " must lie in [0, 1)");
        };
        efficiency(eta_s, "detectors.eta_s");
        efficiency(eta_i, "detectors.eta_i");
        dark(d_s, "detectors.d_s");
        dark(d_i, "detectors.d_i");
    }
};

/// Generation rates per pulse: pairs, and Raman photons at signal / idler.
struct RateSet {
    double R = 0.0;
    double R_s = 0.0;
    double R_i = 0.0;

    void validate() const
    {
        if (!(R >= 0.0 && std::isfinite(R))) throw ValidationError("rates.R must be finite and >= 0");
        if (!(R_s >= 0.0 && std::isfinite(R_s))) throw ValidationError("rates.R_s must be finite and >= 0");
        if (!(R_i >= 0.0 && std::isfinite(R_i))) throw ValidationError("rates.R_i must be finite and >= 0");
    }
};

/// Per-pulse click probabilities.
struct CountRates {
    double N_s = 0.0;
    double N_i = 0.0;
    double N_co = 0.0;
    double N_ac = 0.0;
};

/// Analyzer pass probabilities feeding the rate model.
struct PassProbabilities {
    double P_c = 1.0;  ///< both photons of a pair pass
    double p_s = 1.0;  ///< signal photon of a pair passes
    double p_i = 1.0;
    double q_s = 1.0;  ///< Raman photon at the signal wavelength passes
    double q_i = 1.0;

    static PassProbabilities unit() { return {}; }
};

/// Pass probabilities for a pump/fiber/analyzer configuration. No
/// analyzers means every photon reaches its detector.
inline PassProbabilities pass_probabilities(const PumpState& pump, const FiberParams& fiber,
                                            const std::optional<AnalyzerSetting>& analyzers)
{
    if (!analyzers) return PassProbabilities::unit();
    PairState state = pair_state(pump, fiber);
    JointOutcome joint = joint_pair_outcome_probs(analyzers->theta_s_deg, analyzers->theta_i_deg, state);
    return {joint.pass_pass,
            single_side_pair_probability(Arm::signal, analyzers->theta_s_deg, state),
            single_side_pair_probability(Arm::idler, analyzers->theta_i_deg, state),
            raman_pass_probability(Arm::signal, analyzers->theta_s_deg, pump),
            raman_pass_probability(Arm::idler, analyzers->theta_i_deg, pump)};
}

inline CountRates forward_rates(const RateSet& rates, const DetectorParams& det,
                                const PassProbabilities& pass = PassProbabilities::unit())
{
    const double pair_s = rates.R * pass.p_s;
    const double pair_i = rates.R * pass.p_i;
    const double raman_s = rates.R_s * pass.q_s;
    const double raman_i = rates.R_i * pass.q_i;
    const double eta2 = det.eta_s * det.eta_i;
    const double dark_cross = det.eta_s * (pair_s + raman_s) * det.d_i + det.eta_i * (pair_i + raman_i) * det.d_s;
    const double background = pair_s * raman_i + pair_i * raman_s + raman_s * raman_i;

    CountRates out;
    out.N_s = det.eta_s * (pair_s + raman_s) + det.d_s;
    out.N_i = det.eta_i * (pair_i + raman_i) + det.d_i;
    out.N_co = eta2 * (rates.R * pass.P_c + background) + dark_cross;
    out.N_ac = eta2 * (pair_s * pair_i + background) + dark_cross;
    return out;
}

struct InvertOptions {
    PassProbabilities pass = PassProbabilities::unit();
    bool clamp_negative = false;
};

struct InversionResult {
    RateSet rates;
    // Per-pulse click probability attributable to each source.
    double pair_signal = 0.0;
    double pair_idler = 0.0;
    double raman_signal = 0.0;
    double raman_idler = 0.0;
    std::vector<std::string> issues;  ///< negative recovered quantities

    bool consistent() const { return issues.empty(); }
};

/// Solves the rate model for (R, R_s, R_i). The pair rate comes from
/// N_co - N_ac = eta_s eta_i R (P_c - R p_s p_i), taking the smaller root;
/// the Raman rates from the single-side excess over pairs and dark counts.
inline InversionResult invert_rates(const CountRates& observed, const DetectorParams& det,
                                    const InvertOptions& options = {})
{
    det.validate();
    if (det.eta_s <= 0.0 || det.eta_i <= 0.0) throw ValidationError("inversion requires eta_s > 0 and eta_i > 0");
    const PassProbabilities& pass = options.pass;
    const double b = pass.P_c;
    const double a = pass.p_s * pass.p_i;
    if (b <= 1e-12) throw DataError("pair rate not identifiable: joint pair pass probability is zero");

    const double excess = (observed.N_co - observed.N_ac) / (det.eta_s * det.eta_i);
    const double disc = b * b - 4.0 * a * excess;
    if (disc < 0.0)
        throw DataError("no real solution: N_co - N_ac exceeds the largest value the rate model allows");

    InversionResult out;
    out.rates.R = 2.0 * excess / (b + std::sqrt(disc));
    out.pair_signal = det.eta_s * out.rates.R * pass.p_s;
    out.pair_idler = det.eta_i * out.rates.R * pass.p_i;
    out.raman_signal = observed.N_s - det.d_s - out.pair_signal;
    out.raman_idler = observed.N_i - det.d_i - out.pair_idler;
    // A blocked Raman arm leaves its emission rate unidentifiable (NaN).
    const double nan = std::numeric_limits<double>::quiet_NaN();
    out.rates.R_s = pass.q_s > 1e-12 ? out.raman_signal / (det.eta_s * pass.q_s) : nan;
    out.rates.R_i = pass.q_i > 1e-12 ? out.raman_idler / (det.eta_i * pass.q_i) : nan;

    auto check = [&](double& value, const char* name) {
        if (value < 0.0) {
            out.issues.push_back(std::string("negative ") + name + " (" + std::to_string(value) + ")");
            if (options.clamp_negative) value = 0.0;
        }
    };
    check(out.rates.R, "R");
    check(out.rates.R_s, "R_s");
    check(out.rates.R_i, "R_i");
    if (options.clamp_negative) {
        out.pair_signal = det.eta_s * out.rates.R * pass.p_s;
        out.pair_idler = det.eta_i * out.rates.R * pass.p_i;
        if (!std::isnan(out.rates.R_s)) out.raman_signal = det.eta_s * out.rates.R_s * pass.q_s;
        if (!std::isnan(out.rates.R_i)) out.raman_idler = det.eta_i * out.rates.R_i * pass.q_i;
    }
    return out;
}

/// Integer tallies for one experimental point.
struct CountRecord {
    PumpState pump;
    std::optional<AnalyzerSetting> analyzers;  ///< empty when no analyzers are inserted
    std::uint64_t pulses = 0;
    std::uint64_t n_s = 0;
    std::uint64_t n_i = 0;
    std::uint64_t n_co = 0;
    std::uint64_t n_ac = 0;

    void validate() const
    {
        if (pulses == 0) throw ValidationError("record must cover at least one pulse");
        if (n_s > pulses || n_i > pulses || n_co > pulses || n_ac > pulses)
            throw ValidationError("tally exceeds pulse count");
        pump.validate();
        if (analyzers) analyzers->validate();
    }

    /// Observed per-pulse rates. Accidentals pair pulse k with k + 1, so
    /// they are normalized by pulses - 1.
    CountRates rates() const
    {
        double p = static_cast<double>(pulses);
        double pairs = pulses > 1 ? static_cast<double>(pulses - 1) : 1.0;
        return {static_cast<double>(n_s) / p, static_cast<double>(n_i) / p, static_cast<double>(n_co) / p,
                static_cast<double>(n_ac) / pairs};
    }
};

struct ExpectedCounts {
    double pulses = 0.0;
    double n_s = 0.0;
    double n_i = 0.0;
    double n_co = 0.0;
    double n_ac = 0.0;
};

inline ExpectedCounts expected_counts(const CountRates& rates, double rep_rate_hz, double duration_s)
{
    if (!(rep_rate_hz > 0.0) || !(duration_s > 0.0))
        throw ValidationError("rep_rate_hz and duration_s must be positive");
    double pulses = rep_rate_hz * duration_s;
    return {pulses, rates.N_s * pulses, rates.N_i * pulses, rates.N_co * pulses, rates.N_ac * pulses};
}

enum class VisibilityConvention {
    standard,          ///< (max - min) / (max + min)
    contrast_fraction  ///< max / (max + min) = (1 + standard) / 2
};

inline double visibility(double fringe_max, double fringe_min,
                         VisibilityConvention convention = VisibilityConvention::standard)
{
    if (!(fringe_max >= fringe_min && fringe_min >= 0.0))
        throw ValidationError("visibility requires max >= min >= 0");
    double sum = fringe_max + fringe_min;
    if (sum == 0.0) throw ValidationError("visibility undefined for an all-zero fringe");
    if (convention == VisibilityConvention::contrast_fraction) return fringe_max / sum;
    return (fringe_max - fringe_min) / sum;
}

/// Two-photon visibility implied by a phase alone: (1 + cos phi) / 2, the
/// contrast fraction of the coincidence fringe at theta_s = 135 deg.
inline double phase_visibility(double phi) { return 0.5 * (1.0 + std::cos(phi)); }

}  // namespace fiberbell
