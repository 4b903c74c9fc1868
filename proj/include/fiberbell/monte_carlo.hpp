/**
 * @file monte_carlo.hpp
 * @brief Seeded per-pulse simulation of pair emission, Raman background,
 *        analyzer projection and gated detection.
 *
 * Every pulse draws from its own Philox stream addressed by
 * (master_seed, pulse index, point index), so tallies do not depend on the
 * number of workers or the order in which points are evaluated.
 */
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "fiberbell/counting.hpp"
#include "fiberbell/errors.hpp"
#include "fiberbell/philox.hpp"
#include "fiberbell/polarization.hpp"

namespace fiberbell {

struct SimConfig {
    std::uint64_t master_seed = 0;
    std::uint64_t pulses = 0;
    PumpState pump;
    FiberParams fiber;
    DetectorParams det;
    RateSet rates;
    std::optional<AnalyzerSetting> analyzers;

    void validate() const
    {
        if (pulses == 0) throw ValidationError("run.pulses must be > 0");
        pump.validate();
        fiber.validate();
        det.validate();
        rates.validate();
        if (analyzers) analyzers->validate();
    }
};

struct SimOptions {
    unsigned workers = 1;
};

struct TallyResult {
    CountRecord record;
    CountRates predicted;  ///< closed-form model at the same settings
    std::uint64_t master_seed = 0;
    std::uint64_t point_index = 0;

    double expected_n_s() const { return predicted.N_s * static_cast<double>(record.pulses); }
    double expected_n_i() const { return predicted.N_i * static_cast<double>(record.pulses); }
    double expected_n_co() const { return predicted.N_co * static_cast<double>(record.pulses); }
    double expected_n_ac() const
    {
        return record.pulses > 0 ? predicted.N_ac * static_cast<double>(record.pulses - 1) : 0.0;
    }

    // Poisson standard errors of the tallies.
    double se_n_s() const { return std::sqrt(static_cast<double>(record.n_s)); }
    double se_n_i() const { return std::sqrt(static_cast<double>(record.n_i)); }
    double se_n_co() const { return std::sqrt(static_cast<double>(record.n_co)); }
    double se_n_ac() const { return std::sqrt(static_cast<double>(record.n_ac)); }
};

/// z-score of an observed Poisson tally against its expectation.
inline double poisson_z(std::uint64_t observed, double expected)
{
    if (expected <= 0.0) return observed == 0 ? 0.0 : infinity;
    return (static_cast<double>(observed) - expected) / std::sqrt(expected);
}

namespace detail {

inline constexpr int max_poisson_draw = 1000;

/// Inverse-CDF Poisson draw from a single uniform.
inline int poisson_from_uniform(double u, double mean, double p0)
{
    int k = 0;
    double p = p0;
    double cdf = p0;
    while (u > cdf && k < max_poisson_draw) {
        ++k;
        p *= mean / k;
        cdf += p;
        if (p == 0.0) break;
    }
    return k;
}

struct Clicks {
    bool signal = false;
    bool idler = false;
};

/// Per-pulse probabilities, precomputed once per point.
class PulseModel {
public:
    PulseModel(const SimConfig& config) : seed_(config.master_seed)
    {
        pair_mean_ = config.rates.R;
        raman_s_mean_ = config.rates.R_s;
        raman_i_mean_ = config.rates.R_i;
        pair_p0_ = std::exp(-pair_mean_);
        raman_s_p0_ = std::exp(-raman_s_mean_);
        raman_i_p0_ = std::exp(-raman_i_mean_);
        eta_s_ = config.det.eta_s;
        eta_i_ = config.det.eta_i;

        JointOutcome joint{1.0, 0.0, 0.0, 0.0};
        double q_s = 1.0;
        double q_i = 1.0;
        if (config.analyzers) {
            PairState state = pair_state(config.pump, config.fiber);
            joint = joint_pair_outcome_probs(config.analyzers->theta_s_deg, config.analyzers->theta_i_deg, state);
            q_s = raman_pass_probability(Arm::signal, config.analyzers->theta_s_deg, config.pump);
            q_i = raman_pass_probability(Arm::idler, config.analyzers->theta_i_deg, config.pump);
        }
        cut_pp_ = joint.pass_pass;
        cut_pf_ = cut_pp_ + joint.pass_fail;
        cut_fp_ = cut_pf_ + joint.fail_pass;
        raman_click_s_ = q_s * eta_s_;
        raman_click_i_ = q_i * eta_i_;

        const double ds = config.det.d_s;
        const double di = config.det.d_i;
        dark_none_ = (1.0 - ds) * (1.0 - di);
        dark_s_only_ = dark_none_ + ds * (1.0 - di);
        dark_i_only_ = dark_s_only_ + (1.0 - ds) * di;
    }

    Clicks pulse(std::uint64_t pulse_index, std::uint32_t point_index) const
    {
        rng::Stream stream(seed_, pulse_index, point_index);
        const auto first = stream.block(0);
        const int pairs = poisson_from_uniform(rng::to_unit(first[0]), pair_mean_, pair_p0_);
        const int raman_s = poisson_from_uniform(rng::to_unit(first[1]), raman_s_mean_, raman_s_p0_);
        const int raman_i = poisson_from_uniform(rng::to_unit(first[2]), raman_i_mean_, raman_i_p0_);

        Clicks clicks;
        const double dark = rng::to_unit(first[3]);
        if (dark >= dark_none_) {
            if (dark < dark_s_only_) {
                clicks.signal = true;
            } else if (dark < dark_i_only_) {
                clicks.idler = true;
            } else {
                clicks.signal = true;
                clicks.idler = true;
            }
        }
        if (pairs + raman_s + raman_i == 0) return clicks;

        stream.seek(1);
        for (int n = 0; n < pairs; ++n) {
            const double u = stream.uniform();
            const bool pass_s = u < cut_pf_;
            const bool pass_i = u < cut_pp_ || (u >= cut_pf_ && u < cut_fp_);
            const double det_s = stream.uniform();
            const double det_i = stream.uniform();
            if (pass_s && det_s < eta_s_) clicks.signal = true;
            if (pass_i && det_i < eta_i_) clicks.idler = true;
        }
        for (int n = 0; n < raman_s; ++n) {
            if (stream.uniform() < raman_click_s_) clicks.signal = true;
        }
        for (int n = 0; n < raman_i; ++n) {
            if (stream.uniform() < raman_click_i_) clicks.idler = true;
        }
        return clicks;
    }

private:
    std::uint64_t seed_;
    double pair_mean_, raman_s_mean_, raman_i_mean_;
    double pair_p0_, raman_s_p0_, raman_i_p0_;
    double eta_s_, eta_i_;
    double cut_pp_, cut_pf_, cut_fp_;
    double raman_click_s_, raman_click_i_;
    double dark_none_, dark_s_only_, dark_i_only_;
};

struct Tallies {
    std::uint64_t n_s = 0;
    std::uint64_t n_i = 0;
    std::uint64_t n_co = 0;
    std::uint64_t n_ac = 0;
};

/// Pulses [begin, end). Accidentals pair pulse k with k + 1; the pair that
/// straddles the chunk boundary belongs to the chunk holding pulse k.
inline Tallies run_chunk(const PulseModel& model, std::uint32_t point, std::uint64_t begin, std::uint64_t end,
                         std::uint64_t total)
{
    Tallies t;
    bool prev_signal = false;
    for (std::uint64_t k = begin; k < end; ++k) {
        const Clicks c = model.pulse(k, point);
        t.n_s += c.signal;
        t.n_i += c.idler;
        t.n_co += c.signal && c.idler;
        if (k > begin && prev_signal && c.idler) ++t.n_ac;
        prev_signal = c.signal;
    }
    if (end > begin && end < total && prev_signal && model.pulse(end, point).idler) ++t.n_ac;
    return t;
}

}  // namespace detail

inline TallyResult simulate_point(const SimConfig& config, std::uint64_t point_index = 0,
                                  const SimOptions& options = {})
{
    config.validate();
    if (point_index > 0xFFFFFFFFull) throw ValidationError("point index exceeds 32 bits");
    const auto point = static_cast<std::uint32_t>(point_index);
    const detail::PulseModel model(config);

    const std::uint64_t total = config.pulses;
    const std::uint64_t workers = std::clamp<std::uint64_t>(options.workers, 1, std::max<std::uint64_t>(total, 1));
    std::vector<detail::Tallies> partial(workers);
    if (workers == 1) {
        partial[0] = detail::run_chunk(model, point, 0, total, total);
    } else {
        std::vector<std::thread> threads;
        threads.reserve(workers);
        for (std::uint64_t w = 0; w < workers; ++w) {
            const std::uint64_t begin = total * w / workers;
            const std::uint64_t end = total * (w + 1) / workers;
            threads.emplace_back([&, w, begin, end] { partial[w] = detail::run_chunk(model, point, begin, end, total); });
        }
        for (auto& t : threads) t.join();
    }

    TallyResult out;
    out.master_seed = config.master_seed;
    out.point_index = point_index;
    out.record.pump = config.pump;
    out.record.analyzers = config.analyzers;
    out.record.pulses = total;
    for (const auto& p : partial) {
        out.record.n_s += p.n_s;
        out.record.n_i += p.n_i;
        out.record.n_co += p.n_co;
        out.record.n_ac += p.n_ac;
    }
    out.predicted = forward_rates(config.rates, config.det,
                                  pass_probabilities(config.pump, config.fiber, config.analyzers));
    return out;
}

enum class SweepVariable { theta_i, theta_s, per_db };

inline SweepVariable parse_sweep_variable(const std::string& s)
{
    if (s == "theta_i") return SweepVariable::theta_i;
    if (s == "theta_s") return SweepVariable::theta_s;
    if (s == "per_db") return SweepVariable::per_db;
    throw ValidationError("sweep variable must be theta_i, theta_s or per_db, got '" + s + "'");
}

struct Sweep {
    SweepVariable variable = SweepVariable::theta_i;
    std::vector<double> values;
    // per_db sweeps only: repeat the values for each handedness / axis
    // listed (empty = keep the config's pump).
    std::vector<Handedness> handedness;
    std::vector<LongAxis> axes;
};

/// Expands a sweep into one configuration per point, in point-index order.
inline std::vector<SimConfig> sweep_points(const SimConfig& base, const Sweep& sweep)
{
    if (sweep.values.empty()) throw ValidationError("sweep needs at least one value");
    if (sweep.variable != SweepVariable::per_db && !base.analyzers)
        throw ValidationError("angle sweeps require analyzers");

    std::vector<SimConfig> points;
    if (sweep.variable == SweepVariable::per_db) {
        const std::vector<LongAxis> axes = sweep.axes.empty() ? std::vector{base.pump.long_axis} : sweep.axes;
        const std::vector<Handedness> hands =
            sweep.handedness.empty() ? std::vector{base.pump.handedness} : sweep.handedness;
        for (LongAxis axis : axes) {
            for (Handedness hand : hands) {
                for (double v : sweep.values) {
                    SimConfig c = base;
                    c.pump.per_db = v;
                    c.pump.handedness = hand;
                    c.pump.long_axis = axis;
                    points.push_back(c);
                }
            }
        }
    } else {
        for (double v : sweep.values) {
            SimConfig c = base;
            if (sweep.variable == SweepVariable::theta_i)
                c.analyzers->theta_i_deg = v;
            else
                c.analyzers->theta_s_deg = v;
            points.push_back(c);
        }
    }
    for (std::size_t k = 0; k < points.size(); ++k) {
        try {
            points[k].validate();
        } catch (const ValidationError& e) {
            throw ValidationError("sweep point " + std::to_string(k) + ": " + e.what());
        }
    }
    return points;
}

/// One simulate_point per configuration; point k uses substream k.
inline std::vector<TallyResult> simulate_points(const std::vector<SimConfig>& points, const SimOptions& options = {})
{
    std::vector<TallyResult> out;
    out.reserve(points.size());
    for (std::size_t k = 0; k < points.size(); ++k) out.push_back(simulate_point(points[k], k, options));
    return out;
}

inline std::vector<TallyResult> simulate_sweep(const SimConfig& base, const Sweep& sweep,
                                               const SimOptions& options = {})
{
    return simulate_points(sweep_points(base, sweep), options);
}

}  // namespace fiberbell
