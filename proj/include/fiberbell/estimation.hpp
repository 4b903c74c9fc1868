/**
 * @file estimation.hpp
 * @brief Parameter recovery from count data: accidental subtraction,
 *        fringe visibility, the birefringent phase offset and the
 *        pair / Raman split of single-side counts.
 */
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "fiberbell/counting.hpp"
#include "fiberbell/errors.hpp"
#include "fiberbell/philox.hpp"
#include "fiberbell/polarization.hpp"

namespace fiberbell {

/// A value with its 1-sigma standard error.
struct Measurement {
    double value = 0.0;
    double error = 0.0;
};

/// n_co - n_ac with independent Poisson errors. Negative values are kept.
inline Measurement subtract_accidentals(const CountRecord& record)
{
    record.validate();
    const double co = static_cast<double>(record.n_co);
    const double ac = static_cast<double>(record.n_ac);
    return {co - ac, std::sqrt(co + ac)};
}

struct FitParameter {
    std::string name;
    double value = 0.0;
    double sigma = 0.0;
};

struct FitResult {
    std::vector<FitParameter> parameters;
    double rss = 0.0;  ///< inverse-variance weighted residual sum of squares
    std::size_t dof = 0;
    bool converged = false;
    std::vector<std::string> flags;

    const FitParameter& at(std::string_view name) const
    {
        for (const auto& p : parameters)
            if (p.name == name) return p;
        throw Error("no fit parameter named '" + std::string(name) + "'");
    }

    double value(std::string_view name) const { return at(name).value; }
    double sigma(std::string_view name) const { return at(name).sigma; }

    bool has_flag(std::string_view flag) const { return std::find(flags.begin(), flags.end(), flag) != flags.end(); }
};

inline constexpr std::string_view flag_unphysical_visibility = "unphysical_visibility";
inline constexpr std::string_view flag_ambiguous = "ambiguous";
inline constexpr std::string_view flag_bootstrap_failures = "bootstrap_failures";

namespace detail {

/// Zero (or missing) Poisson errors fall back to unit weight.
inline double effective_error(double e) { return e > 0.0 && std::isfinite(e) ? e : 1.0; }

}  // namespace detail

struct FringePoint {
    double angle_deg = 0.0;
    double value = 0.0;
    double error = 0.0;
};

struct FringeData {
    std::vector<FringePoint> points;
    double integration_s = 0.0;
};

/// Weighted linear least squares of y = A + B cos 2t + C sin 2t.
/// Reports A, B, C, visibility = sqrt(B^2 + C^2) / A and phase_offset =
/// atan2(C, B), i.e. y = A [1 + V cos(2t - phase_offset)].
inline FitResult fit_fringe(const FringeData& data)
{
    const auto& pts = data.points;
    if (pts.size() < 4) throw ValidationError("fringe fit needs at least 4 points");
    std::vector<double> distinct;
    for (const auto& p : pts) {
        double a = std::fmod(p.angle_deg, 360.0);
        if (a < 0) a += 360.0;
        if (std::none_of(distinct.begin(), distinct.end(), [&](double d) { return std::abs(d - a) < 1e-9; }))
            distinct.push_back(a);
    }
    if (distinct.size() < 4) throw ValidationError("fringe fit needs at least 4 distinct angles");

    const auto n = static_cast<Eigen::Index>(pts.size());
    Eigen::MatrixXd X(n, 3);
    Eigen::VectorXd y(n);
    Eigen::VectorXd w(n);
    for (Eigen::Index k = 0; k < n; ++k) {
        const double t = 2.0 * deg_to_rad(pts[k].angle_deg);
        X(k, 0) = 1.0;
        X(k, 1) = std::cos(t);
        X(k, 2) = std::sin(t);
        y(k) = pts[k].value;
        const double e = detail::effective_error(pts[k].error);
        w(k) = 1.0 / (e * e);
    }
    const Eigen::Matrix3d normal = X.transpose() * w.asDiagonal() * X;
    const Eigen::Vector3d rhs = X.transpose() * w.asDiagonal() * y;
    const Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> eig(normal, Eigen::EigenvaluesOnly);
    const Eigen::Vector3d ev = eig.eigenvalues();  // ascending
    if (ev(0) <= 1e-10 * ev(2)) throw FitError("singular design matrix: degenerate angle set");
    const Eigen::Matrix3d cov = normal.inverse();
    const Eigen::Vector3d beta = cov * rhs;

    const double A = beta(0);
    const double B = beta(1);
    const double C = beta(2);
    if (!(A > 0.0)) throw FitError("fringe mean is not positive; visibility undefined");
    const double r = std::hypot(B, C);
    const double V = r / A;

    double sigma_v;
    double sigma_psi;
    if (r > 0.0) {
        const Eigen::Vector3d g(-V / A, B / (A * r), C / (A * r));
        sigma_v = std::sqrt(std::max(0.0, g.dot(cov * g)));
        const Eigen::Vector3d h(0.0, -C / (r * r), B / (r * r));
        sigma_psi = std::sqrt(std::max(0.0, h.dot(cov * h)));
    } else {
        sigma_v = std::sqrt(cov(1, 1) + cov(2, 2)) / A;
        sigma_psi = pi;
    }

    const Eigen::VectorXd resid = y - X * beta;
    FitResult out;
    out.parameters = {{"A", A, std::sqrt(cov(0, 0))},
                      {"B", B, std::sqrt(cov(1, 1))},
                      {"C", C, std::sqrt(cov(2, 2))},
                      {"visibility", V, sigma_v},
                      {"phase_offset", r > 0.0 ? std::atan2(C, B) : 0.0, sigma_psi}};
    out.rss = resid.dot(w.asDiagonal() * resid);
    out.dof = pts.size() - 3;
    out.converged = true;
    if (V > 1.0) out.flags.emplace_back(flag_unphysical_visibility);
    return out;
}

inline double fringe_model(const FitResult& fit, double angle_deg)
{
    const double t = 2.0 * deg_to_rad(angle_deg);
    return fit.value("A") + fit.value("B") * std::cos(t) + fit.value("C") * std::sin(t);
}

/// One point of a pump-ellipse sweep taken at theta_s = 135, theta_i = 45.
struct PhasePoint {
    double per_db = infinity;
    Handedness handedness = Handedness::right;
    LongAxis axis = LongAxis::plus45;
    double value = 0.0;  ///< accidental-subtracted coincidences
    double error = 0.0;

    /// Pump-controlled part of the total phase: 2 phi_p (+ pi on the -45 axis).
    double pump_term() const
    {
        return 2.0 * pump_phase_from_per(per_db, handedness) + (axis == LongAxis::minus45 ? pi : 0.0);
    }
};

struct PhaseFitOptions {
    double grid_step = 0.01 * pi;
    int max_iterations = 200;
    int bootstrap_resamples = 1000;
    double confidence = 0.95;
    std::uint64_t seed = 0;
};

/// y = K * 0.5 [1 - cos(x + phi_b)]
inline double phase_model(double amplitude, double phi_b, double pump_term)
{
    return amplitude * 0.5 * (1.0 - std::cos(pump_term + phi_b));
}

namespace detail {

inline constexpr std::uint32_t bootstrap_domain = 0xB0075u;

struct PhaseSample {
    std::vector<double> x;
    std::vector<double> y;
    std::vector<double> w;
};

struct ProfileFit {
    double amplitude = 0.0;
    double phi_b = 0.0;
    double chi2 = 0.0;
};

/// Best amplitude for fixed phi_b (closed form) and its chi^2.
inline ProfileFit profile_at(const PhaseSample& s, double phi_b)
{
    double num = 0.0;
    double den = 0.0;
    for (std::size_t k = 0; k < s.x.size(); ++k) {
        const double g = 0.5 * (1.0 - std::cos(s.x[k] + phi_b));
        num += s.w[k] * s.y[k] * g;
        den += s.w[k] * g * g;
    }
    ProfileFit f;
    f.phi_b = phi_b;
    f.amplitude = den > 0.0 ? num / den : 0.0;
    for (std::size_t k = 0; k < s.x.size(); ++k) {
        const double r = s.y[k] - phase_model(f.amplitude, phi_b, s.x[k]);
        f.chi2 += s.w[k] * r * r;
    }
    return f;
}

struct PhaseSolution {
    ProfileFit best;
    Eigen::Matrix2d covariance = Eigen::Matrix2d::Zero();
    bool ambiguous = false;
};

inline double chi2_at(const PhaseSample& s, double amplitude, double phi_b)
{
    double c = 0.0;
    for (std::size_t k = 0; k < s.x.size(); ++k) {
        const double r = s.y[k] - phase_model(amplitude, phi_b, s.x[k]);
        c += s.w[k] * r * r;
    }
    return c;
}

inline Eigen::Matrix2d information(const PhaseSample& s, double amplitude, double phi_b)
{
    Eigen::Matrix2d jtj = Eigen::Matrix2d::Zero();
    for (std::size_t k = 0; k < s.x.size(); ++k) {
        const Eigen::Vector2d j(0.5 * (1.0 - std::cos(s.x[k] + phi_b)), amplitude * 0.5 * std::sin(s.x[k] + phi_b));
        jtj += s.w[k] * j * j.transpose();
    }
    return jtj;
}

/// Coarse grid over phi_b followed by damped Gauss-Newton on (K, phi_b).
inline PhaseSolution solve_phase(const PhaseSample& s, const PhaseFitOptions& opt)
{
    const int grid = std::max(8, static_cast<int>(std::lround(two_pi / opt.grid_step)));
    std::vector<ProfileFit> profile(grid);
    for (int j = 0; j < grid; ++j) profile[j] = profile_at(s, two_pi * j / grid);

    int best = 0;
    for (int j = 1; j < grid; ++j)
        if (profile[j].chi2 < profile[best].chi2) best = j;

    PhaseSolution sol;
    // A second local minimum (away from the best one) within delta chi^2 < 1.
    for (int j = 0; j < grid; ++j) {
        const double c = profile[j].chi2;
        const bool local_min = c <= profile[(j + grid - 1) % grid].chi2 && c <= profile[(j + 1) % grid].chi2;
        const int gap = std::min(std::abs(j - best), grid - std::abs(j - best));
        if (local_min && gap > 2 && c - profile[best].chi2 < 1.0) sol.ambiguous = true;
    }

    double amplitude = profile[best].amplitude;
    double phi = profile[best].phi_b;
    double chi2 = profile[best].chi2;
    double lambda = 1e-3;
    bool converged = false;
    for (int it = 0; it < opt.max_iterations && !converged; ++it) {
        Eigen::Matrix2d jtj = Eigen::Matrix2d::Zero();
        Eigen::Vector2d jtr = Eigen::Vector2d::Zero();
        for (std::size_t k = 0; k < s.x.size(); ++k) {
            const double g = 0.5 * (1.0 - std::cos(s.x[k] + phi));
            const Eigen::Vector2d j(g, amplitude * 0.5 * std::sin(s.x[k] + phi));
            const double r = s.y[k] - amplitude * g;
            jtj += s.w[k] * j * j.transpose();
            jtr += s.w[k] * r * j;
        }
        for (int attempt = 0; attempt < 40; ++attempt) {
            Eigen::Matrix2d damped = jtj;
            damped.diagonal() *= 1.0 + lambda;
            const Eigen::Vector2d step = damped.ldlt().solve(jtr);
            if (!step.allFinite()) {
                lambda *= 10.0;
                continue;
            }
            const double trial = chi2_at(s, amplitude + step(0), phi + step(1));
            if (trial <= chi2) {
                const bool small = std::abs(step(1)) < 1e-12 && std::abs(step(0)) <= 1e-12 * (1.0 + std::abs(amplitude));
                const bool flat = chi2 - trial <= 1e-14 * (1.0 + chi2);
                amplitude += step(0);
                phi += step(1);
                chi2 = trial;
                lambda = std::max(lambda / 10.0, 1e-12);
                converged = small || flat;
                break;
            }
            lambda *= 10.0;
            if (lambda > 1e12) {
                converged = true;  // no downhill step left: at the minimum
                break;
            }
        }
    }
    if (!converged) throw FitError("birefringent phase fit did not converge");

    sol.best = {amplitude, wrap_two_pi(phi), chi2};
    const Eigen::Matrix2d info = information(s, amplitude, phi);
    if (std::abs(info.determinant()) <= 1e-300) throw FitError("birefringent phase fit is not identifiable");
    sol.covariance = info.inverse();
    return sol;
}

inline double percentile(std::vector<double> v, double q)
{
    std::sort(v.begin(), v.end());
    const double pos = q * static_cast<double>(v.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = std::min(lo + 1, v.size() - 1);
    return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

}  // namespace detail

/// Fits K * 0.5 [1 - cos(2 phi_p + axis + phi_b)] to a pump-ellipse sweep.
/// Parameters: phi_b (wrapped to [0, 2pi), 1-sigma from the covariance),
/// amplitude, and the parametric-bootstrap percentile interval
/// phi_b_ci_low / phi_b_ci_high (unwrapped around phi_b) with the
/// bootstrap spread phi_b_bootstrap_sigma.
inline FitResult fit_birefringent_phase(std::span<const PhasePoint> points, const PhaseFitOptions& opt = {})
{
    if (points.size() < 5) throw ValidationError("phase fit needs at least 5 points");
    detail::PhaseSample sample;
    for (const auto& p : points) {
        sample.x.push_back(p.pump_term());
        sample.y.push_back(p.value);
        const double e = detail::effective_error(p.error);
        sample.w.push_back(1.0 / (e * e));
    }
    std::vector<double> distinct;
    for (double x : sample.x) {
        if (std::none_of(distinct.begin(), distinct.end(),
                         [&](double d) { return std::abs(circular_difference(d, x)) < 1e-9; }))
            distinct.push_back(x);
    }
    if (distinct.size() < 3) throw ValidationError("phase fit needs at least 3 distinct pump phases");

    const detail::PhaseSolution sol = detail::solve_phase(sample, opt);
    FitResult out;
    out.converged = true;
    out.rss = sol.best.chi2;
    out.dof = points.size() - 2;
    if (sol.ambiguous) out.flags.emplace_back(flag_ambiguous);

    const double phi_hat = sol.best.phi_b;
    double ci_low = phi_hat;
    double ci_high = phi_hat;
    double boot_sigma = 0.0;
    if (opt.bootstrap_resamples > 0) {
        std::vector<double> deviations;
        deviations.reserve(static_cast<std::size_t>(opt.bootstrap_resamples));
        int failures = 0;
        detail::PhaseSample resample = sample;
        for (int b = 0; b < opt.bootstrap_resamples; ++b) {
            rng::Stream stream(opt.seed, static_cast<std::uint64_t>(b), detail::bootstrap_domain);
            for (std::size_t k = 0; k < sample.x.size(); ++k) {
                const double mean = phase_model(sol.best.amplitude, phi_hat, sample.x[k]);
                resample.y[k] = mean + stream.normal() / std::sqrt(sample.w[k]);
            }
            try {
                const auto boot = detail::solve_phase(resample, opt);
                deviations.push_back(circular_difference(boot.best.phi_b, phi_hat));
            } catch (const FitError&) {
                ++failures;
            }
        }
        if (failures * 100 > opt.bootstrap_resamples) out.flags.emplace_back(flag_bootstrap_failures);
        if (!deviations.empty()) {
            const double tail = 0.5 * (1.0 - opt.confidence);
            ci_low = phi_hat + detail::percentile(deviations, tail);
            ci_high = phi_hat + detail::percentile(deviations, 1.0 - tail);
            double sum2 = 0.0;
            for (double d : deviations) sum2 += d * d;
            boot_sigma = std::sqrt(sum2 / static_cast<double>(deviations.size()));
        }
    }

    out.parameters = {{"phi_b", phi_hat, std::sqrt(std::max(0.0, sol.covariance(1, 1)))},
                      {"amplitude", sol.best.amplitude, std::sqrt(std::max(0.0, sol.covariance(0, 0)))},
                      {"phi_b_ci_low", ci_low, 0.0},
                      {"phi_b_ci_high", ci_high, 0.0},
                      {"phi_b_bootstrap_sigma", boot_sigma, 0.0}};
    return out;
}

/// Whether the bootstrap interval of a phase fit contains truth (mod 2pi).
inline bool phase_interval_covers(const FitResult& fit, double truth)
{
    const double phi = fit.value("phi_b");
    const double d = circular_difference(truth, phi);
    return d >= fit.value("phi_b_ci_low") - phi && d <= fit.value("phi_b_ci_high") - phi;
}

/// Per-pulse pair and Raman contributions to the single-side click rates.
struct SinglesDecomposition {
    InversionResult inversion;
    Measurement pair_signal;
    Measurement pair_idler;
    Measurement raman_signal;
    Measurement raman_idler;
};

/// Splits each arm's singles into pair and Raman parts by inverting the
/// rate model at known analyzer pass probabilities. Errors are first-order
/// Poisson propagation from the tallies.
inline SinglesDecomposition decompose_singles(const CountRecord& record, const DetectorParams& det,
                                              const PassProbabilities& pass)
{
    record.validate();
    const CountRates observed = record.rates();
    InvertOptions opt;
    opt.pass = pass;
    SinglesDecomposition out;
    out.inversion = invert_rates(observed, det, opt);

    const double pulses = static_cast<double>(record.pulses);
    const double sigma_excess = std::sqrt(static_cast<double>(record.n_co + record.n_ac)) / pulses;
    const double excess = (observed.N_co - observed.N_ac) / (det.eta_s * det.eta_i);
    const double disc = pass.P_c * pass.P_c - 4.0 * pass.p_s * pass.p_i * excess;
    const double sigma_r = sigma_excess / (det.eta_s * det.eta_i * std::sqrt(std::max(disc, 1e-300)));

    const double sigma_pair_s = det.eta_s * pass.p_s * sigma_r;
    const double sigma_pair_i = det.eta_i * pass.p_i * sigma_r;
    const double var_singles_s = static_cast<double>(record.n_s) / (pulses * pulses);
    const double var_singles_i = static_cast<double>(record.n_i) / (pulses * pulses);

    out.pair_signal = {out.inversion.pair_signal, sigma_pair_s};
    out.pair_idler = {out.inversion.pair_idler, sigma_pair_i};
    out.raman_signal = {out.inversion.raman_signal, std::sqrt(var_singles_s + sigma_pair_s * sigma_pair_s)};
    out.raman_idler = {out.inversion.raman_idler, std::sqrt(var_singles_i + sigma_pair_i * sigma_pair_i)};
    return out;
}

}  // namespace fiberbell
