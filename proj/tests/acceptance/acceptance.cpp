// Acceptance suite: one PASS/FAIL line per criterion, exit status 0 only
// when every criterion passes. All tolerances are fixed below.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "fiberbell/cli.hpp"
#include "fiberbell/fiberbell.hpp"

using namespace fiberbell;

namespace {

// Criterion 1
constexpr int c1_samples = 10000;
constexpr double c1_tol = 1e-12;
// Criterion 2
constexpr double c2_tol = 1e-9;
// Criterion 3
constexpr double c3_tol = 1e-12;
constexpr double c3_reported_precision = 5e-4;  // "87.5%" carries one decimal of a percent
// Criterion 4
constexpr std::uint64_t c4_pulses = 30000000;
constexpr double c4_z_max = 4.0;
constexpr double c4_budget_s = 60.0;
// Criterion 5
constexpr int c5_round_trips = 10000;
constexpr double c5_round_trip_tol = 1e-9;
constexpr std::uint64_t c5_pulses = 30000000;
constexpr double c5_flat_sigma = 3.0;
constexpr double c5_min_joint_pass = 0.05;
constexpr double c5_min_amplitude_sigma = 5.0;
constexpr double c5_budget_s = 300.0;
// Criterion 6
constexpr int c6_runs = 20;
constexpr std::uint64_t c6_pulses = 30000000;
constexpr double c6_window = 0.02 * pi;
constexpr int c6_min_within = 18;   // 90% of 20
constexpr int c6_min_covered = 17;  // 85% of 20
constexpr double c6_budget_s = 600.0;
// Criterion 7
constexpr std::uint64_t c7_pulses = 30000000;
constexpr double c7_target_0 = 0.96;
constexpr double c7_band_0 = 0.03;
constexpr double c7_target_135 = 0.87;
constexpr double c7_band_135 = 0.04;
constexpr double c7_model_sigma = 3.0;
// Criterion 8
constexpr std::uint64_t c8_pulses = 2000000;

const double phi_b_paper = 0.23 * pi;

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string fmt(const char* format, auto... args)
{
    char buf[512];
    std::snprintf(buf, sizeof buf, format, args...);
    return buf;
}

SimConfig paper_config(std::uint64_t pulses)
{
    SimConfig c;
    c.pulses = pulses;
    c.det = DetectorParams::measured();
    c.rates = {0.01, 0.0, 0.0};
    c.fiber.phi_b = phi_b_paper;
    return c;
}

Outcome criterion1()
{
    std::mt19937_64 gen(1);
    std::uniform_real_distribution<double> phase(0.0, two_pi);
    std::uniform_real_distribution<double> per(0.0, 40.0);
    double worst = 0.0;
    for (int n = 0; n < c1_samples; ++n) {
        const double phi = phase(gen);
        worst = std::max(worst, std::abs(coincidence_probability(135.0, 45.0, phi) - 0.5 * (1.0 - std::cos(phi))));

        // Same identity through the pump: phi = 2 phi_p + phi_b.
        PumpState pump;
        pump.per_db = per(gen);
        pump.handedness = n % 2 ? Handedness::left : Handedness::right;
        FiberParams fiber;
        fiber.phi_b = phase(gen);
        const double phi_p = pump_phase(pump);
        const double rc = coincidence_probability(135.0, 45.0, total_phase(pump, fiber));
        worst = std::max(worst, std::abs(rc - 0.5 * (1.0 - std::cos(2.0 * phi_p + fiber.phi_b))));
    }
    return {worst <= c1_tol, fmt("max |R_c - 0.5[1-cos(2phi_p+phi_b)]| = %.2e over %d phases (tol %.0e)", worst,
                                 2 * c1_samples, c1_tol)};
}

Outcome criterion2()
{
    FiberParams fiber;
    fiber.phi_b = phi_b_paper;
    const PumpState plus = solve_pump_for_phase(bell_phase(BellState::psi_plus), fiber);
    const PumpState minus = solve_pump_for_phase(bell_phase(BellState::psi_minus), fiber);
    const double rc_plus = coincidence_probability(135.0, 45.0, total_phase(plus, fiber));
    const double rc_minus = coincidence_probability(135.0, 45.0, total_phase(minus, fiber));
    const bool ok = rc_plus < c2_tol && rc_minus > 1.0 - c2_tol;
    return {ok, fmt("psi-plus: PER %.4f dB %s, R_c = %.2e; psi-minus: PER %.4f dB %s axis %s, R_c = 1 - %.2e",
                    plus.per_db, std::string(to_string(plus.handedness)).c_str(), rc_plus, minus.per_db,
                    std::string(to_string(minus.handedness)).c_str(), std::string(to_string(minus.long_axis)).c_str(),
                    1.0 - rc_minus)};
}

Outcome criterion3()
{
    // Pair-only fringe at theta_s = 135 from the coincidence law, then both
    // conventions. The standard value is checked against |cos 0.23 pi| and
    // the phase convention against the paper's 87.5% at its stated precision.
    double hi = 0.0, lo = 1.0;
    for (double t = 0.0; t < 180.0; t += 0.001) {
        const double rc = coincidence_probability(135.0, t, phi_b_paper);
        hi = std::max(hi, rc);
        lo = std::min(lo, rc);
    }
    hi = std::max(hi, coincidence_probability(135.0, 135.0, phi_b_paper));
    lo = std::min(lo, coincidence_probability(135.0, 45.0, phi_b_paper));
    const double standard = visibility(hi, lo);
    const double theoretical = phase_visibility(phi_b_paper);
    const double oracle_standard = std::abs(std::cos(phi_b_paper));
    const bool ok = std::abs(standard - oracle_standard) <= c3_tol &&
                    std::abs(theoretical - (1.0 + std::cos(phi_b_paper)) / 2.0) <= c3_tol &&
                    std::abs(theoretical - 0.875) <= c3_reported_precision && std::lround(standard * 1000) == 750;
    return {ok, fmt("standard %.10f (|cos 0.23pi| %.10f), paper-theoretical %.10f (reported 87.5%%)", standard,
                    oracle_standard, theoretical)};
}

struct ZReport {
    double z[4];
    double excess_z;
    double seconds;
};

ZReport run_z(const SimConfig& c)
{
    const auto t0 = std::chrono::steady_clock::now();
    const auto r = simulate_point(c);
    ZReport out;
    out.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    out.z[0] = poisson_z(r.record.n_s, r.expected_n_s());
    out.z[1] = poisson_z(r.record.n_i, r.expected_n_i());
    out.z[2] = poisson_z(r.record.n_co, r.expected_n_co());
    out.z[3] = poisson_z(r.record.n_ac, r.expected_n_ac());
    const auto m = subtract_accidentals(r.record);
    out.excess_z = (m.value - (r.expected_n_co() - r.expected_n_ac())) / m.error;
    return out;
}

Outcome criterion4()
{
    SimConfig open = paper_config(c4_pulses);
    open.master_seed = 4;
    SimConfig crossed = open;
    crossed.analyzers = AnalyzerSetting{135.0, 45.0};
    crossed.master_seed = 5;

    bool ok = true;
    std::string detail;
    for (const auto& [name, cfg] : {std::pair{"no analyzers", open}, std::pair{"135/45", crossed}}) {
        const ZReport z = run_z(cfg);
        for (double v : z.z) ok &= std::abs(v) < c4_z_max;
        ok &= std::abs(z.excess_z) < c4_z_max && z.seconds < c4_budget_s;
        const double expected_excess =
            (forward_rates(cfg.rates, cfg.det, pass_probabilities(cfg.pump, cfg.fiber, cfg.analyzers)).N_co) *
            static_cast<double>(cfg.pulses);
        detail += fmt("%s: z(n_s,n_i,n_co,n_ac) = %+.2f %+.2f %+.2f %+.2f, excess z %+.2f, n_co expected %.1f, %.1f s; ",
                      name, z.z[0], z.z[1], z.z[2], z.z[3], z.excess_z, expected_excess, z.seconds);
    }
    detail.resize(detail.size() - 2);
    return {ok, detail};
}

Outcome criterion5()
{
    const auto t0 = std::chrono::steady_clock::now();
    const DetectorParams det = DetectorParams::measured();
    std::mt19937_64 gen(5);
    std::uniform_real_distribution<double> pair(1e-4, 0.2);
    std::uniform_real_distribution<double> raman(0.0, 0.2);
    double worst = 0.0;
    for (int n = 0; n < c5_round_trips; ++n) {
        const RateSet r{pair(gen), raman(gen), raman(gen)};
        const auto inv = invert_rates(forward_rates(r, det), det);
        worst = std::max(worst, std::abs(inv.rates.R - r.R) / r.R);
        if (r.R_s > 1e-6) worst = std::max(worst, std::abs(inv.rates.R_s - r.R_s) / r.R_s);
        if (r.R_i > 1e-6) worst = std::max(worst, std::abs(inv.rates.R_i - r.R_i) / r.R_i);
    }

    // theta_s = 0, theta_i sweep, measured Raman level.
    SimConfig base = paper_config(c5_pulses);
    base.master_seed = 55;
    base.rates = {0.01, 0.02, 0.02};
    base.analyzers = AnalyzerSetting{0.0, 0.0};
    Sweep sweep;
    for (int k = 0; k < 12; ++k) sweep.values.push_back(15.0 * k);
    const auto results = simulate_sweep(base, sweep);

    std::vector<double> angle, pair_value, pair_error;
    FringeData raman_fringe;
    for (const auto& r : results) {
        const auto pass = pass_probabilities(r.record.pump, base.fiber, r.record.analyzers);
        const double t = r.record.analyzers->theta_i_deg;
        if (pass.P_c < c5_min_joint_pass) continue;
        const auto d = decompose_singles(r.record, det, pass);
        angle.push_back(t);
        pair_value.push_back(d.pair_idler.value);
        pair_error.push_back(d.pair_idler.error);
        raman_fringe.points.push_back({t, d.raman_idler.value, d.raman_idler.error});
    }
    double sw = 0.0, swy = 0.0;
    for (std::size_t k = 0; k < pair_value.size(); ++k) {
        const double w = 1.0 / (pair_error[k] * pair_error[k]);
        sw += w;
        swy += w * pair_value[k];
    }
    const double mean = swy / sw;
    double worst_pull = 0.0;
    for (std::size_t k = 0; k < pair_value.size(); ++k)
        worst_pull = std::max(worst_pull, std::abs(pair_value[k] - mean) / pair_error[k]);

    const auto fit = fit_fringe(raman_fringe);
    const double amplitude = std::hypot(fit.value("B"), fit.value("C"));
    const double amplitude_sigma = std::max(fit.sigma("B"), fit.sigma("C"));
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const bool sinusoidal = amplitude / amplitude_sigma > c5_min_amplitude_sigma &&
                            fit.rss / static_cast<double>(fit.dof) < 4.0;

    const bool ok = worst <= c5_round_trip_tol && worst_pull <= c5_flat_sigma && sinusoidal && seconds < c5_budget_s;
    return {ok, fmt("round trip max rel err %.1e; pair idler flat over %zu points (max pull %.2f sigma, mean %.3e "
                    "vs eta_i R/2 = %.3e); Raman idler fringe amplitude %.1f sigma, V %.2f, phase %.2f rad, "
                    "chi2/dof %.2f; %.0f s",
                    worst, pair_value.size(), worst_pull, mean, det.eta_i * 0.01 / 2.0, amplitude / amplitude_sigma,
                    fit.value("visibility"), fit.value("phase_offset"), fit.rss / static_cast<double>(fit.dof), seconds)};
}

Outcome criterion6()
{
    const auto t0 = std::chrono::steady_clock::now();
    SimConfig base = paper_config(c6_pulses);
    base.rates = {0.01, 0.02, 0.02};
    base.analyzers = AnalyzerSetting{135.0, 45.0};

    std::vector<SimConfig> layout;
    for (LongAxis axis : {LongAxis::plus45, LongAxis::minus45}) {
        for (double per : {0.0, 1.0, 2.0, 3.0, 4.0, 6.0, 10.0, infinity}) {
            SimConfig c = base;
            c.pump.per_db = per;
            c.pump.long_axis = axis;
            layout.push_back(c);
        }
        for (double per : {0.0, 1.0, 2.0, 3.0, 4.0, 6.0, 10.0}) {
            SimConfig c = base;
            c.pump.per_db = per;
            c.pump.handedness = Handedness::left;
            c.pump.long_axis = axis;
            layout.push_back(c);
        }
    }

    int within = 0, covered = 0, within_2sigma = 0;
    double worst = 0.0;
    for (int run = 1; run <= c6_runs; ++run) {
        auto points = layout;
        for (auto& p : points) p.master_seed = static_cast<std::uint64_t>(run);
        const auto results = simulate_points(points);
        std::vector<PhasePoint> data;
        for (const auto& r : results) {
            const auto m = subtract_accidentals(r.record);
            data.push_back({r.record.pump.per_db, r.record.pump.handedness, r.record.pump.long_axis, m.value, m.error});
        }
        PhaseFitOptions opt;
        opt.seed = static_cast<std::uint64_t>(run);
        const auto fit = fit_birefringent_phase(data, opt);
        const double err = std::abs(circular_difference(fit.value("phi_b"), phi_b_paper));
        worst = std::max(worst, err);
        within += err <= c6_window;
        covered += phase_interval_covers(fit, phi_b_paper);
        within_2sigma += err <= 2.0 * fit.sigma("phi_b");
    }
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const bool ok = within >= c6_min_within && covered >= c6_min_covered && seconds < c6_budget_s;
    return {ok, fmt("%zu-point PER sweeps: %d/%d within 0.02pi (worst %.4f pi), bootstrap CI covers %d/%d, "
                    "2-sigma covers %d/%d; %.0f s",
                    layout.size(), within, c6_runs, worst / pi, covered, c6_runs, within_2sigma, c6_runs, seconds)};
}

double model_contrast(double theta_s, double raman)
{
    PumpState pump;
    FiberParams fiber;
    fiber.phi_b = phi_b_paper;
    const DetectorParams det = DetectorParams::measured();
    double hi = 0.0, lo = 1.0;
    for (double t = 0.0; t < 180.0; t += 0.05) {
        const auto pass = pass_probabilities(pump, fiber, AnalyzerSetting{theta_s, t});
        const double n = forward_rates({0.01, raman, raman}, det, pass).N_co;
        hi = std::max(hi, n);
        lo = std::min(lo, n);
    }
    return visibility(hi, lo, VisibilityConvention::contrast_fraction);
}

Outcome criterion7()
{
    // One Raman level for both fringes, set so the theta_s = 0 model sits
    // at the centre of its band.
    double lo = 0.0, hi = 0.1;
    for (int it = 0; it < 40; ++it) {
        const double mid = 0.5 * (lo + hi);
        (model_contrast(0.0, mid) > c7_target_0 ? lo : hi) = mid;
    }
    const double raman = 0.5 * (lo + hi);

    bool ok = true;
    std::string detail = fmt("Raman R_s = R_i = %.4f; ", raman);
    for (const auto& [theta_s, target, band, seed] :
         {std::tuple{0.0, c7_target_0, c7_band_0, 70u}, std::tuple{135.0, c7_target_135, c7_band_135, 71u}}) {
        SimConfig base = paper_config(c7_pulses);
        base.master_seed = seed;
        base.rates = {0.01, raman, raman};
        base.analyzers = AnalyzerSetting{theta_s, 0.0};
        Sweep sweep;
        for (int k = 0; k < 12; ++k) sweep.values.push_back(15.0 * k);
        FringeData data;
        for (const auto& r : simulate_sweep(base, sweep)) {
            const double n = static_cast<double>(r.record.n_co);
            data.points.push_back({r.record.analyzers->theta_i_deg, n, std::sqrt(n)});
        }
        const auto fit = fit_fringe(data);
        const double cf = (1.0 + fit.value("visibility")) / 2.0;
        const double cf_sigma = fit.sigma("visibility") / 2.0;
        const double model = model_contrast(theta_s, raman);
        const bool in_band = std::abs(model - target) <= band && std::abs(cf - target) <= band;
        const bool matches_model = std::abs(cf - model) <= c7_model_sigma * cf_sigma;
        ok &= in_band && matches_model;
        detail += fmt("theta_s=%g: fitted %.3f +- %.3f, model %.3f, band %.2f+-%.2f; ", theta_s, cf, cf_sigma, model,
                      target, band);
    }

    // Monotone property on the two measured fringes, Raman up to 10x R.
    PumpState pump;
    FiberParams fiber;
    fiber.phi_b = phi_b_paper;
    const DetectorParams det = DetectorParams::measured();
    auto standard = [&](double ts, double rs, double ri) {
        double hi_n = 0.0, lo_n = 1.0;
        for (double t = 0.0; t < 180.0; t += 0.5) {
            const auto pass = pass_probabilities(pump, fiber, AnalyzerSetting{ts, t});
            const double n = forward_rates({0.01, rs, ri}, det, pass).N_co;
            hi_n = std::max(hi_n, n);
            lo_n = std::min(lo_n, n);
        }
        return visibility(hi_n, lo_n);
    };
    int violations = 0, checks = 0;
    for (double ts : {0.0, 135.0})
        for (double fixed : {0.0, 0.01, 0.02, 0.05})
            for (int arm = 0; arm < 2; ++arm) {
                double prev = 2.0;
                for (double x = 0.0; x <= 0.1 + 1e-12; x += 0.005) {
                    const double v = arm ? standard(ts, fixed, x) : standard(ts, x, fixed);
                    violations += v > prev + 1e-12;
                    ++checks;
                    prev = v;
                }
            }
    ok &= violations == 0;
    detail += fmt("monotone in R_s, R_i: %d violations in %d grid steps", violations, checks);
    return {ok, detail};
}

Outcome criterion8()
{
    namespace fs = std::filesystem;
    const fs::path dir = fs::temp_directory_path() / "fiberbell_acceptance";
    fs::remove_all(dir);
    fs::create_directories(dir);
    const std::string cfg = (dir / "run.cfg").string();
    std::ofstream(cfg) << "[fiber]\nphi_b = 0.23pi\n[detectors]\neta_s = 0.0336\neta_i = 0.0238\nd_s = 5.98e-5\n"
                          "d_i = 4.67e-5\n[run]\nseed = 8\npulses = "
                       << c8_pulses << "\n[rates]\nR = 0.05\nR_s = 0.02\nR_i = 0.02\n"
                       << "[analyzers]\ntheta_s_deg = 135\ntheta_i_deg = 45\n";

    auto slurp = [](const fs::path& p) {
        std::ifstream in(p, std::ios::binary);
        std::stringstream s;
        s << in.rdbuf();
        return s.str();
    };
    auto pipeline = [&](const std::string& workers, const std::string& tag) {
        std::ostringstream out, err;
        const auto file = [&](const char* name) { return (dir / (tag + name)).string(); };
        int rc = 0;
        rc |= cli::run_command({"sweep", "--config", cfg, "--workers", workers, "--variable", "theta_i", "--values",
                                "0:165:15", "--out", file("fringe.csv")},
                               out, err);
        rc |= cli::run_command({"fit-fringe", "--in", file("fringe.csv"), "--out", file("fringe_fit.csv")}, out, err);
        rc |= cli::run_command({"sweep", "--config", cfg, "--workers", workers, "--variable", "per_db", "--values",
                                "0,1,2,3,5,8,inf", "--handedness", "both", "--axis", "both", "--out", file("phase.csv")},
                               out, err);
        rc |= cli::run_command({"fit-phase", "--in", file("phase.csv"), "--config", cfg, "--bootstrap", "200", "--out",
                                file("phase_fit.csv")},
                               out, err);
        std::string all;
        for (const char* name : {"fringe.csv", "fringe_fit.csv", "fringe_fit.csv.plot.csv", "phase.csv",
                                 "phase_fit.csv", "phase_fit.csv.plot.csv"})
            all += std::string(name) + "\n" + slurp(file(name));
        return std::pair{rc, all};
    };

    const auto reference = pipeline("1", "w1a_");
    bool ok = reference.first == 0 && !reference.second.empty();
    std::string detail = fmt("%zu output bytes per run; ", reference.second.size());
    for (const auto& [workers, tag] : {std::pair{"1", "w1b_"}, std::pair{"4", "w4_"}, std::pair{"16", "w16_"}}) {
        const auto run = pipeline(workers, tag);
        const bool same = run.first == 0 && run.second == reference.second;
        ok &= same;
        detail += fmt("workers %s %s; ", workers, same ? "identical" : "DIFFERENT");
    }
    detail.resize(detail.size() - 2);
    fs::remove_all(dir);
    return {ok, detail};
}

}  // namespace

int main()
{
    const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria = {
        {"coincidence law at 135/45", criterion1},
        {"Bell states dialed at phi_b = 0.23pi", criterion2},
        {"theoretical visibility conventions", criterion3},
        {"Monte Carlo agrees with closed form", criterion4},
        {"rate inversion and single-side flatness", criterion5},
        {"birefringent phase recovery", criterion6},
        {"fringe visibilities and Raman monotonicity", criterion7},
        {"pipeline determinism across workers", criterion8},
    };
    int failed = 0;
    for (std::size_t k = 0; k < criteria.size(); ++k) {
        const auto t0 = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = criteria[k].second();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        failed += !o.pass;
        std::printf("%s %zu %s: %s [%.2f s]\n", o.pass ? "PASS" : "FAIL", k + 1, criteria[k].first, o.detail.c_str(), s);
        std::fflush(stdout);
    }
    std::printf("%zu/%zu criteria passed\n", criteria.size() - failed, criteria.size());
    return failed == 0 ? 0 : 1;
}
