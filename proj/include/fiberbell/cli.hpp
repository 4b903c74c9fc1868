/**
 * @file cli.hpp
 * @brief The `fiberbell` command-line surface.
 *
 * Subcommands: simulate, sweep, invert, fit-fringe, fit-phase, dial, report.
 * Exit status: 0 success, 1 usage error, 2 data or validation error,
 * 3 fit non-convergence. Diagnostics go to the error stream only.
 */
#pragma once

#include <cmath>
#include <cstdint>
#include <fstream>
#include <iomanip>
#include <memory>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "fiberbell/config.hpp"
#include "fiberbell/counting.hpp"
#include "fiberbell/dataset.hpp"
#include "fiberbell/errors.hpp"
#include "fiberbell/estimation.hpp"
#include "fiberbell/monte_carlo.hpp"
#include "fiberbell/polarization.hpp"

namespace fiberbell::cli {

enum ExitCode : int { exit_ok = 0, exit_usage = 1, exit_data = 2, exit_fit = 3 };

/// Comma-separated list of numbers and inclusive `start:stop:step` ranges.
inline std::vector<double> parse_values(const std::string& text)
{
    std::vector<double> out;
    std::stringstream ss(text);
    std::string token;
    while (std::getline(ss, token, ',')) {
        if (token.empty()) throw ValidationError("empty entry in --values");
        const auto c1 = token.find(':');
        if (c1 == std::string::npos) {
            out.push_back(parse_number(token, "--values"));
            continue;
        }
        const auto c2 = token.find(':', c1 + 1);
        if (c2 == std::string::npos || token.find(':', c2 + 1) != std::string::npos)
            throw ValidationError("range must be start:stop:step, got '" + token + "'");
        const double start = parse_number(token.substr(0, c1), "--values start");
        const double stop = parse_number(token.substr(c1 + 1, c2 - c1 - 1), "--values stop");
        const double step = parse_number(token.substr(c2 + 1), "--values step");
        if (step == 0.0 || !std::isfinite(step) || (stop - start) / step < 0.0)
            throw ValidationError("range step does not lead from start to stop: '" + token + "'");
        const auto n = static_cast<long long>(std::floor((stop - start) / step + 1e-9));
        if (n > 1000000) throw ValidationError("range too long: '" + token + "'");
        for (long long k = 0; k <= n; ++k) out.push_back(start + static_cast<double>(k) * step);
    }
    if (out.empty()) throw ValidationError("--values is empty");
    return out;
}

namespace detail {

struct Common {
    std::string config_path;
    std::string out_path = "-";
    std::optional<std::uint64_t> seed;
    std::string format = "csv";
    unsigned workers = 1;
};

/// Writes to the command's output stream or to a file.
class Output {
public:
    Output(const std::string& path, std::ostream& fallback)
    {
        if (path.empty() || path == "-") {
            stream_ = &fallback;
        } else {
            file_ = std::make_unique<std::ofstream>(path);
            if (!*file_) throw ValidationError("cannot write '" + path + "'");
            stream_ = file_.get();
        }
    }

    std::ostream& stream() { return *stream_; }

private:
    std::unique_ptr<std::ofstream> file_;
    std::ostream* stream_ = nullptr;
};

inline std::optional<ExperimentConfig> maybe_config(const Common& c)
{
    if (c.config_path.empty()) return std::nullopt;
    return load_config(c.config_path);
}

inline ExperimentConfig need_config(const Common& c)
{
    if (c.config_path.empty()) throw ValidationError("--config is required for this command");
    return load_config(c.config_path);
}

inline std::vector<DatasetRow> to_rows(const std::vector<TallyResult>& results)
{
    std::vector<DatasetRow> rows;
    for (const auto& r : results) rows.push_back({r.point_index, r.record});
    return rows;
}

/// Plot file: explicit --plot, else <out>.plot.csv when writing to a file.
inline std::string plot_path(const std::string& explicit_path, const std::string& out_path)
{
    if (!explicit_path.empty()) return explicit_path;
    if (out_path.empty() || out_path == "-") return {};
    return out_path + ".plot.csv";
}

inline double parse_target(const std::string& text)
{
    if (text == "psi-plus" || text == "psi+") return 0.0;
    if (text == "psi-minus" || text == "psi-") return pi;
    return parse_phase(text, "--target");
}

}  // namespace detail

inline int run_command(const std::vector<std::string>& args, std::ostream& out, std::ostream& err)
{
    CLI::App app{"Simulation and analysis of a birefringent-fiber polarization-entangled pair source", "fiberbell"};
    app.require_subcommand(1);

    detail::Common common;
    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", common.config_path, "experiment configuration file");
        sub->add_option("--out", common.out_path, "output file ('-' for stdout)");
        sub->add_option("--seed", common.seed, "master seed (overrides config and FIBERBELL_SEED)");
        sub->add_option("--format", common.format, "output format")->check(CLI::IsMember({"csv", "json-lines"}));
        sub->add_option("--workers", common.workers, "worker threads")->check(CLI::Range(1u, 1024u));
    };

    auto* simulate = app.add_subcommand("simulate", "simulate one configured point");
    add_common(simulate);

    std::string sweep_variable = "theta_i";
    std::string sweep_values;
    std::string sweep_handedness = "config";
    std::string sweep_axis = "config";
    auto* sweep = app.add_subcommand("sweep", "simulate a sweep over one setting");
    add_common(sweep);
    sweep->add_option("--variable", sweep_variable)->check(CLI::IsMember({"theta_i", "theta_s", "per_db"}));
    sweep->add_option("--values", sweep_values, "e.g. 0:180:15 or 0,3,inf")->required();
    sweep->add_option("--handedness", sweep_handedness, "per_db sweeps: config|right|left|both")
        ->check(CLI::IsMember({"config", "right", "left", "both"}));
    sweep->add_option("--axis", sweep_axis, "per_db sweeps: config|+45|-45|both")
        ->check(CLI::IsMember({"config", "+45", "-45", "both"}));

    std::string in_path;
    bool clamp = false;
    bool model_passes = false;
    auto* invert = app.add_subcommand("invert", "recover pair and Raman rates from a dataset");
    add_common(invert);
    invert->add_option("--in", in_path, "dataset CSV")->required();
    invert->add_flag("--clamp", clamp, "clamp negative recovered rates to zero");
    invert->add_flag("--model-passes", model_passes, "use analyzer pass probabilities from the polarization model");

    std::string fringe_variable = "auto";
    std::string fringe_counts = "corrected";
    std::string plot_file;
    auto* fit_fringe_cmd = app.add_subcommand("fit-fringe", "fit a two-photon interference fringe");
    add_common(fit_fringe_cmd);
    fit_fringe_cmd->add_option("--in", in_path, "dataset CSV")->required();
    fit_fringe_cmd->add_option("--variable", fringe_variable)->check(CLI::IsMember({"auto", "theta_i", "theta_s"}));
    fit_fringe_cmd->add_option("--counts", fringe_counts, "corrected (n_co - n_ac) or raw (n_co)")
        ->check(CLI::IsMember({"corrected", "raw"}));
    fit_fringe_cmd->add_option("--plot", plot_file, "plot-data CSV");

    int bootstrap = 1000;
    auto* fit_phase_cmd = app.add_subcommand("fit-phase", "fit the birefringent phase from a pump-ellipse sweep");
    add_common(fit_phase_cmd);
    fit_phase_cmd->add_option("--in", in_path, "dataset CSV")->required();
    fit_phase_cmd->add_option("--bootstrap", bootstrap, "bootstrap resamples")->check(CLI::Range(0, 1000000));
    fit_phase_cmd->add_option("--plot", plot_file, "plot-data CSV");

    std::string target;
    std::string phi_b_text;
    auto* dial = app.add_subcommand("dial", "pump ellipse realizing a Bell state or phase");
    add_common(dial);
    dial->add_option("--target", target, "psi-plus, psi-minus or a phase (rad, or e.g. 0.5pi)")->required();
    dial->add_option("--phi-b", phi_b_text, "birefringent phase when no config is given");

    auto* report = app.add_subcommand("report", "human-readable summary of a configuration and dataset");
    add_common(report);
    report->add_option("--in", in_path, "dataset CSV");

    std::vector<std::string> argv_storage;
    argv_storage.emplace_back("fiberbell");
    argv_storage.insert(argv_storage.end(), args.begin(), args.end());
    std::vector<char*> argv;
    for (auto& a : argv_storage) argv.push_back(a.data());

    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? exit_ok : exit_usage;
    }

    try {
        const OutputFormat format = parse_output_format(common.format);
        const SimOptions sim_options{common.workers};

        if (simulate->parsed()) {
            const auto cfg = detail::need_config(common);
            const auto seed = resolve_seed(common.seed, &cfg);
            const auto result = simulate_point(cfg.sim_config(seed), 0, sim_options);
            detail::Output o(common.out_path, out);
            write_dataset(o.stream(), detail::to_rows({result}), format);
            return exit_ok;
        }

        if (sweep->parsed()) {
            const auto cfg = detail::need_config(common);
            const auto seed = resolve_seed(common.seed, &cfg);
            Sweep s;
            s.variable = parse_sweep_variable(sweep_variable);
            s.values = parse_values(sweep_values);
            if (s.variable != SweepVariable::per_db && (sweep_handedness != "config" || sweep_axis != "config"))
                throw ValidationError("--handedness/--axis apply to per_db sweeps only");
            if (sweep_handedness == "both")
                s.handedness = {Handedness::right, Handedness::left};
            else if (sweep_handedness != "config")
                s.handedness = {parse_handedness(sweep_handedness)};
            if (sweep_axis == "both")
                s.axes = {LongAxis::plus45, LongAxis::minus45};
            else if (sweep_axis != "config")
                s.axes = {parse_long_axis(sweep_axis)};
            const auto results = simulate_sweep(cfg.sim_config(seed), s, sim_options);
            detail::Output o(common.out_path, out);
            write_dataset(o.stream(), detail::to_rows(results), format);
            return exit_ok;
        }

        if (invert->parsed()) {
            const auto cfg = detail::need_config(common);
            const auto rows = read_dataset(in_path);
            detail::Output o(common.out_path, out);
            TableWriter t(o.stream(), format,
                          {"point_id", "R", "R_s", "R_i", "pair_signal", "pair_idler", "raman_signal", "raman_idler",
                           "consistent", "issues"},
                          {"issues"});
            int inconsistent = 0;
            for (const auto& row : rows) {
                InvertOptions opt;
                opt.clamp_negative = clamp;
                if (model_passes) opt.pass = pass_probabilities(row.record.pump, cfg.fiber, row.record.analyzers);
                InversionResult inv;
                try {
                    inv = invert_rates(row.record.rates(), cfg.detectors, opt);
                } catch (const DataError& e) {
                    throw DataError("point " + std::to_string(row.point_id) + ": " + e.what());
                }
                std::string issues;
                for (const auto& i : inv.issues) issues += (issues.empty() ? "" : "; ") + i;
                if (!inv.consistent()) {
                    ++inconsistent;
                    err << "point " << row.point_id << ": inconsistent with the rate model: " << issues << '\n';
                }
                t.row({std::to_string(row.point_id), format_real(inv.rates.R), format_real(inv.rates.R_s),
                       format_real(inv.rates.R_i), format_real(inv.pair_signal), format_real(inv.pair_idler),
                       format_real(inv.raman_signal), format_real(inv.raman_idler), inv.consistent() ? "1" : "0",
                       issues});
            }
            if (inconsistent > 0 && !clamp) {
                err << inconsistent << " of " << rows.size()
                    << " points gave negative rates; check eta/d calibration or rerun with --clamp\n";
                return exit_data;
            }
            return exit_ok;
        }

        if (fit_fringe_cmd->parsed()) {
            const auto rows = read_dataset(in_path);
            if (rows.empty()) throw ValidationError("dataset has no rows");
            for (const auto& r : rows)
                if (!r.record.analyzers) throw ValidationError("fringe fit needs rows taken with analyzers");
            std::string variable = fringe_variable;
            if (variable == "auto") {
                bool vary_i = false;
                bool vary_s = false;
                for (const auto& r : rows) {
                    vary_i |= r.record.analyzers->theta_i_deg != rows.front().record.analyzers->theta_i_deg;
                    vary_s |= r.record.analyzers->theta_s_deg != rows.front().record.analyzers->theta_s_deg;
                }
                if (vary_i == vary_s) throw ValidationError("cannot infer the swept angle; pass --variable");
                variable = vary_i ? "theta_i" : "theta_s";
            }
            FringeData data;
            for (const auto& r : rows) {
                const double angle =
                    variable == "theta_i" ? r.record.analyzers->theta_i_deg : r.record.analyzers->theta_s_deg;
                Measurement m;
                if (fringe_counts == "raw")
                    m = {static_cast<double>(r.record.n_co), std::sqrt(static_cast<double>(r.record.n_co))};
                else
                    m = subtract_accidentals(r.record);
                data.points.push_back({angle, m.value, m.error});
            }
            const FitResult fit = fiberbell::fit_fringe(data);
            if (fit.has_flag(flag_unphysical_visibility)) err << "warning: fitted visibility exceeds 1\n";
            detail::Output o(common.out_path, out);
            write_fit_result(o.stream(), fit, format);
            if (const auto path = detail::plot_path(plot_file, common.out_path); !path.empty()) {
                std::vector<PlotPoint> plot;
                for (const auto& p : data.points) plot.push_back({p.angle_deg, p.value, p.error, fringe_model(fit, p.angle_deg)});
                detail::Output po(path, out);
                write_plot_data(po.stream(), plot, format);
            }
            return exit_ok;
        }

        if (fit_phase_cmd->parsed()) {
            const auto cfg = detail::maybe_config(common);
            const auto rows = read_dataset(in_path);
            std::vector<PhasePoint> points;
            for (const auto& r : rows) {
                const auto& a = r.record.analyzers;
                if (!a || std::abs(a->theta_s_deg - 135.0) > 1e-6 || std::abs(a->theta_i_deg - 45.0) > 1e-6)
                    throw ValidationError("point " + std::to_string(r.point_id) +
                                          ": phase fit needs analyzers at theta_s=135, theta_i=45");
                const Measurement m = subtract_accidentals(r.record);
                points.push_back({r.record.pump.per_db, r.record.pump.handedness, r.record.pump.long_axis, m.value, m.error});
            }
            PhaseFitOptions opt;
            opt.bootstrap_resamples = bootstrap;
            opt.seed = resolve_seed(common.seed, cfg ? &*cfg : nullptr);
            const FitResult fit = fit_birefringent_phase(points, opt);
            if (fit.has_flag(flag_ambiguous)) err << "warning: phase fit is ambiguous (two minima within 1 sigma)\n";
            if (fit.has_flag(flag_bootstrap_failures)) err << "warning: more than 1% of bootstrap refits failed\n";
            detail::Output o(common.out_path, out);
            write_fit_result(o.stream(), fit, format);
            if (const auto path = detail::plot_path(plot_file, common.out_path); !path.empty()) {
                std::vector<PlotPoint> plot;
                const double phi_b = fit.value("phi_b");
                for (const auto& p : points)
                    plot.push_back({wrap_two_pi(p.pump_term() + phi_b), p.value, p.error,
                                    phase_model(fit.value("amplitude"), phi_b, p.pump_term())});
                detail::Output po(path, out);
                write_plot_data(po.stream(), plot, format);
            }
            return exit_ok;
        }

        if (dial->parsed()) {
            const auto cfg = detail::maybe_config(common);
            FiberParams fiber = cfg ? cfg->fiber : FiberParams{};
            if (!phi_b_text.empty()) {
                if (cfg) throw ValidationError("give either --config or --phi-b");
                fiber.phi_b = wrap_two_pi(parse_phase(phi_b_text, "--phi-b"));
            } else if (!cfg) {
                throw ValidationError("dial needs --config or --phi-b");
            }
            const double goal = wrap_two_pi(detail::parse_target(target));
            const PumpState pump = solve_pump_for_phase(goal, fiber);
            const double phi = total_phase(pump, fiber);
            detail::Output o(common.out_path, out);
            TableWriter t(o.stream(), format,
                          {"target_phase", "per_db", "handedness", "long_axis", "phi_p", "total_phase", "bell_state",
                           "coincidence_135_45"},
                          {"handedness", "long_axis", "bell_state"});
            t.row({format_real(goal), format_real(pump.per_db), std::string(to_string(pump.handedness)),
                   std::string(to_string(pump.long_axis)), format_real(pump_phase(pump)), format_real(phi),
                   std::string(to_string(classify_bell(phi))), format_real(coincidence_probability(135.0, 45.0, phi))});
            return exit_ok;
        }

        if (report->parsed()) {
            const auto cfg = detail::need_config(common);
            detail::Output o(common.out_path, out);
            std::ostream& s = o.stream();
            s << std::setprecision(6);
            const double phi = total_phase(cfg.pump, cfg.fiber);
            s << "Pump: PER " << format_real(cfg.pump.per_db) << " dB, " << to_string(cfg.pump.handedness)
              << "-handed, long axis " << to_string(cfg.pump.long_axis) << " deg, theta_p " << cfg.pump.theta_p_deg
              << " deg\n";
            s << "Pump phase phi_p = " << pump_phase(cfg.pump) << " rad; total phase phi = " << phi << " rad ("
              << phi / pi << " pi), Bell state: " << to_string(classify_bell(phi)) << '\n';
            s << "Fiber: phi_b = " << cfg.fiber.phi_b / pi << " pi, length " << cfg.fiber.length_m << " m\n";
            s << "Detectors: eta_s " << cfg.detectors.eta_s << ", eta_i " << cfg.detectors.eta_i << ", d_s "
              << cfg.detectors.d_s << ", d_i " << cfg.detectors.d_i << '\n';
            s << "Rates per pulse: R " << cfg.rates.R << ", R_s " << cfg.rates.R_s << ", R_i " << cfg.rates.R_i << '\n';
            if (cfg.analyzers)
                s << "Analyzers: theta_s " << cfg.analyzers->theta_s_deg << " deg, theta_i "
                  << cfg.analyzers->theta_i_deg << " deg\n";
            else
                s << "Analyzers: none\n";
            const auto pass = pass_probabilities(cfg.pump, cfg.fiber, cfg.analyzers);
            const auto predicted = forward_rates(cfg.rates, cfg.detectors, pass);
            const auto expected = expected_counts(predicted, cfg.run.rep_rate_hz,
                                                  static_cast<double>(cfg.run.pulse_count()) / cfg.run.rep_rate_hz);
            s << "Predicted per pulse: N_s " << predicted.N_s << ", N_i " << predicted.N_i << ", N_co "
              << predicted.N_co << ", N_ac " << predicted.N_ac << '\n';
            s << "Expected over " << expected.pulses << " pulses: n_s " << expected.n_s << ", n_i " << expected.n_i
              << ", n_co " << expected.n_co << ", n_ac " << expected.n_ac << '\n';
            if (!in_path.empty()) {
                const auto rows = read_dataset(in_path);
                s << "Dataset: " << rows.size() << " points\n";
                s << "  point  n_s  n_i  n_co  n_ac  corrected +- err\n";
                for (const auto& r : rows) {
                    const auto m = subtract_accidentals(r.record);
                    s << "  " << r.point_id << "  " << r.record.n_s << "  " << r.record.n_i << "  " << r.record.n_co
                      << "  " << r.record.n_ac << "  " << m.value << " +- " << m.error << '\n';
                }
            }
            return exit_ok;
        }
    } catch (const FitError& e) {
        err << "fit error: " << e.what() << '\n';
        return exit_fit;
    } catch (const Error& e) {
        err << "error: " << e.what() << '\n';
        return exit_data;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return exit_data;
    }
    return exit_usage;
}

}  // namespace fiberbell::cli
