/**
 * @file config.hpp
 * @brief Experiment configuration file.
 *
 * INI grammar: `[section]` headers, `key = value` lines, comments start
 * with ';' or '#'. Every key lives in a section; unknown sections or keys
 * are rejected. Sections and keys (defaults in parentheses):
 *
 *   [pump]       per_db (inf), handedness (right), long_axis (+45), theta_p_deg (45)
 *   [fiber]      phi_b (0), phase_birefringence, group_birefringence_ps_per_m,
 *                length_m, pump_wavelength_nm, signal_wavelength_nm, idler_wavelength_nm
 *   [detectors]  eta_s, eta_i, d_s, d_i                          -- required
 *   [run]        seed, rep_rate_hz (1e6), duration_s (30) | pulses
 *   [rates]      R (required), R_s (0), R_i (0)                  -- required
 *   [analyzers]  theta_s_deg, theta_i_deg                        -- optional
 *
 * Numbers accept `inf`; phases (phi_b) also accept a `pi` suffix such as
 * `0.23pi`. Omitting [analyzers] models the setup with no analyzers.
 */
#pragma once

#include <charconv>
#include <cstdint>
#include <cstdlib>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "fiberbell/counting.hpp"
#include "fiberbell/errors.hpp"
#include "fiberbell/monte_carlo.hpp"
#include "fiberbell/polarization.hpp"

namespace fiberbell {

struct RunSettings {
    std::optional<std::uint64_t> seed;
    double rep_rate_hz = 1e6;
    double duration_s = 30.0;
    std::optional<std::uint64_t> pulses;  ///< overrides rep_rate_hz * duration_s

    std::uint64_t pulse_count() const
    {
        if (pulses) return *pulses;
        return static_cast<std::uint64_t>(std::llround(rep_rate_hz * duration_s));
    }
};

struct ExperimentConfig {
    PumpState pump;
    FiberParams fiber;
    DetectorParams detectors;
    RunSettings run;
    RateSet rates;
    std::optional<AnalyzerSetting> analyzers;

    SimConfig sim_config(std::uint64_t seed) const
    {
        SimConfig c;
        c.master_seed = seed;
        c.pulses = run.pulse_count();
        c.pump = pump;
        c.fiber = fiber;
        c.det = detectors;
        c.rates = rates;
        c.analyzers = analyzers;
        return c;
    }
};

inline double parse_number(std::string_view text, const std::string& field)
{
    double v = 0.0;
    const char* first = text.data();
    const char* last = text.data() + text.size();
    auto [ptr, ec] = std::from_chars(first, last, v);
    if (ec != std::errc() || ptr != last || text.empty())
        throw ValidationError(field + ": expected a number, got '" + std::string(text) + "'");
    return v;
}

/// Number in radians, optionally written as a multiple of pi ("0.23pi").
inline double parse_phase(std::string_view text, const std::string& field)
{
    if (text.size() >= 2 && text.substr(text.size() - 2) == "pi") {
        std::string_view head = text.substr(0, text.size() - 2);
        if (head.empty()) return pi;
        if (head.back() == '*') head.remove_suffix(1);
        return parse_number(head, field) * pi;
    }
    return parse_number(text, field);
}

inline std::uint64_t parse_unsigned(std::string_view text, const std::string& field)
{
    std::uint64_t v = 0;
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (ec != std::errc() || ptr != text.data() + text.size() || text.empty())
        throw ValidationError(field + ": expected a non-negative integer, got '" + std::string(text) + "'");
    return v;
}

namespace detail {

using Section = boost::property_tree::ptree;

class SectionReader {
public:
    SectionReader(const Section& section, std::string name, std::set<std::string> allowed)
        : section_(section), name_(std::move(name))
    {
        for (const auto& [key, child] : section_) {
            if (!child.empty()) throw ValidationError(name_ + "." + key + ": nested values are not allowed");
            if (!allowed.count(key)) throw ValidationError("unknown key '" + key + "' in section [" + name_ + "]");
        }
    }

    std::optional<std::string> get(const std::string& key) const
    {
        auto it = section_.find(key);
        if (it == section_.not_found()) return std::nullopt;
        return it->second.data();
    }

    std::string require(const std::string& key) const
    {
        auto v = get(key);
        if (!v) throw ValidationError("missing required key " + field(key));
        return *v;
    }

    std::string field(const std::string& key) const { return name_ + "." + key; }

    void number(const std::string& key, double& target) const
    {
        if (auto v = get(key)) target = parse_number(*v, field(key));
    }

private:
    const Section& section_;
    std::string name_;
};

}  // namespace detail

inline ExperimentConfig parse_config(std::string_view text)
{
    namespace pt = boost::property_tree;
    pt::ptree tree;
    std::istringstream in{std::string(text)};
    try {
        pt::read_ini(in, tree);
    } catch (const pt::ini_parser_error& e) {
        throw ParseError(e.line(), e.message());
    }

    static const std::set<std::string> sections = {"pump", "fiber", "detectors", "run", "rates", "analyzers"};
    for (const auto& [name, child] : tree) {
        if (child.empty()) throw ValidationError("key '" + name + "' must be inside a section");
        if (!sections.count(name)) throw ValidationError("unknown section [" + name + "]");
    }
    auto section = [&](const std::string& name) -> const pt::ptree* {
        auto it = tree.find(name);
        return it == tree.not_found() ? nullptr : &it->second;
    };

    ExperimentConfig cfg;
    const pt::ptree empty;

    {
        detail::SectionReader r(section("pump") ? *section("pump") : empty, "pump",
                                {"per_db", "handedness", "long_axis", "theta_p_deg"});
        r.number("per_db", cfg.pump.per_db);
        if (auto v = r.get("handedness")) cfg.pump.handedness = parse_handedness(*v);
        if (auto v = r.get("long_axis")) cfg.pump.long_axis = parse_long_axis(*v);
        r.number("theta_p_deg", cfg.pump.theta_p_deg);
        cfg.pump.validate();
    }
    {
        detail::SectionReader r(section("fiber") ? *section("fiber") : empty, "fiber",
                                {"phi_b", "phase_birefringence", "group_birefringence_ps_per_m", "length_m",
                                 "pump_wavelength_nm", "signal_wavelength_nm", "idler_wavelength_nm"});
        if (auto v = r.get("phi_b")) cfg.fiber.phi_b = parse_phase(*v, r.field("phi_b"));
        r.number("phase_birefringence", cfg.fiber.phase_birefringence);
        r.number("group_birefringence_ps_per_m", cfg.fiber.group_birefringence_ps_per_m);
        r.number("length_m", cfg.fiber.length_m);
        r.number("pump_wavelength_nm", cfg.fiber.pump_wavelength_nm);
        r.number("signal_wavelength_nm", cfg.fiber.signal_wavelength_nm);
        r.number("idler_wavelength_nm", cfg.fiber.idler_wavelength_nm);
        cfg.fiber.validate();
    }
    {
        if (!section("detectors")) throw ValidationError("missing required section [detectors]");
        detail::SectionReader r(*section("detectors"), "detectors", {"eta_s", "eta_i", "d_s", "d_i"});
        cfg.detectors.eta_s = parse_number(r.require("eta_s"), r.field("eta_s"));
        cfg.detectors.eta_i = parse_number(r.require("eta_i"), r.field("eta_i"));
        cfg.detectors.d_s = parse_number(r.require("d_s"), r.field("d_s"));
        cfg.detectors.d_i = parse_number(r.require("d_i"), r.field("d_i"));
        cfg.detectors.validate();
    }
    {
        detail::SectionReader r(section("run") ? *section("run") : empty, "run",
                                {"seed", "rep_rate_hz", "duration_s", "pulses"});
        if (auto v = r.get("seed")) cfg.run.seed = parse_unsigned(*v, r.field("seed"));
        r.number("rep_rate_hz", cfg.run.rep_rate_hz);
        r.number("duration_s", cfg.run.duration_s);
        if (auto v = r.get("pulses")) {
            if (r.get("duration_s")) throw ValidationError("run: give either duration_s or pulses, not both");
            cfg.run.pulses = parse_unsigned(*v, r.field("pulses"));
        }
        if (!(cfg.run.rep_rate_hz > 0.0 && std::isfinite(cfg.run.rep_rate_hz)))
            throw ValidationError("run.rep_rate_hz must be positive");
        if (!(cfg.run.duration_s > 0.0 && std::isfinite(cfg.run.duration_s)))
            throw ValidationError("run.duration_s must be positive");
        if (cfg.run.pulse_count() == 0) throw ValidationError("run.pulses must be > 0");
    }
    {
        if (!section("rates")) throw ValidationError("missing required section [rates]");
        detail::SectionReader r(*section("rates"), "rates", {"R", "R_s", "R_i"});
        cfg.rates.R = parse_number(r.require("R"), r.field("R"));
        r.number("R_s", cfg.rates.R_s);
        r.number("R_i", cfg.rates.R_i);
        cfg.rates.validate();
    }
    if (const auto* s = section("analyzers")) {
        detail::SectionReader r(*s, "analyzers", {"theta_s_deg", "theta_i_deg"});
        AnalyzerSetting a;
        a.theta_s_deg = parse_number(r.require("theta_s_deg"), r.field("theta_s_deg"));
        a.theta_i_deg = parse_number(r.require("theta_i_deg"), r.field("theta_i_deg"));
        a.validate();
        cfg.analyzers = a;
    }
    return cfg;
}

inline ExperimentConfig load_config(const std::string& path)
{
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open config file '" + path + "'");
    std::stringstream buffer;
    buffer << in.rdbuf();
    return parse_config(buffer.str());
}

inline constexpr const char* seed_env_var = "FIBERBELL_SEED";

/// Command line, then config file, then FIBERBELL_SEED, then 0.
inline std::uint64_t resolve_seed(std::optional<std::uint64_t> cli, const ExperimentConfig* cfg)
{
    if (cli) return *cli;
    if (cfg && cfg->run.seed) return *cfg->run.seed;
    if (const char* env = std::getenv(seed_env_var)) return parse_unsigned(env, seed_env_var);
    return 0;
}

}  // namespace fiberbell
