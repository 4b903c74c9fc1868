/**
 * @file dataset.hpp
 * @brief Sweep dataset CSV and the derived tabular outputs (fit rows,
 *        plot columns).
 *
 * Dataset schema, header mandatory and exact:
 *   point_id,theta_s_deg,theta_i_deg,per_db,handedness,long_axis,pulses,n_s,n_i,n_co,n_ac
 * Reals are written with 9 significant digits, `inf` for a linear pump and
 * `none` in both angle columns when no analyzers were inserted.
 */
#pragma once

#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "fiberbell/config.hpp"
#include "fiberbell/counting.hpp"
#include "fiberbell/errors.hpp"
#include "fiberbell/estimation.hpp"

namespace fiberbell {

inline constexpr std::string_view dataset_header =
    "point_id,theta_s_deg,theta_i_deg,per_db,handedness,long_axis,pulses,n_s,n_i,n_co,n_ac";

struct DatasetRow {
    std::uint64_t point_id = 0;
    CountRecord record;
};

enum class OutputFormat { csv, json_lines };

inline OutputFormat parse_output_format(std::string_view s)
{
    if (s == "csv") return OutputFormat::csv;
    if (s == "json-lines") return OutputFormat::json_lines;
    throw ValidationError("format must be csv or json-lines");
}

/// 9 significant digits; inf/nan spelled out.
inline std::string format_real(double v)
{
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    if (std::isnan(v)) return "nan";
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.9g", v);
    return buf;
}

namespace detail {

inline std::vector<std::string_view> split_csv(std::string_view line)
{
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        const auto pos = line.find(',', start);
        if (pos == std::string_view::npos) {
            out.push_back(line.substr(start));
            break;
        }
        out.push_back(line.substr(start, pos - start));
        start = pos + 1;
    }
    return out;
}

inline std::uint64_t parse_tally(std::string_view text, std::size_t line, const char* column)
{
    std::uint64_t v = 0;
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (text.empty() || ec != std::errc() || ptr != text.data() + text.size())
        throw ParseError(line, std::string(column) + ": not a non-negative integer: '" + std::string(text) + "'");
    return v;
}

inline double parse_real(std::string_view text, std::size_t line, const char* column)
{
    try {
        return parse_number(text, column);
    } catch (const ValidationError& e) {
        throw ParseError(line, e.what());
    }
}

}  // namespace detail

inline std::vector<DatasetRow> read_dataset(std::istream& in)
{
    std::string line;
    std::size_t line_no = 1;
    if (!std::getline(in, line)) throw ParseError(1, "empty dataset: header row missing");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != dataset_header) throw ParseError(1, "header mismatch, expected '" + std::string(dataset_header) + "'");

    std::vector<DatasetRow> rows;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const auto f = detail::split_csv(line);
        if (f.size() != 11) throw ParseError(line_no, "expected 11 columns, got " + std::to_string(f.size()));

        DatasetRow row;
        row.point_id = detail::parse_tally(f[0], line_no, "point_id");
        const bool no_ts = f[1] == "none";
        const bool no_ti = f[2] == "none";
        if (no_ts != no_ti) throw ParseError(line_no, "theta_s_deg and theta_i_deg must both be 'none' or both numbers");
        if (!no_ts) {
            AnalyzerSetting a;
            a.theta_s_deg = detail::parse_real(f[1], line_no, "theta_s_deg");
            a.theta_i_deg = detail::parse_real(f[2], line_no, "theta_i_deg");
            row.record.analyzers = a;
        }
        auto& r = row.record;
        r.pump.per_db = detail::parse_real(f[3], line_no, "per_db");
        try {
            r.pump.handedness = parse_handedness(f[4]);
            r.pump.long_axis = parse_long_axis(f[5]);
        } catch (const ValidationError& e) {
            throw ParseError(line_no, e.what());
        }
        r.pulses = detail::parse_tally(f[6], line_no, "pulses");
        r.n_s = detail::parse_tally(f[7], line_no, "n_s");
        r.n_i = detail::parse_tally(f[8], line_no, "n_i");
        r.n_co = detail::parse_tally(f[9], line_no, "n_co");
        r.n_ac = detail::parse_tally(f[10], line_no, "n_ac");
        try {
            r.validate();
        } catch (const ValidationError& e) {
            throw ParseError(line_no, e.what());
        }
        rows.push_back(row);
    }
    return rows;
}

inline std::vector<DatasetRow> read_dataset(const std::string& path)
{
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open dataset '" + path + "'");
    return read_dataset(in);
}

/// Generic table writer shared by the derived outputs.
class TableWriter {
public:
    TableWriter(std::ostream& out, OutputFormat format, std::vector<std::string> columns,
                std::set<std::string> text_columns = {})
        : out_(out), format_(format), columns_(std::move(columns)), text_columns_(std::move(text_columns))
    {
        if (format_ == OutputFormat::csv) {
            for (std::size_t k = 0; k < columns_.size(); ++k) out_ << (k ? "," : "") << columns_[k];
            out_ << '\n';
        }
    }

    /// Cells are preformatted strings; json-lines emits numbers where they parse.
    void row(const std::vector<std::string>& cells)
    {
        if (cells.size() != columns_.size()) throw Error("table row width mismatch");
        if (format_ == OutputFormat::csv) {
            for (std::size_t k = 0; k < cells.size(); ++k) out_ << (k ? "," : "") << cells[k];
            out_ << '\n';
            return;
        }
        nlohmann::ordered_json j;
        for (std::size_t k = 0; k < cells.size(); ++k) {
            double v = 0.0;
            const auto& c = cells[k];
            auto [ptr, ec] = std::from_chars(c.data(), c.data() + c.size(), v);
            if (!text_columns_.count(columns_[k]) && !c.empty() && ec == std::errc() && ptr == c.data() + c.size() && std::isfinite(v))
                j[columns_[k]] = v;
            else
                j[columns_[k]] = c;
        }
        out_ << j.dump() << '\n';
    }

private:
    std::ostream& out_;
    OutputFormat format_;
    std::vector<std::string> columns_;
    std::set<std::string> text_columns_;
};

inline void write_dataset(std::ostream& out, const std::vector<DatasetRow>& rows,
                          OutputFormat format = OutputFormat::csv)
{
    TableWriter t(out, format,
                  {"point_id", "theta_s_deg", "theta_i_deg", "per_db", "handedness", "long_axis", "pulses", "n_s",
                   "n_i", "n_co", "n_ac"},
                  {"handedness", "long_axis"});
    for (const auto& row : rows) {
        const auto& r = row.record;
        t.row({std::to_string(row.point_id), r.analyzers ? format_real(r.analyzers->theta_s_deg) : "none",
               r.analyzers ? format_real(r.analyzers->theta_i_deg) : "none", format_real(r.pump.per_db),
               std::string(to_string(r.pump.handedness)), std::string(to_string(r.pump.long_axis)),
               std::to_string(r.pulses), std::to_string(r.n_s), std::to_string(r.n_i), std::to_string(r.n_co),
               std::to_string(r.n_ac)});
    }
}

inline void write_dataset(const std::string& path, const std::vector<DatasetRow>& rows,
                          OutputFormat format = OutputFormat::csv)
{
    std::ofstream out(path);
    if (!out) throw ValidationError("cannot write '" + path + "'");
    write_dataset(out, rows, format);
}

inline void write_fit_result(std::ostream& out, const FitResult& fit, OutputFormat format = OutputFormat::csv)
{
    TableWriter t(out, format, {"quantity", "value", "uncertainty"}, {"quantity"});
    for (const auto& p : fit.parameters) t.row({p.name, format_real(p.value), format_real(p.sigma)});
    t.row({"rss", format_real(fit.rss), ""});
    t.row({"dof", std::to_string(fit.dof), ""});
    t.row({"converged", fit.converged ? "1" : "0", ""});
    for (const auto& f : fit.flags) t.row({"flag", f, ""});
}

struct PlotPoint {
    double x = 0.0;
    double y = 0.0;
    double y_err = 0.0;
    double model_y = 0.0;
};

inline void write_plot_data(std::ostream& out, const std::vector<PlotPoint>& points,
                            OutputFormat format = OutputFormat::csv)
{
    TableWriter t(out, format, {"x", "y", "y_err", "model_y"});
    for (const auto& p : points) t.row({format_real(p.x), format_real(p.y), format_real(p.y_err), format_real(p.model_y)});
}

}  // namespace fiberbell
