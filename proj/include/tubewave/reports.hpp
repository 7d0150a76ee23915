#pragma once

// CSV, manifest and plot-data writers.

#include <chrono>
#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "errors.hpp"
#include "spectral_scan.hpp"
#include "wave_evolver.hpp"

#ifndef TUBEWAVE_VERSION
#define TUBEWAVE_VERSION "0.1.0"
#endif

namespace tubewave {

inline constexpr const char* version_string = "tubewave " TUBEWAVE_VERSION;

/// 64-bit FNV-1a, hex encoded.
inline std::string fnv1a_hex(const std::string& text) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : text) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016" PRIx64, h);
    return buf;
}

/// Fixed 17-significant-digit formatting; empty string for NaN.
inline std::string format_number(double x) {
    if (std::isnan(x)) return "";
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

class CsvTable {
public:
    explicit CsvTable(std::vector<std::string> header) : header_(std::move(header)) {}

    void add(std::vector<std::string> row) {
        detail::require(row.size() == header_.size(), "CsvTable: row width mismatch");
        rows_.push_back(std::move(row));
    }
    void add_numbers(const std::vector<double>& row) {
        std::vector<std::string> cells;
        for (double x : row) cells.push_back(format_number(x));
        add(std::move(cells));
    }

    std::size_t rows() const { return rows_.size(); }

    std::string str() const {
        std::string out;
        auto line = [&](const std::vector<std::string>& cells) {
            for (std::size_t i = 0; i < cells.size(); ++i) {
                if (i) out += ',';
                out += cells[i];
            }
            out += '\n';
        };
        line(header_);
        for (const auto& r : rows_) line(r);
        return out;
    }

    void write(const std::filesystem::path& path) const;

private:
    std::vector<std::string> header_;
    std::vector<std::vector<std::string>> rows_;
};

namespace detail {
inline void write_text(const std::filesystem::path& path, const std::string& text) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream f(path, std::ios::binary);
    if (!f) throw InputError("cannot write " + path.string());
    f << text;
    if (!f) throw InputError("write failed for " + path.string());
}
}  // namespace detail

inline void CsvTable::write(const std::filesystem::path& path) const { detail::write_text(path, str()); }

struct ExperimentManifest {
    std::string kind;
    nlohmann::json config;
    std::uint64_t seed = 0;
    std::string version = version_string;
    double wall_clock_seconds = 0;
    std::vector<std::string> outputs;
    nlohmann::json results = nlohmann::json::object();

    std::string config_hash() const { return fnv1a_hex(config.dump()); }

    nlohmann::json to_json() const {
        return {{"kind", kind},           {"config", config},   {"config_hash", config_hash()},
                {"seed", seed},           {"version", version}, {"wall_clock_seconds", wall_clock_seconds},
                {"outputs", outputs},     {"results", results}};
    }

    void write(const std::filesystem::path& path) const { detail::write_text(path, to_json().dump(2) + "\n"); }
};

inline ExperimentManifest read_manifest(const std::filesystem::path& path) {
    std::ifstream f(path);
    if (!f) throw InputError("cannot read " + path.string());
    nlohmann::json j;
    try {
        f >> j;
        ExperimentManifest m;
        m.kind = j.at("kind").get<std::string>();
        m.config = j.at("config");
        m.seed = j.value("seed", std::uint64_t{0});
        m.version = j.value("version", std::string{});
        m.wall_clock_seconds = j.value("wall_clock_seconds", 0.0);
        m.outputs = j.value("outputs", std::vector<std::string>{});
        m.results = j.value("results", nlohmann::json::object());
        return m;
    } catch (const nlohmann::json::exception& e) {
        throw InputError(path.string() + ": " + e.what());
    }
}

/// Writes <base>.dat with (log x, log y) and <base>.fit.dat with the fitted
/// line at the same abscissae. Returns the fit.
inline FitResult emit_plot_data(std::span<const double> x, std::span<const double> y, const std::filesystem::path& base,
                                std::vector<std::string>* written = nullptr) {
    if (x.empty() || x.size() != y.size()) throw ValidationError("emit_plot_data: records must be nonempty");
    const FitResult fit = fit_power_law(x, y);
    std::string data = "# log_x log_y\n", line = "# log_x fitted_log_y\n";
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double lx = std::log(x[i]);
        data += format_number(lx) + ' ' + format_number(std::log(y[i])) + '\n';
        line += format_number(lx) + ' ' + format_number(fit.log_intercept + fit.exponent * lx) + '\n';
    }
    const auto dat = std::filesystem::path(base.string() + ".dat");
    const auto fitdat = std::filesystem::path(base.string() + ".fit.dat");
    detail::write_text(dat, data);
    detail::write_text(fitdat, line);
    if (written) {
        written->push_back(dat.filename().string());
        written->push_back(fitdat.filename().string());
    }
    return fit;
}

/// (log h, log sigma_min).
inline FitResult emit_plot_data(const std::vector<SweepRecord>& records, const std::filesystem::path& base,
                                std::vector<std::string>* written = nullptr) {
    if (records.empty()) throw ValidationError("emit_plot_data: records must be nonempty");
    std::vector<double> x, y;
    for (const auto& r : records) {
        x.push_back(r.parameter);
        y.push_back(r.value);
    }
    return emit_plot_data(x, y, base, written);
}

/// (log t, log sqrt E) over samples with t in [t_min, t_max].
inline FitResult emit_plot_data(const EnergyTrace& trace, double t_min, double t_max,
                                const std::filesystem::path& base, std::vector<std::string>* written = nullptr) {
    std::vector<double> x, y;
    for (std::size_t k = 0; k < trace.size(); ++k)
        if (trace.times[k] >= t_min && trace.times[k] <= t_max && trace.times[k] > 0) {
            x.push_back(trace.times[k]);
            y.push_back(std::sqrt(trace.energies[k]));
        }
    if (x.empty()) throw ValidationError("emit_plot_data: records must be nonempty");
    return emit_plot_data(x, y, base, written);
}

inline nlohmann::json to_json(const FitResult& f) {
    return {{"exponent", f.exponent},
            {"log_intercept", f.log_intercept},
            {"r_squared", f.r_squared},
            {"exponent_stderr", f.exponent_stderr},
            {"max_abs_residual", f.max_abs_residual}};
}

}  // namespace tubewave
