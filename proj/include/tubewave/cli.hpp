#pragma once

// Command-line front end: one subcommand per experiment, INI config files
// with one section per subcommand, flags override the file.

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "quasimode_lab.hpp"
#include "reports.hpp"
#include "spectral_scan.hpp"
#include "wave_evolver.hpp"

namespace tubewave {

namespace cli {

struct Common {
    std::string out;
    std::string config;
    unsigned jobs = 1;
    bool timings = false;
    std::uint64_t seed = 20240601;
};

struct ScanArgs {
    double gamma = 1;
    double h_min = 1.0 / 512;
    double h_max = 1.0 / 16;
    int points = 6;
    double c_lower = 1;
    double cutoff = 1;
    bool undamped = false;
    double tolerance = 1e-6;
    int window = 128;
};

struct HelmholtzArgs {
    std::vector<double> taus{-100, 0, 1e2, 1e3, 1e4};
    double inner = 1;
    double outer = 2;
    int resolution = 256;
    bool unweighted = false;
};

struct WaveArgs {
    DecayConfig decay;
};

struct SphereArgs {
    int d = 2;
    double delta = 0.25;
    std::vector<int> n{100, 1000, 10000};
};

struct QuasimodeArgs {
    QuasimodeSuiteConfig suite;
};

struct ReportArgs {
    std::string in;
};

class Runner {
public:
    Runner(std::ostream& out, std::ostream& err) : out_(out), err_(err) {}

    int run(int argc, const char* const* argv);

private:
    std::filesystem::path out_dir() const { return common_.out; }

    ExperimentManifest manifest(const std::string& kind, nlohmann::json config) const {
        ExperimentManifest m;
        m.kind = kind;
        m.config = std::move(config);
        m.seed = common_.seed;
        return m;
    }

    void finish(ExperimentManifest& m, std::chrono::steady_clock::time_point t0) {
        m.wall_clock_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        m.write(out_dir() / (m.kind + ".manifest.json"));
    }

    int resolvent_scan();
    int helmholtz_constant();
    int wave_decay();
    int sphere_tube();
    int quasimode_check();
    int report();

    std::ostream& out_;
    std::ostream& err_;
    Common common_;
    ScanArgs scan_;
    HelmholtzArgs helm_;
    WaveArgs wave_;
    SphereArgs sphere_;
    QuasimodeArgs qm_;
    ReportArgs report_;
};

inline int Runner::resolvent_scan() {
    const auto t0 = std::chrono::steady_clock::now();
    ScanConfig cfg;
    cfg.gamma = scan_.gamma;
    cfg.h_values = ScanConfig::geometric_h(scan_.h_max, scan_.h_min, scan_.points);
    if (scan_.undamped) {
        cfg.damping.reset();
    } else {
        cfg.damping->gamma = scan_.gamma;
        cfg.damping->c_lower = cfg.damping->c_upper = scan_.c_lower;
        cfg.damping->cutoff_radius = scan_.cutoff;
    }
    cfg.sigma.tolerance = scan_.tolerance;
    cfg.sigma.seed = common_.seed;
    cfg.preconditioner_window = static_cast<std::size_t>(scan_.window);
    cfg.workers = common_.jobs;

    nlohmann::json config = {{"gamma", cfg.gamma},
                             {"h_values", cfg.h_values},
                             {"resolution_rule", {{"floor", cfg.resolution.floor}, {"per_inverse_h", cfg.resolution.per_inverse_h}}},
                             {"damping", cfg.damping ? to_json(*cfg.damping) : nlohmann::json(nullptr)},
                             {"tolerance", cfg.sigma.tolerance},
                             {"preconditioner_window", scan_.window}};
    auto m = manifest("resolvent_scan", config);

    const auto records = run_resolvent_scan(cfg);
    CsvTable csv({"h", "sigma_min", "resolution", "seconds"});
    for (const auto& r : records)
        csv.add({format_number(r.parameter), format_number(r.value), std::to_string(r.resolution),
                 common_.timings ? format_number(r.seconds) : std::string{}});
    csv.write(out_dir() / "resolvent_scan.csv");
    m.outputs.push_back("resolvent_scan.csv");
    nlohmann::json per_h = nlohmann::json::array();
    for (const auto& r : records)
        per_h.push_back({{"h", r.parameter},
                         {"seconds", r.seconds},
                         {"critical_lambda_sq", r.critical_lambda_sq},
                         {"fibers_solved", r.fibers_solved},
                         {"fibers_skipped", r.fibers_skipped}});
    m.results = {{"predicted_exponent", predicted_exponent(cfg.gamma)},
                 {"optimal_delta", optimal_delta(cfg.gamma)},
                 {"records", per_h}};

    out_ << "h,sigma_min,resolution\n";
    for (const auto& r : records)
        out_ << format_number(r.parameter) << ',' << format_number(r.value) << ',' << r.resolution << '\n';

    const bool fittable = std::all_of(records.begin(), records.end(), [](const SweepRecord& r) { return r.value > 0; });
    if (!fittable) {
        // a lattice mode sits exactly on the unit shell
        m.results["fit"] = nullptr;
        finish(m, t0);
        out_ << "sigma_min vanishes at some h; no power-law fit\n";
        return 0;
    }
    const auto fit = emit_plot_data(records, out_dir() / "resolvent_scan", &m.outputs);
    const auto env = check_envelope(records, fit);
    m.results["fit"] = to_json(fit);
    m.results["envelope_epsilon"] = env.epsilon;
    m.results["below_envelope"] = env.below_envelope;
    m.results["local_slopes"] = env.local_slopes;
    m.results["pre_asymptotic_curvature"] = env.curvature_flag;
    finish(m, t0);
    out_ << "fitted exponent " << fit.exponent << " (predicted " << predicted_exponent(cfg.gamma) << "), r^2 "
         << fit.r_squared << (env.curvature_flag ? ", pre-asymptotic curvature flagged" : "") << '\n';
    return 0;
}

inline int Runner::helmholtz_constant() {
    const auto t0 = std::chrono::steady_clock::now();
    nlohmann::json config = {{"taus", helm_.taus},           {"inner_radius", helm_.inner},
                             {"outer_radius", helm_.outer},  {"resolution", helm_.resolution},
                             {"weighted", !helm_.unweighted}};
    auto m = manifest("helmholtz_constant", config);
    std::vector<ConstantEstimate> est(helm_.taus.size());
    parallel_for(est.size(), common_.jobs, [&](std::size_t i) {
        est[i] = helmholtz_best_constant(helm_.taus[i], helm_.inner, helm_.outer, !helm_.unweighted, helm_.resolution);
    });
    CsvTable csv({"tau", "best_constant", "sum_of_norms_lower", "inner_norm", "annulus_norm", "forcing_norm"});
    double lo = INFINITY, hi = 0;
    for (const auto& e : est) {
        csv.add_numbers({e.tau, e.best_constant, e.sum_of_norms_lower, e.inner_norm, e.annulus_norm, e.forcing_norm});
        lo = std::min(lo, e.best_constant);
        hi = std::max(hi, e.best_constant);
    }
    csv.write(out_dir() / "helmholtz_constant.csv");
    m.outputs.push_back("helmholtz_constant.csv");
    m.results = {{"max_over_min", hi / lo},
                 {"note", "sum-of-norms constant lies in [best_constant/sqrt(2), best_constant]"}};
    finish(m, t0);
    out_ << csv.str() << "max/min " << hi / lo << '\n';
    return 0;
}

inline int Runner::wave_decay() {
    const auto t0 = std::chrono::steady_clock::now();
    const auto& d = wave_.decay;
    nlohmann::json config = {{"resolution", d.resolution}, {"gamma", d.gamma},
                             {"c_lower", d.c_lower},       {"dt", d.dt},
                             {"t_final", d.t_final},       {"sample_every", d.sample_every},
                             {"initial_data", {{"u0", "sum_{k=1}^{k_max} k^-3 cos(k p)"}, {"u1", 0}, {"k_max", d.k_max}}},
                             {"window", {d.window_min, d.window_max}}};
    auto m = manifest("wave_decay", config);
    const auto run = run_decay(d);
    CsvTable csv({"time", "energy", "sqrt_energy"});
    for (std::size_t k = 0; k < run.trace.size(); ++k)
        csv.add_numbers({run.trace.times[k], run.trace.energies[k], std::sqrt(run.trace.energies[k])});
    csv.write(out_dir() / "wave_decay.csv");
    m.outputs.push_back("wave_decay.csv");
    emit_plot_data(run.trace, d.window_min, d.window_max, out_dir() / "wave_decay", &m.outputs);
    m.results = {{"fit", to_json(run.fit.fit)},
                 {"predicted_exponent", run.fit.predicted},
                 {"within_bound", run.fit.within_bound},
                 {"within_band", run.fit.within_band},
                 {"initial_sobolev", run.trace.initial_sobolev},
                 {"monotonicity_violation", monotonicity_violation(run.trace)},
                 {"damping", to_json(run.damping)}};
    finish(m, t0);
    out_ << "fitted sqrt(E) exponent " << run.fit.fit.exponent << " (predicted " << run.fit.predicted << "), r^2 "
         << run.fit.fit.r_squared << '\n';
    return 0;
}

inline int Runner::sphere_tube() {
    const auto t0 = std::chrono::steady_clock::now();
    nlohmann::json config = {{"d", sphere_.d}, {"delta", sphere_.delta}, {"n", sphere_.n}};
    auto m = manifest("sphere_tube", config);
    const auto pts = counterexample_ratio(sphere_.d, sphere_.delta, sphere_.n);
    CsvTable csv({"n", "h", "inner_mass", "annulus_mass", "ratio"});
    for (const auto& p : pts)
        csv.add({std::to_string(p.n), format_number(p.h), format_number(p.inner_mass), format_number(p.annulus_mass),
                 format_number(p.ratio)});
    csv.write(out_dir() / "sphere_tube.csv");
    m.outputs.push_back("sphere_tube.csv");
    finish(m, t0);
    out_ << csv.str();
    return 0;
}

inline int Runner::quasimode_check() {
    const auto t0 = std::chrono::steady_clock::now();
    auto& s = qm_.suite;
    s.seed = common_.seed;
    nlohmann::json config = {{"resolution", s.resolution}, {"h", s.h},
                             {"delta", s.delta},           {"max_modes", s.max_modes},
                             {"max_frequency", s.max_frequency}, {"trials", s.trials}};
    auto m = manifest("quasimode_check", config);
    const auto res = run_quasimode_suite(s);
    CsvTable csv({"trial", "ratio"});
    for (std::size_t i = 0; i < res.ratios.size(); ++i) csv.add({std::to_string(i), format_number(res.ratios[i])});
    csv.write(out_dir() / "quasimode_check.csv");
    m.outputs.push_back("quasimode_check.csv");
    m.results = {{"max_ratio", res.max_ratio}, {"worst_trial", res.worst_trial}};
    finish(m, t0);
    out_ << "trials " << res.ratios.size() << ", max ratio " << res.max_ratio << " (trial " << res.worst_trial << ")\n";
    return 0;
}

inline int Runner::report() {
    const std::filesystem::path dir = report_.in.empty() ? out_dir() : std::filesystem::path(report_.in);
    if (!std::filesystem::is_directory(dir)) throw InputError("report: no such directory " + dir.string());
    std::vector<std::filesystem::path> files;
    for (const auto& e : std::filesystem::directory_iterator(dir)) {
        const auto name = e.path().filename().string();
        if (name.size() > 14 && name.ends_with(".manifest.json")) files.push_back(e.path());
    }
    std::sort(files.begin(), files.end());
    if (files.empty()) throw InputError("report: no manifests in " + dir.string());
    nlohmann::json summary = nlohmann::json::array();
    for (const auto& f : files) {
        const auto m = read_manifest(f);
        out_ << m.kind << "  [" << m.config_hash() << "]";
        if (m.results.contains("fit"))
            out_ << "  exponent " << m.results["fit"]["exponent"].get<double>() << "  r^2 "
                 << m.results["fit"]["r_squared"].get<double>();
        if (m.results.contains("predicted_exponent"))
            out_ << "  predicted " << m.results["predicted_exponent"].get<double>();
        if (m.results.contains("max_over_min")) out_ << "  max/min " << m.results["max_over_min"].get<double>();
        if (m.results.contains("max_ratio")) out_ << "  max ratio " << m.results["max_ratio"].get<double>();
        out_ << '\n';
        summary.push_back({{"manifest", f.filename().string()}, {"kind", m.kind}, {"results", m.results}});
    }
    detail::write_text(dir / "report.json", summary.dump(2) + "\n");
    return 0;
}

inline int Runner::run(int argc, const char* const* argv) {
    CLI::App app{"Trapped-set damping experiments on flat product tori", "tubewave"};
    app.set_version_flag("--version", std::string(version_string));
    app.require_subcommand(1);
    app.fallthrough();
    if (const char* env = std::getenv("TUBEWAVE_OUT"); env && *env) common_.out = env;
    else common_.out = "runs";
    app.add_option("--out", common_.out, "Output directory (default $TUBEWAVE_OUT or runs)");
    app.add_option("--jobs", common_.jobs, "Worker threads")->check(CLI::PositiveNumber);
    app.add_option("--seed", common_.seed, "Random seed");
    app.add_flag("--timings", common_.timings, "Write per-row seconds into CSV outputs");
    app.set_config("--config", "", "INI file; one [section] per subcommand");

    auto* scan = app.add_subcommand("resolvent-scan", "sigma_min(L_h) over a geometric h grid");
    scan->add_option("--gamma", scan_.gamma)->check(CLI::PositiveNumber);
    scan->add_option("--h-min", scan_.h_min)->check(CLI::PositiveNumber);
    scan->add_option("--h-max", scan_.h_max)->check(CLI::PositiveNumber);
    scan->add_option("--points", scan_.points);
    scan->add_option("--c-lower", scan_.c_lower)->check(CLI::PositiveNumber);
    scan->add_option("--cutoff", scan_.cutoff)->check(CLI::PositiveNumber);
    scan->add_flag("--undamped", scan_.undamped, "Use b = 0");
    scan->add_option("--tolerance", scan_.tolerance)->check(CLI::PositiveNumber);
    scan->add_option("--window", scan_.window, "Dense preconditioner block size")->check(CLI::PositiveNumber);

    auto* helm = app.add_subcommand("helmholtz-constant", "Best constants of the tube Helmholtz estimate");
    helm->add_option("--tau", helm_.taus)->delimiter(',');
    helm->add_option("--inner", helm_.inner)->check(CLI::PositiveNumber);
    helm->add_option("--outer", helm_.outer)->check(CLI::PositiveNumber);
    helm->add_option("--resolution", helm_.resolution)->check(CLI::PositiveNumber);
    helm->add_flag("--unweighted", helm_.unweighted, "Drop the (1 + |tau|^{1/2})^{-1} weight");

    auto* wave = app.add_subcommand("wave-decay", "Energy decay of trapped data under damping");
    auto& d = wave_.decay;
    wave->add_option("--gamma", d.gamma)->check(CLI::PositiveNumber);
    wave->add_option("--resolution", d.resolution)->check(CLI::PositiveNumber);
    wave->add_option("--c-lower", d.c_lower)->check(CLI::PositiveNumber);
    wave->add_option("--dt", d.dt)->check(CLI::PositiveNumber);
    wave->add_option("--t-final", d.t_final)->check(CLI::PositiveNumber);
    wave->add_option("--sample-every", d.sample_every)->check(CLI::PositiveNumber);
    wave->add_option("--k-max", d.k_max)->check(CLI::PositiveNumber);
    wave->add_option("--window-min", d.window_min)->check(CLI::PositiveNumber);
    wave->add_option("--window-max", d.window_max)->check(CLI::PositiveNumber);

    auto* sphere = app.add_subcommand("sphere-tube", "Tube masses of (x1 + i x2)^n on S^d");
    sphere->add_option("--d", sphere_.d);
    sphere->add_option("--delta", sphere_.delta);
    sphere->add_option("--n", sphere_.n)->delimiter(',');

    auto* qm = app.add_subcommand("quasimode-check", "Randomized product quasimode suite");
    auto& s = qm_.suite;
    qm->add_option("--resolution", s.resolution)->check(CLI::PositiveNumber);
    qm->add_option("--semiclassical-h", s.h)->check(CLI::PositiveNumber);
    qm->add_option("--delta", s.delta);
    qm->add_option("--trials", s.trials)->check(CLI::PositiveNumber);
    qm->add_option("--max-modes", s.max_modes)->check(CLI::PositiveNumber);
    qm->add_option("--max-frequency", s.max_frequency)->check(CLI::PositiveNumber);

    auto* rep = app.add_subcommand("report", "Summarize manifests in an output directory");
    rep->add_option("--in", report_.in, "Directory to summarize (default --out)");

    if (argc <= 1) {
        err_ << app.help();
        return 2;
    }
    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp&) {
        out_ << app.help();
        return 0;
    } catch (const CLI::CallForAllHelp&) {
        out_ << app.help("", CLI::AppFormatMode::All);
        return 0;
    } catch (const CLI::CallForVersion&) {
        out_ << version_string << '\n';
        return 0;
    } catch (const CLI::ParseError& e) {
        err_ << e.what() << "\n\n" << app.help();
        return 2;
    }

    try {
        if (*scan) return resolvent_scan();
        if (*helm) return helmholtz_constant();
        if (*wave) return wave_decay();
        if (*sphere) return sphere_tube();
        if (*qm) return quasimode_check();
        if (*rep) return report();
    } catch (const ConvergenceError& e) {
        err_ << "error: " << e.what() << '\n';
        return 3;
    } catch (const InputError& e) {
        err_ << "error: " << e.what() << '\n';
        return 2;
    } catch (const ValidationError& e) {
        err_ << "error: " << e.what() << '\n';
        return 2;
    } catch (const std::filesystem::filesystem_error& e) {
        err_ << "error: " << e.what() << '\n';
        return 2;
    }
    return 2;
}

}  // namespace cli

/// Exit code 0 on success, 2 on bad input or validation failure, 3 when a
/// solver or quadrature does not converge.
inline int run_cli(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
    return cli::Runner(out, err).run(argc, argv);
}

}  // namespace tubewave
