#pragma once

// Damped wave equation u_tt - Lap u + b u_t = 0 on a flat torus.
//
// Strang splitting: half a step of the undamped flow (an exact rotation per
// Fourier mode), a full step of v' = -b v (exact pointwise decay), another
// half rotation. E = int |grad u|^2 + |v|^2 then obeys dE/dt = -2 int b |v|^2.

#include <cmath>
#include <limits>
#include <numbers>
#include <vector>

#include "damping.hpp"
#include "fft.hpp"
#include "geometry.hpp"
#include "operators.hpp"
#include "spectral_scan.hpp"

namespace tubewave {

struct WaveState {
    Field u, v;
    double time = 0;

    explicit WaveState(LatticePtr lat) : u(lat), v(lat) {}
    WaveState(Field u_, Field v_, double t = 0) : u(std::move(u_)), v(std::move(v_)), time(t) {
        detail::require_same_lattice(*u.lattice, *v.lattice, "WaveState");
        detail::require(t >= 0, "WaveState: time must be nonnegative");
    }
};

inline double kinetic_energy(const Field& v) {
    double s = 0;
    for (const auto& x : v.values) s += std::norm(x);
    return v.lattice->cell_volume() * s;
}

inline double energy(const WaveState& s) { return dirichlet_energy(s.u) + kinetic_energy(s.v); }

/// int b |v|^2.
inline double damping_power(const Field& v, std::span<const double> b) {
    double s = 0;
    for (std::size_t i = 0; i < v.size(); ++i) s += b[i] * std::norm(v.values[i]);
    return v.lattice->cell_volume() * s;
}

namespace detail {
inline std::vector<double> real_damping(const Field& b) {
    std::vector<double> out(b.size());
    for (std::size_t i = 0; i < b.size(); ++i) {
        require(b.values[i].imag() == 0 && b.values[i].real() >= 0, "wave step: damping must be real and nonnegative");
        out[i] = b.values[i].real();
    }
    return out;
}
}  // namespace detail

/// Fixed-dt Strang stepper with precomputed rotation and decay factors.
class WaveEvolver {
public:
    WaveEvolver(LatticePtr lattice, std::vector<double> b, double dt,
                double max_dt = std::numeric_limits<double>::infinity())
        : lattice_(std::move(lattice)), b_(std::move(b)), dt_(dt) {
        detail::require(std::isfinite(dt) && dt > 0, "WaveEvolver: dt must be positive and finite");
        detail::require(dt <= max_dt, "WaveEvolver: dt exceeds the configured stability bound");
        detail::require(b_.size() == lattice_->size(), "WaveEvolver: damping size mismatch");
        const double s = dt / 2;
        const std::size_t n = lattice_->size();
        cos_.resize(n);
        sinc_.resize(n);
        wsin_.resize(n);
        for (std::size_t k = 0; k < n; ++k) {
            const double w = std::sqrt(lattice_->wavenumber_squared(k));
            cos_[k] = std::cos(w * s);
            sinc_[k] = w > 0 ? std::sin(w * s) / w : s;
            wsin_[k] = w * std::sin(w * s);
        }
        decay_.resize(n);
        for (std::size_t i = 0; i < n; ++i) {
            detail::require(b_[i] >= 0, "WaveEvolver: damping must be nonnegative");
            decay_[i] = std::exp(-b_[i] * dt);
        }
        uh_.resize(n);
        vh_.resize(n);
    }

    WaveEvolver(const Field& b, double dt, double max_dt = std::numeric_limits<double>::infinity())
        : WaveEvolver(b.lattice, detail::real_damping(b), dt, max_dt) {}

    double dt() const { return dt_; }
    const std::vector<double>& damping() const { return b_; }

    void advance(WaveState& s) {
        detail::require_same_lattice(*s.u.lattice, *lattice_, "WaveEvolver");
        rotate(s);
        for (std::size_t i = 0; i < decay_.size(); ++i) s.v.values[i] *= decay_[i];
        rotate(s);
        s.time += dt_;
    }

private:
    void rotate(WaveState& s) {
        fft::forward(*lattice_, s.u.values, uh_);
        fft::forward(*lattice_, s.v.values, vh_);
        for (std::size_t k = 0; k < uh_.size(); ++k) {
            const cdouble u = uh_[k], v = vh_[k];
            uh_[k] = cos_[k] * u + sinc_[k] * v;
            vh_[k] = -wsin_[k] * u + cos_[k] * v;
        }
        fft::inverse(*lattice_, uh_, s.u.values);
        fft::inverse(*lattice_, vh_, s.v.values);
    }

    LatticePtr lattice_;
    std::vector<double> b_;
    double dt_;
    std::vector<double> cos_, sinc_, wsin_, decay_;
    std::vector<cdouble> uh_, vh_;
};

inline WaveState step(const WaveState& state, double dt, const Field& b,
                      double max_dt = std::numeric_limits<double>::infinity()) {
    detail::require_same_lattice(*state.u.lattice, *b.lattice, "step");
    WaveEvolver ev(b, dt, max_dt);
    WaveState next = state;
    ev.advance(next);
    return next;
}

struct EnergyTrace {
    std::vector<double> times;
    std::vector<double> energies;
    /// ||u0||_{H^2} + ||u1||_{H^1}.
    double initial_sobolev = 0;

    void push(double t, double e) {
        detail::require(times.empty() || t > times.back(), "EnergyTrace: times must increase");
        times.push_back(t);
        energies.push_back(e);
    }
    std::size_t size() const { return times.size(); }
};

/// max_k (E_{k+1} - E_k) / E_k over consecutive samples; <= 0 for a monotone trace.
inline double monotonicity_violation(const EnergyTrace& trace) {
    double worst = -std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k + 1 < trace.size(); ++k)
        if (trace.energies[k] > 0) worst = std::max(worst, (trace.energies[k + 1] - trace.energies[k]) / trace.energies[k]);
    return trace.size() < 2 ? 0.0 : worst;
}

/// Evolves `steps` steps, sampling energy every `sample_every` steps (and at t0).
inline EnergyTrace evolve(WaveState& state, WaveEvolver& ev, long steps, long sample_every = 1) {
    detail::require(steps >= 0 && sample_every >= 1, "evolve: bad step counts");
    EnergyTrace trace;
    trace.initial_sobolev = sobolev_norm(state.u, 2) + sobolev_norm(state.v, 1);
    const double t0 = state.time;
    trace.push(t0, energy(state));
    for (long k = 1; k <= steps; ++k) {
        ev.advance(state);
        state.time = t0 + static_cast<double>(k) * ev.dt();
        if (k % sample_every == 0 || k == steps) trace.push(state.time, energy(state));
    }
    return trace;
}

namespace detail {
inline double pair_violation(const WaveState& a, const WaveState& b2, std::span<const double> b) {
    const double dt = b2.time - a.time;
    require(dt > 0, "dissipation_check: states must advance in time");
    const double rate = (energy(b2) - energy(a)) / dt;
    return std::abs(rate + damping_power(a.v, b) + damping_power(b2.v, b));
}
}  // namespace detail

/// max_k |(E_{k+1} - E_k)/dt + (P_k + P_{k+1})| with P = int b |v|^2, for
/// consecutive states one step apart.
inline double dissipation_check(const std::vector<WaveState>& states, std::span<const double> b) {
    detail::require(states.size() >= 2, "dissipation_check: need at least two states");
    double worst = 0;
    for (std::size_t k = 0; k + 1 < states.size(); ++k)
        worst = std::max(worst, detail::pair_violation(states[k], states[k + 1], b));
    return worst;
}

struct DissipationReport {
    std::vector<double> dts;
    std::vector<double> violations;
    /// Fitted slope of log violation against log dt.
    double order = 0;
};

/// Runs the same initial state to time t_end at dt, dt/2, ..., and fits the
/// order of the dissipation-identity violation.
inline DissipationReport dissipation_order(const WaveState& initial, const Field& b, double dt, double t_end,
                                           int levels = 3) {
    detail::require(levels >= 3, "dissipation_order: need at least three levels");
    const auto bv = detail::real_damping(b);
    DissipationReport rep;
    for (int l = 0; l < levels; ++l) {
        const double h = dt / std::ldexp(1.0, l);
        const long steps = std::lround(t_end / h);
        WaveEvolver ev(b, h);
        WaveState prev = initial, s = initial;
        double worst = 0;
        for (long k = 0; k < steps; ++k) {
            ev.advance(s);
            worst = std::max(worst, detail::pair_violation(prev, s, bv));
            prev = s;
        }
        rep.dts.push_back(h);
        rep.violations.push_back(worst);
    }
    rep.order = fit_power_law(rep.dts, rep.violations).exponent;
    return rep;
}

/// u0 = sum_{k=1}^{k_max} k^{-3} cos(k p) along the first coordinate (a
/// function on factor 1 only, hence concentrated on the trapped direction), u1 = 0.
inline WaveState trapped_initial_data(LatticePtr lat, int k_max = 63) {
    detail::require(2 * k_max < lat->resolution()[0], "trapped_initial_data: k_max not resolved");
    WaveState s(lat);
    const double l = lat->circumferences()[0];
    for (std::size_t i = 0; i < lat->size(); ++i) {
        const double p = lat->coordinate(i, 0) * 2 * std::numbers::pi / l;
        double acc = 0;
        for (int k = 1; k <= k_max; ++k) acc += std::cos(k * p) / (static_cast<double>(k) * k * k);
        s.u.values[i] = acc;
    }
    return s;
}

struct DecayFit {
    FitResult fit;
    double predicted = 0;
    /// fitted <= predicted + slack: the upper-bound direction.
    bool within_bound = false;
    /// |fitted - predicted| <= band.
    bool within_band = false;
};

/// Fits log sqrt(E) against log t over the window.
inline DecayFit fit_decay(const EnergyTrace& trace, double gamma, double t_min, double t_max, double slack = 0.5,
                          double band = 0.4) {
    detail::require(gamma > 0, "fit_decay: gamma must be positive");
    detail::require(0 < t_min && t_min < t_max, "fit_decay: need 0 < t_min < t_max");
    detail::require(!trace.times.empty() && t_min >= trace.times.front() && t_max <= trace.times.back() + 1e-9,
                    "fit_decay: window outside the trace");
    std::vector<double> t, y;
    for (std::size_t k = 0; k < trace.size(); ++k) {
        if (trace.times[k] < t_min || trace.times[k] > t_max) continue;
        detail::require(trace.energies[k] > 0, "fit_decay: energies must be positive in the window");
        t.push_back(trace.times[k]);
        y.push_back(std::sqrt(trace.energies[k]));
    }
    DecayFit out;
    out.fit = fit_power_law(t, y);
    out.predicted = -(1 + 1 / gamma);
    out.within_bound = out.fit.exponent <= out.predicted + slack;
    out.within_band = std::abs(out.fit.exponent - out.predicted) <= band;
    return out;
}

struct DecayConfig {
    int resolution = 128;
    double gamma = 1;
    double c_lower = 0.01;
    double dt = 0.02;
    double t_final = 200;
    long sample_every = 10;
    int k_max = 63;
    double window_min = 20 * std::numbers::pi;
    double window_max = 200;
};

struct DecayRun {
    EnergyTrace trace;
    DecayFit fit;
    DampingProfile damping;
};

/// Trapped data on the (2 pi)^2 torus with b = c d(q, 0)^{2 gamma} on the
/// whole second circle.
inline DecayRun run_decay(const DecayConfig& cfg) {
    detail::require(cfg.t_final > 0 && cfg.dt > 0, "run_decay: need positive t_final and dt");
    const auto grid = ProductGrid::two_torus(cfg.resolution, cfg.resolution);
    DampingProfile prof;
    prof.gamma = cfg.gamma;
    prof.c_lower = prof.c_upper = cfg.c_lower;
    prof.cutoff_radius = std::numbers::pi;
    const Field b = evaluate_damping(prof, grid);
    WaveEvolver ev(b, cfg.dt);
    WaveState s = trapped_initial_data(grid.lattice(), cfg.k_max);
    DecayRun run;
    run.damping = prof;
    run.trace = evolve(s, ev, std::lround(cfg.t_final / cfg.dt), cfg.sample_every);
    run.fit = fit_decay(run.trace, cfg.gamma, cfg.window_min, std::min(cfg.window_max, run.trace.times.back()));
    return run;
}

}  // namespace tubewave
