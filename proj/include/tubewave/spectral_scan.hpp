#pragma once

// Sweeps of sigma_min(L_h) over h on M1 x M2 and power-law fits.
//
// b depends only on the factor-2 point, so L_h is block diagonal in the
// Fourier basis of M1: sigma_min(L_h) is the minimum over factor-1 modes of
// sigma_min of the fiber operator with lambda^2 = |k_1|^2. Fibers whose
// Hermitian part alone keeps them above the running minimum are skipped.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <map>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "damping.hpp"
#include "linalg.hpp"
#include "operators.hpp"
#include "parallel.hpp"

namespace tubewave {

/// Exponent s in sigma_min(L_h) ~ h^s: 1 + gamma / (gamma + 1).
inline double predicted_exponent(double gamma) {
    detail::require(gamma > 0, "predicted_exponent: gamma must be positive");
    return 1 + gamma / (gamma + 1);
}

/// Tube exponent delta = 1 / (2 (1 + gamma)).
inline double optimal_delta(double gamma) {
    detail::require(gamma > 0, "optimal_delta: gamma must be positive");
    return 1 / (2 * (1 + gamma));
}

/// N(h) = max(floor, ceil(per_inverse_h / h)), rounded up to even.
struct ResolutionRule {
    int floor = 64;
    double per_inverse_h = 16;

    int operator()(double h) const {
        detail::require(h > 0, "ResolutionRule: h must be positive");
        int n = std::max(floor, static_cast<int>(std::ceil(per_inverse_h / h - 1e-9)));
        return n + (n % 2);
    }
};

struct ScanConfig {
    double gamma = 1;
    std::vector<double> h_values;
    ResolutionRule resolution;
    /// nullopt means b = 0.
    std::optional<DampingProfile> damping = DampingProfile{};
    double circumference1 = 2 * std::numbers::pi;
    double circumference2 = 2 * std::numbers::pi;
    SigmaOptions sigma;
    std::size_t preconditioner_window = 128;
    unsigned workers = 1;

    /// h_max, h_max/2, ... : `points` values with ratio 2 unless h_min pins the ratio.
    static std::vector<double> geometric_h(double h_max, double h_min, int points) {
        detail::require(points >= 2 && h_max > h_min && h_min > 0, "geometric_h: need h_max > h_min > 0, points >= 2");
        std::vector<double> hs(static_cast<std::size_t>(points));
        const double ratio = std::pow(h_min / h_max, 1.0 / (points - 1));
        for (int i = 0; i < points; ++i) hs[static_cast<std::size_t>(i)] = h_max * std::pow(ratio, i);
        hs.back() = h_min;
        return hs;
    }

    void validate() const {
        detail::require(gamma > 0, "ScanConfig: gamma must be positive");
        detail::require(h_values.size() >= 5, "ScanConfig: at least 5 h values required");
        for (std::size_t i = 0; i < h_values.size(); ++i) {
            detail::require(h_values[i] > 0, "ScanConfig: h values must be positive");
            if (i > 0) detail::require(h_values[i] < h_values[i - 1], "ScanConfig: h values must be strictly decreasing");
        }
        detail::require(resolution.floor >= 2 && resolution.per_inverse_h > 0, "ScanConfig: bad resolution rule");
        for (double h : h_values) {
            const double points_per_wavelength =
                resolution(h) * 2 * std::numbers::pi * h / std::max(circumference1, circumference2);
            detail::require(points_per_wavelength >= 8, "ScanConfig: resolution rule gives < 8 points per wavelength");
        }
        if (damping) {
            detail::require(damping->gamma == gamma, "ScanConfig: damping gamma differs from scan gamma");
            damping->validate();
        }
    }
};

struct SweepRecord {
    double parameter = 0;
    double value = 0;
    int resolution = 0;
    double seconds = 0;
    /// lambda^2 of the fiber attaining the minimum (scan records only).
    double critical_lambda_sq = NAN;
    std::size_t fibers_solved = 0;
    std::size_t fibers_skipped = 0;
};

struct FitResult {
    double exponent = 0;
    double log_intercept = 0;
    double r_squared = 0;
    double exponent_stderr = 0;
    double max_abs_residual = 0;
};

/// Least squares for log y = a + p log x.
inline FitResult fit_power_law(std::span<const double> x, std::span<const double> y) {
    detail::require(x.size() == y.size(), "fit_power_law: length mismatch");
    detail::require(x.size() >= 3, "fit_power_law: need at least 3 records");
    const auto n = static_cast<double>(x.size());
    std::vector<double> lx(x.size()), ly(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        detail::require(x[i] > 0 && y[i] > 0 && std::isfinite(y[i]), "fit_power_law: values must be positive");
        lx[i] = std::log(x[i]);
        ly[i] = std::log(y[i]);
    }
    double mx = 0, my = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        mx += lx[i];
        my += ly[i];
    }
    mx /= n;
    my /= n;
    double sxx = 0, sxy = 0, syy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxx += (lx[i] - mx) * (lx[i] - mx);
        sxy += (lx[i] - mx) * (ly[i] - my);
        syy += (ly[i] - my) * (ly[i] - my);
    }
    detail::require(sxx > 0, "fit_power_law: parameters must not all coincide");
    FitResult f;
    f.exponent = sxy / sxx;
    f.log_intercept = my - f.exponent * mx;
    double sse = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double r = ly[i] - (f.log_intercept + f.exponent * lx[i]);
        sse += r * r;
        f.max_abs_residual = std::max(f.max_abs_residual, std::abs(r));
    }
    f.r_squared = syy > 0 ? std::clamp(1 - sse / syy, 0.0, 1.0) : 1.0;
    f.exponent_stderr = x.size() > 2 ? std::sqrt(sse / (n - 2) / sxx) : 0.0;
    return f;
}

inline FitResult fit_power_law(const std::vector<SweepRecord>& records) {
    std::vector<double> x, y;
    for (const auto& r : records) {
        x.push_back(r.parameter);
        y.push_back(r.value);
    }
    return fit_power_law(x, y);
}

/// Lower envelope and curvature diagnostics of a scan against its fit.
struct EnvelopeReport {
    /// sigma_min(h) >= epsilon h^p is claimed for the fitted p.
    double epsilon = 0;
    /// Allowed shortfall below the fitted line, in log units: 2x RMS residual.
    double envelope = 0;
    std::vector<std::size_t> below_envelope;
    /// Slopes between consecutive records, in record order.
    std::vector<double> local_slopes;
    /// Local slopes spread by more than 0.15: pre-asymptotic curvature.
    bool curvature_flag = false;
};

inline EnvelopeReport check_envelope(const std::vector<SweepRecord>& records, const FitResult& fit) {
    EnvelopeReport rep;
    double ss = 0;
    std::vector<double> res(records.size());
    for (std::size_t i = 0; i < records.size(); ++i) {
        res[i] = std::log(records[i].value) - (fit.log_intercept + fit.exponent * std::log(records[i].parameter));
        ss += res[i] * res[i];
    }
    rep.envelope = 2 * std::sqrt(ss / std::max<std::size_t>(records.size(), 1)) + 1e-12;
    rep.epsilon = std::exp(fit.log_intercept - rep.envelope);
    for (std::size_t i = 0; i < records.size(); ++i)
        if (res[i] < -rep.envelope) rep.below_envelope.push_back(i);
    for (std::size_t i = 1; i < records.size(); ++i)
        rep.local_slopes.push_back(std::log(records[i].value / records[i - 1].value) /
                                   std::log(records[i].parameter / records[i - 1].parameter));
    if (!rep.local_slopes.empty()) {
        const auto [lo, hi] = std::minmax_element(rep.local_slopes.begin(), rep.local_slopes.end());
        rep.curvature_flag = *hi - *lo > 0.15;
    }
    return rep;
}

struct ProductSigma {
    double sigma = INFINITY;
    double critical_lambda_sq = NAN;
    std::size_t fibers_solved = 0;
    std::size_t fibers_skipped = 0;
};

/// sigma_min of L_h on the product grid, fiber by fiber. `b2` is the damping
/// on the factor-2 lattice.
inline ProductSigma product_sigma_min(double h, const ProductGrid& grid, std::span<const double> b2,
                                      const SigmaOptions& opts = {}, std::size_t window = 128) {
    detail::require(h > 0, "product_sigma_min: h must be positive");
    const auto& lat1 = *grid.factor1_lattice();
    const auto& lat2 = grid.factor2_lattice();
    detail::require(b2.size() == lat2->size(), "product_sigma_min: damping size mismatch");

    double bmax = 0;
    for (double v : b2) {
        detail::require(v >= 0, "product_sigma_min: damping must be nonnegative");
        bmax = std::max(bmax, v);
    }
    std::vector<double> k2(lat2->size());
    for (std::size_t k = 0; k < k2.size(); ++k) k2[k] = lat2->wavenumber_squared(k);

    struct Fiber {
        double lambda_sq, gap, bound;
    };
    std::map<double, int> distinct;
    for (std::size_t n = 0; n < lat1.size(); ++n) distinct[lat1.wavenumber_squared(n)] = 0;
    std::vector<Fiber> fibers;
    for (const auto& [lsq, unused] : distinct) {
        double smin = INFINITY, gap = INFINITY;
        for (double kk : k2) {
            const double s = h * h * (kk + lsq) - 1;
            smin = std::min(smin, s);
            gap = std::min(gap, std::abs(s));
        }
        // Hermitian part S and damping part hB >= 0: sigma >= min s when S >= 0,
        // and sigma >= dist(0, spec S) - h max b always.
        const double bound = smin >= 0 ? smin : std::max(0.0, gap - h * bmax);
        fibers.push_back({lsq, gap, bound});
    }
    std::sort(fibers.begin(), fibers.end(), [](const Fiber& a, const Fiber& b) {
        return a.gap != b.gap ? a.gap < b.gap : a.lambda_sq < b.lambda_sq;
    });

    ProductSigma out;
    for (const auto& f : fibers) {
        if (f.bound >= out.sigma) {
            ++out.fibers_skipped;
            continue;
        }
        auto op = fiber_operator(h, f.lambda_sq, lat2, b2);
        SigmaResult r;
        if (bmax == 0) {
            r.sigma = f.gap;
        } else {
            WindowPreconditioner pre(op, window);
            r = min_singular_value(op, pre, opts);
        }
        ++out.fibers_solved;
        if (r.sigma < out.sigma) {
            out.sigma = r.sigma;
            out.critical_lambda_sq = f.lambda_sq;
        }
    }
    return out;
}

/// One record per h, ordered like config.h_values.
inline std::vector<SweepRecord> run_resolvent_scan(const ScanConfig& config) {
    config.validate();
    std::vector<SweepRecord> records(config.h_values.size());
    parallel_for(records.size(), config.workers, [&](std::size_t i) {
        const double h = config.h_values[i];
        const auto t0 = std::chrono::steady_clock::now();
        const int n = config.resolution(h);
        ProductGrid grid(TorusFactor::circle(config.circumference1), TorusFactor::circle(config.circumference2), {n},
                         {n});
        std::vector<double> b2(grid.factor2_lattice()->size(), 0.0);
        if (config.damping) b2 = evaluate_damping_fiber(*config.damping, *grid.factor2_lattice());
        ProductSigma ps;
        try {
            ps = product_sigma_min(h, grid, b2, config.sigma, config.preconditioner_window);
        } catch (const ConvergenceError& e) {
            throw ConvergenceError("resolvent scan at h = " + std::to_string(h) + ": " + e.what(), e.residual());
        }
        SweepRecord& r = records[i];
        r.parameter = h;
        r.value = ps.sigma;
        r.resolution = n;
        r.critical_lambda_sq = ps.critical_lambda_sq;
        r.fibers_solved = ps.fibers_solved;
        r.fibers_skipped = ps.fibers_skipped;
        r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    });
    return records;
}

/// The b = 0 value min over lattice modes of |h^2 |k|^2 - 1| on a lattice.
inline double undamped_sigma(double h, const Lattice& lattice) {
    double s = INFINITY;
    for (std::size_t k = 0; k < lattice.size(); ++k) s = std::min(s, std::abs(h * h * lattice.wavenumber_squared(k) - 1));
    return s;
}

}  // namespace tubewave
