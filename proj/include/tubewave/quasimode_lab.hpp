#pragma once

// Concentration estimates near the trapped set.
//
//  * Helmholtz best constants on a circle: the largest C with
//      ||u||^2_inner <= C^2 (||u||^2_annulus + w^2 ||(-Lap - tau) u||^2)
//    as a real symmetric generalized eigenproblem.
//  * Product quasimode estimate for psi with (h^2 Lap + 1) psi = F.
//  * Masses of (x1 + i x2)^n on S^d near the great circle x1^2 + x2^2 = 1.

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>
#include <vector>

#include <Eigen/Dense>
#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "fft.hpp"
#include "geometry.hpp"
#include "operators.hpp"

namespace tubewave {

struct ConstantEstimate {
    double tau = 0;
    /// Quadratic-form constant; infinite when the denominator form is singular.
    double best_constant = 0;
    /// Norms of the maximizer normalized to unit L2 norm on the whole circle.
    double inner_norm = 0, annulus_norm = 0, forcing_norm = 0;
    /// The sum-of-norms constant lies in [best_constant / sqrt 2, best_constant].
    double sum_of_norms_lower = 0, sum_of_norms_upper = 0;
    double weight = 1;
    int resolution = 0;
    /// Closest discrete mode |k|^2 to tau; meaningful when best_constant is infinite.
    double resonant_wavenumber_sq = NAN;
};

struct HelmholtzSetup {
    LatticePtr lattice;
    TubeRegion inner, annulus;
    double weight = 1;
};

namespace detail {

inline HelmholtzSetup helmholtz_setup(double tau, double inner_radius, double outer_radius, bool weighted,
                                      int resolution) {
    require(inner_radius > 0 && inner_radius < outer_radius, "helmholtz_best_constant: need 0 < inner < outer");
    require(std::isfinite(tau), "helmholtz_best_constant: tau must be finite");
    const double length = 2 * outer_radius;
    auto lat = std::make_shared<const Lattice>(std::vector<double>{length}, std::vector<int>{resolution});
    if (tau > 0) {
        const double wavelength = 2 * std::numbers::pi / std::sqrt(tau);
        require(wavelength >= 4 * lat->spacing(0),
                "helmholtz_best_constant: resolution below 4 points per wavelength for this tau");
    }
    const std::vector<double> q0{0.0};
    HelmholtzSetup s;
    s.lattice = lat;
    s.inner = tube_mask(lat, q0, inner_radius);
    s.annulus = s.inner.complement();
    s.weight = weighted ? 1 / (1 + std::sqrt(std::abs(tau))) : 1.0;
    return s;
}

}  // namespace detail

/// Q(u) = ||u||^2_inner / (||u||^2_annulus + w^2 ||(-Lap - tau) u||^2) on the
/// circle of circumference 2 outer_radius, inner = {|q| < inner_radius}.
inline double helmholtz_quotient(const Field& u, double tau, double inner_radius, double outer_radius, bool weighted) {
    detail::require(u.lattice->rank() == 1, "helmholtz_quotient: field must live on a circle");
    const auto s = detail::helmholtz_setup(tau, inner_radius, outer_radius, weighted, u.lattice->resolution()[0]);
    detail::require_same_lattice(*u.lattice, *s.lattice, "helmholtz_quotient");
    const double in = region_l2_norm(u, s.inner);
    const double ann = region_l2_norm(u, s.annulus);
    const double f = l2_norm(apply_helmholtz(HelmholtzOperator(tau, s.lattice), u));
    const double den = ann * ann + s.weight * s.weight * f * f;
    if (den == 0) return in == 0 ? 0.0 : std::numeric_limits<double>::infinity();
    return in * in / den;
}

inline ConstantEstimate helmholtz_best_constant(double tau, double inner_radius = 1, double outer_radius = 2,
                                                bool weighted = true, int resolution = 256) {
    const auto s = detail::helmholtz_setup(tau, inner_radius, outer_radius, weighted, resolution);
    const auto& lat = *s.lattice;
    const auto n = static_cast<Eigen::Index>(lat.size());
    const double dx = lat.cell_volume();

    const auto op = HelmholtzOperator(tau, s.lattice).map();
    Eigen::MatrixXd H(n, n);
    std::vector<cdouble> e(lat.size()), col(lat.size());
    for (Eigen::Index j = 0; j < n; ++j) {
        std::fill(e.begin(), e.end(), cdouble{});
        e[static_cast<std::size_t>(j)] = 1;
        op.apply(e, col);
        for (Eigen::Index i = 0; i < n; ++i) H(i, j) = col[static_cast<std::size_t>(i)].real();
    }
    Eigen::MatrixXd A = Eigen::MatrixXd::Zero(n, n);
    Eigen::MatrixXd B = (s.weight * s.weight * dx) * (H.transpose() * H);
    for (Eigen::Index i = 0; i < n; ++i) {
        A(i, i) = s.inner.mask[static_cast<std::size_t>(i)] ? dx : 0.0;
        B(i, i) += s.annulus.mask[static_cast<std::size_t>(i)] ? dx : 0.0;
    }

    ConstantEstimate out;
    out.tau = tau;
    out.weight = s.weight;
    out.resolution = resolution;
    double gap = INFINITY;
    for (std::size_t k = 0; k < lat.size(); ++k) {
        const double d = std::abs(lat.wavenumber_squared(k) - tau);
        if (d < gap) {
            gap = d;
            out.resonant_wavenumber_sq = lat.wavenumber_squared(k);
        }
    }

    Eigen::LLT<Eigen::MatrixXd> chol(B);
    const double floor = 1e-13 * B.diagonal().maxCoeff();
    const Eigen::MatrixXd L = chol.matrixL();
    if (chol.info() != Eigen::Success || L.diagonal().minCoeff() <= std::sqrt(floor)) {
        out.best_constant = std::numeric_limits<double>::infinity();
        return out;
    }
    Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> ges(A, B, Eigen::ComputeEigenvectors | Eigen::Ax_lBx);
    if (ges.info() != Eigen::Success) throw ConvergenceError("helmholtz_best_constant: eigensolver failed", tau);
    const double lmax = std::max(0.0, ges.eigenvalues()(n - 1));
    out.best_constant = std::sqrt(lmax);
    out.sum_of_norms_upper = out.best_constant;
    out.sum_of_norms_lower = out.best_constant / std::numbers::sqrt2;

    Field u(s.lattice);
    const Eigen::VectorXd v = ges.eigenvectors().col(n - 1);
    for (Eigen::Index i = 0; i < n; ++i) u.values[static_cast<std::size_t>(i)] = v(i);
    const double norm = l2_norm(u);
    for (auto& x : u.values) x /= norm;
    out.inner_norm = region_l2_norm(u, s.inner);
    out.annulus_norm = region_l2_norm(u, s.annulus);
    out.forcing_norm = l2_norm(apply_helmholtz(HelmholtzOperator(tau, s.lattice), u));
    return out;
}

struct QuasimodeReport {
    double inner_norm = 0;
    double annulus_norm = 0;
    /// h^{2 delta - 2} ||F||_{N_{2 beta}}.
    double forcing_term = 0;
    /// inner / (annulus + forcing_term).
    double ratio = 0;
    /// ||F - (h^2 Lap + 1) psi|| relative to the sizes involved.
    double consistency_residual = 0;
};

namespace detail {

inline double ratio_of(double lhs, double rhs) {
    if (rhs > 0) return lhs / rhs;
    return lhs == 0 ? 0.0 : std::numeric_limits<double>::infinity();
}

inline std::vector<double> default_center(const ProductGrid& grid) { return std::vector<double>(grid.factor2().dim(), 0.0); }

}  // namespace detail

/// Terms of the tube estimate for psi on a product grid. Tubes are centered at
/// factor-2 point q0 with radius beta = h^delta and 2 beta.
inline QuasimodeReport product_quasimode_check(const ProductGrid& grid, const Field& psi, const Field& F, double h,
                                               double delta, std::vector<double> q0 = {}) {
    detail::require(h > 0, "product_quasimode_check: h must be positive");
    detail::require(delta > 0 && delta < 1, "product_quasimode_check: delta must lie in (0, 1)");
    detail::require_same_lattice(*psi.lattice, *grid.lattice(), "product_quasimode_check");
    detail::require_same_lattice(*F.lattice, *grid.lattice(), "product_quasimode_check");
    if (q0.empty()) q0 = detail::default_center(grid);

    const Field lap = apply_laplacian(SpectralLaplacian(grid.lattice()), psi);
    double diff = 0, scale_lap = 0, scale_psi = 0, scale_f = 0;
    for (std::size_t i = 0; i < psi.size(); ++i) {
        const cdouble recomputed = h * h * lap.values[i] + psi.values[i];
        diff += std::norm(F.values[i] - recomputed);
        scale_lap += std::norm(h * h * lap.values[i]);
        scale_psi += std::norm(psi.values[i]);
        scale_f += std::norm(F.values[i]);
    }
    const double scale = std::sqrt(scale_lap) + std::sqrt(scale_psi) + std::sqrt(scale_f);
    QuasimodeReport r;
    r.consistency_residual = scale > 0 ? std::sqrt(diff) / scale : 0.0;
    if (r.consistency_residual > 1e-8)
        throw InputError("product_quasimode_check: F differs from (h^2 Lap + 1) psi, relative residual " +
                         std::to_string(r.consistency_residual));

    const double beta = std::pow(h, delta);
    const auto inner = tube_mask(grid, q0, beta);
    const auto outer = tube_mask(grid, q0, 2 * beta);
    r.inner_norm = region_l2_norm(psi, inner);
    r.annulus_norm = region_l2_norm(psi, outer.minus(inner));
    r.forcing_term = std::pow(h, 2 * delta - 2) * region_l2_norm(F, outer);
    r.ratio = detail::ratio_of(r.inner_norm, r.annulus_norm + r.forcing_term);
    return r;
}

/// Convenience overload computing F = (h^2 Lap + 1) psi.
inline QuasimodeReport product_quasimode_check(const ProductGrid& grid, const Field& psi, double h, double delta,
                                               std::vector<double> q0 = {}) {
    const Field lap = apply_laplacian(SpectralLaplacian(grid.lattice()), psi);
    Field F(grid.lattice());
    for (std::size_t i = 0; i < F.size(); ++i) F.values[i] = h * h * lap.values[i] + psi.values[i];
    return product_quasimode_check(grid, psi, F, h, delta, std::move(q0));
}

/// Same three terms assembled fiber by fiber: each factor-1 mode n carries a
/// Helmholtz problem with tau_n = h^{-2} - lambda_n^2 and F_n = -h^2 (-Lap_2 - tau_n) psi_n.
inline QuasimodeReport fiberwise_quasimode_terms(const ProductGrid& grid, const Field& psi, double h, double delta,
                                                 std::vector<double> q0 = {}) {
    if (q0.empty()) q0 = detail::default_center(grid);
    const auto d = fiber_decompose(psi, grid);
    const double beta = std::pow(h, delta);
    const auto inner = tube_mask(d.factor2, q0, beta);
    const auto outer = tube_mask(d.factor2, q0, 2 * beta);
    const auto ring = outer.minus(inner);
    double in2 = 0, ann2 = 0, f2 = 0;
    for (std::size_t n = 0; n < d.coefficients.size(); ++n) {
        const auto& c = d.coefficients[n];
        const double a = region_l2_norm(c, inner), b = region_l2_norm(c, ring);
        in2 += a * a;
        ann2 += b * b;
        const Field hf = apply_helmholtz(HelmholtzOperator(mode_parameter(h, d.eigenvalues[n]), d.factor2), c);
        const double f = h * h * region_l2_norm(hf, outer);
        f2 += f * f;
    }
    QuasimodeReport r;
    r.inner_norm = std::sqrt(in2);
    r.annulus_norm = std::sqrt(ann2);
    r.forcing_term = std::pow(h, 2 * delta - 2) * std::sqrt(f2);
    r.ratio = detail::ratio_of(r.inner_norm, r.annulus_norm + r.forcing_term);
    return r;
}

struct QuasimodeSuiteConfig {
    int resolution = 256;
    double h = 1.0 / 64;
    double delta = 0.25;
    int max_modes = 20;
    int max_frequency = 96;
    int trials = 1000;
    std::uint64_t seed = 20240601;
};

struct QuasimodeSuiteResult {
    double max_ratio = 0;
    int worst_trial = -1;
    std::vector<double> ratios;
};

/// psi = sum of up to max_modes random Fourier modes with random complex
/// amplitudes on the (2 pi)^2 torus; reports the running maximum ratio.
inline QuasimodeSuiteResult run_quasimode_suite(const QuasimodeSuiteConfig& cfg) {
    detail::require(cfg.trials > 0 && cfg.max_modes > 0, "run_quasimode_suite: need positive trials and modes");
    detail::require(2 * cfg.max_frequency < cfg.resolution, "run_quasimode_suite: frequencies exceed the grid");
    const auto grid = ProductGrid::two_torus(cfg.resolution, cfg.resolution);
    const auto& lat = grid.lattice();
    const int n = cfg.resolution;
    std::mt19937_64 rng(cfg.seed);
    std::uniform_int_distribution<int> count(1, cfg.max_modes), freq(-cfg.max_frequency, cfg.max_frequency);
    std::normal_distribution<double> amp;

    QuasimodeSuiteResult out;
    std::vector<cdouble> spectrum(lat->size());
    for (int t = 0; t < cfg.trials; ++t) {
        std::fill(spectrum.begin(), spectrum.end(), cdouble{});
        const int m = count(rng);
        for (int j = 0; j < m; ++j) {
            const int k1 = freq(rng), k2 = freq(rng);
            const auto slot = static_cast<std::size_t>(((k1 % n) + n) % n) * static_cast<std::size_t>(n) +
                              static_cast<std::size_t>(((k2 % n) + n) % n);
            const double re = amp(rng), im = amp(rng);
            spectrum[slot] += cdouble(re, im);
        }
        Field psi(lat);
        fft::inverse(*lat, spectrum, psi.values);
        const auto r = product_quasimode_check(grid, psi, cfg.h, cfg.delta);
        out.ratios.push_back(r.ratio);
        if (r.ratio > out.max_ratio) {
            out.max_ratio = r.ratio;
            out.worst_trial = t;
        }
    }
    return out;
}

struct SphereTubeQuery {
    int n = 0;
    int d = 2;
    double delta = 0.25;

    double lambda() const { return static_cast<double>(n) * (n + d - 1); }
    /// h_n = lambda_n^{-1/2}; h_0 is set to 1.
    double h() const { return n == 0 ? 1.0 : 1 / std::sqrt(lambda()); }

    void validate() const {
        detail::require(n >= 0, "SphereTubeQuery: n must be nonnegative");
        detail::require(d >= 2, "SphereTubeQuery: d must be at least 2");
        detail::require(delta > 0 && delta < 1, "SphereTubeQuery: delta must lie in (0, 1)");
    }
};

struct SphereTubeMass {
    double inner_mass = 0;
    double annulus_mass = 0;
    double total_mass = 0;
    double radius = 0;
};

namespace detail {

/// |S^k| = 2 pi^{(k+1)/2} / Gamma((k+1)/2).
inline long double sphere_area(int k) {
    const long double a = 0.5L * (k + 1);
    return 2 * std::exp(a * std::log(std::numbers::pi_v<long double>) - std::lgamma(a));
}

/// integral over phi in [a, b] within [0, pi/2] of cos^{2n+1} phi sin^{d-2} phi.
inline long double colatitude_integral(int n, int d, long double a, long double b) {
    const long double half_pi = std::numbers::pi_v<long double> / 2;
    a = std::clamp(a, 0.0L, half_pi);
    b = std::clamp(b, 0.0L, half_pi);
    if (b <= a) return 0;
    auto f = [n, d](long double phi) -> long double {
        const long double c = std::cos(phi);
        if (c <= 0) return 0;
        long double lg = (2.0L * n + 1) * std::log(c);
        if (d > 2) {
            const long double s = std::sin(phi);
            if (s <= 0) return 0;
            lg += (d - 2) * std::log(s);
        }
        return std::exp(lg);
    };
    // Pieces no wider than the concentration scale keep the log-variation of
    // the integrand per piece bounded.
    const long double width = 1 / std::sqrt(2.0L * n + 2);
    const auto pieces = static_cast<int>(std::ceil((b - a) / width));
    std::vector<long double> cuts;
    for (int i = 0; i <= pieces; ++i) cuts.push_back(a + (b - a) * i / pieces);
    long double total = 0, err_total = 0;
    for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
        long double err = 0;
        const long double v =
            boost::math::quadrature::gauss_kronrod<long double, 61>::integrate(f, cuts[i], cuts[i + 1], 15, 1e-13L, &err);
        total += v;
        err_total += err;
    }
    if (total > 0 && err_total > 1e-10L * total)
        throw ConvergenceError("sphere_tube_mass: quadrature missed 1e-10 relative accuracy",
                               static_cast<double>(err_total / total));
    return total;
}

}  // namespace detail

/// Masses of |(x1 + i x2)^n|^2 on S^d in the tube of the given radius around
/// the great circle, in the ring between radius and 2 radius, and in total.
inline SphereTubeMass sphere_tube_mass(int n, int d, double radius) {
    SphereTubeQuery{n, d, 0.5}.validate();
    detail::require(radius > 0, "sphere_tube_mass: radius must be positive");
    const long double scale = 2 * std::numbers::pi_v<long double> * detail::sphere_area(d - 2);
    SphereTubeMass m;
    m.radius = radius;
    m.inner_mass = static_cast<double>(scale * detail::colatitude_integral(n, d, 0, radius));
    m.annulus_mass = static_cast<double>(scale * detail::colatitude_integral(n, d, radius, 2.0L * radius));
    // Closed form: (1/2) B(n + 1, (d - 1)/2).
    const long double a = n + 1.0L, b = 0.5L * (d - 1);
    const long double half_beta = 0.5L * std::exp(std::lgamma(a) + std::lgamma(b) - std::lgamma(a + b));
    m.total_mass = static_cast<double>(scale * half_beta);
    return m;
}

/// Tube of radius h_n^delta.
inline SphereTubeMass sphere_tube_mass(const SphereTubeQuery& q) {
    q.validate();
    return sphere_tube_mass(q.n, q.d, std::pow(q.h(), q.delta));
}

struct CounterexamplePoint {
    int n = 0;
    double h = 0;
    double inner_mass = 0;
    double annulus_mass = 0;
    /// sqrt(inner / annulus): the estimate's lhs / rhs when F = 0.
    double ratio = 0;
};

inline std::vector<CounterexamplePoint> counterexample_ratio(int d, double delta, const std::vector<int>& n_list) {
    for (std::size_t i = 1; i < n_list.size(); ++i)
        detail::require(n_list[i] > n_list[i - 1], "counterexample_ratio: n_list must be increasing");
    std::vector<CounterexamplePoint> out;
    for (int n : n_list) {
        const SphereTubeQuery q{n, d, delta};
        const auto m = sphere_tube_mass(q);
        out.push_back({n, q.h(), m.inner_mass, m.annulus_mass, detail::ratio_of(std::sqrt(m.inner_mass), std::sqrt(m.annulus_mass))});
    }
    return out;
}

}  // namespace tubewave
