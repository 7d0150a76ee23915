#pragma once

// Randomized invariant checks shared by the property tests and the acceptance run.

#include <tubewave/tubewave.hpp>

#include <algorithm>
#include <cmath>
#include <random>

namespace tubewave::props {

inline Field random_field(LatticePtr lat, std::mt19937_64& rng) {
    std::normal_distribution<double> g;
    Field f(lat);
    for (auto& x : f.values) x = {g(rng), g(rng)};
    return f;
}

inline std::vector<double> random_damping(std::size_t n, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(0, 2);
    std::vector<double> b(n);
    for (auto& x : b) x = u(rng);
    return b;
}

inline double inner_product_real(const Field& a, const Field& b) {
    double s = 0;
    for (std::size_t i = 0; i < a.size(); ++i) s += (a.values[i] * std::conj(b.values[i])).real();
    return s * a.lattice->cell_volume();
}

struct AprioriWorst {
    /// max of (lhs - rhs) / rhs over trials, for each estimate.
    double damping = -INFINITY;
    double gradient = -INFINITY;
};

/// h int b |phi|^2 <= ||phi|| ||L_h phi|| and
/// h^2 ||grad phi||^2 <= ||phi||^2 + ||phi|| ||L_h phi||.
inline AprioriWorst apriori(int trials, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> logh(std::log(1e-3), 0);
    const auto lat = ProductGrid::two_torus(16, 16).lattice();
    AprioriWorst w;
    for (int t = 0; t < trials; ++t) {
        const double h = std::exp(logh(rng));
        const SemiclassicalOperator op(h, lat, random_damping(lat->size(), rng));
        const Field phi = random_field(lat, rng);
        const Field f = apply_Lh(op, phi);
        const double np = l2_norm(phi), nf = l2_norm(f);
        double bphi = 0;
        for (std::size_t i = 0; i < phi.size(); ++i) bphi += op.b[i] * std::norm(phi.values[i]);
        const double lhs1 = h * bphi * lat->cell_volume(), rhs1 = np * nf;
        w.damping = std::max(w.damping, (lhs1 - rhs1) / rhs1);
        const double lhs2 = h * h * dirichlet_energy(phi), rhs2 = np * np + np * nf;
        w.gradient = std::max(w.gradient, (lhs2 - rhs2) / rhs2);
    }
    return w;
}

/// Worst relative mismatch of sum_n ||psi_hat_n||^2 against ||psi||^2 and of
/// the reconstruction.
inline double parseval(int trials, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    double worst = 0;
    for (int t = 0; t < trials; ++t) {
        const int n1 = 2 * (4 + t % 13), n2 = 2 * (3 + (t * 7) % 17);
        const auto g = ProductGrid::two_torus(n1, n2, 2 + t % 5, 7);
        const Field psi = random_field(g.lattice(), rng);
        const auto d = fiber_decompose(psi, g);
        double s = 0;
        for (const auto& c : d.coefficients) s += std::pow(l2_norm(c), 2);
        const double n = std::pow(l2_norm(psi), 2);
        worst = std::max(worst, std::abs(s - n) / n);
        const Field back = fiber_reconstruct(d, g);
        double diff = 0;
        for (std::size_t i = 0; i < psi.size(); ++i) diff += std::norm(back.values[i] - psi.values[i]);
        worst = std::max(worst, std::sqrt(diff * g.cell_volume() / n));
    }
    return worst;
}

/// max |E(t)/E(0) - 1| for b = 0 over `steps` steps.
inline double undamped_drift(long steps, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    const auto lat = ProductGrid::two_torus(32, 32).lattice();
    WaveState s(lat);
    // smooth random data: a few low modes
    std::normal_distribution<double> g;
    for (int k = 0; k < 12; ++k) {
        const double a = g(rng), c = g(rng);
        const int m1 = static_cast<int>(rng() % 9), m2 = static_cast<int>(rng() % 9);
        for (std::size_t i = 0; i < lat->size(); ++i) {
            const double ph = m1 * lat->coordinate(i, 0) + m2 * lat->coordinate(i, 1);
            s.u.values[i] += a * std::cos(ph);
            s.v.values[i] += c * std::sin(ph);
        }
    }
    WaveEvolver ev(Field(lat), 0.01);
    const auto tr = evolve(s, ev, steps, 1);
    double worst = 0;
    for (double e : tr.energies) worst = std::max(worst, std::abs(e / tr.energies.front() - 1));
    return worst;
}

/// Fitted order of the dissipation-identity violation under dt halving.
inline double dissipation_order_value() {
    const auto g = ProductGrid::two_torus(32, 32);
    DampingProfile p;
    p.c_lower = p.c_upper = 0.5;
    p.cutoff_radius = std::numbers::pi;
    const Field b = evaluate_damping(p, g);
    WaveState s = trapped_initial_data(g.lattice(), 15);
    s.v = Field::sample(g.lattice(), [](std::span<const double> x) { return cdouble(std::cos(x[1])); });
    return dissipation_order(s, b, 0.04, 2.0, 3).order;
}

/// Worst |fitted - true| over random exact power laws, exponent and intercept.
inline double power_law_exactness(int trials, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> e(-3, 3), c(-5, 5);
    double worst = 0;
    for (int t = 0; t < trials; ++t) {
        const double p = e(rng), a = c(rng);
        std::vector<double> x, y;
        for (int i = 0; i < 3 + t % 8; ++i) {
            x.push_back(std::pow(0.5, i) * (1 + 0.1 * (t % 3)));
            y.push_back(std::exp(a) * std::pow(x.back(), p));
        }
        const auto f = fit_power_law(x, y);
        worst = std::max({worst, std::abs(f.exponent - p), std::abs(f.log_intercept - a)});
    }
    return worst;
}

}  // namespace tubewave::props
