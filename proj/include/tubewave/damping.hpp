#pragma once

// Damping coefficients b that vanish like d(., Sigma)^{2 gamma} near the
// trapped set Sigma = M1 x {q0} and sit at a constant level further out.

#include <cmath>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "geometry.hpp"

namespace tubewave {

struct DampingProfile {
    double gamma = 1;
    double c_lower = 1;
    double c_upper = 1;
    std::vector<double> sigma_center{0.0};
    double cutoff_radius = 1;
    /// Value of b beyond the cutoff. NaN selects the continuous match
    /// c_lower * cutoff_radius^{2 gamma}.
    double outside_level = std::numeric_limits<double>::quiet_NaN();

    double resolved_outside_level() const {
        return std::isnan(outside_level) ? c_lower * std::pow(cutoff_radius, 2 * gamma) : outside_level;
    }

    void validate() const {
        detail::require(gamma > 0, "DampingProfile: gamma must be positive");
        detail::require(c_lower > 0 && c_upper >= c_lower, "DampingProfile: need 0 < c_lower <= c_upper");
        detail::require(cutoff_radius > 0, "DampingProfile: cutoff_radius must be positive");
        detail::require(resolved_outside_level() > 0, "DampingProfile: outside_level must be positive");
    }

    /// Canonical radial profile b(d).
    double at_distance(double d) const {
        return d < cutoff_radius ? c_lower * std::pow(d, 2 * gamma) : resolved_outside_level();
    }
};

inline nlohmann::json to_json(const DampingProfile& p) {
    return {{"gamma", p.gamma},
            {"c_lower", p.c_lower},
            {"c_upper", p.c_upper},
            {"sigma_center", p.sigma_center},
            {"cutoff_radius", p.cutoff_radius},
            {"outside_level", p.resolved_outside_level()}};
}

inline DampingProfile damping_profile_from_json(const nlohmann::json& j) {
    DampingProfile p;
    try {
        p.gamma = j.at("gamma").get<double>();
        p.c_lower = j.value("c_lower", 1.0);
        p.c_upper = j.value("c_upper", p.c_lower);
        p.sigma_center = j.value("sigma_center", std::vector<double>{0.0});
        p.cutoff_radius = j.at("cutoff_radius").get<double>();
        if (j.contains("outside_level")) p.outside_level = j.at("outside_level").get<double>();
    } catch (const nlohmann::json::exception& e) {
        throw InputError(std::string("damping profile: ") + e.what());
    }
    p.validate();
    return p;
}

namespace detail {
inline void check_profile_on(const DampingProfile& profile, const TorusFactor& factor) {
    profile.validate();
    require(profile.sigma_center.size() == factor.dim(), "evaluate_damping: center dimension mismatch");
    require(profile.cutoff_radius <= factor.diameter(),
            "evaluate_damping: cutoff_radius exceeds the factor-2 diameter");
}
}  // namespace detail

/// b on the factor-2 lattice alone (b does not depend on the factor-1 point).
inline std::vector<double> evaluate_damping_fiber(const DampingProfile& profile, const Lattice& lattice2) {
    const TorusFactor factor(lattice2.circumferences());
    detail::check_profile_on(profile, factor);
    std::vector<double> b(lattice2.size());
    std::vector<double> q(factor.dim());
    for (std::size_t j = 0; j < b.size(); ++j) {
        for (std::size_t a = 0; a < q.size(); ++a) q[a] = lattice2.coordinate(j, a);
        b[j] = profile.at_distance(torus_distance(q, profile.sigma_center, factor));
    }
    return b;
}

/// Real-valued damping field over the full product grid.
inline Field evaluate_damping(const DampingProfile& profile, const ProductGrid& grid) {
    const auto fiber = evaluate_damping_fiber(profile, *grid.factor2_lattice());
    Field b(grid.lattice());
    for (std::size_t i = 0; i < b.size(); ++i) b.values[i] = fiber[grid.factor2_node(i)];
    return b;
}

struct DampingBoundsReport {
    /// max over nodes inside the cutoff of b / (c_upper d^{2g}); <= 1 when the upper bound holds.
    double upper_factor = 0;
    /// max of (c_lower d^{2g}) / b; <= 1 when the lower bound holds.
    double lower_factor = 0;
    /// max(upper_factor, lower_factor) - 1, floored at 0.
    double max_violation = 0;
    std::size_t violation_node = 0;
    /// max |b / (c_lower d^{2g}) - 1| over nodes with d > 0: distance from the canonical profile.
    double max_relative_deviation = 0;
    std::size_t deviation_node = 0;
    std::size_t nodes_checked = 0;
};

/// Two-sided check c_lower d^{2g} <= b <= c_upper d^{2g} inside the cutoff.
/// `b` lives on the product grid; distances use its factor-2 coordinates.
inline DampingBoundsReport verify_bounds(const Field& b, const DampingProfile& profile,
                                         const ProductGrid& grid) {
    detail::require_same_lattice(*b.lattice, *grid.lattice(), "verify_bounds");
    detail::check_profile_on(profile, grid.factor2());

    std::vector<std::size_t> negative;
    for (std::size_t i = 0; i < b.size(); ++i)
        if (b.values[i].real() < 0 || b.values[i].imag() != 0) negative.push_back(i);
    if (!negative.empty()) {
        std::ostringstream msg;
        msg << "verify_bounds: b must be real and nonnegative; offending nodes:";
        for (std::size_t k = 0; k < negative.size() && k < 20; ++k) msg << ' ' << negative[k];
        if (negative.size() > 20) msg << " ... (" << negative.size() << " total)";
        throw ValidationError(msg.str());
    }

    DampingBoundsReport r;
    double worst = 0;
    for (std::size_t i = 0; i < b.size(); ++i) {
        const double d = torus_distance(grid.factor2_point(i), profile.sigma_center, grid.factor2());
        if (d >= profile.cutoff_radius) continue;
        ++r.nodes_checked;
        const double value = b.values[i].real();
        const double shape = std::pow(d, 2 * profile.gamma);
        const double up = shape > 0 ? value / (profile.c_upper * shape) : (value > 0 ? INFINITY : 0.0);
        const double lo = value > 0 ? profile.c_lower * shape / value : (shape > 0 ? INFINITY : 0.0);
        r.upper_factor = std::max(r.upper_factor, up);
        r.lower_factor = std::max(r.lower_factor, lo);
        const double v = std::max(up, lo) - 1;
        if (v > worst) {
            worst = v;
            r.violation_node = i;
        }
        if (shape > 0) {
            const double dev = std::abs(value / (profile.c_lower * shape) - 1);
            if (dev > r.max_relative_deviation) {
                r.max_relative_deviation = dev;
                r.deviation_node = i;
            }
        }
    }
    r.max_violation = worst;
    return r;
}

}  // namespace tubewave
