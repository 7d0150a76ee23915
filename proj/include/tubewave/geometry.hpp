#pragma once

// Flat product tori M1 x M2, uniform tensor lattices, tube regions around
// the trapped set M1 x {q0}, and region-restricted L2 norms.

#include <cmath>
#include <complex>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "errors.hpp"

namespace tubewave {

using cdouble = std::complex<double>;

/// A flat torus R^dim / (L_1 Z x ... x L_dim Z).
struct TorusFactor {
    std::vector<double> circumferences;

    TorusFactor() = default;
    explicit TorusFactor(std::vector<double> lengths) : circumferences(std::move(lengths)) {
        detail::require(!circumferences.empty(), "TorusFactor: dim must be >= 1");
        for (double l : circumferences)
            detail::require(l > 0 && std::isfinite(l), "TorusFactor: circumferences must be positive");
    }

    /// Circle of the given circumference (2*pi by default).
    static TorusFactor circle(double circumference = 2 * std::numbers::pi) {
        return TorusFactor({circumference});
    }

    std::size_t dim() const { return circumferences.size(); }

    double volume() const {
        double v = 1;
        for (double l : circumferences) v *= l;
        return v;
    }

    /// Largest geodesic distance between two points.
    double diameter() const {
        double s = 0;
        for (double l : circumferences) s += 0.25 * l * l;
        return std::sqrt(s);
    }

    bool operator==(const TorusFactor&) const = default;
};

/// Geodesic distance on a flat torus: the minimum over lattice wrappings of
/// the Euclidean distance. On a rectangular lattice the minimum separates by
/// coordinate.
inline double torus_distance(std::span<const double> q, std::span<const double> q0,
                             const TorusFactor& factor) {
    if (q.size() != factor.dim() || q0.size() != factor.dim())
        throw InputError("torus_distance: dimension mismatch");
    double s = 0;
    for (std::size_t i = 0; i < q.size(); ++i) {
        const double l = factor.circumferences[i];
        double d = std::fmod(std::abs(q[i] - q0[i]), l);
        d = std::min(d, l - d);
        s += d * d;
    }
    return std::sqrt(s);
}

/// Uniform periodic tensor lattice. Nodes are numbered row-major (last axis
/// fastest), which is the layout FFTW expects.
class Lattice {
public:
    Lattice(std::vector<double> circumferences, std::vector<int> resolution)
        : lengths_(std::move(circumferences)), resolution_(std::move(resolution)) {
        detail::require(!lengths_.empty() && lengths_.size() == resolution_.size(),
                        "Lattice: one resolution per coordinate required");
        size_ = 1;
        cell_volume_ = 1;
        for (std::size_t a = 0; a < lengths_.size(); ++a) {
            detail::require(lengths_[a] > 0, "Lattice: circumferences must be positive");
            detail::require(resolution_[a] > 0 && resolution_[a] % 2 == 0,
                            "Lattice: resolution must be a positive even integer");
            size_ *= static_cast<std::size_t>(resolution_[a]);
            cell_volume_ *= lengths_[a] / resolution_[a];
        }
        strides_.assign(lengths_.size(), 1);
        for (std::size_t a = lengths_.size() - 1; a > 0; --a)
            strides_[a - 1] = strides_[a] * static_cast<std::size_t>(resolution_[a]);
    }

    std::size_t rank() const { return lengths_.size(); }
    std::size_t size() const { return size_; }
    double cell_volume() const { return cell_volume_; }
    double volume() const { return cell_volume_ * static_cast<double>(size_); }
    const std::vector<double>& circumferences() const { return lengths_; }
    const std::vector<int>& resolution() const { return resolution_; }

    double spacing(std::size_t axis) const { return lengths_[axis] / resolution_[axis]; }

    std::size_t index_along(std::size_t node, std::size_t axis) const {
        return (node / strides_[axis]) % static_cast<std::size_t>(resolution_[axis]);
    }

    double coordinate(std::size_t node, std::size_t axis) const {
        return static_cast<double>(index_along(node, axis)) * spacing(axis);
    }

    /// Signed integer frequency of FFT slot j along an axis (numpy fftfreq order).
    int frequency(std::size_t j, std::size_t axis) const {
        const int n = resolution_[axis];
        const int s = static_cast<int>(j);
        return s < n / 2 ? s : s - n;
    }

    /// Angular wavenumber 2*pi*m/L of FFT slot j along an axis.
    double wavenumber(std::size_t j, std::size_t axis) const {
        return 2 * std::numbers::pi * frequency(j, axis) / lengths_[axis];
    }

    /// |k|^2 of the Fourier mode stored at flat index `mode`.
    double wavenumber_squared(std::size_t mode) const {
        double s = 0;
        for (std::size_t a = 0; a < rank(); ++a) {
            const double k = wavenumber(index_along(mode, a), a);
            s += k * k;
        }
        return s;
    }

    /// Largest representable |k| along the coarsest axis.
    double max_resolved_wavenumber() const {
        double kmax = INFINITY;
        for (std::size_t a = 0; a < rank(); ++a)
            kmax = std::min(kmax, std::numbers::pi * resolution_[a] / lengths_[a]);
        return kmax;
    }

    bool operator==(const Lattice& other) const {
        return lengths_ == other.lengths_ && resolution_ == other.resolution_;
    }

private:
    std::vector<double> lengths_;
    std::vector<int> resolution_;
    std::vector<std::size_t> strides_;
    std::size_t size_ = 0;
    double cell_volume_ = 0;
};

using LatticePtr = std::shared_ptr<const Lattice>;

/// Discretization of M1 x M2. Factor-1 axes come first, so node = n1 * N2 + n2.
class ProductGrid {
public:
    ProductGrid(TorusFactor factor1, TorusFactor factor2, std::vector<int> resolution1,
                std::vector<int> resolution2)
        : factor1_(std::move(factor1)), factor2_(std::move(factor2)) {
        detail::require(resolution1.size() == factor1_.dim() && resolution2.size() == factor2_.dim(),
                        "ProductGrid: resolution count must match factor dims");
        lattice1_ = std::make_shared<const Lattice>(factor1_.circumferences, resolution1);
        lattice2_ = std::make_shared<const Lattice>(factor2_.circumferences, resolution2);
        std::vector<double> lengths = factor1_.circumferences;
        lengths.insert(lengths.end(), factor2_.circumferences.begin(), factor2_.circumferences.end());
        std::vector<int> res = resolution1;
        res.insert(res.end(), resolution2.begin(), resolution2.end());
        lattice_ = std::make_shared<const Lattice>(std::move(lengths), std::move(res));
    }

    /// The (L1 x L2) 2-torus with n1 x n2 nodes.
    static ProductGrid two_torus(int n1, int n2, double l1 = 2 * std::numbers::pi,
                                 double l2 = 2 * std::numbers::pi) {
        return ProductGrid(TorusFactor::circle(l1), TorusFactor::circle(l2), {n1}, {n2});
    }

    const TorusFactor& factor1() const { return factor1_; }
    const TorusFactor& factor2() const { return factor2_; }
    const LatticePtr& lattice() const { return lattice_; }
    const LatticePtr& factor1_lattice() const { return lattice1_; }
    const LatticePtr& factor2_lattice() const { return lattice2_; }

    std::size_t size() const { return lattice_->size(); }
    double cell_volume() const { return lattice_->cell_volume(); }

    std::size_t factor1_node(std::size_t node) const { return node / lattice2_->size(); }
    std::size_t factor2_node(std::size_t node) const { return node % lattice2_->size(); }

    std::vector<double> factor2_point(std::size_t node) const {
        const std::size_t n2 = factor2_node(node);
        std::vector<double> q(factor2_.dim());
        for (std::size_t a = 0; a < q.size(); ++a) q[a] = lattice2_->coordinate(n2, a);
        return q;
    }

    bool operator==(const ProductGrid& other) const {
        return factor1_ == other.factor1_ && factor2_ == other.factor2_ &&
               *lattice_ == *other.lattice_;
    }

private:
    TorusFactor factor1_, factor2_;
    LatticePtr lattice1_, lattice2_, lattice_;
};

/// Complex scalar per lattice node.
struct Field {
    LatticePtr lattice;
    std::vector<cdouble> values;

    Field() = default;
    explicit Field(LatticePtr lat) : lattice(std::move(lat)), values(lattice->size()) {}
    Field(LatticePtr lat, std::vector<cdouble> v) : lattice(std::move(lat)), values(std::move(v)) {
        detail::require(values.size() == lattice->size(), "Field: value count must equal node count");
    }

    /// Samples f(coordinates) at every node.
    static Field sample(LatticePtr lat, const std::function<cdouble(std::span<const double>)>& f) {
        Field out(lat);
        std::vector<double> x(lat->rank());
        for (std::size_t i = 0; i < lat->size(); ++i) {
            for (std::size_t a = 0; a < x.size(); ++a) x[a] = lat->coordinate(i, a);
            out.values[i] = f(x);
        }
        return out;
    }

    std::size_t size() const { return values.size(); }
};

namespace detail {
inline void require_same_lattice(const Lattice& a, const Lattice& b, const char* where) {
    if (!(a == b)) throw InputError(std::string(where) + ": grid mismatch");
}
}  // namespace detail

/// Nodes of the tube N_beta = M1 x {q : d2(q, q0) < beta}; the whole grid
/// once beta reaches the factor-2 diameter.
struct TubeRegion {
    LatticePtr lattice;
    std::vector<double> center;
    double radius = 0;
    std::vector<std::uint8_t> mask;

    std::size_t count() const {
        std::size_t c = 0;
        for (auto m : mask) c += m;
        return c;
    }

    /// Nodes in this region but not in `inner`.
    TubeRegion minus(const TubeRegion& inner) const {
        detail::require_same_lattice(*lattice, *inner.lattice, "TubeRegion::minus");
        TubeRegion out = *this;
        for (std::size_t i = 0; i < mask.size(); ++i) out.mask[i] = mask[i] && !inner.mask[i];
        return out;
    }

    TubeRegion complement() const {
        TubeRegion out = *this;
        for (auto& m : out.mask) m = !m;
        return out;
    }

    static TubeRegion whole(LatticePtr lat) {
        TubeRegion r{lat, {}, INFINITY, {}};
        r.mask.assign(lat->size(), 1);
        return r;
    }
};

namespace detail {
// Tube over `lat` where the trailing `factor.dim()` axes are the factor-2 coordinates.
inline TubeRegion tube_over(LatticePtr lat, const TorusFactor& factor, std::span<const double> q0,
                            double beta) {
    require(beta > 0, "tube_mask: beta must be positive");
    require(q0.size() == factor.dim(), "tube_mask: center dimension mismatch");
    const std::size_t offset = lat->rank() - factor.dim();
    std::size_t n2 = 1;
    for (std::size_t a = offset; a < lat->rank(); ++a) n2 *= static_cast<std::size_t>(lat->resolution()[a]);

    // Mask on one factor-2 slice, then tile across factor 1.
    std::vector<std::uint8_t> slice(n2);
    std::vector<double> q(factor.dim());
    for (std::size_t j = 0; j < n2; ++j) {
        for (std::size_t a = 0; a < q.size(); ++a) q[a] = lat->coordinate(j, offset + a);
        slice[j] = beta >= factor.diameter() || torus_distance(q, q0, factor) < beta;
    }
    TubeRegion r{lat, {q0.begin(), q0.end()}, beta, std::vector<std::uint8_t>(lat->size())};
    for (std::size_t i = 0; i < lat->size(); ++i) r.mask[i] = slice[i % n2];
    return r;
}
}  // namespace detail

inline TubeRegion tube_mask(const ProductGrid& grid, std::span<const double> q0, double beta) {
    return detail::tube_over(grid.lattice(), grid.factor2(), q0, beta);
}

/// Ball of radius beta around q0 on a single torus (the factor-2 fiber).
inline TubeRegion tube_mask(LatticePtr lattice, std::span<const double> q0, double beta) {
    const TorusFactor factor(lattice->circumferences());
    return detail::tube_over(lattice, factor, q0, beta);
}

/// sqrt(cell_volume * sum over the region of |f|^2).
inline double region_l2_norm(const Field& f, const TubeRegion& region) {
    detail::require_same_lattice(*f.lattice, *region.lattice, "region_l2_norm");
    double s = 0;
    for (std::size_t i = 0; i < f.size(); ++i)
        if (region.mask[i]) s += std::norm(f.values[i]);
    return std::sqrt(f.lattice->cell_volume() * s);
}

inline double l2_norm(const Field& f) {
    double s = 0;
    for (const auto& v : f.values) s += std::norm(v);
    return std::sqrt(f.lattice->cell_volume() * s);
}

// Structured-text (JSON) form of the grid description.
inline nlohmann::json to_json(const ProductGrid& grid) {
    auto factor = [](const TorusFactor& f, const Lattice& lat) {
        return nlohmann::json{{"dim", f.dim()},
                              {"circumferences", f.circumferences},
                              {"resolution", lat.resolution()}};
    };
    return {{"factor1", factor(grid.factor1(), *grid.factor1_lattice())},
            {"factor2", factor(grid.factor2(), *grid.factor2_lattice())}};
}

inline ProductGrid product_grid_from_json(const nlohmann::json& j) {
    try {
        auto read = [](const nlohmann::json& f) {
            auto lengths = f.at("circumferences").get<std::vector<double>>();
            auto res = f.at("resolution").get<std::vector<int>>();
            if (f.contains("dim") && f.at("dim").get<std::size_t>() != lengths.size())
                throw InputError("grid description: dim does not match circumferences");
            return std::pair{TorusFactor(std::move(lengths)), std::move(res)};
        };
        auto [f1, r1] = read(j.at("factor1"));
        auto [f2, r2] = read(j.at("factor2"));
        return ProductGrid(std::move(f1), std::move(f2), std::move(r1), std::move(r2));
    } catch (const nlohmann::json::exception& e) {
        throw InputError(std::string("grid description: ") + e.what());
    }
}

}  // namespace tubewave
