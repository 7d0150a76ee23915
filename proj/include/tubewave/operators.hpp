#pragma once

// Spectral operators on periodic lattices.
//
// Every operator here has the form  A = F^{-1} diag(symbol) F + diag(pointwise):
// a Fourier multiplier plus pointwise multiplication. That covers the
// Laplacian, the semiclassical damped operator L_h = -h^2 Lap - 1 + i h b,
// the Helmholtz operator -Lap - tau, and the per-mode fiber operators of L_h.

#include <algorithm>
#include <cmath>
#include <complex>
#include <memory>
#include <numeric>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "fft.hpp"
#include "geometry.hpp"
#include "linalg.hpp"

namespace tubewave {

/// F^{-1} diag(symbol) F + diag(pointwise) on one lattice.
class MultiplierOperator {
public:
    MultiplierOperator(LatticePtr lattice, std::vector<cdouble> symbol, std::vector<cdouble> pointwise = {})
        : lattice_(std::move(lattice)), symbol_(std::move(symbol)), pointwise_(std::move(pointwise)) {
        detail::require(symbol_.size() == lattice_->size(), "MultiplierOperator: symbol size mismatch");
        detail::require(pointwise_.empty() || pointwise_.size() == lattice_->size(),
                        "MultiplierOperator: pointwise size mismatch");
    }

    std::size_t size() const { return lattice_->size(); }
    const LatticePtr& lattice() const { return lattice_; }
    const std::vector<cdouble>& symbol() const { return symbol_; }
    const std::vector<cdouble>& pointwise() const { return pointwise_; }

    void apply(std::span<const cdouble> x, std::span<cdouble> y) const { run(x, y, false); }
    void apply_adjoint(std::span<const cdouble> x, std::span<cdouble> y) const { run(x, y, true); }

    Field operator()(const Field& f) const {
        detail::require_same_lattice(*f.lattice, *lattice_, "MultiplierOperator");
        Field out(lattice_);
        apply(f.values, out.values);
        return out;
    }

private:
    void run(std::span<const cdouble> x, std::span<cdouble> y, bool adjoint) const {
        std::vector<cdouble> spectrum(x.size());
        fft::forward(*lattice_, x, spectrum);
        for (std::size_t k = 0; k < spectrum.size(); ++k)
            spectrum[k] *= adjoint ? std::conj(symbol_[k]) : symbol_[k];
        fft::inverse(*lattice_, spectrum, y);
        if (!pointwise_.empty())
            for (std::size_t i = 0; i < y.size(); ++i)
                y[i] += (adjoint ? std::conj(pointwise_[i]) : pointwise_[i]) * x[i];
    }

    LatticePtr lattice_;
    std::vector<cdouble> symbol_;
    std::vector<cdouble> pointwise_;
};

/// Block-Jacobi preconditioner in Fourier space for a MultiplierOperator.
///
/// In Fourier coordinates the operator is diag(symbol) + C, with C the
/// circulant convolution by the coefficients of `pointwise`. The `window`
/// modes where symbol + mean(pointwise) is smallest get an exact dense LU of
/// the corresponding block; every other mode is scaled by 1/(symbol + mean).
class WindowPreconditioner {
public:
    WindowPreconditioner(const MultiplierOperator& op, std::size_t window = 128) : lattice_(op.lattice()) {
        const std::size_t n = op.size();
        std::vector<cdouble> chat(n, cdouble{});
        if (!op.pointwise().empty()) {
            fft::forward(*lattice_, op.pointwise(), chat);
            for (auto& c : chat) c /= static_cast<double>(n);
        }
        diag_.resize(n);
        double scale = 0;
        for (std::size_t k = 0; k < n; ++k) {
            diag_[k] = op.symbol()[k] + chat[0];
            scale = std::max(scale, std::abs(diag_[k]));
        }
        const double tiny = 1e-14 * std::max(1.0, scale);

        window = std::min(window, n);
        std::vector<std::size_t> order(n);
        std::iota(order.begin(), order.end(), 0);
        std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(window), order.end(),
                          [&](std::size_t a, std::size_t b) {
                              const double da = std::abs(diag_[a]), db = std::abs(diag_[b]);
                              return da != db ? da < db : a < b;
                          });
        window_.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(window));
        in_window_.assign(n, 0);
        for (auto k : window_) in_window_[k] = 1;
        for (auto& d : diag_)
            if (std::abs(d) < tiny) d = tiny;

        const auto w = static_cast<Eigen::Index>(window);
        Eigen::MatrixXcd block(w, w);
        const auto& lat = *lattice_;
        for (Eigen::Index i = 0; i < w; ++i) {
            for (Eigen::Index j = 0; j < w; ++j) {
                // Flat index of the multi-index difference window[i] - window[j] (mod N per axis).
                std::size_t idx = 0;
                for (std::size_t a = 0; a < lat.rank(); ++a) {
                    const auto na = static_cast<long>(lat.resolution()[a]);
                    long d = static_cast<long>(lat.index_along(window_[i], a)) -
                             static_cast<long>(lat.index_along(window_[j], a));
                    d = ((d % na) + na) % na;
                    idx = idx * static_cast<std::size_t>(na) + static_cast<std::size_t>(d);
                }
                block(i, j) = chat[idx];
            }
            block(i, i) += op.symbol()[window_[i]];
        }
        block.diagonal().array() += tiny;
        lu_.compute(block);
    }

    void solve(std::span<const cdouble> x, std::span<cdouble> y) const { run(x, y, false); }
    void solve_adjoint(std::span<const cdouble> x, std::span<cdouble> y) const { run(x, y, true); }

    std::size_t window_size() const { return window_.size(); }

private:
    void run(std::span<const cdouble> x, std::span<cdouble> y, bool adjoint) const {
        const std::size_t n = x.size();
        std::vector<cdouble> spectrum(n);
        fft::forward(*lattice_, x, spectrum);
        Eigen::VectorXcd rhs(static_cast<Eigen::Index>(window_.size()));
        for (std::size_t i = 0; i < window_.size(); ++i) rhs(static_cast<Eigen::Index>(i)) = spectrum[window_[i]];
        for (std::size_t k = 0; k < n; ++k)
            if (!in_window_[k]) spectrum[k] /= adjoint ? std::conj(diag_[k]) : diag_[k];
        Eigen::VectorXcd sol = adjoint ? Eigen::VectorXcd(lu_.adjoint().solve(rhs)) : Eigen::VectorXcd(lu_.solve(rhs));
        for (std::size_t i = 0; i < window_.size(); ++i) spectrum[window_[i]] = sol(static_cast<Eigen::Index>(i));
        fft::inverse(*lattice_, spectrum, y);
    }

    LatticePtr lattice_;
    std::vector<cdouble> diag_;
    std::vector<std::size_t> window_;
    std::vector<std::uint8_t> in_window_;
    Eigen::PartialPivLU<Eigen::MatrixXcd> lu_;
};

/// Fourier multipliers -|k|^2 of the flat Laplace-Beltrami operator.
struct SpectralLaplacian {
    LatticePtr lattice;
    std::vector<double> multipliers;

    explicit SpectralLaplacian(LatticePtr lat) : lattice(std::move(lat)), multipliers(lattice->size()) {
        for (std::size_t k = 0; k < multipliers.size(); ++k) multipliers[k] = -lattice->wavenumber_squared(k);
    }
};

inline Field apply_laplacian(const SpectralLaplacian& lap, const Field& f) {
    detail::require_same_lattice(*f.lattice, *lap.lattice, "apply_laplacian");
    std::vector<cdouble> spectrum(f.size());
    fft::forward(*lap.lattice, f.values, spectrum);
    for (std::size_t k = 0; k < spectrum.size(); ++k) spectrum[k] *= lap.multipliers[k];
    Field out(lap.lattice);
    fft::inverse(*lap.lattice, spectrum, out.values);
    return out;
}

/// Spectral partial derivatives, one field per axis.
inline std::vector<Field> spectral_gradient(const Field& f) {
    const auto& lat = *f.lattice;
    std::vector<cdouble> spectrum(f.size()), work(f.size());
    fft::forward(lat, f.values, spectrum);
    std::vector<Field> grad;
    for (std::size_t a = 0; a < lat.rank(); ++a) {
        for (std::size_t k = 0; k < work.size(); ++k)
            work[k] = cdouble(0, lat.wavenumber(lat.index_along(k, a), a)) * spectrum[k];
        Field g(f.lattice);
        fft::inverse(lat, work, g.values);
        grad.push_back(std::move(g));
    }
    return grad;
}

/// integral of |grad f|^2, computed as vol * sum_k |k|^2 |c_k|^2.
inline double dirichlet_energy(const Field& f) {
    const auto c = fft::coefficients(f);
    double s = 0;
    for (std::size_t k = 0; k < c.size(); ++k) s += f.lattice->wavenumber_squared(k) * std::norm(c[k]);
    return f.lattice->volume() * s;
}

/// ||f||_{H^s}^2 = vol * sum_k (1 + |k|^2)^s |c_k|^2.
inline double sobolev_norm(const Field& f, double s) {
    const auto c = fft::coefficients(f);
    double acc = 0;
    for (std::size_t k = 0; k < c.size(); ++k)
        acc += std::pow(1 + f.lattice->wavenumber_squared(k), s) * std::norm(c[k]);
    return std::sqrt(f.lattice->volume() * acc);
}

/// L_h = -h^2 Lap - 1 + i h b.
struct SemiclassicalOperator {
    double h;
    SpectralLaplacian laplacian;
    std::vector<double> b;

    SemiclassicalOperator(double h_, LatticePtr lattice, std::vector<double> damping)
        : h(h_), laplacian(std::move(lattice)), b(std::move(damping)) {
        detail::require(h > 0, "SemiclassicalOperator: h must be positive");
        detail::require(b.size() == laplacian.lattice->size(), "SemiclassicalOperator: damping size mismatch");
    }

    SemiclassicalOperator(double h_, const Field& damping) : SemiclassicalOperator(h_, damping.lattice, real_part(damping)) {}

    MultiplierOperator map() const {
        std::vector<cdouble> symbol(b.size()), pointwise(b.size());
        for (std::size_t k = 0; k < symbol.size(); ++k) symbol[k] = -h * h * laplacian.multipliers[k] - 1.0;
        for (std::size_t i = 0; i < b.size(); ++i) pointwise[i] = cdouble(0, h * b[i]);
        return {laplacian.lattice, std::move(symbol), std::move(pointwise)};
    }

private:
    static std::vector<double> real_part(const Field& f) {
        std::vector<double> out(f.size());
        for (std::size_t i = 0; i < out.size(); ++i) {
            if (f.values[i].imag() != 0) throw InputError("SemiclassicalOperator: damping must be real");
            out[i] = f.values[i].real();
        }
        return out;
    }
};

inline Field apply_Lh(const SemiclassicalOperator& op, const Field& f) {
    detail::require_same_lattice(*f.lattice, *op.laplacian.lattice, "apply_Lh");
    Field lap = apply_laplacian(op.laplacian, f);
    Field out(f.lattice);
    for (std::size_t i = 0; i < f.size(); ++i)
        out.values[i] = -op.h * op.h * lap.values[i] - f.values[i] + cdouble(0, op.h * op.b[i]) * f.values[i];
    return out;
}

/// -Lap - tau on the factor-2 torus.
struct HelmholtzOperator {
    double tau;
    SpectralLaplacian laplacian;

    HelmholtzOperator(double tau_, LatticePtr lattice) : tau(tau_), laplacian(std::move(lattice)) {}

    MultiplierOperator map() const {
        std::vector<cdouble> symbol(laplacian.multipliers.size());
        for (std::size_t k = 0; k < symbol.size(); ++k) symbol[k] = -laplacian.multipliers[k] - tau;
        return {laplacian.lattice, std::move(symbol)};
    }
};

inline Field apply_helmholtz(const HelmholtzOperator& op, const Field& u) {
    detail::require_same_lattice(*u.lattice, *op.laplacian.lattice, "apply_helmholtz");
    Field out = apply_laplacian(op.laplacian, u);
    for (std::size_t i = 0; i < u.size(); ++i) out.values[i] = -out.values[i] - op.tau * u.values[i];
    return out;
}

/// Fiber parameter tau = h^{-2} - lambda_n^2 of factor-1 mode n.
inline double mode_parameter(double h, double lambda_sq) {
    detail::require(h > 0, "mode_parameter: h must be positive");
    return 1.0 / (h * h) - lambda_sq;
}

/// Restriction of L_h to the factor-1 mode with eigenvalue lambda^2:
/// -h^2 Lap_2 + h^2 lambda^2 - 1 + i h b(q) on the factor-2 torus.
inline MultiplierOperator fiber_operator(double h, double lambda_sq, LatticePtr lattice2,
                                         std::span<const double> b2) {
    detail::require(h > 0, "fiber_operator: h must be positive");
    detail::require(b2.size() == lattice2->size(), "fiber_operator: damping size mismatch");
    std::vector<cdouble> symbol(lattice2->size()), pointwise(lattice2->size());
    for (std::size_t k = 0; k < symbol.size(); ++k)
        symbol[k] = h * h * (lattice2->wavenumber_squared(k) + lambda_sq) - 1.0;
    for (std::size_t i = 0; i < b2.size(); ++i) pointwise[i] = cdouble(0, h * b2[i]);
    return {std::move(lattice2), std::move(symbol), std::move(pointwise)};
}

/// Expansion of a product-grid field along the orthonormal Fourier basis
/// e_n(p) = e^{i k_n p} / sqrt(vol M1) of the first factor.
struct FiberDecomposition {
    LatticePtr factor1;
    LatticePtr factor2;
    /// lambda_n^2 = |k_n|^2, indexed like the factor-1 FFT slots.
    std::vector<double> eigenvalues;
    /// psi_hat_n as a field on the factor-2 torus.
    std::vector<Field> coefficients;
};

inline FiberDecomposition fiber_decompose(const Field& psi, const ProductGrid& grid) {
    detail::require_same_lattice(*psi.lattice, *grid.lattice(), "fiber_decompose");
    const auto& lat1 = *grid.factor1_lattice();
    const std::size_t n1 = lat1.size(), n2 = grid.factor2_lattice()->size();
    const double norm = std::sqrt(lat1.volume()) / static_cast<double>(n1);

    FiberDecomposition out{grid.factor1_lattice(), grid.factor2_lattice(), std::vector<double>(n1), {}};
    for (std::size_t n = 0; n < n1; ++n) {
        out.eigenvalues[n] = lat1.wavenumber_squared(n);
        out.coefficients.emplace_back(grid.factor2_lattice());
    }
    std::vector<cdouble> column(n1), spectrum(n1);
    for (std::size_t q = 0; q < n2; ++q) {
        for (std::size_t p = 0; p < n1; ++p) column[p] = psi.values[p * n2 + q];
        fft::forward(lat1, column, spectrum);
        for (std::size_t n = 0; n < n1; ++n) out.coefficients[n].values[q] = norm * spectrum[n];
    }
    return out;
}

/// psi(p, q) = sum_n psi_hat_n(q) e_n(p).
inline Field fiber_reconstruct(const FiberDecomposition& d, const ProductGrid& grid) {
    const auto& lat1 = *d.factor1;
    const std::size_t n1 = lat1.size(), n2 = d.factor2->size();
    const double norm = static_cast<double>(n1) / std::sqrt(lat1.volume());
    Field out(grid.lattice());
    std::vector<cdouble> spectrum(n1), column(n1);
    for (std::size_t q = 0; q < n2; ++q) {
        for (std::size_t n = 0; n < n1; ++n) spectrum[n] = d.coefficients[n].values[q];
        fft::inverse(lat1, spectrum, column);
        for (std::size_t p = 0; p < n1; ++p) out.values[p * n2 + q] = norm * column[p];
    }
    return out;
}

}  // namespace tubewave
