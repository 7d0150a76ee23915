#pragma once

// Smallest singular value of a matrix-free linear map.
//
// The iterative path is block inverse iteration on the normal operator
// A^* A: each sweep applies (A^* A)^{-1} = A^{-1} A^{-*} through two
// preconditioned GMRES solves, re-orthonormalizes the block, and extracts
// Ritz values from the thin SVD of A V. Ritz values are upper bounds on
// sigma_min that converge from above. The dense path assembles A column by
// column and calls LAPACK's divide-and-conquer SVD.

#include <algorithm>
#include <cmath>
#include <complex>
#include <concepts>
#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#define lapack_complex_float std::complex<float>
#define lapack_complex_double std::complex<double>
#include <lapacke.h>

#include "errors.hpp"

namespace tubewave {

using cdouble = std::complex<double>;

/// Matrix-free square linear map on C^n.
template <class M>
concept LinearMap = requires(const M& m, std::span<const cdouble> x, std::span<cdouble> y) {
    { m.size() } -> std::convertible_to<std::size_t>;
    m.apply(x, y);
    m.apply_adjoint(x, y);
};

/// Approximate inverse of a LinearMap (and of its adjoint).
template <class P>
concept Preconditioner = requires(const P& p, std::span<const cdouble> x, std::span<cdouble> y) {
    p.solve(x, y);
    p.solve_adjoint(x, y);
};

struct IdentityPreconditioner {
    void solve(std::span<const cdouble> x, std::span<cdouble> y) const { std::copy(x.begin(), x.end(), y.begin()); }
    void solve_adjoint(std::span<const cdouble> x, std::span<cdouble> y) const { solve(x, y); }
};

enum class SigmaPath { automatic, iterative, dense, cross_check };

struct SigmaOptions {
    double tolerance = 1e-6;
    SigmaPath path = SigmaPath::automatic;
    /// Node count at or below which the dense path may run.
    std::size_t dense_threshold = 4096;
    int block_size = 3;
    int max_sweeps = 200;
    int gmres_restart = 60;
    int gmres_max_restarts = 40;
    double gmres_tolerance = 1e-13;
    std::uint64_t seed = 20240601;
};

struct SigmaResult {
    double sigma = 0;
    SigmaPath path_used = SigmaPath::iterative;
    int sweeps = 0;
    long inner_iterations = 0;
    /// ||A^* A v - sigma^2 v|| / max(sigma^2, floor) for the returned Ritz vector.
    double residual = 0;
    /// Dense value when both paths ran.
    double dense_sigma = -1;
};

namespace detail {

using VectorXc = Eigen::VectorXcd;
using MatrixXc = Eigen::MatrixXcd;

inline std::span<const cdouble> cspan(const VectorXc& v) { return {v.data(), static_cast<std::size_t>(v.size())}; }
inline std::span<cdouble> mspan(VectorXc& v) { return {v.data(), static_cast<std::size_t>(v.size())}; }

struct GmresOutcome {
    double relative_residual = 0;
    int iterations = 0;
    bool converged = false;
};

/// Right-preconditioned restarted GMRES for A x = rhs (or A^* x = rhs), x0 = 0.
template <LinearMap Op, Preconditioner Pre>
GmresOutcome gmres(const Op& op, const Pre& pre, bool adjoint, const VectorXc& rhs, VectorXc& x,
                   int restart, int max_restarts, double tol) {
    const auto n = rhs.size();
    x.setZero(n);
    GmresOutcome out;
    const double bnorm = rhs.norm();
    if (bnorm == 0) {
        out.converged = true;
        return out;
    }
    auto apply = [&](const VectorXc& in, VectorXc& y) {
        adjoint ? op.apply_adjoint(cspan(in), mspan(y)) : op.apply(cspan(in), mspan(y));
    };
    auto precondition = [&](const VectorXc& in, VectorXc& y) {
        adjoint ? pre.solve_adjoint(cspan(in), mspan(y)) : pre.solve(cspan(in), mspan(y));
    };

    const int m = std::max(1, std::min<int>(restart, static_cast<int>(n)));
    MatrixXc basis(n, m + 1);
    MatrixXc hess = MatrixXc::Zero(m + 1, m);
    std::vector<cdouble> cs(m), sn(m);
    VectorXc g(m + 1), r(n), w(n), z(n);

    double best = INFINITY;
    for (int cycle = 0; cycle < max_restarts; ++cycle) {
        apply(x, r);
        r = rhs - r;
        double beta = r.norm();
        out.relative_residual = beta / bnorm;
        if (out.relative_residual <= tol) {
            out.converged = true;
            return out;
        }
        // Stagnation on (numerically) singular systems: keep the best iterate.
        if (cycle > 0 && out.relative_residual > 0.999 * best) return out;
        best = std::min(best, out.relative_residual);

        basis.col(0) = r / beta;
        hess.setZero();
        g.setZero();
        g(0) = beta;
        int k = 0;
        for (; k < m; ++k) {
            precondition(basis.col(k), z);
            apply(z, w);
            ++out.iterations;
            // Modified Gram-Schmidt with one reorthogonalization pass.
            for (int pass = 0; pass < 2; ++pass) {
                for (int j = 0; j <= k; ++j) {
                    const cdouble hjk = basis.col(j).dot(w);
                    hess(j, k) += hjk;
                    w -= hjk * basis.col(j);
                }
            }
            const double hn = w.norm();
            hess(k + 1, k) = hn;
            if (hn > 0) basis.col(k + 1) = w / hn;
            for (int j = 0; j < k; ++j) {
                const cdouble t = std::conj(cs[j]) * hess(j, k) + std::conj(sn[j]) * hess(j + 1, k);
                hess(j + 1, k) = -sn[j] * hess(j, k) + cs[j] * hess(j + 1, k);
                hess(j, k) = t;
            }
            const cdouble a = hess(k, k), b = hess(k + 1, k);
            const double rho = std::sqrt(std::norm(a) + std::norm(b));
            if (rho == 0) {
                cs[k] = 1;
                sn[k] = 0;
            } else {
                cs[k] = a / rho;
                sn[k] = b / rho;
            }
            hess(k, k) = rho;
            hess(k + 1, k) = 0;
            g(k + 1) = -sn[k] * g(k);
            g(k) = std::conj(cs[k]) * g(k);
            if (std::abs(g(k + 1)) / bnorm <= tol || hn == 0) {
                ++k;
                break;
            }
        }
        // Back-substitute the k x k triangular system and update x.
        VectorXc y = hess.topLeftCorner(k, k).triangularView<Eigen::Upper>().solve(g.head(k));
        VectorXc update = basis.leftCols(k) * y;
        precondition(update, z);
        x += z;
    }
    apply(x, r);
    out.relative_residual = (rhs - r).norm() / bnorm;
    out.converged = out.relative_residual <= tol;
    return out;
}

inline void orthonormalize(MatrixXc& v) {
    Eigen::HouseholderQR<MatrixXc> qr(v);
    v = qr.householderQ() * MatrixXc::Identity(v.rows(), v.cols());
}

template <LinearMap Op>
MatrixXc apply_block(const Op& op, const MatrixXc& v) {
    MatrixXc out(v.rows(), v.cols());
    for (Eigen::Index j = 0; j < v.cols(); ++j) {
        VectorXc col = v.col(j), y(v.rows());
        op.apply(cspan(col), mspan(y));
        out.col(j) = y;
    }
    return out;
}

}  // namespace detail

/// Iterative path only. Throws ConvergenceError when the sweep budget runs out.
template <LinearMap Op, Preconditioner Pre>
SigmaResult min_singular_value_iterative(const Op& op, const Pre& pre, const SigmaOptions& opts) {
    using namespace detail;
    const auto n = static_cast<Eigen::Index>(op.size());
    require(n > 0, "min_singular_value: empty operator");
    require(opts.tolerance > 0, "min_singular_value: tolerance must be positive");
    const int p = static_cast<int>(std::min<Eigen::Index>(std::max(1, opts.block_size), n));

    std::mt19937_64 rng(opts.seed);
    std::normal_distribution<double> normal;
    MatrixXc v(n, p);
    for (Eigen::Index i = 0; i < v.size(); ++i) v.data()[i] = {normal(rng), normal(rng)};
    orthonormalize(v);

    SigmaResult res;
    double previous = INFINITY;
    double scale = 0;
    VectorXc z(n), w(n);
    for (int sweep = 1; sweep <= opts.max_sweeps; ++sweep) {
        for (int j = 0; j < p; ++j) {
            VectorXc col = v.col(j);
            res.inner_iterations += gmres(op, pre, true, col, z, opts.gmres_restart, opts.gmres_max_restarts,
                                          opts.gmres_tolerance).iterations;
            res.inner_iterations += gmres(op, pre, false, z, w, opts.gmres_restart, opts.gmres_max_restarts,
                                          opts.gmres_tolerance).iterations;
            v.col(j) = w;
        }
        orthonormalize(v);

        // Rayleigh-Ritz on span(V): min over the block of ||A v|| = sigma_min(A V).
        MatrixXc av = apply_block(op, v);
        Eigen::JacobiSVD<MatrixXc> svd(av, Eigen::ComputeThinU | Eigen::ComputeThinV);
        const auto& s = svd.singularValues();  // descending
        MatrixXc rotation = svd.matrixV().rowwise().reverse();
        v = v * rotation;
        const double sigma = s(p - 1);
        scale = std::max(scale, s(0));
        res.sigma = sigma;
        res.sweeps = sweep;

        const double floor = 64 * std::numeric_limits<double>::epsilon() * std::max(1.0, scale);
        // Ritz values decrease monotonically; the step size underestimates the
        // remaining error, hence the factor 0.1.
        if (sigma <= floor || std::abs(previous - sigma) <= 0.1 * opts.tolerance * sigma) {
            VectorXc best = v.col(0), av0(n), r(n);
            op.apply(cspan(best), mspan(av0));
            op.apply_adjoint(cspan(av0), mspan(r));
            r -= sigma * sigma * best;
            res.residual = r.norm() / std::max(sigma * sigma, floor);
            res.path_used = SigmaPath::iterative;
            return res;
        }
        previous = sigma;
    }
    throw ConvergenceError("min_singular_value: inverse iteration did not converge in " +
                               std::to_string(opts.max_sweeps) + " sweeps",
                           std::abs(previous - res.sigma) / std::max(res.sigma, 1e-300));
}

/// Dense path: assemble A by columns and take the smallest singular value.
template <LinearMap Op>
double min_singular_value_dense(const Op& op) {
    const auto n = static_cast<lapack_int>(op.size());
    std::vector<cdouble> a(static_cast<std::size_t>(n) * n);
    std::vector<cdouble> e(n);
    for (lapack_int j = 0; j < n; ++j) {
        std::fill(e.begin(), e.end(), cdouble{});
        e[j] = 1;
        op.apply(e, std::span<cdouble>(a.data() + static_cast<std::size_t>(j) * n, n));
    }
    std::vector<double> s(n);
    const lapack_int info = LAPACKE_zgesdd(LAPACK_COL_MAJOR, 'N', n, n, a.data(), n, s.data(), nullptr, 1,
                                           nullptr, 1);
    if (info != 0) throw ConvergenceError("min_singular_value: LAPACK zgesdd failed", static_cast<double>(info));
    return s.back();
}

/// sigma_min(A) to relative tolerance `opts.tolerance`.
///
/// automatic   iterative, falling back to dense on non-convergence when n <= dense_threshold
/// cross_check both paths; throws ValidationError if they differ by more than 10 * tolerance
template <LinearMap Op, Preconditioner Pre>
SigmaResult min_singular_value(const Op& op, const Pre& pre, const SigmaOptions& opts = {}) {
    const std::size_t n = op.size();
    switch (opts.path) {
        case SigmaPath::dense: {
            detail::require(n <= opts.dense_threshold, "min_singular_value: grid too large for the dense path");
            SigmaResult r;
            r.sigma = r.dense_sigma = min_singular_value_dense(op);
            r.path_used = SigmaPath::dense;
            return r;
        }
        case SigmaPath::iterative:
            return min_singular_value_iterative(op, pre, opts);
        case SigmaPath::cross_check: {
            detail::require(n <= opts.dense_threshold, "min_singular_value: grid too large for cross-check");
            SigmaResult r = min_singular_value_iterative(op, pre, opts);
            r.dense_sigma = min_singular_value_dense(op);
            r.path_used = SigmaPath::cross_check;
            const double gap = std::abs(r.sigma - r.dense_sigma);
            if (gap > 10 * opts.tolerance * std::max(r.dense_sigma, 1e-300) && gap > 1e-13)
                throw ValidationError("min_singular_value: iterative " + std::to_string(r.sigma) +
                                      " and dense " + std::to_string(r.dense_sigma) + " disagree");
            return r;
        }
        case SigmaPath::automatic:
        default:
            try {
                return min_singular_value_iterative(op, pre, opts);
            } catch (const ConvergenceError&) {
                if (n > opts.dense_threshold) throw;
                SigmaResult r;
                r.sigma = r.dense_sigma = min_singular_value_dense(op);
                r.path_used = SigmaPath::dense;
                return r;
            }
    }
}

template <LinearMap Op>
SigmaResult min_singular_value(const Op& op, const SigmaOptions& opts = {}) {
    return min_singular_value(op, IdentityPreconditioner{}, opts);
}

}  // namespace tubewave
