#include <tubewave/damping.hpp>
#include <tubewave/operators.hpp>

#include <gtest/gtest.h>

#include <Eigen/SVD>
#include <cmath>
#include <numbers>
#include <random>

using namespace tubewave;

namespace {
constexpr double pi = std::numbers::pi;

LatticePtr circle(int n, double l = 2 * pi) {
    return std::make_shared<const Lattice>(std::vector<double>{l}, std::vector<int>{n});
}

struct DenseMap {
    Eigen::MatrixXcd a;
    std::size_t size() const { return static_cast<std::size_t>(a.rows()); }
    void apply(std::span<const cdouble> x, std::span<cdouble> y) const {
        Eigen::Map<const Eigen::VectorXcd> xv(x.data(), a.cols());
        Eigen::Map<Eigen::VectorXcd>(y.data(), a.rows()) = a * xv;
    }
    void apply_adjoint(std::span<const cdouble> x, std::span<cdouble> y) const {
        Eigen::Map<const Eigen::VectorXcd> xv(x.data(), a.rows());
        Eigen::Map<Eigen::VectorXcd>(y.data(), a.cols()) = a.adjoint() * xv;
    }
};

// Oracle: Eigen's Jacobi SVD on the explicitly assembled matrix.
template <class Op>
double jacobi_sigma_min(const Op& op) {
    const auto n = static_cast<Eigen::Index>(op.size());
    Eigen::MatrixXcd a(n, n);
    std::vector<cdouble> e(op.size()), col(op.size());
    for (Eigen::Index j = 0; j < n; ++j) {
        std::fill(e.begin(), e.end(), cdouble{});
        e[static_cast<std::size_t>(j)] = 1;
        op.apply(e, col);
        for (Eigen::Index i = 0; i < n; ++i) a(i, j) = col[static_cast<std::size_t>(i)];
    }
    return Eigen::JacobiSVD<Eigen::MatrixXcd>(a).singularValues().minCoeff();
}
}  // namespace

TEST(SigmaMin, HelmholtzNegativeTauIsOne) {
    const auto op = HelmholtzOperator(-1, circle(64)).map();
    SigmaOptions o;
    o.path = SigmaPath::iterative;
    EXPECT_NEAR(min_singular_value(op, o).sigma, 1.0, 1e-8);
    o.path = SigmaPath::dense;
    EXPECT_NEAR(min_singular_value(op, o).sigma, 1.0, 1e-12);
}

TEST(SigmaMin, HelmholtzKernel) {
    const auto op = HelmholtzOperator(0, circle(64)).map();
    SigmaOptions o;
    o.path = SigmaPath::iterative;
    EXPECT_LT(min_singular_value(op, o).sigma, 1e-10);
    o.path = SigmaPath::dense;
    EXPECT_LT(min_singular_value(op, o).sigma, 1e-12);
}

TEST(SigmaMin, UndampedLhMatchesMultiplierFormula) {
    const auto g = ProductGrid::two_torus(32, 32);
    const double h = 0.13;
    const SemiclassicalOperator op(h, g.lattice(), std::vector<double>(g.size(), 0.0));
    double expect = INFINITY;
    for (std::size_t k = 0; k < g.size(); ++k)
        expect = std::min(expect, std::abs(h * h * g.lattice()->wavenumber_squared(k) - 1));
    SigmaOptions o;
    o.path = SigmaPath::iterative;
    o.tolerance = 1e-10;
    const auto m = op.map();
    EXPECT_NEAR(min_singular_value(m, WindowPreconditioner(m), o).sigma, expect, 1e-10 * expect);
}

TEST(SigmaMin, DampedFiberIterativeMatchesOracle) {
    const auto lat = circle(128);
    DampingProfile p;
    std::vector<double> b(128);
    for (std::size_t i = 0; i < 128; ++i) {
        const double q = lat->coordinate(i, 0);
        b[i] = p.at_distance(std::min(q, 2 * pi - q));
    }
    for (double lsq : {0.0, 36.0, 63.0, 64.0}) {
        const auto op = fiber_operator(0.125, lsq, lat, b);
        SigmaOptions o;
        o.path = SigmaPath::iterative;
        const double it = min_singular_value(op, WindowPreconditioner(op), o).sigma;
        const double oracle = jacobi_sigma_min(op);
        EXPECT_NEAR(it, oracle, 1e-5 * oracle) << "lambda^2 = " << lsq;
    }
}

TEST(SigmaMin, CrossCheckPathsAgree) {
    const auto g = ProductGrid::two_torus(16, 16);
    const auto b = evaluate_damping(DampingProfile{}, g);
    const auto m = SemiclassicalOperator(0.2, b).map();
    SigmaOptions o;
    o.path = SigmaPath::cross_check;
    const auto r = min_singular_value(m, WindowPreconditioner(m), o);
    EXPECT_EQ(r.path_used, SigmaPath::cross_check);
    EXPECT_NEAR(r.sigma, r.dense_sigma, 10 * o.tolerance * r.dense_sigma);
}

TEST(SigmaMin, GenericDenseMatrix) {
    std::mt19937_64 rng(31);
    std::normal_distribution<double> nd;
    DenseMap op{Eigen::MatrixXcd(40, 40)};
    for (Eigen::Index i = 0; i < op.a.size(); ++i) op.a.data()[i] = {nd(rng), nd(rng)};
    const double oracle = Eigen::JacobiSVD<Eigen::MatrixXcd>(op.a).singularValues().minCoeff();
    SigmaOptions o;
    o.path = SigmaPath::iterative;
    EXPECT_NEAR(min_singular_value(op, o).sigma, oracle, 1e-6 * oracle);
    EXPECT_NEAR(min_singular_value_dense(op), oracle, 1e-12 * oracle);
}

TEST(SigmaMin, InverseNormConsistency) {
    // sigma_min ||A^{-1}|| = 1: below 1 + tol on random unit x, and reaching
    // 1 - tol along the power-iteration maximizer of ||A^{-1} x||.
    const auto g = ProductGrid::two_torus(16, 16);
    const auto b = evaluate_damping(DampingProfile{}, g);
    const auto m = SemiclassicalOperator(0.3, b).map();
    const double s = min_singular_value(m, WindowPreconditioner(m)).sigma;
    const auto n = static_cast<Eigen::Index>(m.size());
    Eigen::MatrixXcd a(n, n);
    std::vector<cdouble> e(m.size()), col(m.size());
    for (Eigen::Index j = 0; j < n; ++j) {
        std::fill(e.begin(), e.end(), cdouble{});
        e[static_cast<std::size_t>(j)] = 1;
        m.apply(e, col);
        for (Eigen::Index i = 0; i < n; ++i) a(i, j) = col[static_cast<std::size_t>(i)];
    }
    Eigen::PartialPivLU<Eigen::MatrixXcd> lu(a);
    const Eigen::MatrixXcd ah = a.adjoint();
    Eigen::PartialPivLU<Eigen::MatrixXcd> luh(ah);
    std::mt19937_64 rng(37);
    std::normal_distribution<double> nd;
    Eigen::VectorXcd x(n);
    for (int t = 0; t < 10; ++t) {
        for (Eigen::Index i = 0; i < n; ++i) x(i) = {nd(rng), nd(rng)};
        x.normalize();
        EXPECT_LE(s * lu.solve(x).norm(), 1 + 1e-6);
    }
    for (int it = 0; it < 500; ++it) x = luh.solve(lu.solve(x)).normalized();
    EXPECT_GE(s * lu.solve(x).norm(), 1 - 1e-6);
    EXPECT_LE(s * lu.solve(x).norm(), 1 + 1e-6);
}

TEST(SigmaMin, BudgetExhaustionReportsResidual) {
    const auto lat = circle(64);
    std::vector<double> b(64, 0.0);
    for (std::size_t i = 0; i < 64; ++i) b[i] = 1 - std::cos(lat->coordinate(i, 0));
    const auto op = fiber_operator(0.125, 63, lat, b);
    SigmaOptions o;
    o.path = SigmaPath::iterative;
    o.max_sweeps = 1;
    o.tolerance = 1e-14;
    EXPECT_THROW(min_singular_value(op, o), ConvergenceError);
    o.path = SigmaPath::automatic;  // falls back to dense below the threshold
    const auto r = min_singular_value(op, o);
    EXPECT_EQ(r.path_used, SigmaPath::dense);
    EXPECT_NEAR(r.sigma, jacobi_sigma_min(op), 1e-12);
}

TEST(SigmaMin, InputValidation) {
    const auto op = HelmholtzOperator(-1, circle(8)).map();
    SigmaOptions o;
    o.tolerance = 0;
    o.path = SigmaPath::iterative;
    EXPECT_THROW(min_singular_value(op, o), InputError);
    o.tolerance = 1e-6;
    o.path = SigmaPath::dense;
    o.dense_threshold = 4;
    EXPECT_THROW(min_singular_value(op, o), InputError);
}
