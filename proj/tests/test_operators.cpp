#include <tubewave/damping.hpp>
#include <tubewave/operators.hpp>

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

using namespace tubewave;

namespace {
constexpr double pi = std::numbers::pi;
const cdouble I(0, 1);

LatticePtr circle(int n, double l = 2 * pi) {
    return std::make_shared<const Lattice>(std::vector<double>{l}, std::vector<int>{n});
}

double max_abs_diff(const Field& a, const Field& b) {
    double m = 0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a.values[i] - b.values[i]));
    return m;
}

Field random_field(const LatticePtr& lat, std::mt19937_64& rng) {
    std::normal_distribution<double> nd;
    Field f(lat);
    for (auto& v : f.values) v = {nd(rng), nd(rng)};
    return f;
}

cdouble inner(const Field& a, const Field& b) {
    cdouble s = 0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a.values[i] * std::conj(b.values[i]);
    return s * a.lattice->cell_volume();
}
}  // namespace

TEST(Laplacian, ConstantInKernel) {
    const auto lat = circle(32);
    const SpectralLaplacian lap(lat);
    EXPECT_EQ(lap.multipliers[0], 0.0);
    Field one(lat, std::vector<cdouble>(32, 1.0));
    for (const auto& v : apply_laplacian(lap, one).values) EXPECT_LT(std::abs(v), 1e-14);
}

TEST(Laplacian, SineAndExponentialModes) {
    const auto lat = circle(32);
    const SpectralLaplacian lap(lat);
    const auto s = Field::sample(lat, [](auto x) { return cdouble(std::sin(x[0])); });
    auto ms = s;
    for (auto& v : ms.values) v = -v;
    EXPECT_LT(max_abs_diff(apply_laplacian(lap, s), ms), 1e-13);
    const auto e = Field::sample(lat, [](auto x) { return std::exp(2.0 * I * x[0]); });
    auto e4 = e;
    for (auto& v : e4.values) v *= -4.0;
    EXPECT_LT(max_abs_diff(apply_laplacian(lap, e), e4), 1e-12);
}

TEST(Laplacian, SymmetricOnRandomPairs) {
    const auto g = ProductGrid(TorusFactor({2 * pi}), TorusFactor({3.0}), {16}, {12});
    const SpectralLaplacian lap(g.lattice());
    std::mt19937_64 rng(5);
    for (int t = 0; t < 20; ++t) {
        const auto f = random_field(g.lattice(), rng), h = random_field(g.lattice(), rng);
        const cdouble a = inner(apply_laplacian(lap, f), h), b = inner(f, apply_laplacian(lap, h));
        EXPECT_LE(std::abs(a - b), 1e-12 * std::abs(a));
    }
}

TEST(Laplacian, GridMismatchThrows) {
    const SpectralLaplacian lap(circle(16));
    EXPECT_THROW(apply_laplacian(lap, Field(circle(32))), InputError);
}

TEST(Lh, CharacteristicPlaneWaveIsAnnihilated) {
    const auto g = ProductGrid::two_torus(32, 32);
    const double h = 0.2;  // h^2 (3^2 + 4^2) = 1
    const SemiclassicalOperator op(h, g.lattice(), std::vector<double>(g.size(), 0.0));
    const auto f = Field::sample(g.lattice(), [](auto x) { return std::exp(I * (3.0 * x[0] + 4.0 * x[1])); });
    for (const auto& v : apply_Lh(op, f).values) EXPECT_LT(std::abs(v), 1e-12);
}

TEST(Lh, ZeroModeAndConstantDamping) {
    const auto g = ProductGrid::two_torus(8, 8);
    Field one(g.lattice(), std::vector<cdouble>(g.size(), 1.0));
    const SemiclassicalOperator free(0.37, g.lattice(), std::vector<double>(g.size(), 0.0));
    for (const auto& v : apply_Lh(free, one).values) EXPECT_NEAR(std::abs(v + 1.0), 0.0, 1e-14);
    const SemiclassicalOperator damped(0.1, g.lattice(), std::vector<double>(g.size(), 1.0));
    for (const auto& v : apply_Lh(damped, one).values) EXPECT_NEAR(std::abs(v - cdouble(-1, 0.1)), 0.0, 1e-14);
}

TEST(Lh, MapMatchesDirectApplication) {
    const auto g = ProductGrid::two_torus(16, 16);
    DampingProfile p;
    const auto b = evaluate_damping(p, g);
    const SemiclassicalOperator op(0.05, b);
    std::mt19937_64 rng(9);
    const auto f = random_field(g.lattice(), rng);
    EXPECT_LT(max_abs_diff(op.map()(f), apply_Lh(op, f)), 1e-12);
}

TEST(Lh, AntiSelfAdjointPartIsDamping) {
    const auto g = ProductGrid::two_torus(16, 16);
    const auto b = evaluate_damping(DampingProfile{}, g);
    const SemiclassicalOperator op(0.1, b);
    const auto m = op.map();
    std::mt19937_64 rng(13);
    const auto f = random_field(g.lattice(), rng);
    Field af(g.lattice()), asf(g.lattice());
    m.apply(f.values, af.values);
    m.apply_adjoint(f.values, asf.values);
    for (std::size_t i = 0; i < f.size(); ++i) {
        const cdouble skew = 0.5 * (af.values[i] - asf.values[i]);
        EXPECT_LT(std::abs(skew - I * 0.1 * b.values[i].real() * f.values[i]), 1e-12);
    }
}

TEST(Lh, ComplexDampingRejected) {
    const auto g = ProductGrid::two_torus(4, 4);
    Field b(g.lattice());
    b.values[2] = I;
    EXPECT_THROW(SemiclassicalOperator(0.1, b), InputError);
    EXPECT_THROW(SemiclassicalOperator(0.0, g.lattice(), std::vector<double>(g.size())), InputError);
}

TEST(Helmholtz, Examples) {
    const auto lat = circle(32);
    Field one(lat, std::vector<cdouble>(32, 1.0));
    for (const auto& v : apply_helmholtz(HelmholtzOperator(0, lat), one).values) EXPECT_LT(std::abs(v), 1e-14);
    const auto s = Field::sample(lat, [](auto x) { return cdouble(std::sin(x[0])); });
    for (const auto& v : apply_helmholtz(HelmholtzOperator(1, lat), s).values) EXPECT_LT(std::abs(v), 1e-13);
    const auto e = Field::sample(lat, [](auto x) { return std::exp(2.0 * I * x[0]); });
    const auto r = apply_helmholtz(HelmholtzOperator(1, lat), e);
    for (std::size_t i = 0; i < e.size(); ++i) EXPECT_LT(std::abs(r.values[i] - 3.0 * e.values[i]), 1e-12);
}

TEST(Helmholtz, SelfAdjoint) {
    const auto lat = circle(24, 4.0);
    const HelmholtzOperator op(17.5, lat);
    std::mt19937_64 rng(21);
    const auto f = random_field(lat, rng), g = random_field(lat, rng);
    const cdouble a = inner(apply_helmholtz(op, f), g), b = inner(f, apply_helmholtz(op, g));
    EXPECT_LE(std::abs(a - b), 1e-12 * std::abs(a));
}

TEST(ModeParameter, Examples) {
    EXPECT_EQ(mode_parameter(1, 0), 1);
    EXPECT_NEAR(mode_parameter(0.1, 100), 0, 1e-12);
    EXPECT_NEAR(mode_parameter(0.1, 36), 64, 1e-12);
    EXPECT_THROW(mode_parameter(0, 1), InputError);
}

TEST(Fiber, RankOneField) {
    const auto g = ProductGrid(TorusFactor::circle(), TorusFactor({3.0}), {16}, {12});
    // e_0 = 1 / sqrt(2 pi); psi = e_0(p) g(q)
    const double e0 = 1 / std::sqrt(2 * pi);
    auto gq = [](double q) { return std::cos(2 * pi * q / 3.0) + 0.5; };
    const auto psi = Field::sample(g.lattice(), [&](auto x) { return cdouble(e0 * gq(x[1])); });
    const auto d = fiber_decompose(psi, g);
    for (std::size_t n = 0; n < d.coefficients.size(); ++n)
        for (std::size_t q = 0; q < 12; ++q) {
            const cdouble expect = n == 0 ? cdouble(gq(g.factor2_lattice()->coordinate(q, 0))) : cdouble(0);
            EXPECT_LT(std::abs(d.coefficients[n].values[q] - expect), 1e-13);
        }
}

TEST(Fiber, ZeroFieldAndRoundTrip) {
    const auto g = ProductGrid::two_torus(16, 8);
    const auto dz = fiber_decompose(Field(g.lattice()), g);
    for (const auto& c : dz.coefficients)
        for (const auto& v : c.values) EXPECT_EQ(v, cdouble(0));
    std::mt19937_64 rng(17);
    const auto psi = random_field(g.lattice(), rng);
    const auto back = fiber_reconstruct(fiber_decompose(psi, g), g);
    EXPECT_LT(max_abs_diff(back, psi), 1e-12 * l2_norm(psi));
}

TEST(Fiber, ParsevalAgainstDoubleSum) {
    const auto g = ProductGrid(TorusFactor({5.0}), TorusFactor::circle(), {20}, {16});
    std::mt19937_64 rng(19);
    const auto psi = random_field(g.lattice(), rng);
    const auto d = fiber_decompose(psi, g);
    double lhs = 0;
    for (const auto& c : d.coefficients) lhs += std::pow(l2_norm(c), 2);
    double rhs = 0;
    for (const auto& v : psi.values) rhs += std::norm(v);
    rhs *= g.cell_volume();
    EXPECT_NEAR(lhs, rhs, 1e-12 * rhs);

    // Independent coefficient for one mode by direct summation.
    const auto& lat1 = *g.factor1_lattice();
    const std::size_t n = 3, q = 5;
    cdouble direct = 0;
    for (std::size_t p = 0; p < 20; ++p)
        direct += psi.values[p * 16 + q] * std::exp(-I * lat1.wavenumber(n, 0) * lat1.coordinate(p, 0));
    direct *= lat1.cell_volume() / std::sqrt(lat1.volume());
    EXPECT_LT(std::abs(direct - d.coefficients[n].values[q]), 1e-12);
}

TEST(FiberOperator, BlockDiagonalizesLh) {
    const auto g = ProductGrid::two_torus(8, 16);
    const auto b = evaluate_damping(DampingProfile{}, g);
    const double h = 0.15;
    const SemiclassicalOperator op(h, b);
    std::mt19937_64 rng(23);
    const auto psi = random_field(g.lattice(), rng);
    const auto lpsi = apply_Lh(op, psi);
    const auto dpsi = fiber_decompose(psi, g), dl = fiber_decompose(lpsi, g);
    std::vector<double> b2(16);
    for (std::size_t q = 0; q < 16; ++q) b2[q] = b.values[q].real();
    for (std::size_t n = 0; n < 8; ++n) {
        const auto fo = fiber_operator(h, dpsi.eigenvalues[n], g.factor2_lattice(), b2);
        EXPECT_LT(max_abs_diff(fo(dpsi.coefficients[n]), dl.coefficients[n]), 1e-12 * l2_norm(lpsi));
    }
}

TEST(WindowPreconditioner, ExactWhenWindowCoversAllModes) {
    const auto lat = circle(32);
    std::vector<double> b(32);
    for (std::size_t i = 0; i < 32; ++i) b[i] = 1 - std::cos(lat->coordinate(i, 0));
    const auto op = fiber_operator(0.1, 25, lat, b);
    const WindowPreconditioner pre(op, 32);
    std::mt19937_64 rng(29);
    const auto x = random_field(lat, rng);
    Field y(lat), z(lat);
    op.apply(x.values, y.values);
    pre.solve(y.values, z.values);
    EXPECT_LT(max_abs_diff(z, x), 1e-10);
    op.apply_adjoint(x.values, y.values);
    pre.solve_adjoint(y.values, z.values);
    EXPECT_LT(max_abs_diff(z, x), 1e-10);
}
