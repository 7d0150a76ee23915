#include <tubewave/fft.hpp>
#include <tubewave/geometry.hpp>

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

using namespace tubewave;

namespace {
constexpr double pi = std::numbers::pi;

double brute_distance_1d(double q, double q0, double l) {
    double best = INFINITY;
    for (int w = -1; w <= 1; ++w) best = std::min(best, std::abs(q - q0 + w * l));
    return best;
}
}  // namespace

TEST(TorusDistance, IdentityIsZero) {
    const auto c = TorusFactor::circle();
    const std::vector<double> q{1.3};
    EXPECT_EQ(torus_distance(q, q, c), 0.0);
}

TEST(TorusDistance, AntipodalPoint) {
    const auto c = TorusFactor::circle();
    EXPECT_DOUBLE_EQ(torus_distance(std::vector<double>{0.0}, std::vector<double>{pi}, c), pi);
}

TEST(TorusDistance, WrapMatchesBruteForce) {
    const auto c = TorusFactor::circle();
    const double d = torus_distance(std::vector<double>{0.1}, std::vector<double>{6.2}, c);
    EXPECT_NEAR(d, brute_distance_1d(0.1, 6.2, 2 * pi), 1e-15);
    EXPECT_NEAR(d, 0.18318530717958623, 1e-14);
}

TEST(TorusDistance, DimensionMismatchThrows) {
    const TorusFactor f({1.0, 2.0});
    EXPECT_THROW(torus_distance(std::vector<double>{0.0}, std::vector<double>{0.0, 0.0}, f), InputError);
}

TEST(TorusDistance, MetricAxiomsOnRandomTriples) {
    const TorusFactor f({2 * pi, 3.0});
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> u1(0, 2 * pi), u2(0, 3.0);
    for (int t = 0; t < 2000; ++t) {
        std::vector<double> a{u1(rng), u2(rng)}, b{u1(rng), u2(rng)}, c{u1(rng), u2(rng)};
        const double ab = torus_distance(a, b, f), ba = torus_distance(b, a, f);
        EXPECT_DOUBLE_EQ(ab, ba);
        EXPECT_LE(ab, torus_distance(a, c, f) + torus_distance(c, b, f) + 1e-12);
        const double brute = std::hypot(brute_distance_1d(a[0], b[0], 2 * pi), brute_distance_1d(a[1], b[1], 3.0));
        EXPECT_NEAR(ab, brute, 1e-12);
    }
}

TEST(TorusFactor, RejectsBadCircumference) {
    EXPECT_THROW(TorusFactor({-1.0}), InputError);
    EXPECT_THROW(TorusFactor(std::vector<double>{}), InputError);
}

TEST(ProductGrid, CountsAndVolume) {
    const ProductGrid g(TorusFactor({2 * pi}), TorusFactor({3.0, 5.0}), {16}, {8, 12});
    EXPECT_EQ(g.size(), 16u * 8u * 12u);
    EXPECT_NEAR(g.cell_volume() * static_cast<double>(g.size()), 2 * pi * 15.0, 1e-12);
    Field one(g.lattice(), std::vector<cdouble>(g.size(), 1.0));
    EXPECT_NEAR(std::pow(l2_norm(one), 2), 2 * pi * 15.0, 1e-11);
}

TEST(ProductGrid, OddResolutionRejected) {
    EXPECT_THROW(ProductGrid::two_torus(15, 16), InputError);
    EXPECT_THROW(ProductGrid::two_torus(16, 0), InputError);
}

TEST(ProductGrid, JsonRoundTrip) {
    const ProductGrid g(TorusFactor({2 * pi}), TorusFactor({3.0, 5.0}), {16}, {8, 12});
    const auto back = product_grid_from_json(to_json(g));
    EXPECT_TRUE(back == g);
    auto bad = to_json(g);
    bad["factor1"]["dim"] = 3;
    EXPECT_THROW(product_grid_from_json(bad), InputError);
    EXPECT_THROW(product_grid_from_json(nlohmann::json::object()), InputError);
}

TEST(TubeMask, BetaAtDiameterIsWholeGrid) {
    const auto g = ProductGrid::two_torus(8, 16);
    const auto t = tube_mask(g, std::vector<double>{0.0}, g.factor2().diameter());
    EXPECT_EQ(t.count(), g.size());
}

TEST(TubeMask, TinyBetaKeepsCenterColumn) {
    const auto g = ProductGrid::two_torus(8, 16);
    const double h2 = g.factor2_lattice()->spacing(0);
    const double q0 = 3 * h2;
    const auto t = tube_mask(g, std::vector<double>{q0}, 0.4 * h2);
    EXPECT_EQ(t.count(), 8u);
    for (std::size_t i = 0; i < g.size(); ++i) EXPECT_EQ(t.mask[i] != 0, g.factor2_node(i) == 3);
}

TEST(TubeMask, CountMatchesExhaustiveScan) {
    const auto g = ProductGrid::two_torus(32, 64);
    const auto t = tube_mask(g, std::vector<double>{0.0}, pi / 2);
    std::size_t brute = 0;
    for (std::size_t i = 0; i < g.size(); ++i) {
        const double q = g.lattice()->coordinate(i, 1);
        if (std::min(q, 2 * pi - q) < pi / 2) ++brute;
    }
    EXPECT_EQ(t.count(), brute);
}

TEST(TubeMask, BoundaryNodeExcluded) {
    const auto g = ProductGrid::two_torus(4, 8);
    const double h2 = g.factor2_lattice()->spacing(0);
    const auto t = tube_mask(g, std::vector<double>{0.0}, 2 * h2);
    // nodes at distance 0 and h2 (three columns), not 2 h2
    EXPECT_EQ(t.count(), 4u * 3u);
}

TEST(TubeMask, NonPositiveBetaThrows) {
    const auto g = ProductGrid::two_torus(4, 8);
    EXPECT_THROW(tube_mask(g, std::vector<double>{0.0}, 0.0), InputError);
}

TEST(RegionNorm, ZeroAndConstant) {
    const auto g = ProductGrid::two_torus(16, 16);
    Field zero(g.lattice());
    EXPECT_EQ(region_l2_norm(zero, TubeRegion::whole(g.lattice())), 0.0);
    Field one(g.lattice(), std::vector<cdouble>(g.size(), 1.0));
    EXPECT_NEAR(region_l2_norm(one, TubeRegion::whole(g.lattice())), 2 * pi, 1e-13);
}

TEST(RegionNorm, GridMismatchThrows) {
    const auto a = ProductGrid::two_torus(16, 16), b = ProductGrid::two_torus(16, 32);
    Field f(a.lattice());
    EXPECT_THROW(region_l2_norm(f, TubeRegion::whole(b.lattice())), InputError);
}

TEST(RegionNorm, SmoothBumpHalfTubeMatchesRefinedQuadrature) {
    auto bump = [](std::span<const double> x) -> cdouble {
        return std::exp(-4 * (1 - std::cos(x[1]))) * (1.5 + std::cos(x[0]));
    };
    auto half_tube_norm = [&](int n) {
        const auto g = ProductGrid::two_torus(n, n);
        const auto f = Field::sample(g.lattice(), bump);
        return region_l2_norm(f, tube_mask(g, std::vector<double>{0.0}, pi / 2));
    };
    const double coarse = half_tube_norm(256), fine = half_tube_norm(512);
    EXPECT_NEAR(coarse / fine, 1.0, 1e-3);
}

TEST(RegionNorm, ParsevalOnWholeGrid) {
    const auto g = ProductGrid(TorusFactor({2 * pi}), TorusFactor({3.0}), {32}, {24});
    std::mt19937_64 rng(3);
    std::normal_distribution<double> nd;
    Field f(g.lattice());
    for (auto& v : f.values) v = {nd(rng), nd(rng)};
    const auto c = fft::coefficients(f);
    double s = 0;
    for (const auto& x : c) s += std::norm(x);
    const double lhs = std::pow(region_l2_norm(f, TubeRegion::whole(g.lattice())), 2);
    EXPECT_NEAR(lhs, g.lattice()->volume() * s, 1e-12 * lhs);
}

TEST(RegionNorm, TubeNesting) {
    const auto g = ProductGrid::two_torus(16, 64);
    std::mt19937_64 rng(11);
    std::normal_distribution<double> nd;
    for (int t = 0; t < 50; ++t) {
        Field f(g.lattice());
        for (auto& v : f.values) v = {nd(rng), nd(rng)};
        double prev = 0;
        for (double beta : {0.1, 0.3, 0.7, 1.5, 3.0, 4.0}) {
            const double r = region_l2_norm(f, tube_mask(g, std::vector<double>{1.0}, beta));
            EXPECT_GE(r, prev);
            prev = r;
        }
    }
}

TEST(Field, SizeMismatchThrows) {
    const auto g = ProductGrid::two_torus(4, 4);
    EXPECT_THROW(Field(g.lattice(), std::vector<cdouble>(3)), InputError);
}
