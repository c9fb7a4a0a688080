#include "gsqg/velocity.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace gsqg;

namespace {

constexpr double pi = std::numbers::pi;

const KernelTable& euler_table() {
    static const KernelTable t = build_table(euler_multiplier(), 1e-6, 1e3, 128);
    return t;
}
const KernelTable& sqg_table() {
    static const KernelTable t = build_table(alpha_sqg(0.25), 1e-6, 1e3, 160);
    return t;
}

// Rankine vortex of the unit disk with x^⊥ = (x₂, −x₁): u = x^⊥/2 inside, x^⊥/(2|x|²) outside.
cplx rankine(cplx x) {
    const cplx perp(x.imag(), -x.real());
    const double r2 = std::norm(x);
    return r2 <= 1 ? 0.5 * perp : 0.5 * perp / r2;
}

RegionSet sample_theta() {
    RegionSet s;
    s.add_rectangle(0.1, 0.4, 0.0, 0.3);
    s.add_triangle({0.5, 0.1}, {0.9, 0.1}, {0.6, 0.5}, -0.7);
    s.add_disk({0.3, 0.8}, 0.15, 0.5);
    return s;
}

// Nested Gauss–Kronrod quadrature of ∫_a^b ∫_c(s1)^d(s1) f(s1, s2) ds2 ds1.
template <class F, class Lo, class Hi>
double integrate2(F f, double a, double b, Lo lo, Hi hi) {
    auto inner = [&](double s1) {
        return integrate([&](double s2) { return f(s1, s2); }, lo(s1), hi(s1), 1e-12, 25).value;
    };
    return integrate(inner, a, b, 1e-11, 25).value;
}

}  // namespace

TEST(VelocityArea, RankineOracle) {
    RegionSet disk;
    disk.add_disk(0, 1);
    for (double r : {0.0, 0.3, 0.99, 1.0, 1.01, 2.0, 5.0})
        for (double phi : {0.0, 0.7, 2.0, 4.4}) {
            const cplx x = std::polar(r, phi);
            const auto v = velocity_area(x, disk, euler_table(), Domain::whole_plane);
            EXPECT_NEAR(std::abs(v.u - rankine(x)), 0.0, 1e-9) << r << " " << phi;
            EXPECT_LE(v.error, 1e-8);
        }
    const auto on = velocity_area(std::polar(1.0, 1.1), disk, euler_table(), Domain::whole_plane).u;
    EXPECT_NEAR(std::abs(on), 0.5, 1e-9);
    EXPECT_NEAR(dot(on, std::polar(1.0, 1.1)), 0.0, 1e-9);
}

TEST(VelocityArea, RectangleMatchesDirectDoubleIntegral) {
    RegionSet s;
    s.add_rectangle(0.2, 1.0, 0.3, 0.7);
    const cplx x(1.4, 0.1);
    const auto v = velocity_area(x, s, sqg_table(), Domain::whole_plane);
    // u = ∫∫ (x₂−y₂, −(x₁−y₁)) G(ρ)/ρ² dy away from the singularity
    auto k = [&](double y1, double y2, bool first) {
        const double d1 = x.real() - y1, d2 = x.imag() - y2, r2 = d1 * d1 + d2 * d2;
        return (first ? d2 : -d1) * sqg_table().G(std::sqrt(r2), true) / r2;
    };
    auto c = [](double) { return 0.3; };
    auto d = [](double) { return 0.7; };
    const double u1 = integrate2([&](double a, double b) { return k(a, b, true); }, 0.2, 1.0, c, d);
    const double u2 = integrate2([&](double a, double b) { return k(a, b, false); }, 0.2, 1.0, c, d);
    EXPECT_NEAR(v.u.real(), u1, 1e-9 * std::abs(v.u));
    EXPECT_NEAR(v.u.imag(), u2, 1e-9 * std::abs(v.u));
}

TEST(VelocityArea, WallIsImpermeable) {
    const auto theta = sample_theta();
    double scale = 0;
    std::vector<cplx> u;
    for (double x1 = -0.5; x1 <= 1.5; x1 += 0.1) {
        u.push_back(velocity_area({x1, 0.0}, theta, sqg_table(), Domain::half_plane).u);
        scale = std::max(scale, std::abs(u.back()));
    }
    for (auto v : u) EXPECT_LE(std::abs(v.imag()), 1e-8 * scale);
}

TEST(VelocityArea, OddTwinSymmetry) {
    auto theta = sample_theta();
    theta.odd_in_x1 = true;
    for (double x2 : {0.05, 0.2, 0.6, 1.3}) {
        const auto a = velocity_area({0.0, x2}, theta, sqg_table(), Domain::half_plane).u;
        EXPECT_NEAR(a.real(), 0.0, 1e-9 * std::abs(a));
        const auto l = velocity_area({-0.35, x2}, theta, sqg_table(), Domain::half_plane).u;
        const auto r = velocity_area({0.35, x2}, theta, sqg_table(), Domain::half_plane).u;
        EXPECT_NEAR(l.imag(), r.imag(), 1e-9 * std::abs(r));
        EXPECT_NEAR(l.real(), -r.real(), 1e-9 * std::abs(r));
    }
}

TEST(VelocityArea, HomogeneousOfDegreeOne) {
    auto theta = sample_theta();
    auto twice = theta;
    for (auto& c : twice.components) c.weight *= 2;
    for (cplx x : {cplx(0.2, 0.2), cplx(0.7, 0.05), cplx(1.2, 0.9)}) {
        const auto a = velocity_area(x, theta, sqg_table(), Domain::half_plane).u;
        const auto b = velocity_area(x, twice, sqg_table(), Domain::half_plane).u;
        EXPECT_NEAR(std::abs(b - 2.0 * a), 0.0, 1e-15 * std::abs(a));
    }
}

TEST(VelocityArea, BoundedByNormsOfTheta) {
    // |u| ≤ 2π P(c₀) ‖θ‖∞ + 4 G(c₀)/c₀ ‖θ‖₁ when G/ρ is non-increasing (four odd copies).
    const auto& t = sqg_table();
    const double c0 = 1.0;
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> U(0, 1);
    for (int trial = 0; trial < 5; ++trial) {
        RegionSet s;
        s.odd_in_x1 = true;
        const double x0 = 0.05 + 0.3 * U(rng), y0 = 0.3 * U(rng);
        s.add_rectangle(x0, x0 + 0.1 + U(rng), y0, y0 + 0.1 + U(rng), 0.2 + U(rng));
        s.add_disk({2.5 + U(rng), 1.5}, 0.2 + 0.3 * U(rng), -0.5);
        const double bound = 2 * pi * t.P(c0) * s.linf() + 4 * t.G(c0) / c0 * s.l1();
        for (double x1 = 0; x1 < 3.5; x1 += 0.25)
            for (double x2 = 0; x2 < 2.5; x2 += 0.25)
                EXPECT_LE(std::abs(velocity_area({x1, x2}, s, t, Domain::half_plane).u), bound);
    }
}

TEST(VelocityArea, HoelderContinuity) {
    // |u(x) − u(z)| ≤ C|x − z|^{1−α}: the quotient does not grow as pairs shrink.
    RegionSet s;
    s.add_rectangle(0.2, 0.8, 0.0, 0.5);
    s.add_triangle({0.9, 0.1}, {1.4, 0.1}, {1.0, 0.7});
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> U(0, 1);
    const std::vector<cplx> anchors = {{0.2, 0.25}, {0.8, 0.5}, {0.5, 0.5}, {0.9, 0.1}, {1.0, 0.7}, {0.2, 0.0}};
    double q_small = 0, q_large = 0;
    for (int i = 0; i < 1000; ++i) {
        const cplx a = anchors[i % anchors.size()] + std::polar(1e-3 * U(rng), 2 * pi * U(rng));
        const double r = std::pow(10.0, -6 + 4 * U(rng));
        cplx z = a + std::polar(r, 2 * pi * U(rng));
        if (z.imag() < 0) z = std::conj(z);
        const cplx x(a.real(), std::abs(a.imag()));
        const double d = std::abs(x - z);
        if (d == 0) continue;
        const auto ux = velocity_area(x, s, sqg_table(), Domain::half_plane).u;
        const auto uz = velocity_area(z, s, sqg_table(), Domain::half_plane).u;
        const double q = std::abs(ux - uz) / std::pow(d, 0.75);
        (d < 1e-4 ? q_small : q_large) = std::max(d < 1e-4 ? q_small : q_large, q);
    }
    EXPECT_GT(q_large, 0);
    EXPECT_LE(q_small, 2 * q_large);
}

TEST(VelocityArea, InvalidRegions) {
    RegionSet s;
    EXPECT_THROW(s.add_rectangle(1, 0, 0, 1), ConfigError);
    EXPECT_THROW(s.add_disk(0, 0), ConfigError);
    EXPECT_THROW(s.add_polygon({{0, 0}, {1, 0}, {0.2, 0.2}, {0, 1}}), ConfigError);  // not convex
    s.add_rectangle(0, 1, 0, 1);
    s.add_rectangle(0.5, 2, 0.5, 2);
    EXPECT_THROW(validate(s, Domain::whole_plane), ConfigError);
    RegionSet t;
    t.add_rectangle(0, 1, 0, 1);
    t.add_rectangle(1, 2, 0, 1);  // shared edge is fine
    EXPECT_NO_THROW(validate(t, Domain::half_plane));
    t.add_disk({3, 0.1}, 0.5);
    EXPECT_THROW(validate(t, Domain::half_plane), ConfigError);
    EXPECT_THROW(velocity_area({0.5, -0.1}, t, sqg_table(), Domain::half_plane), ConfigError);
    VelocityOptions strict;
    strict.tol = 1e-14;
    strict.max_depth = 0;
    RegionSet d;
    d.add_disk(0, 1);
    EXPECT_THROW(velocity_area({1.0001, 0.0}, d, sqg_table(), Domain::whole_plane, strict), NumericError);
}

TEST(VelocityContour, AgreesWithAreaOnDisks) {
    RegionSet disk;
    disk.add_disk(0, 1);
    const auto c = circle(0, 1, 256);
    const auto sys = make_system({c}, Domain::whole_plane, false);
    for (const auto* t : {&euler_table(), &sqg_table()}) {
        const double tol = t == &euler_table() ? 1e-4 : 1e-3;
        for (int i = 0; i < 12; ++i) {
            const cplx x = std::polar(1.2 + 0.15 * i, 0.5 * i);
            const cplx a = velocity_area(x, disk, *t, Domain::whole_plane).u;
            const cplx b = velocity_contour(x, sys, *t);
            EXPECT_LE(std::abs(a - b), tol * std::abs(a)) << i;
        }
    }
}

TEST(VelocityContour, AgreesWithAreaOnTheHalfPlane) {
    RegionSet disk;
    disk.add_disk({0.3, 1.5}, 1);
    const auto sys = make_system({circle({0.3, 1.5}, 1, 256)}, Domain::half_plane, false);
    for (int i = 0; i < 12; ++i) {
        const cplx x(-2.0 + 0.4 * i, 0.05 + 0.02 * i);
        const cplx a = velocity_area(x, disk, sqg_table(), Domain::half_plane).u;
        EXPECT_LE(std::abs(a - velocity_contour(x, sys, sqg_table())), 1e-3 * std::abs(a)) << i;
    }
}

TEST(VelocityContour, PointVortexFarField) {
    const auto sys = make_system({circle(0, 1, 256)}, Domain::whole_plane, false);
    for (double phi : {0.0, 1.0, 2.5}) {
        const cplx u = velocity_contour(std::polar(10.0, phi), sys, euler_table());
        EXPECT_NEAR(std::abs(u), pi / (2 * pi * 10), 0.01 * 0.05);
    }
}

TEST(VelocityContour, RejectsPointsNearTheContour) {
    const auto sys = make_system({circle(0, 1, 64)}, Domain::whole_plane, false);
    EXPECT_THROW(velocity_contour({1.05, 0}, sys, euler_table()), ContactError);
}

TEST(KernelSplit, DecompositionAndReflection) {
    const cplx x(0.2, 0.3), y(0.05, 0.4);
    const auto k = kernel_split(x, y, sqg_table());
    EXPECT_DOUBLE_EQ(k.K1(), k.K11 - k.K12 - k.K13 + k.K14);
    EXPECT_DOUBLE_EQ(k.K2(), k.K21 + k.K22 - k.K23 - k.K24);
    // reflecting y in the wall turns the direct term into the image term
    const auto r = kernel_split(x, std::conj(y), sqg_table());
    EXPECT_NEAR(k.K14, -r.K11, 1e-14 * std::abs(k.K14));
    EXPECT_NEAR(k.K13, -r.K12, 1e-14 * std::abs(k.K13));
    EXPECT_NEAR(k.K24, r.K21, 1e-14 * std::abs(k.K24));
    EXPECT_THROW(kernel_split(x, x, sqg_table()), NumericError);
    EXPECT_THROW(kernel_split({0.3, 0}, {0.3, 0}, sqg_table()), NumericError);
}

TEST(KernelSplit, SignPropertiesAcrossTheCatalog) {
    struct Case {
        const char* name;
        Multiplier m;
    };
    const std::vector<Case> cases = {
        {"euler", euler_multiplier()},          {"alpha_sqg", alpha_sqg(0.5)},
        {"qgsw", qgsw(1.0)},                    {"log_power", log_power(1.0)},
        {"loglog_power", loglog_power(1.0)},    {"logloglog", logloglog(1.0)},
        {"alpha_log", alpha_log(0.3, 1.0, 1.0)}, {"rational_alpha", rational_alpha(0.4, 1.0, 1.0)},
    };
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> U(0, 1);
    for (const auto& c : cases) {
        const auto t = build_table(c.m, 1e-6, 10, 192);
        const double c0 = monotone_radius(t, 1.0);
        ASSERT_GT(c0, 1e-3) << c.name;
        int checked = 0;
        for (int i = 0; i < 10000; ++i) {
            // log-uniform radii so that small scales are sampled too
            const cplx x = std::polar(0.5 * c0 * std::pow(1e-4, U(rng)), 0.5 * pi * U(rng));
            const cplx y = std::polar(0.5 * c0 * std::pow(1e-4, U(rng)), 0.5 * pi * U(rng));
            if (std::abs(x + y) > c0 || std::abs(x - y) < 1e-12) continue;
            const auto k = kernel_split(x, y, t);
            EXPECT_TRUE(k.property_i()) << c.name;
            EXPECT_TRUE(k.property_ii()) << c.name;
            EXPECT_TRUE(k.property_iii()) << c.name;
            EXPECT_TRUE(k.property_iv()) << c.name;
            ++checked;
        }
        EXPECT_GT(checked, 9000) << c.name;
    }
}

TEST(SplitVelocities, PartsSumToTheVelocity) {
    auto theta = sample_theta();
    theta.odd_in_x1 = true;
    for (cplx x : {cplx(0.05, 0.05), cplx(0.25, 0.2), cplx(0.6, 0.3), cplx(0.3, 0.8), cplx(0.0, 0.4)}) {
        const auto s = split_velocities(x, theta, sqg_table());
        const auto u = velocity_area(x, theta, sqg_table(), Domain::half_plane).u;
        EXPECT_NEAR(s.u1_bad + s.u1_good, u.real(), 1e-6);
        EXPECT_NEAR(s.u2_bad + s.u2_good, u.imag(), 1e-6);
    }
    RegionSet plain = sample_theta();
    EXPECT_THROW(split_velocities({0.1, 0.1}, plain, sqg_table()), ConfigError);
}

TEST(SplitVelocities, BadPartsObeyTheirBounds) {
    // 0 ≤ θ ≤ 1 on (0, c₀/2)², odd in x₁; x₁, x₂ ≤ c₀/4.
    const auto& t = sqg_table();
    const double c0 = 1.0, cs = c0 / 4;
    RegionSet theta;
    theta.odd_in_x1 = true;
    theta.add_rectangle(0.0, 0.3, 0.0, 0.2);
    theta.add_triangle({0.3, 0.0}, {0.45, 0.0}, {0.3, 0.4}, 0.6);
    theta.add_disk({0.2, 0.35}, 0.1, 0.8);
    validate(theta, Domain::half_plane);
    // ∫∫_{(0,a)×(0,b)} (s₁, s₂)/|s|² G(|s|) ds in polar form with the closed-form
    // α-SQG antiderivative P(ρ) = α c_α ρ^{1−α}/(1−α)
    const double al = 0.25;
    auto P = [&](double r) { return al * c_alpha(al) * std::pow(r, 1 - al) / (1 - al); };
    auto rect = [&](double a, double b, bool second) {
        const double phi_c = std::atan2(b, a);
        auto f = [&](double phi) {
            const double rmax = phi < phi_c ? a / std::cos(phi) : b / std::sin(phi);
            return (second ? std::sin(phi) : std::cos(phi)) * P(rmax);
        };
        return integrate(f, 0, phi_c, 1e-13).value + integrate(f, phi_c, pi / 2, 1e-13).value;
    };
    for (cplx x : {cplx(0.01, 0.02), cplx(0.1, 0.05), cplx(0.2, 0.2), cplx(cs, cs), cplx(0.05, 0.24)}) {
        const auto s = split_velocities(x, theta, t);
        const double b1 = 2 * rect(x.real(), x.imag(), true);
        const double b2 = -2 * rect(x.real(), x.imag(), false);
        EXPECT_LE(s.u1_bad, b1 + 1e-9) << x;
        EXPECT_GE(s.u2_bad, b2 - 1e-9) << x;
    }
}

TEST(VelocityArea, ManyMatchesSingle) {
    const auto theta = sample_theta();
    std::vector<cplx> xs;
    for (int i = 0; i < 8; ++i) xs.push_back({0.15 * i, 0.1 * i});
    const auto many = velocity_area_many(xs, theta, sqg_table(), Domain::half_plane, 3);
    for (std::size_t i = 0; i < xs.size(); ++i)
        EXPECT_EQ(many[i].u, velocity_area(xs[i], theta, sqg_table(), Domain::half_plane).u);
}
