#include <gtest/gtest.h>

#include <numbers>
#include <random>

#include "fd_oracle.hpp"
#include "kerrwave/geometry.hpp"

using namespace kerrwave;
constexpr double pi = std::numbers::pi;

TEST(BlackHole, RejectsExtremeAndInvalid) {
    EXPECT_THROW(BlackHole(1.0, 1.0), InputError);
    EXPECT_THROW(BlackHole(1.0, -1.2), InputError);
    EXPECT_THROW(BlackHole(0.0, 0.0), InputError);
    EXPECT_NO_THROW(BlackHole(1.0, 0.999));
}

TEST(MetricScalars, HorizonAndErgosphereExamples) {
    auto s1 = metric_scalars(BlackHole(1, 0), 2.0, pi / 2);
    EXPECT_DOUBLE_EQ(s1.delta, 0.0);
    EXPECT_DOUBLE_EQ(s1.sigma, 4.0);
    EXPECT_DOUBLE_EQ(s1.g_tt, 0.0);
    auto s2 = metric_scalars(BlackHole(1, 0.6), 1.8, 0.0);
    EXPECT_NEAR(s2.delta, 0.0, 1e-15);
    auto s3 = metric_scalars(BlackHole(1, 0.6), 2.0, pi / 2);
    EXPECT_NEAR(s3.g_tt, 0.0, 1e-15);
    EXPECT_THROW(metric_scalars(BlackHole(1, 0.6), 1.5, 1.0), InputError);
}

TEST(MetricScalars, DeltaVanishesAtHorizon) {
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> um(0.1, 10.0), ua(-0.999, 0.999);
    for (int i = 0; i < 1000; ++i) {
        double m = um(rng);
        BlackHole bh(m, ua(rng) * m);
        EXPECT_LE(std::abs(bh.delta(bh.r_plus())), 8 * std::numeric_limits<double>::epsilon() * m * m);
        EXPECT_GT(bh.r_plus(), m);
        EXPECT_LE(bh.r_plus(), 2 * m);
    }
}

TEST(MetricScalars, ErgoregionSign) {
    BlackHole bh(1, 0.9);
    for (int i = 1; i < 40; ++i) {
        double th = pi * i / 40.0;
        double re = horizon_and_ergosphere(bh, th).ergosphere_radius;
        for (int j = 1; j < 60; ++j) {
            double r = bh.r_plus() + (3.0 - bh.r_plus()) * j / 60.0;
            if (std::abs(r - re) < 1e-9) continue;
            double gtt = metric_scalars(bh, r, th).g_tt;
            if (r < re) EXPECT_LT(gtt, 0.0) << r << " " << th;
            else EXPECT_GT(gtt, 0.0) << r << " " << th;
        }
    }
}

TEST(HorizonErgo, Examples) {
    BlackHole bh(1, 0.6);
    auto p = horizon_and_ergosphere(bh, 0.0);
    EXPECT_NEAR(p.horizon_radius, 1.8, 1e-15);
    EXPECT_NEAR(p.ergosphere_radius, 1.8, 1e-15);
    EXPECT_NEAR(horizon_and_ergosphere(bh, pi / 2).ergosphere_radius, 2.0, 1e-15);
    for (double th : {0.0, 0.4, 1.3, pi}) {
        auto s = horizon_and_ergosphere(BlackHole(1, 0), th);
        EXPECT_DOUBLE_EQ(s.horizon_radius, 2.0);
        EXPECT_DOUBLE_EQ(s.ergosphere_radius, 2.0);
    }
    for (double th : {0.3, 1.0, 2.0}) EXPECT_GT(horizon_and_ergosphere(bh, th).ergosphere_radius, bh.r_plus());
}

TEST(Tortoise, SchwarzschildValues) {
    TortoiseMap map(BlackHole(1, 0));
    EXPECT_DOUBLE_EQ(map.tortoise(3.0), 3.0);
    EXPECT_LT(map.tortoise(2.0 + 1e-6), -20.0);
    EXPECT_THROW(map.tortoise(2.0), InputError);
}

TEST(Tortoise, DerivativeMatchesDefinition) {
    BlackHole bh(1, 0.9);
    TortoiseMap map(bh);
    for (double r : {1.5, 2.0, 4.0, 30.0}) {
        double h = 1e-5 * r;
        double fd = (map.tortoise(r + h) - map.tortoise(r - h)) / (2 * h);
        EXPECT_NEAR(fd, (r * r + 0.81) / bh.delta(r), 1e-7 * fd);
    }
}

TEST(Tortoise, RoundTripAndMonotone) {
    BlackHole bh(1, 0.9);
    TortoiseMap map(bh);
    EXPECT_NEAR(map.inverse(map.tortoise(5.0)), 5.0, 1e-10);
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> ly(-12.0, 9.0);
    std::vector<double> rs;
    for (int i = 0; i < 1000; ++i) rs.push_back(bh.r_plus() + std::exp(ly(rng)));
    std::sort(rs.begin(), rs.end());
    double prev = -1e300;
    for (double r : rs) {
        double u = map.tortoise(r);
        EXPECT_GT(u, prev);
        prev = u;
        double back = map.tortoise(map.inverse(u));
        EXPECT_LT(std::abs(back - u), map.tolerance() * std::max(1.0, std::abs(u)));
    }
    for (double u : {-500.0, -50.0, 0.0, 1e3, 1e6}) {
        EXPECT_NEAR(map.from_log(map.inverse_log(u)), u, 1e-12 * std::max(1.0, std::abs(u)));
    }
}

TEST(HorizonFrequency, Examples) {
    auto f = horizon_frequency(BlackHole(1, 0.6), 1, 0.1);
    EXPECT_NEAR(f.omega0, -1.0 / 6.0, 1e-15);
    EXPECT_NEAR(f.Omega, 0.1 + 1.0 / 6.0, 1e-15);
    auto g = horizon_frequency(BlackHole(1, 0), 3, 0.4);
    EXPECT_EQ(g.omega0, 0.0);
    EXPECT_EQ(g.Omega, 0.4);
    EXPECT_EQ(horizon_frequency(BlackHole(1, 0.9), 0, 0.3).omega0, 0.0);
}

TEST(IrreducibleMass, Examples) {
    EXPECT_DOUBLE_EQ(irreducible_mass(BlackHole(1, 0)), 1.0);
    EXPECT_NEAR(irreducible_mass(BlackHole(1, 0.6)), std::sqrt(0.9), 1e-15);
}

TEST(PenroseBound, Examples) {
    BlackHole bh(1, 0.6);
    EXPECT_FALSE(penrose_bound(bh, -0.01, -0.036));
    EXPECT_TRUE(penrose_bound(bh, -0.01, -0.07));
    EXPECT_THROW(penrose_bound(BlackHole(1, 0), -0.01, -0.1), InputError);
    EXPECT_THROW(penrose_bound(bh, 0.01, -0.1), InputError);
}

TEST(PenroseBound, FiniteStepKeepsIrreducibleMass) {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> ua(0.05, 0.99), ud(1e-5, 0.05), ux(0.0, 1.0);
    int admissible = 0;
    for (int i = 0; i < 20000; ++i) {
        BlackHole bh(1.0, ua(rng));
        double dM = -ud(rng);
        double sat = dM / bh.horizon_angular_velocity();
        double dJ = sat * (1.0 + 0.5 * ux(rng)) - 0.01 * ux(rng);
        if (!penrose_bound_finite(bh, dM, dJ)) continue;
        ++admissible;
        double m1 = 1.0 + dM;
        BlackHole after(m1, (bh.angular_momentum() + dJ) / m1);
        EXPECT_GE(irreducible_mass(after), irreducible_mass(bh) - 1e-15);
    }
    EXPECT_GT(admissible, 1000);
}

TEST(Metric, SchwarzschildComponent) {
    auto g = metric(BlackHole(1, 0), {0, 3.0, pi / 2, 0});
    EXPECT_NEAR(g[0][0], 1.0 - 2.0 / 3.0, 1e-15);
    EXPECT_THROW(metric(BlackHole(1, 0), {0, 3.0, 0.0, 0}), InputError);
    EXPECT_THROW(christoffel(BlackHole(1, 0), {0, 3.0, pi, 0}), InputError);
}

TEST(Christoffel, FlatLimit) {
    auto G = christoffel(BlackHole(1e-14, 0), {0, 3.0, 1.1, 0});
    EXPECT_NEAR(G[bl::r][bl::theta][bl::theta], -3.0, 1e-12);
    EXPECT_NEAR(G[bl::theta][bl::r][bl::theta], 1.0 / 3.0, 1e-12);
    EXPECT_NEAR(G[bl::r][bl::t][bl::t], 0.0, 1e-12);
}

TEST(Christoffel, MatchesFiniteDifferenceOracle) {
    std::mt19937_64 rng(3);
    BlackHole bh(1, 0.9);
    std::uniform_real_distribution<double> ur(bh.r_plus() + 0.3, 20.0), ut(0.2, pi - 0.2);
    for (int n = 0; n < 50; ++n) {
        double r = ur(rng), th = ut(rng);
        auto G = christoffel(bh, {0, r, th, 0});
        auto F = oracle::christoffel_fd(1, 0.9, r, th);
        double scale = 0;
        for (int k = 0; k < 4; ++k)
            for (int i = 0; i < 4; ++i)
                for (int j = 0; j < 4; ++j) scale = std::max(scale, std::abs(F[k][i][j]));
        for (int k = 0; k < 4; ++k)
            for (int i = 0; i < 4; ++i)
                for (int j = 0; j < 4; ++j) {
                    EXPECT_NEAR(G[k][i][j], F[k][i][j], 1e-6 * scale) << k << i << j << " r=" << r;
                    EXPECT_EQ(G[k][i][j], G[k][j][i]);
                }
    }
}

TEST(Christoffel, MetricCompatibility) {
    std::mt19937_64 rng(9);
    BlackHole bh(1, 0.7);
    std::uniform_real_distribution<double> ur(bh.r_plus() + 0.05, 50.0), ut(0.05, pi - 0.05);
    for (int n = 0; n < 200; ++n) {
        double r = ur(rng), th = ut(rng);
        auto md = metric_with_derivatives(bh, r, th);
        auto G = christoffel(bh, {0, r, th, 0});
        double gscale = 0;
        for (auto& row : md.g)
            for (double v : row) gscale = std::max(gscale, std::abs(v));
        for (int c = 0; c < 4; ++c)
            for (int a = 0; a < 4; ++a)
                for (int b = 0; b < 4; ++b) {
                    double d = c == bl::r ? md.dr[a][b] : (c == bl::theta ? md.dtheta[a][b] : 0.0);
                    for (int e = 0; e < 4; ++e) d -= G[e][c][a] * md.g[e][b] + G[e][c][b] * md.g[a][e];
                    EXPECT_LT(std::abs(d), 1e-8 * std::max(1.0, gscale / r)) << c << a << b;
                }
    }
}
