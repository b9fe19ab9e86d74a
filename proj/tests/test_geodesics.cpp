#include <gtest/gtest.h>

#include <numbers>
#include <random>

#include "kerrwave/geodesics.hpp"

using namespace kerrwave;
constexpr double pi = std::numbers::pi;

namespace {

double max_drift(const BlackHole& bh, const Trajectory& tr) {
    auto c0 = conserved_quantities(bh, tr.samples.front().state);
    double d = 0;
    for (const auto& s : tr.samples) {
        auto c = conserved_quantities(bh, s.state);
        d = std::max({d, std::abs(c.energy - c0.energy) / std::abs(c0.energy),
                      std::abs(c.angular_momentum - c0.angular_momentum) / std::abs(c0.angular_momentum)});
    }
    return d;
}

// Bound inclined orbit in Kerr used for conservation checks.
GeodesicState test_orbit(const BlackHole& bh) {
    return make_geodesic_state(bh, {0, 10.0, 1.2, 0}, 0.05, 0.01, 0.028, NormClass::timelike);
}

} // namespace

TEST(Geodesic, FlatLimitStraightRadialRay) {
    BlackHole bh(1e-12, 0);
    auto init = make_geodesic_state(bh, {0, 10.0, pi / 2, 0.3}, 0.5, 0.0, 0.0, NormClass::timelike);
    GeodesicOptions o;
    o.escape_radius = 1e20;
    auto tr = integrate_geodesic(bh, init, 50.0, 1e-12, o);
    EXPECT_EQ(tr.reason, Termination::reached_length);
    for (const auto& s : tr.samples) {
        EXPECT_NEAR(s.state.x.r, 10.0 + 0.5 * s.s, 1e-9);
        EXPECT_NEAR(s.state.x.theta, pi / 2, 1e-12);
        EXPECT_NEAR(s.state.x.phi, 0.3, 1e-12);
        EXPECT_NEAR(s.state.v[1], 0.5, 1e-10);
    }
}

TEST(Geodesic, CircularOrbitSchwarzschild) {
    BlackHole bh(1, 0);
    const double r = 6.0;
    // Oracle: radial acceleration as a function of dphi/dt, root by bisection.
    auto accel = [&](double w) {
        auto G = christoffel(bh, {0, r, pi / 2, 0});
        return G[bl::r][bl::t][bl::t] + G[bl::r][bl::phi][bl::phi] * w * w;
    };
    double lo = 0.01, hi = 1.0;
    for (int i = 0; i < 200; ++i) {
        double mid = 0.5 * (lo + hi);
        (accel(lo) * accel(mid) <= 0 ? hi : lo) = mid;
    }
    const double w = 0.5 * (lo + hi);
    EXPECT_NEAR(w, 1.0 / std::pow(r, 1.5), 1e-12);

    auto g = metric(bh, {0, r, pi / 2, 0});
    double vt = 1.0 / std::sqrt(g[0][0] + g[3][3] * w * w);
    GeodesicState init{{0, r, pi / 2, 0}, {vt, 0, 0, w * vt}};
    auto tr = integrate_geodesic(bh, init, 1e3, 1e-11);
    EXPECT_EQ(tr.reason, Termination::reached_length);
    for (const auto& s : tr.samples) EXPECT_LT(std::abs(s.state.v[1]), 1e-6);
}

TEST(Geodesic, KerrInfallReachesHorizon) {
    BlackHole bh(1, 0.9);
    auto init = make_geodesic_state(bh, {0, 8.0, 1.0, 0}, -0.3, 0.02, 0.01, NormClass::timelike);
    auto tr = integrate_geodesic(bh, init, 1e4, 1e-10);
    EXPECT_EQ(tr.reason, Termination::horizon_approach);
    EXPECT_LT(tr.samples.back().state.x.r, bh.r_plus() * (1 + 1e-6));
}

TEST(Geodesic, NullRayEscapes) {
    BlackHole bh(1, 0.5);
    auto init = make_geodesic_state(bh, {0, 20.0, 1.0, 0}, 1.0, 0.0, 0.001, NormClass::null);
    GeodesicOptions o;
    o.escape_radius = 200;
    auto tr = integrate_geodesic(bh, init, 1e4, 1e-10, o);
    EXPECT_EQ(tr.reason, Termination::escape);
    for (const auto& s : tr.samples) EXPECT_LT(std::abs(conserved_quantities(bh, s.state).norm), 1e-8);
}

TEST(Geodesic, ConservationWithinTenTol) {
    BlackHole bh(1, 0.9);
    for (double tol : {1e-8, 1e-10}) {
        auto tr = integrate_geodesic(bh, test_orbit(bh), 1e3, tol);
        ASSERT_EQ(tr.reason, Termination::reached_length);
        EXPECT_LT(max_drift(bh, tr), 10 * tol);
        for (const auto& s : tr.samples) EXPECT_LT(std::abs(conserved_quantities(bh, s.state).norm - 1.0), 10 * tol);
        for (std::size_t i = 1; i < tr.samples.size(); ++i) EXPECT_GT(tr.samples[i].s, tr.samples[i - 1].s);
    }
}

TEST(Conserved, StaticObserver) {
    BlackHole bh(1, 0.6);
    SpacetimePoint x{0, 5.0, 1.0, 0};
    auto st = make_geodesic_state(bh, x, 0, 0, 0, NormClass::timelike);
    EXPECT_NEAR(conserved_quantities(bh, st).energy, std::sqrt(metric_scalars(bh, 5.0, 1.0).g_tt), 1e-14);
}

TEST(Conserved, NegativeEnergyOnlyInErgoregion) {
    BlackHole bh(1, 0.95);
    std::mt19937_64 rng(2);
    std::uniform_real_distribution<double> ur(bh.r_plus() + 1e-3, 3.0), ut(0.3, pi - 0.3), uv(-3.0, 3.0);
    int witnesses = 0, inside_samples = 0;
    for (int i = 0; i < 20000; ++i) {
        SpacetimePoint x{0, ur(rng), ut(rng), 0};
        GeodesicState st;
        try {
            st = make_geodesic_state(bh, x, uv(rng), 0.3 * uv(rng), uv(rng), NormClass::timelike,
                                     i % 2 ? Branch::higher_energy : Branch::lower_energy);
        } catch (const InputError&) {
            continue;
        }
        double gtt = metric_scalars(bh, x.r, x.theta).g_tt;
        if (gtt < 0) ++inside_samples;
        if (conserved_quantities(bh, st).energy < 0) {
            ++witnesses;
            EXPECT_LT(gtt, 0.0);
        }
    }
    EXPECT_GT(inside_samples, 0);
    EXPECT_GT(witnesses, 0);
}

TEST(Penrose, ExampleSplit) {
    BlackHole bh(1, 0.9);
    SpacetimePoint x{0, 1.6, pi / 2, 0};
    // Azimuthal speed chosen by bisection so that the parent has unit energy.
    auto state = [&](double vphi) { return make_geodesic_state(bh, x, 0.0, 0, vphi, NormClass::timelike); };
    auto energy = [&](double vphi) { return conserved_quantities(bh, state(vphi)).energy; };
    double lo = 2.2, hi = 2.9;
    ASSERT_LT(energy(lo), 1.0);
    ASSERT_GT(energy(hi), 1.0);
    for (int i = 0; i < 200; ++i) {
        double mid = 0.5 * (lo + hi);
        (energy(mid) < 1.0 ? lo : hi) = mid;
    }
    auto parent = state(lo);
    ASSERT_NEAR(conserved_quantities(bh, parent).energy, 1.0, 1e-12);
    const double e1 = -0.05, e2 = conserved_quantities(bh, parent).energy + 0.05;
    auto rec = penrose_split(bh, parent, e1, e2);
    EXPECT_EQ(rec.delta_mass, -0.05);
    EXPECT_TRUE(rec.escaping_exceeds_parent);
    EXPECT_NEAR(rec.escaping_energy, 1.05, 1e-12);
    EXPECT_TRUE(rec.bound_satisfied);
    EXPECT_TRUE(rec.irreducible_mass_nondecreasing);

    EXPECT_THROW(penrose_split(bh, parent, 0.0, e2 - 0.05), InputError);
    EXPECT_THROW(penrose_split(bh, parent, -0.05, 1.0), InputError);
    auto outside = make_geodesic_state(bh, {0, 3.0, pi / 2, 0}, -0.5, 0, 0.0, NormClass::timelike);
    double eo = conserved_quantities(bh, outside).energy;
    EXPECT_THROW(penrose_split(bh, outside, -0.01, eo + 0.01), InputError);
}

TEST(Penrose, RandomSplitsKeepIrreducibleMass) {
    std::mt19937_64 rng(21);
    std::uniform_real_distribution<double> ua(0.2, 0.99), uu(0.0, 1.0);
    int checked = 0, splits = 0;
    for (int i = 0; i < 4000; ++i) {
        BlackHole bh(1, ua(rng));
        double re = horizon_and_ergosphere(bh, pi / 2).ergosphere_radius;
        SpacetimePoint x{0, bh.r_plus() + (re - bh.r_plus()) * (0.05 + 0.9 * uu(rng)), pi / 2, 0};
        GeodesicState parent;
        try {
            parent = make_geodesic_state(bh, x, -0.3 * uu(rng), 0, 6.0 * uu(rng), NormClass::timelike);
        } catch (const InputError&) {
            continue;
        }
        double ep = conserved_quantities(bh, parent).energy * 1e-3;  // parent of mass 1e-3 M
        double ein = -1e-3 * (0.01 + uu(rng));
        double lz = saturating_angular_momentum(bh, ein) * (1.0 + 2.0 * uu(rng) - 0.5);
        auto parent_scaled = parent;
        for (double& c : parent_scaled.v) c *= 1e-3;
        auto rec = penrose_split(bh, parent_scaled, ein, ep - ein, lz);
        ++splits;
        if (!rec.bound_satisfied) continue;
        ++checked;
        EXPECT_TRUE(rec.irreducible_mass_nondecreasing) << bh.spin() << " " << ein << " " << lz;
    }
    EXPECT_GT(splits, 1000);
    EXPECT_GT(checked, 300);
}
