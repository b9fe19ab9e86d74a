#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "errors.hpp"
#include "geometry.hpp"
#include "ode.hpp"
#include "quadrature.hpp"

namespace kerrwave {

using FourVector = std::array<double, 4>;

struct GeodesicState {
    SpacetimePoint x;
    FourVector v;  // dx/ds in (t, r, theta, phi) order
};

enum class NormClass { timelike, null };

enum class Termination { reached_length, horizon_approach, escape };

inline const char* to_string(Termination t) {
    switch (t) {
        case Termination::reached_length: return "reached_length";
        case Termination::horizon_approach: return "horizon_approach";
        case Termination::escape: return "escape";
    }
    return "unknown";
}

struct TrajectorySample {
    double s;
    GeodesicState state;
};

struct Trajectory {
    std::vector<TrajectorySample> samples;
    Termination reason = Termination::reached_length;
    std::size_t steps = 0;
};

struct GeodesicOptions {
    double escape_radius = 1e4;  // in units of M
    double sample_ds = 0.0;      // 0: 1000 samples over s_max
};

class GeodesicFailure : public NumericalFailure {
public:
    GeodesicFailure(const std::string& what, double s, GeodesicState last)
        : NumericalFailure(what, s), last_(last) {}
    const GeodesicState& last_state() const { return last_; }

private:
    GeodesicState last_;
};

inline double inner(const Matrix4& g, const FourVector& a, const FourVector& b) {
    double acc = 0.0;
    for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j) acc += g[i][j] * a[i] * b[j];
    return acc;
}

struct ConservedQuantities {
    double energy;
    double angular_momentum;  // L_z
    double norm;
};

inline ConservedQuantities conserved_quantities(const BlackHole& bh, const GeodesicState& st) {
    const Matrix4 g = metric(bh, st.x);
    double e = 0.0, l = 0.0;
    for (int m = 0; m < 4; ++m) {
        e += g[bl::t][m] * st.v[m];
        l -= g[bl::phi][m] * st.v[m];
    }
    return {e, l, inner(g, st.v, st.v)};
}

// Inside the ergoregion both roots for v^t can be future-directed; they differ in energy.
enum class Branch { higher_energy, lower_energy };

// Completes (v^r, v^theta, v^phi) with the future-directed v^t giving the norm class.
inline GeodesicState make_geodesic_state(const BlackHole& bh, const SpacetimePoint& x, double vr, double vtheta,
                                         double vphi, NormClass cls, Branch branch = Branch::higher_energy) {
    const Matrix4 g = metric(bh, x);
    const double target = cls == NormClass::timelike ? 1.0 : 0.0;
    const double A = g[bl::t][bl::t];
    const double B = 2.0 * g[bl::t][bl::phi] * vphi;
    const double C = g[bl::r][bl::r] * vr * vr + g[bl::theta][bl::theta] * vtheta * vtheta +
                     g[bl::phi][bl::phi] * vphi * vphi - target;
    // Zero-angular-momentum observer direction fixes the time orientation.
    const FourVector zamo{1.0, 0.0, 0.0, -g[bl::t][bl::phi] / g[bl::phi][bl::phi]};
    std::vector<double> roots;
    if (std::abs(A) < 1e-14) {
        require(B != 0.0, "no future-directed completion of the velocity exists");
        roots.push_back(-C / B);
    } else {
        const double disc = B * B - 4.0 * A * C;
        require(disc >= 0.0, "spatial velocity too large for the requested norm class");
        const double sq = std::sqrt(disc);
        const double q = -0.5 * (B + std::copysign(sq, B));
        roots.push_back(q / A);
        if (q != 0.0) roots.push_back(C / q);
    }
    std::optional<GeodesicState> best;
    double best_e = 0.0;
    for (double vt : roots) {
        FourVector v{vt, vr, vtheta, vphi};
        if (!(inner(g, v, zamo) > 0.0)) continue;
        const double e = g[bl::t][bl::t] * vt + g[bl::t][bl::phi] * vphi;
        const bool better = branch == Branch::higher_energy ? e > best_e : e < best_e;
        if (!best || better) {
            best = GeodesicState{x, v};
            best_e = e;
        }
    }
    if (!best) throw InputError("no future-directed completion of the velocity exists");
    return *best;
}

namespace detail {
using GeoVec = OdeVec<double, 8>;

inline GeoVec geodesic_rhs(const BlackHole& bh, const GeoVec& y) {
    const auto md = metric_with_derivatives(bh, y[1], y[2]);
    const Connection G = connection_from(md.g, md.dr, md.dtheta);
    GeoVec d{};
    for (int i = 0; i < 4; ++i) d[i] = y[4 + i];
    for (int k = 0; k < 4; ++k) {
        double acc = 0.0;
        for (int i = 0; i < 4; ++i)
            for (int j = 0; j < 4; ++j) acc += G[k][i][j] * y[4 + i] * y[4 + j];
        d[4 + k] = -acc;
    }
    return d;
}

inline GeodesicState unpack(const GeoVec& y) { return {{y[0], y[1], y[2], y[3]}, {y[4], y[5], y[6], y[7]}}; }
} // namespace detail

// Affine-parametrized geodesic with adaptive Dormand-Prince steps; samples on a fixed s-grid.
inline Trajectory integrate_geodesic(const BlackHole& bh, const GeodesicState& init, double s_max, double tol,
                                     const GeodesicOptions& opts = {}) {
    check_exterior(bh, init.x);
    require(tol > 0.0, "tolerance must be positive");
    require(s_max > 0.0, "affine length must be positive");
    const double ds = opts.sample_ds > 0.0 ? opts.sample_ds : s_max / 1000.0;
    const std::size_t n = static_cast<std::size_t>(std::ceil(s_max / ds - 1e-9));
    std::vector<double> grid;
    for (std::size_t i = 0; i <= n; ++i) grid.push_back(std::min(s_max, ds * static_cast<double>(i)));

    const double r_stop = bh.r_plus() * (1.0 + 1e-6);
    const double r_esc = opts.escape_radius * bh.mass();
    detail::GeoVec y0{init.x.t, init.x.r, init.x.theta, init.x.phi, init.v[0], init.v[1], init.v[2], init.v[3]};

    Trajectory traj;
    OdeOptions o;
    // Per-step target tol/10; the accumulated drift then stays near tol.
    o.rtol = 0.1 * tol;
    o.atol = 0.1 * tol;
    o.max_norm = true;
    auto rhs = [&](double, const detail::GeoVec& y) { return detail::geodesic_rhs(bh, y); };
    auto on_out = [&](double s, const detail::GeoVec& y) {
        traj.samples.push_back({s, detail::unpack(y)});
        return true;
    };
    auto on_step = [&](double s, const detail::GeoVec& y) {
        if (y[1] < r_stop) {
            traj.reason = Termination::horizon_approach;
        } else if (y[1] > r_esc) {
            traj.reason = Termination::escape;
        } else {
            return true;
        }
        if (traj.samples.empty() || traj.samples.back().s < s) traj.samples.push_back({s, detail::unpack(y)});
        return false;
    };
    auto res = integrate_dp45<double, 8>(rhs, 0.0, y0, grid, o, on_out, on_step);
    traj.steps = res.accepted;
    if (res.status == OdeStatus::step_underflow || res.status == OdeStatus::too_many_steps) {
        throw GeodesicFailure("geodesic step size underflow", res.s, detail::unpack(res.y));
    }
    return traj;
}

struct PenroseRecord {
    double parent_energy;
    double escaping_energy;
    double infalling_energy;
    double infalling_angular_momentum;
    double delta_mass;              // = infalling energy
    double delta_angular_momentum;  // = infalling L_z (ledger convention)
    bool bound_initial;             // bound with coefficients of the initial hole
    bool bound_satisfied;           // bound on both the initial and the final hole
    double irreducible_mass_before;
    double irreducible_mass_after;
    bool irreducible_mass_nondecreasing;
    bool escaping_exceeds_parent;
};

// Angular momentum change that saturates the bound on the post-absorption hole.
inline double saturating_angular_momentum(const BlackHole& bh, double dM) {
    const double m1 = bh.mass() + dM;
    double dJ = dM / bh.horizon_angular_velocity();
    for (int it = 0; it < 100; ++it) {
        const double a1 = (bh.angular_momentum() + dJ) / m1;
        require(a1 > 0.0 && a1 < m1, "extraction step leaves the admissible spin range");
        const double next = dM / BlackHole(m1, a1).horizon_angular_velocity();
        if (std::abs(next - dJ) <= 1e-15 * std::abs(dJ)) {
            dJ = next;
            break;
        }
        dJ = next;
    }
    return dJ * (1.0 + 1e-12);
}

inline PenroseRecord penrose_split(const BlackHole& bh, const GeodesicState& parent, double e1, double e2,
                                   std::optional<double> infall_lz = std::nullopt) {
    require(bh.spin() > 0.0, "penrose_split needs a > 0");
    const auto cq = conserved_quantities(bh, parent);
    require(std::min(e1, e2) < 0.0, "one fragment must carry strictly negative energy");
    const double scale = std::max({std::abs(cq.energy), std::abs(e1), std::abs(e2)});
    require(std::abs(e1 + e2 - cq.energy) <= 1e-9 * scale, "fragment energies must sum to the parent energy");
    const double gtt = metric_scalars(bh, parent.x.r, parent.x.theta).g_tt;
    require(gtt < 0.0, "negative fragment energy is impossible outside the ergosphere");

    PenroseRecord rec{};
    rec.parent_energy = cq.energy;
    rec.infalling_energy = std::min(e1, e2);
    rec.escaping_energy = std::max(e1, e2);
    rec.delta_mass = rec.infalling_energy;
    rec.infalling_angular_momentum = infall_lz ? *infall_lz : saturating_angular_momentum(bh, rec.delta_mass);
    rec.delta_angular_momentum = rec.infalling_angular_momentum;
    rec.bound_initial = penrose_bound(bh, rec.delta_mass, rec.delta_angular_momentum);
    rec.bound_satisfied = penrose_bound_finite(bh, rec.delta_mass, rec.delta_angular_momentum);
    rec.irreducible_mass_before = irreducible_mass(bh);
    const double m1 = bh.mass() + rec.delta_mass;
    require(m1 > 0.0, "infalling energy exceeds the hole's mass");
    const double a1 = (bh.angular_momentum() + rec.delta_angular_momentum) / m1;
    require(std::abs(a1) < m1, "split would over-spin the hole");
    rec.irreducible_mass_after = irreducible_mass(BlackHole(m1, a1));
    rec.irreducible_mass_nondecreasing = rec.irreducible_mass_after >= rec.irreducible_mass_before;
    rec.escaping_exceeds_parent = rec.escaping_energy > rec.parent_energy;
    return rec;
}

} // namespace kerrwave
