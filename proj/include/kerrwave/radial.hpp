#pragma once

// Radial equation -phi'' + V(u) phi = 0 in the tortoise coordinate u, with
// phi = sqrt(r^2 + a^2) R and the mode ansatz exp(-i w t - i k phi). For spin weight s,
//
//   V = -[(K - i s (r - M))^2 + (4 i s w r - lambda) Delta] / w2^2 + G^2 + dG/du,
//
// where w2 = r^2 + a^2, K = w2 w + a k and G = r Delta / w2^2.
// Limits: V -> -(Omega - i s kappa)^2 at the horizon (kappa the surface gravity,
// Omega = w - w0) and V -> -w^2 at infinity.

#include <algorithm>
#include <cmath>
#include <complex>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "angular.hpp"
#include "errors.hpp"
#include "geometry.hpp"
#include "ode.hpp"
#include "quadrature.hpp"

namespace kerrwave {

using cplx = std::complex<double>;
inline constexpr cplx I{0.0, 1.0};

struct ModeSpec {
    BlackHole bh{1.0, 0.0};
    int s = 0;
    int k = 0;
    int n = 1;
    double omega = 0.0;
    double lambda = 0.0;

    double omega0() const { return horizon_frequency(bh, k, omega).omega0; }
    double Omega() const { return horizon_frequency(bh, k, omega).Omega; }
};

inline void validate_mode(const ModeSpec& m) {
    require(m.s >= -2 && m.s <= 2, "spin weight must be in {-2, ..., 2}");
    require(m.n >= 1, "angular index n starts at 1");
    require(std::isfinite(m.omega) && std::isfinite(m.lambda), "mode parameters must be finite");
    require(m.omega != 0.0, "frequency must be nonzero");
    require(m.Omega() != 0.0, "horizon-shifted frequency must be nonzero");
}

// Mode with lambda taken from the angular problem at c = a w.
inline ModeSpec make_mode(const BlackHole& bh, int s, int k, int n, double omega, int basis = 32) {
    ModeSpec m{bh, s, k, n, omega, 0.0};
    require(n >= 1, "angular index n starts at 1");
    auto ev = spheroidal_eigenvalues({s, k, bh.spin() * omega, basis}, n);
    m.lambda = ev.back().lambda;
    validate_mode(m);
    return m;
}

class RadialEquation {
public:
    RadialEquation(const BlackHole& bh, int s, int k, double lambda, cplx omega)
        : bh_(bh), s_(s), k_(k), lambda_(lambda), omega_(omega) {}
    explicit RadialEquation(const ModeSpec& m) : RadialEquation(m.bh, m.s, m.k, m.lambda, m.omega) {}

    // Free equation phi'' + w^2 phi = 0 (test hook).
    static RadialEquation free(const BlackHole& bh, cplx omega) {
        RadialEquation eq(bh, 0, 0, 0.0, omega);
        eq.free_ = true;
        return eq;
    }

    const BlackHole& black_hole() const { return bh_; }
    int s() const { return s_; }
    int k() const { return k_; }
    double lambda() const { return lambda_; }
    cplx omega() const { return omega_; }
    bool is_free() const { return free_; }
    bool long_range() const { return s_ != 0 && !free_; }

    // sigma with V(-inf) = -sigma^2
    cplx horizon_wavenumber() const {
        if (free_) return omega_;
        return omega_ + static_cast<double>(k_) * bh_.horizon_angular_velocity() -
               I * static_cast<double>(s_) * bh_.surface_gravity();
    }

    // Potential as a function of y = log(r - r1).
    cplx potential_log(double y) const {
        if (free_) return -omega_ * omega_;
        const double r1 = bh_.r_plus(), r2 = bh_.r_minus(), m = bh_.mass(), a = bh_.spin();
        const double e = std::exp(y);
        const double r = r1 + e;
        const double D = e * (r1 - r2 + e);
        const double w2 = r * r + a * a;
        const double s = s_;
        const cplx K = w2 * omega_ + a * static_cast<double>(k_);
        const cplx t1 = K - I * s * (r - m);
        const cplx v = -(t1 * t1 + (4.0 * I * s * omega_ * r - lambda_) * D) / (w2 * w2);
        const double G = r * D / (w2 * w2);
        const double dGdr = (D + r * (2.0 * r - 2.0 * m)) / (w2 * w2) - 4.0 * r * r * D / (w2 * w2 * w2);
        return v + G * G + (D / w2) * dGdr;
    }

    cplx potential_at_radius(double r) const {
        require(r > bh_.r_plus(), "radius must exceed r1");
        return potential_log(std::log(r - bh_.r_plus()));
    }

private:
    BlackHole bh_;
    int s_, k_;
    double lambda_;
    cplx omega_;
    bool free_ = false;
};

inline cplx potential(const ModeSpec& mode, double u) {
    validate_mode(mode);
    require(std::isfinite(u), "u must be finite");
    TortoiseMap map(mode.bh);
    return RadialEquation(mode).potential_log(map.inverse_log(u));
}

enum class Side { horizon, infinity };

inline const char* to_string(Side s) { return s == Side::horizon ? "horizon" : "infinity"; }

struct RadialSolution {
    Side side = Side::horizon;
    RadialEquation equation{BlackHole(1.0, 0.0), 0, 0, 0.0, 1.0};
    std::optional<ModeSpec> mode;
    std::vector<double> u;
    std::vector<cplx> phi;
    std::vector<cplx> dphi;
    std::vector<cplx> V;  // potential at the grid points
    double u_start = 0.0;
};

struct JostOptions {
    double tol = 1e-10;
    double eps_factor = 1e-8;   // |V - V_inf| < eps_factor * max(|w|^2, |Omega|^2)
    double base_cap = 200.0;    // in units of M
    double wkb_target = 1e-5;   // |Q'| / |Q|^(3/2) at the far start for 1/r potentials
    // direction = +1 gives the Jost solutions exp(i sigma u) at the horizon and exp(-i w u)
    // at infinity; -1 gives the opposite exponentials.
    int direction = +1;
};

namespace detail {

using RadVec = OdeVec<cplx, 3>;  // (phi, phi', y) with y = log(r - r1) in the real part

inline RadVec radial_rhs(const RadialEquation& eq, const RadVec& st) {
    const BlackHole& bh = eq.black_hole();
    const double y = st[2].real();
    const double e = std::exp(y);
    const double r = bh.r_plus() + e;
    const double dy = (bh.r_plus() - bh.r_minus() + e) / (r * r + bh.spin() * bh.spin());
    return {st[1], eq.potential_log(y) * st[0], cplx(dy, 0.0)};
}

inline double dydu(const BlackHole& bh, double y) {
    const double e = std::exp(y), r = bh.r_plus() + e;
    return (bh.r_plus() - bh.r_minus() + e) / (r * r + bh.spin() * bh.spin());
}

// Principal square root continued to the branch closest to `ref`.
inline cplx sqrt_near(cplx z, cplx ref) {
    cplx w = std::sqrt(z);
    return std::abs(w - ref) <= std::abs(w + ref) ? w : -w;
}

// Phase correction  int_{u}^{inf} (sqrt(-V) - w) du  evaluated in r with r = r_s / t.
inline cplx infinity_phase_tail(const RadialEquation& eq, double y_s, cplx p) {
    const BlackHole& bh = eq.black_hole();
    const double rs = bh.r_plus() + std::exp(y_s);
    static const QuadratureRule q = gauss_legendre(64);
    cplx acc = 0.0;
    for (std::size_t i = 0; i < q.nodes.size(); ++i) {
        const double t = 0.5 * (q.nodes[i] + 1.0);
        const double r = rs / t;
        const double D = bh.delta(r), w2 = r * r + bh.spin() * bh.spin();
        const cplx kk = sqrt_near(-eq.potential_log(std::log(r - bh.r_plus())), p);
        acc += 0.5 * q.weights[i] * (kk - p) * (w2 / D) * (rs / (t * t));
    }
    return acc;
}

struct StartPoint {
    double u;
    double y;
    RadVec state;
};

inline StartPoint plane_wave(double u, cplx q, const TortoiseMap& map) {
    const double y = map.inverse_log(u);
    const cplx e = std::exp(I * q * u);
    return {u, y, {e, I * q * e, cplx(y, 0.0)}};
}

inline StartPoint horizon_start(const RadialEquation& eq, const TortoiseMap& map, double u_edge, const JostOptions& o) {
    if (eq.is_free()) return plane_wave(u_edge, static_cast<double>(o.direction) * eq.omega(), map);
    const BlackHole& bh = eq.black_hole();
    const double kappa = bh.surface_gravity();
    const cplx sigma = eq.horizon_wavenumber();
    const cplx q = static_cast<double>(o.direction) * sigma;
    const cplx vh = -sigma * sigma;
    double u0;
    if (q.imag() < -1e-12) {
        // Wanted solution dominates towards larger u: any start far enough out is accurate.
        u0 = std::min(u_edge, 0.0) - 18.0 / std::abs(q.imag());
    } else {
        const double scale = std::max(std::norm(eq.omega()), std::norm(sigma));
        const double eps = o.eps_factor * scale;
        const double cap = std::max(o.base_cap * bh.mass(), 20.0 / kappa);
        u0 = std::min(u_edge, 0.0);
        const double step = 0.5 / kappa;
        while (u0 > -cap && std::abs(eq.potential_log(map.inverse_log(u0)) - vh) >= eps) u0 -= step;
        u0 = std::max(u0, -cap);
        u0 = std::min(u0, u_edge);
        const cplx dv = eq.potential_log(map.inverse_log(u0)) - vh;
        const cplx g = dv / (4.0 * kappa * (kappa + I * q));
        if (std::abs(g) > 1e-2) {
            throw NumericalFailure("horizon initialization: asymptotic regime not reached within the cap", std::abs(g));
        }
    }
    const double y0 = map.inverse_log(u0);
    const cplx dv = eq.potential_log(y0) - vh;
    const cplx g = dv / (4.0 * kappa * (kappa + I * q));
    const cplx e = std::exp(I * q * u0);
    return {u0, y0, {e * (1.0 + g), e * (I * q * (1.0 + g) + 2.0 * kappa * g), cplx(y0, 0.0)}};
}

inline StartPoint infinity_start(const RadialEquation& eq, const TortoiseMap& map, double u_edge, const JostOptions& o) {
    if (eq.is_free()) return plane_wave(u_edge, -static_cast<double>(o.direction) * eq.omega(), map);
    const BlackHole& bh = eq.black_hole();
    const cplx w = eq.omega();
    const cplx p = static_cast<double>(o.direction) * w;
    const cplx vinf = -w * w;
    double u1;
    const bool stable = p.imag() < -1e-12;
    const double h = 1e-4;
    auto dQdu_at = [&](double y) {
        return -(eq.potential_log(y + h) - eq.potential_log(y - h)) / (2.0 * h) * dydu(bh, y);
    };
    if (stable) {
        u1 = std::max(u_edge, 0.0) + 18.0 / std::abs(p.imag());
    } else if (eq.long_range()) {
        // The 1/r tail never meets the potential-difference rule; start where WKB is accurate.
        auto wkb = [&](double u) {
            const double y = map.inverse_log(u);
            return std::abs(dQdu_at(y)) / std::pow(std::abs(eq.potential_log(y)), 1.5);
        };
        const double cap = 1e8 * bh.mass();
        u1 = std::max(u_edge, 0.0);
        double step = 1.0;
        while (u1 < cap && wkb(u1) >= o.wkb_target) {
            u1 += step;
            step *= 1.05;
        }
        u1 = std::max(std::min(u1, cap), u_edge);
        const double ratio = wkb(u1);
        if (ratio > 1e2 * o.wkb_target) {
            throw NumericalFailure("infinity initialization: WKB regime not reached within the cap", ratio);
        }
    } else {
        const double scale = std::max(std::norm(w), std::norm(eq.horizon_wavenumber()));
        const double eps = o.eps_factor * scale;
        const double reach = 50.0 * std::sqrt(std::abs(eq.lambda()) + std::abs(eq.s()) + 1.0) / std::abs(w);
        const double cap = std::clamp(reach, o.base_cap * bh.mass(), 1e5 * bh.mass());
        u1 = std::max(u_edge, 0.0);
        double step = 1.0;
        while (u1 < cap && std::abs(eq.potential_log(map.inverse_log(u1)) - vinf) >= eps) {
            u1 += step;
            step *= 1.05;
        }
        u1 = std::min(u1, cap);
        u1 = std::max(u1, u_edge);
        const cplx dv = eq.potential_log(map.inverse_log(u1)) - vinf;
        if (std::abs(dv) > 1e-2 * std::norm(w)) {
            throw NumericalFailure("infinity initialization: asymptotic regime not reached within the cap",
                                   std::abs(dv) / std::norm(w));
        }
    }
    const double y1 = map.inverse_log(u1);
    const cplx Q = -eq.potential_log(y1);
    const cplx kk = sqrt_near(Q, p);
    const cplx dQdu = dQdu_at(y1);
    cplx phase = -I * p * u1;
    if (!stable && !eq.long_range() && !eq.is_free()) phase += I * infinity_phase_tail(eq, y1, p);
    const cplx amp = std::sqrt(p / kk) * std::exp(phase);
    return {u1, y1, {amp, amp * (-I * kk - dQdu / (4.0 * Q)), cplx(y1, 0.0)}};
}

} // namespace detail

// Integrates the solution with the prescribed asymptotics and samples it on `grid`
// (strictly increasing).
inline RadialSolution solve_radial(const RadialEquation& eq, Side side, std::span<const double> grid,
                                   const JostOptions& o = {}) {
    require(grid.size() >= 1, "radial grid must not be empty");
    for (std::size_t i = 1; i < grid.size(); ++i) require(grid[i] > grid[i - 1], "radial grid must be strictly increasing");
    require(o.tol > 0.0, "tolerance must be positive");
    require(o.direction == 1 || o.direction == -1, "direction must be +1 or -1");
    TortoiseMap map(eq.black_hole());
    detail::StartPoint sp = side == Side::horizon ? detail::horizon_start(eq, map, grid.front(), o)
                                                   : detail::infinity_start(eq, map, grid.back(), o);
    RadialSolution sol;
    sol.side = side;
    sol.equation = eq;
    sol.u.assign(grid.begin(), grid.end());
    sol.phi.resize(grid.size());
    sol.dphi.resize(grid.size());
    sol.V.resize(grid.size());
    sol.u_start = sp.u;

    OdeOptions opt;
    opt.rtol = o.tol;
    opt.atol = o.tol * 1e-6;
    auto rhs = [&eq](double, const detail::RadVec& st) { return detail::radial_rhs(eq, st); };
    // The start may sit inside the grid only when the grid reaches beyond it; then the
    // integration runs both ways from the start point.
    std::vector<double> fwd, bwd;
    std::vector<std::size_t> fwd_idx, bwd_idx;
    for (std::size_t i = 0; i < grid.size(); ++i) {
        if (side == Side::horizon ? grid[i] >= sp.u : grid[i] > sp.u) {
            fwd.push_back(grid[i]);
            fwd_idx.push_back(i);
        } else {
            bwd.push_back(grid[i]);
            bwd_idx.push_back(i);
        }
    }
    std::reverse(bwd.begin(), bwd.end());
    std::reverse(bwd_idx.begin(), bwd_idx.end());
    auto run = [&](const std::vector<double>& outs, const std::vector<std::size_t>& idx) {
        if (outs.empty()) return;
        std::size_t j = 0;
        auto res = integrate_dp45<cplx, 3>(rhs, sp.u, sp.state, outs, opt, [&](double, const detail::RadVec& st) {
            const std::size_t i = idx[j++];
            sol.phi[i] = st[0];
            sol.dphi[i] = st[1];
            sol.V[i] = eq.potential_log(st[2].real());
            return true;
        });
        if (res.status != OdeStatus::completed) {
            throw NumericalFailure("radial integration failed", res.s);
        }
    };
    run(fwd, fwd_idx);
    run(bwd, bwd_idx);
    return sol;
}

inline RadialSolution jost_solution(const ModeSpec& mode, Side side, std::span<const double> grid,
                                    const JostOptions& o = {}) {
    validate_mode(mode);
    RadialSolution sol = solve_radial(RadialEquation(mode), side, grid, o);
    sol.mode = mode;
    return sol;
}

inline RadialSolution jost_solution(const ModeSpec& mode, Side side, double u_min, double u_max, std::size_t points,
                                    const JostOptions& o = {}) {
    require(u_max > u_min && points >= 2, "u_range must be a proper interval with at least two points");
    auto grid = linspace(u_min, u_max, points);
    return jost_solution(mode, side, grid, o);
}

// Value and derivative at u; off-node points are reached by integrating the equation
// from the nearest node.
inline std::pair<cplx, cplx> sample(const RadialSolution& f, double u, double tol = 1e-12) {
    require(!f.u.empty() && u >= f.u.front() && u <= f.u.back(), "u lies outside the solution grid");
    auto it = std::lower_bound(f.u.begin(), f.u.end(), u);
    std::size_t j = static_cast<std::size_t>(it - f.u.begin());
    if (j < f.u.size() && f.u[j] == u) return {f.phi[j], f.dphi[j]};
    if (u - f.u[j - 1] < f.u[j] - u) --j;
    const RadialEquation& eq = f.equation;
    TortoiseMap map(eq.black_hole());
    const double y = map.inverse_log(f.u[j]);
    OdeOptions opt;
    opt.rtol = tol;
    opt.atol = tol * 1e-6;
    std::pair<cplx, cplx> out;
    const double target[1] = {u};
    auto res = integrate_dp45<cplx, 3>([&eq](double, const detail::RadVec& st) { return detail::radial_rhs(eq, st); },
                                       f.u[j], detail::RadVec{f.phi[j], f.dphi[j], cplx(y, 0.0)}, target, opt,
                                       [&](double, const detail::RadVec& st) {
                                           out = {st[0], st[1]};
                                           return true;
                                       });
    if (res.status != OdeStatus::completed) throw NumericalFailure("radial interpolation failed", res.s);
    return out;
}

inline cplx wronskian_values(cplx f, cplx df, cplx g, cplx dg) { return f * dg - df * g; }

inline cplx wronskian(const RadialSolution& f, const RadialSolution& g, double u) {
    require(!f.u.empty() && !g.u.empty(), "wronskian needs sampled solutions");
    const double lo = std::max(f.u.front(), g.u.front()), hi = std::min(f.u.back(), g.u.back());
    require(lo <= hi, "wronskian: solution grids do not overlap");
    require(u >= lo && u <= hi, "wronskian: u outside the common grid range");
    auto [fv, fd] = sample(f, u);
    auto [gv, gd] = sample(g, u);
    return wronskian_values(fv, fd, gv, gd);
}

inline RadialSolution conjugate(const RadialSolution& f) {
    RadialSolution c = f;
    for (auto& v : c.phi) v = std::conj(v);
    for (auto& v : c.dphi) v = std::conj(v);
    for (auto& v : c.V) v = std::conj(v);
    return c;
}

} // namespace kerrwave
