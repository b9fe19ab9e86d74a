#pragma once

// Time evolution of one separated channel by frequency synthesis.
//
// A channel evolves Psi = (Phi, i dPhi/dt) with Phi = phi / sqrt(r^2 + a^2). In the
// rescaled field phi the time-domain equation reads
//
//   c2 (i d/dt)^2 phi + c1 (i d/dt) phi = (-d^2/du^2 + c0) phi,
//
// so that H = [[0, 1], [alpha, beta]] with alpha = (-d^2/du^2 + c0) / c2 and
// beta = -c1 / c2, and the mode potential is V(w) = c0 - c1 w - c2 w^2.
//
// Scalar Kerr channels freeze the angular profile at a reference frequency w_ref:
// lambda(w) ~ lambda_P + 2 a k w + a^2 <sin^2> w^2, exact at w = w_ref.

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <numbers>
#include <optional>
#include <span>
#include <vector>

#include "angular.hpp"
#include "errors.hpp"
#include "geometry.hpp"
#include "parallel.hpp"
#include "quadrature.hpp"
#include "radial.hpp"

namespace kerrwave {

struct Channel {
    BlackHole bh{1.0, 0.0};
    int s = 0;
    int k = 0;
    int n = 1;
    double omega_ref = 0.0;
    double lambda_P = 0.0;  // lambda(w_ref) - 2 a k w_ref - a^2 sin2 w_ref^2
    double sin2 = 0.0;      // <1 - x^2> of the reference harmonic

    double lambda_eff(double w) const {
        const double a = bh.spin();
        return lambda_P + 2.0 * a * k * w + a * a * sin2 * w * w;
    }

    RadialEquation equation(cplx w) const {
        if (s == 0) {
            require(w.imag() == 0.0, "scalar channels are evaluated at real frequencies");
            return RadialEquation(bh, 0, k, lambda_eff(w.real()), w);
        }
        return RadialEquation(bh, s, k, lambda_P, w);
    }
};

inline Channel make_channel(const BlackHole& bh, int s, int k, int n, double omega_ref = 0.0, int basis = 32) {
    require(s >= -2 && s <= 2, "spin weight must be in {-2, ..., 2}");
    require(n >= 1, "angular index n starts at 1");
    require(std::isfinite(omega_ref), "reference frequency must be finite");
    require(s == 0 || bh.spin() == 0.0, "spin-weighted channels are supported in Schwarzschild only");
    Channel ch{bh, s, k, n, omega_ref, 0.0, 0.0};
    const double c = bh.spin() * omega_ref;
    auto ev = spheroidal_eigenvalues({s, k, c, basis}, n);
    const AngularProfile prof = angular_profile(ev.back());
    ch.sin2 = prof.sin2;
    ch.lambda_P = prof.lambda - 2.0 * c * k - c * c * prof.sin2;
    return ch;
}

struct ChannelCoefficients {
    double r = 0.0;
    double w2 = 0.0;  // r^2 + a^2
    double G = 0.0;   // r Delta / w2^2
    double delta = 0.0;
    double c2 = 1.0;
    cplx c1{};
    cplx c0{};
};

inline ChannelCoefficients channel_coefficients(const Channel& ch, double y) {
    const BlackHole& bh = ch.bh;
    const double m = bh.mass(), a = bh.spin(), r1 = bh.r_plus(), r2 = bh.r_minus();
    const double e = std::exp(y);
    ChannelCoefficients c;
    c.r = r1 + e;
    c.delta = e * (r1 - r2 + e);
    c.w2 = c.r * c.r + a * a;
    const double r = c.r, D = c.delta, w2 = c.w2, w4 = w2 * w2;
    c.G = r * D / w4;
    const double dGdr = (D + r * (2.0 * r - 2.0 * m)) / w4 - 4.0 * r * r * D / (w4 * w2);
    const double W = c.G * c.G + (D / w2) * dGdr;
    if (ch.s == 0) {
        c.c2 = 1.0 - a * a * ch.sin2 * D / w4;
        c.c1 = 4.0 * a * ch.k * m * r / w4;
        c.c0 = (ch.lambda_P * D - a * a * ch.k * ch.k) / w4 + W;
    } else {
        const double s = ch.s;
        c.c2 = 1.0;
        c.c1 = -I * s * (2.0 * (r - m) / (r * r) - 4.0 * D / (r * r * r));
        c.c0 = (r - m) * (r - m) * s * s / (r * r * r * r) + ch.lambda_P * D / (r * r * r * r) + W;
    }
    return c;
}

struct StateVector {
    int s = 0;
    int k = 0;
    int n = 1;
    std::vector<double> u;
    std::vector<cplx> phi;   // Phi
    std::vector<cplx> pi;    // i dPhi/dt
    std::vector<cplx> dphi;  // dPhi/du when known, else empty
};

namespace detail {

inline double uniform_step(std::span<const double> u) {
    require(u.size() >= 6, "grid needs at least six points for the difference stencils");
    const double h = (u.back() - u.front()) / static_cast<double>(u.size() - 1);
    require(h > 0.0, "grid must be strictly increasing");
    for (std::size_t i = 1; i < u.size(); ++i)
        require(std::abs(u[i] - u[i - 1] - h) <= 1e-9 * h, "grid must be uniform");
    return h;
}

inline std::vector<ChannelCoefficients> grid_coefficients(const Channel& ch, std::span<const double> u) {
    TortoiseMap map(ch.bh);
    std::vector<ChannelCoefficients> out(u.size());
    for (std::size_t i = 0; i < u.size(); ++i) out[i] = channel_coefficients(ch, map.inverse_log(u[i]));
    return out;
}

// Fourth-order first and second differences on a uniform grid (one-sided at the ends).
inline std::vector<cplx> first_difference(std::span<const cplx> f, double h) {
    const std::size_t n = f.size();
    std::vector<cplx> d(n);
    for (std::size_t i = 0; i < n; ++i) {
        if (i >= 2 && i + 2 < n) {
            d[i] = (f[i - 2] - 8.0 * f[i - 1] + 8.0 * f[i + 1] - f[i + 2]) / (12.0 * h);
        } else if (i < 2) {
            d[i] = (-25.0 * f[i] + 48.0 * f[i + 1] - 36.0 * f[i + 2] + 16.0 * f[i + 3] - 3.0 * f[i + 4]) / (12.0 * h);
        } else {
            d[i] = (25.0 * f[i] - 48.0 * f[i - 1] + 36.0 * f[i - 2] - 16.0 * f[i - 3] + 3.0 * f[i - 4]) / (12.0 * h);
        }
    }
    return d;
}

inline std::vector<cplx> second_difference(std::span<const cplx> f, double h) {
    const std::size_t n = f.size();
    std::vector<cplx> d(n);
    const double h2 = 12.0 * h * h;
    for (std::size_t i = 0; i < n; ++i) {
        if (i >= 2 && i + 2 < n) {
            d[i] = (-f[i - 2] + 16.0 * f[i - 1] - 30.0 * f[i] + 16.0 * f[i + 1] - f[i + 2]) / h2;
        } else if (i < 2) {
            d[i] = (45.0 * f[i] - 154.0 * f[i + 1] + 214.0 * f[i + 2] - 156.0 * f[i + 3] + 61.0 * f[i + 4] -
                    10.0 * f[i + 5]) / h2;
        } else {
            d[i] = (45.0 * f[i] - 154.0 * f[i - 1] + 214.0 * f[i - 2] - 156.0 * f[i - 3] + 61.0 * f[i - 4] -
                    10.0 * f[i - 5]) / h2;
        }
    }
    return d;
}

struct RescaledState {
    std::vector<cplx> f1;  // phi
    std::vector<cplx> f2;  // i dphi/dt
};

inline RescaledState rescale(const StateVector& st, std::span<const ChannelCoefficients> cf) {
    RescaledState r;
    r.f1.resize(st.u.size());
    r.f2.resize(st.u.size());
    for (std::size_t i = 0; i < st.u.size(); ++i) {
        const double sq = std::sqrt(cf[i].w2);
        r.f1[i] = sq * st.phi[i];
        r.f2[i] = sq * st.pi[i];
    }
    return r;
}

inline void check_state(const StateVector& st) {
    require(!st.u.empty() && st.phi.size() == st.u.size() && st.pi.size() == st.u.size(),
            "state components must match the grid");
    require(st.dphi.empty() || st.dphi.size() == st.u.size(), "state derivative must match the grid");
    for (std::size_t i = 1; i < st.u.size(); ++i) require(st.u[i] > st.u[i - 1], "grid must be strictly increasing");
    for (std::size_t i = 0; i < st.u.size(); ++i)
        require(std::isfinite(std::abs(st.phi[i])) && std::isfinite(std::abs(st.pi[i])), "state must be finite");
}

} // namespace detail

// ---------------------------------------------------------------------------------------
// Wave packets

struct WavePacketSpec {
    double omega_tilde = 0.0;
    double L = 10.0;
    cplx c_in = 1.0;
    cplx c_out = 0.0;
    double L_min = 10.0;
};

namespace detail {

// Smooth bump on (1, 2) with unit L^2 norm, and its derivative.
inline std::pair<double, double> bump(double x) {
    static const double norm = [] {
        auto q = gauss_legendre(200);
        double acc = 0.0;
        for (std::size_t i = 0; i < q.nodes.size(); ++i) {
            const double x = 1.5 + 0.5 * q.nodes[i], g = (x - 1.0) * (2.0 - x);
            acc += 0.5 * q.weights[i] * std::exp(-2.0 / g);
        }
        return 1.0 / std::sqrt(acc);
    }();
    if (x <= 1.0 || x >= 2.0) return {0.0, 0.0};
    const double g = (x - 1.0) * (2.0 - x);
    const double v = norm * std::exp(-1.0 / g);
    return {v, v * (3.0 - 2.0 * x) / (g * g)};
}

} // namespace detail

inline std::pair<double, double> wavepacket_support(const WavePacketSpec& p) {
    return {p.L * p.L + p.L, p.L * p.L + 2.0 * p.L};
}

// eta_L(u) / sqrt(r^2 + a^2) [c_in exp(-i w u) + c_out exp(i w u)] with i dPhi/dt = w Phi:
// both pieces oscillate as exp(-i w t), the first moving inward, the second outward.
inline StateVector make_wavepacket(const Channel& ch, const WavePacketSpec& p, std::span<const double> grid) {
    require(std::isfinite(p.omega_tilde) && std::isfinite(p.L), "packet parameters must be finite");
    require(p.L >= p.L_min, "packet scale L is below the minimum");
    const auto [lo, hi] = wavepacket_support(p);
    TortoiseMap map(ch.bh);
    require(lo > map.tortoise(2.0 * ch.bh.r_plus()), "packet support reaches inside r = 2 r1");
    require(!grid.empty() && grid.front() <= lo && grid.back() >= hi, "grid must cover the packet support");
    auto cf = detail::grid_coefficients(ch, grid);
    StateVector st{ch.s, ch.k, ch.n, {grid.begin(), grid.end()}, {}, {}, {}};
    const std::size_t n = grid.size();
    st.phi.resize(n);
    st.pi.resize(n);
    st.dphi.resize(n);
    const double w = p.omega_tilde, sL = std::sqrt(p.L);
    for (std::size_t i = 0; i < n; ++i) {
        const double u = grid[i];
        const auto [e, de] = detail::bump((u - p.L * p.L) / p.L);
        const double eta = e / sL, deta = de / (sL * p.L);
        const cplx ein = std::exp(-I * w * u), eout = std::exp(I * w * u);
        const cplx carrier = p.c_in * ein + p.c_out * eout;
        const cplx dcarrier = -I * w * p.c_in * ein + I * w * p.c_out * eout;
        const double sq = std::sqrt(cf[i].w2);
        st.phi[i] = eta * carrier / sq;
        st.pi[i] = w * st.phi[i];
        st.dphi[i] = ((deta - cf[i].G * eta) * carrier + eta * dcarrier) / sq;
    }
    return st;
}

// Integral of |sqrt(r^2 + a^2) Phi|^2 du.
inline double rescaled_norm(const BlackHole& bh, const StateVector& st) {
    detail::check_state(st);
    TortoiseMap map(bh);
    auto w = simpson_weights(st.u);
    double acc = 0.0;
    for (std::size_t i = 0; i < st.u.size(); ++i) {
        const double r = bh.r_plus() + std::exp(map.inverse_log(st.u[i]));
        acc += w[i] * (r * r + bh.spin() * bh.spin()) * std::norm(st.phi[i]);
    }
    return acc;
}

// ---------------------------------------------------------------------------------------
// Energy

struct EnergyReport {
    double total = 0.0;
    double positive = 0.0;
    double negative = 0.0;
    double ergoregion = 0.0;        // part from r < 2M
    double refinement_change = 0.0;  // |E - E(every other node)|
};

namespace detail {

// Channel energy density in u (the angular integral done with the frozen profile):
//   c2 |pi|^2 + |phi' - G phi|^2 + (lambda_P Delta - a^2 k^2) / w2^2 |phi|^2.
inline std::vector<double> energy_density(const Channel& ch, const StateVector& st,
                                          std::span<const ChannelCoefficients> cf) {
    const std::size_t n = st.u.size();
    std::vector<cplx> d;
    if (st.dphi.empty()) d = first_difference(st.phi, uniform_step(st.u));
    const std::span<const cplx> dphi = st.dphi.empty() ? std::span<const cplx>(d) : std::span<const cplx>(st.dphi);
    const double a = ch.bh.spin();
    std::vector<double> e(n);
    for (std::size_t i = 0; i < n; ++i) {
        const ChannelCoefficients& c = cf[i];
        const double w2 = c.w2;
        // phi' - G phi = sqrt(w2) Phi'
        const double pot = (ch.lambda_P * c.delta - a * a * ch.k * ch.k) / (w2 * w2);
        e[i] = w2 * (c.c2 * std::norm(st.pi[i]) + std::norm(dphi[i]) + pot * std::norm(st.phi[i]));
    }
    return e;
}

inline EnergyReport integrate_energy(const Channel& ch, std::span<const double> u, std::span<const double> e,
                                     double u_cut, double stability) {
    const std::size_t n = u.size();
    std::vector<double> masked(e.begin(), e.end());
    for (std::size_t i = 0; i < n; ++i)
        if (u[i] < u_cut) masked[i] = 0.0;
    auto w = simpson_weights(u);
    EnergyReport rep;
    double scale = 0.0;
    TortoiseMap map(ch.bh);
    // at a = 0 the ergosphere r = 2M is the horizon itself
    const double u_ergo = ch.bh.spin() == 0.0 ? -std::numeric_limits<double>::infinity() : map.tortoise(2.0 * ch.bh.mass());
    for (std::size_t i = 0; i < n; ++i) {
        const double c = w[i] * masked[i];
        rep.total += c;
        (c >= 0 ? rep.positive : rep.negative) += c;
        if (u[i] < u_ergo) rep.ergoregion += c;
        scale += std::abs(c);
    }
    if (n >= 5) {
        std::vector<double> uh, eh;
        for (std::size_t i = 0; i < n; i += 2) {
            uh.push_back(u[i]);
            eh.push_back(masked[i]);
        }
        if (uh.back() != u.back()) {
            uh.push_back(u.back());
            eh.push_back(masked.back());
        }
        auto wh = simpson_weights(uh);
        double coarse = 0.0;
        for (std::size_t i = 0; i < uh.size(); ++i) coarse += wh[i] * eh[i];
        rep.refinement_change = std::abs(coarse - rep.total);
        if (rep.refinement_change > stability * scale) {
            throw NumericalFailure("energy quadrature is not stable under grid refinement",
                                   rep.refinement_change / std::max(scale, 1e-300));
        }
    }
    return rep;
}

} // namespace detail

inline EnergyReport energy(const Channel& ch, const StateVector& st,
                           double u_cut = -std::numeric_limits<double>::infinity(), double stability = 1e-3) {
    detail::check_state(st);
    require(ch.s == 0, "the energy functional is defined for scalar channels");
    require(st.k == ch.k && st.s == ch.s, "state and channel disagree");
    auto cf = detail::grid_coefficients(ch, st.u);
    auto e = detail::energy_density(ch, st, cf);
    return detail::integrate_energy(ch, st.u, e, u_cut, stability);
}

// ---------------------------------------------------------------------------------------
// Hamiltonian

inline StateVector hamiltonian_apply(const Channel& ch, const StateVector& st) {
    detail::check_state(st);
    require(st.k == ch.k && st.s == ch.s, "state and channel disagree");
    const double h = detail::uniform_step(st.u);
    auto cf = detail::grid_coefficients(ch, st.u);
    auto r = detail::rescale(st, cf);
    auto d2 = detail::second_difference(r.f1, h);
    StateVector out{st.s, st.k, st.n, st.u, st.pi, std::vector<cplx>(st.u.size()), {}};
    for (std::size_t i = 0; i < st.u.size(); ++i) {
        const ChannelCoefficients& c = cf[i];
        out.pi[i] = (-d2[i] + c.c0 * r.f1[i] - c.c1 * r.f2[i]) / (c.c2 * std::sqrt(c.w2));
    }
    return out;
}

// ---------------------------------------------------------------------------------------
// Frequency synthesis

struct SynthesisOptions {
    int level = 0;            // frequency panels are halved `level` times
    double tail = 1e-4;       // band edge: data spectrum below tail * peak
    double omega_max = 0.0;   // > 0 overrides the band with [-omega_max, omega_max]
    double guard = 1e-3;      // guard band half-width around w = 0 and w = w0, relative to |w0|
    double tol = 1e-9;        // radial integration tolerance
    int per_panel = 8;        // Gauss-Legendre nodes per panel
    double panel_phase = 4.0 * std::numbers::pi;  // largest phase excursion across a panel
    int chunks = 16;          // fixed reduction blocks (result independent of thread count)
    unsigned threads = default_threads();
    int subtractions = 3;     // resolvent asymptotic terms removed on the contour
    double contour_reach = 2.0;  // contour truncated at |Re z| = reach * band edge
};

struct Evolution {
    std::vector<double> times;
    std::vector<StateVector> states;
    double omega_lo = 0.0;
    double omega_hi = 0.0;
    std::size_t nodes = 0;
};

namespace detail {

struct FrequencyNode {
    cplx z;
    double weight;
    int leg;  // 0: real axis jump (scalar), 1: line Im z = s/2M
};

// Data spectrum: content at frequency w of the combinations (1, w) exp(-+ i w u).
inline std::pair<double, double> spectral_band(std::span<const double> u, const RescaledState& f, double tail) {
    const double h = (u.back() - u.front()) / static_cast<double>(u.size() - 1);
    double lo_u = u.back(), hi_u = u.front();
    for (std::size_t i = 0; i < u.size(); ++i) {
        if (std::abs(f.f1[i]) + std::abs(f.f2[i]) > 0.0) {
            lo_u = std::min(lo_u, u[i]);
            hi_u = std::max(hi_u, u[i]);
        }
    }
    if (hi_u < lo_u) return {0.0, 0.0};
    const double span = std::max(hi_u - lo_u, 10.0 * h);
    const double nyq = std::numbers::pi / h;
    const double dw = std::numbers::pi / (4.0 * span);
    const std::size_t m = static_cast<std::size_t>(std::ceil(nyq / dw));
    // plain trapezoid: Simpson's alternating weights alias onto the Nyquist frequency
    std::vector<double> ws, mag;
    double peak = 0.0;
    for (std::size_t j = 0; j <= 2 * m; ++j) {
        const double om = -nyq + dw * static_cast<double>(j);
        cplx ap = 0.0, am = 0.0;
        for (std::size_t i = 0; i < u.size(); ++i) {
            const cplx g = f.f2[i] + om * f.f1[i];
            if (g == 0.0) continue;
            const cplx e = std::exp(I * om * u[i]);
            ap += h * g * e;
            am += h * g * std::conj(e);
        }
        ws.push_back(om);
        mag.push_back(std::abs(ap) + std::abs(am));
        peak = std::max(peak, mag.back());
    }
    double lo = 0.0, hi = 0.0;
    bool any = false;
    for (std::size_t j = 0; j < ws.size(); ++j) {
        if (mag[j] >= tail * peak) {
            if (!any) lo = ws[j];
            hi = ws[j];
            any = true;
        }
    }
    return {lo - dw, hi + dw};
}

// Panels covering [lo, hi] minus (p - g, p + g) for each singular point p, graded
// geometrically towards the excluded bands.
inline std::vector<std::pair<double, double>> guard_cuts(double lo, double hi, std::vector<double> singular, double g) {
    std::vector<std::pair<double, double>> cuts;
    std::sort(singular.begin(), singular.end());
    for (double p : singular) {
        if (p + g <= lo || p - g >= hi) continue;
        if (!cuts.empty() && p - g <= cuts.back().second) {
            cuts.back().second = p + g;
        } else {
            cuts.push_back({p - g, p + g});
        }
    }
    return cuts;
}

inline std::vector<std::pair<double, double>> frequency_panels(double lo, double hi, std::vector<double> singular,
                                                               double g, double h) {
    const auto cuts = guard_cuts(lo, hi, std::move(singular), g);
    struct Segment {
        double a, b;
        bool grade_left, grade_right;
    };
    std::vector<Segment> segs;
    double start = lo;
    bool left_graded = false;
    for (auto [a, b] : cuts) {
        if (a > start) segs.push_back({start, a, left_graded, true});
        start = std::max(start, b);
        left_graded = true;
    }
    if (hi > start) segs.push_back({start, hi, left_graded, false});

    std::vector<std::pair<double, double>> panels;
    for (const Segment& s : segs) {
        std::vector<double> left{s.a}, right{s.b};
        double step = g;
        if (s.grade_left || s.grade_right) {
            while (step < h) {
                const double room = (right.back() - left.back());
                const double need = (s.grade_left ? step : 0.0) + (s.grade_right ? step : 0.0);
                if (need >= room) break;
                if (s.grade_left) left.push_back(left.back() + step);
                if (s.grade_right) right.push_back(right.back() - step);
                step *= 2.0;
            }
        }
        const double a = left.back(), b = right.back();
        const std::size_t m = std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil((b - a) / h)));
        std::vector<double> br(left.begin(), left.end() - 1);
        for (std::size_t i = 0; i <= m; ++i) br.push_back(a + (b - a) * static_cast<double>(i) / static_cast<double>(m));
        for (auto it = right.rbegin() + 1; it != right.rend(); ++it) br.push_back(*it);
        for (std::size_t i = 1; i < br.size(); ++i)
            if (br[i] > br[i - 1]) panels.push_back({br[i - 1], br[i]});
    }
    return panels;
}

struct Accumulator {
    std::vector<std::vector<cplx>> phi, pi, dphi;  // per time, rescaled field
    explicit Accumulator(std::size_t times = 0, std::size_t n = 0)
        : phi(times, std::vector<cplx>(n)), pi(times, std::vector<cplx>(n)), dphi(times, std::vector<cplx>(n)) {}
};

// Real-axis jump for scalar channels: (2 pi i)^{-1} (R(w + i0) - R(w - i0)) acts through
//   t11 = (1 - Re rho) / (2 pi Omega), t22 = (1 + Re rho) / (2 pi Omega), t12 = t21 = Im rho / (2 pi Omega)
// on the real pair phi^1 = Re phi_h, phi^2 = Im phi_h, with rho = B / conj(A).
inline void scalar_node(const Channel& ch, const FrequencyNode& node, std::span<const double> u,
                        std::span<const double> qw, std::span<const ChannelCoefficients> cf, const RescaledState& f,
                        std::span<const double> times, const SynthesisOptions& o, Accumulator& acc) {
    const double w = node.z.real();
    const RadialEquation eq = ch.equation(w);
    JostOptions jo;
    jo.tol = o.tol;
    const RadialSolution h = solve_radial(eq, Side::horizon, u, jo);
    // match at the grid node closest to u = 0
    std::size_t m = 0;
    for (std::size_t i = 1; i < u.size(); ++i)
        if (std::abs(u[i]) < std::abs(u[m])) m = i;
    const double um[1] = {u[m]};
    const RadialSolution fi = solve_radial(eq, Side::infinity, um, jo);
    const cplx ph = std::conj(h.phi[m]), dph = std::conj(h.dphi[m]);
    const cplx pf = fi.phi[0], dpf = fi.dphi[0];
    const cplx nrm = wronskian_values(pf, dpf, std::conj(pf), std::conj(dpf));
    const cplx A = wronskian_values(ph, dph, std::conj(pf), std::conj(dpf)) / nrm;
    const cplx B = wronskian_values(pf, dpf, ph, dph) / nrm;
    const cplx rho = B / std::conj(A);
    const double Om = eq.horizon_wavenumber().real();
    const double pref = 1.0 / (2.0 * std::numbers::pi * Om);
    const double t11 = (1.0 - rho.real()) * pref, t22 = (1.0 + rho.real()) * pref, t12 = rho.imag() * pref;

    cplx P1 = 0.0, P2 = 0.0;
    for (std::size_t i = 0; i < u.size(); ++i) {
        const cplx S = cf[i].c2 * f.f2[i] + (cf[i].c1 + cf[i].c2 * w) * f.f1[i];
        if (S == 0.0) continue;
        P1 += qw[i] * h.phi[i].real() * S;
        P2 += qw[i] * h.phi[i].imag() * S;
    }
    const cplx C1 = t11 * P1 + t12 * P2, C2 = t12 * P1 + t22 * P2;
    for (std::size_t t = 0; t < times.size(); ++t) {
        const cplx e = node.weight * std::exp(-I * w * times[t]);
        const cplx a1 = e * C1, a2 = e * C2;
        auto& P = acc.phi[t];
        auto& Q = acc.pi[t];
        auto& D = acc.dphi[t];
        for (std::size_t i = 0; i < u.size(); ++i) {
            const cplx v = a1 * h.phi[i].real() + a2 * h.phi[i].imag();
            P[i] += v;
            Q[i] += w * v;
            D[i] += a1 * h.dphi[i].real() + a2 * h.dphi[i].imag();
        }
    }
}

// Cubic Lagrange interpolation of grid data on a uniform grid (zero outside).
inline cplx interpolate(std::span<const cplx> f, double u0, double h, double u) {
    const double x = (u - u0) / h;
    const long n = static_cast<long>(f.size());
    if (x < 0.0 || x > static_cast<double>(n - 1)) return 0.0;
    long j = std::clamp(static_cast<long>(std::floor(x)) - 1, 0L, n - 4);
    const double t = x - static_cast<double>(j);
    const double l0 = -(t - 1) * (t - 2) * (t - 3) / 6.0, l1 = t * (t - 2) * (t - 3) / 2.0;
    const double l2 = -t * (t - 1) * (t - 3) / 2.0, l3 = t * (t - 1) * (t - 2) / 6.0;
    return l0 * f[j] + l1 * f[j + 1] + l2 * f[j + 2] + l3 * f[j + 3];
}

// Solution from one side together with the running integral of (solution * source),
// accumulated from the starting end.
struct SweptSolution {
    std::vector<cplx> phi, dphi, integral;
};

inline SweptSolution sweep(const Channel& ch, const RadialEquation& eq, Side side, std::span<const double> u, double hu,
                           const RescaledState& f, cplx z, const JostOptions& jo) {
    TortoiseMap map(eq.black_hole());
    const StartPoint sp = side == Side::horizon ? horizon_start(eq, map, u.front(), jo)
                                                : infinity_start(eq, map, u.back(), jo);
    using V4 = OdeVec<cplx, 4>;
    auto rhs = [&](double s, const V4& st) {
        const RadVec base = radial_rhs(eq, {st[0], st[1], st[2]});
        const double y = st[2].real();
        const ChannelCoefficients c = channel_coefficients(ch, y);
        const cplx S = c.c2 * interpolate(f.f2, u.front(), hu, s) + (c.c1 + c.c2 * z) * interpolate(f.f1, u.front(), hu, s);
        return V4{base[0], base[1], base[2], st[0] * S};
    };
    const std::size_t n = u.size();
    SweptSolution out{std::vector<cplx>(n), std::vector<cplx>(n), std::vector<cplx>(n)};
    std::vector<double> outs(u.begin(), u.end());
    if (side == Side::infinity) std::reverse(outs.begin(), outs.end());
    OdeOptions opt;
    opt.rtol = jo.tol;
    opt.atol = jo.tol * 1e-6;
    std::size_t k = 0;
    auto res = integrate_dp45<cplx, 4>(rhs, sp.u, V4{sp.state[0], sp.state[1], sp.state[2], 0.0}, outs, opt,
                                       [&](double, const V4& st) {
                                           const std::size_t i = side == Side::horizon ? k : n - 1 - k;
                                           out.phi[i] = st[0];
                                           out.dphi[i] = st[1];
                                           out.integral[i] = st[3];
                                           ++k;
                                           return true;
                                       });
    if (res.status != OdeStatus::completed) throw NumericalFailure("radial sweep failed", res.s);
    return out;
}

// Spin-weighted channels: inverse Laplace transform along Im z = s/2M, above the spectrum.
// R(z) Psi_0 comes from the Green's function of the pair decaying at both ends; adding
// sum_n (H + i)^n Psi_0 / (z + i)^{n+1} cancels its slow decay at large |z|, and the line
// integrals of those terms are restored in closed form from the pole at z = -i.
inline void contour_node(const Channel& ch, const FrequencyNode& node, std::span<const double> u, double hu,
                         const RescaledState& f, const std::vector<RescaledState>& powers,
                         std::span<const double> times, const SynthesisOptions& o, Accumulator& acc) {
    const cplx z = node.z;
    const RadialEquation eq = ch.equation(z);
    JostOptions jo;
    jo.tol = o.tol;
    jo.direction = -1;
    const SweptSolution L = sweep(ch, eq, Side::horizon, u, hu, f, z, jo);
    const SweptSolution R = sweep(ch, eq, Side::infinity, u, hu, f, z, jo);
    const std::size_t n = u.size(), mid = n / 2;
    const cplx W = wronskian_values(L.phi[mid], L.dphi[mid], R.phi[mid], R.dphi[mid]);
    std::vector<cplx> x1(n), x2(n);
    for (std::size_t i = 0; i < n; ++i) {
        // R.integral runs from +infinity down to u, i.e. minus the integral over (u, infinity)
        const cplx gs = -(R.phi[i] * L.integral[i] - L.phi[i] * R.integral[i]) / W;
        x1[i] = gs;
        x2[i] = f.f1[i] + z * gs;
    }
    cplx pw = 1.0 / (z + I);
    for (const RescaledState& p : powers) {
        for (std::size_t i = 0; i < n; ++i) {
            x1[i] += pw * p.f1[i];
            x2[i] += pw * p.f2[i];
        }
        pw /= (z + I);
    }
    for (std::size_t t = 0; t < times.size(); ++t) {
        const cplx e = node.weight * std::exp(-I * z * times[t]) / (2.0 * std::numbers::pi * I);
        for (std::size_t i = 0; i < n; ++i) {
            acc.phi[t][i] += e * x1[i];
            acc.pi[t][i] += e * x2[i];
        }
    }
}

inline RescaledState apply_shifted(const Channel& ch, std::span<const double> u, double hu,
                                   std::span<const ChannelCoefficients> cf, const RescaledState& x) {
    // (H + i) x in the rescaled variables
    auto d2 = second_difference(x.f1, hu);
    RescaledState y;
    y.f1.resize(u.size());
    y.f2.resize(u.size());
    for (std::size_t i = 0; i < u.size(); ++i) {
        y.f1[i] = x.f2[i] + I * x.f1[i];
        y.f2[i] = (-d2[i] + cf[i].c0 * x.f1[i] - cf[i].c1 * x.f2[i]) / cf[i].c2 + I * x.f2[i];
    }
    (void)ch;
    return y;
}

} // namespace detail

inline Evolution synthesize_evolution(const Channel& ch, const StateVector& psi0, std::span<const double> times,
                                      const SynthesisOptions& o = {}) {
    detail::check_state(psi0);
    require(psi0.s == ch.s && psi0.k == ch.k && psi0.n == ch.n, "state and channel disagree");
    require(ch.s >= 0, "synthesis supports s >= 0");
    require(o.level >= 0 && o.per_panel >= 2 && o.chunks >= 1 && o.tol > 0 && o.tail > 0 && o.guard > 0,
            "invalid synthesis options");
    for (double t : times) require(std::isfinite(t) && t >= 0.0, "times must be finite and non-negative");
    const std::vector<double> u = psi0.u;
    const double hu = detail::uniform_step(u);
    const std::size_t n = u.size();
    const auto cf = detail::grid_coefficients(ch, u);
    const auto f = detail::rescale(psi0, cf);
    const auto qw = simpson_weights(u);
    // the data must vanish at the grid ends
    for (std::size_t i : {std::size_t(0), std::size_t(1), n - 2, n - 1})
        require(std::abs(f.f1[i]) + std::abs(f.f2[i]) == 0.0, "initial data must be compactly supported inside the grid");

    Evolution ev;
    ev.times.assign(times.begin(), times.end());
    double lo, hi;
    if (o.omega_max > 0.0) {
        lo = -o.omega_max;
        hi = o.omega_max;
    } else {
        std::tie(lo, hi) = detail::spectral_band(u, f, o.tail);
    }
    const double t_max = times.empty() ? 0.0 : *std::max_element(times.begin(), times.end());
    const double U = std::max(std::abs(u.front()), std::abs(u.back()));
    const double h = std::min(0.25, o.panel_phase / (t_max + 2.0 * U)) / std::pow(2.0, o.level);
    const double w0 = horizon_frequency(ch.bh, ch.k, 1.0).omega0;
    const double g = o.guard * (w0 != 0.0 ? std::abs(w0) : 1.0 / ch.bh.mass());

    std::vector<detail::FrequencyNode> nodes;
    std::vector<detail::RescaledState> powers;
    const QuadratureRule gl = gauss_legendre(static_cast<std::size_t>(o.per_panel));
    auto add_panels = [&](const std::vector<std::pair<double, double>>& panels, double shift, int leg) {
        for (auto [a, b] : panels) {
            for (std::size_t j = 0; j < gl.nodes.size(); ++j) {
                const double x = 0.5 * (a + b) + 0.5 * (b - a) * gl.nodes[j];
                nodes.push_back({cplx(x, shift), 0.5 * (b - a) * gl.weights[j], leg});
            }
        }
    };
    if (ch.s == 0) {
        ev.omega_lo = lo;
        ev.omega_hi = hi;
        add_panels(detail::frequency_panels(lo, hi, {0.0, w0}, g, h), 0.0, 0);
        // trapezoid across each guard band: exact for c / (w - p) + const
        for (auto [a, b] : detail::guard_cuts(lo, hi, {0.0, w0}, g)) {
            if (a <= lo || b >= hi) continue;
            nodes.push_back({cplx(a, 0.0), 0.5 * (b - a), 0});
            nodes.push_back({cplx(b, 0.0), 0.5 * (b - a), 0});
        }
    } else {
        // line Im z = s/2M over [-X, X]; the subtracted resolvent expansion leaves an O(|z|^-(m+1)) tail
        const double X = o.contour_reach * std::max({std::abs(lo), std::abs(hi), 1.0 / ch.bh.mass()});
        ev.omega_lo = -X;
        ev.omega_hi = X;
        const double c = ch.s / (2.0 * ch.bh.mass());
        add_panels(detail::frequency_panels(-X, X, {}, g, h), c, 1);
        detail::RescaledState cur = f;
        powers.push_back(cur);
        for (int j = 1; j < o.subtractions; ++j) {
            cur = detail::apply_shifted(ch, u, hu, cf, cur);
            powers.push_back(cur);
        }
    }
    ev.nodes = nodes.size();

    const std::size_t nt = times.size();
    const std::size_t nchunks = std::min<std::size_t>(static_cast<std::size_t>(o.chunks), std::max<std::size_t>(1, nodes.size()));
    std::vector<detail::Accumulator> partial(nchunks);
    parallel_for(nchunks, [&](std::size_t c) {
        detail::Accumulator acc(nt, n);
        const std::size_t a = nodes.size() * c / nchunks, b = nodes.size() * (c + 1) / nchunks;
        for (std::size_t j = a; j < b; ++j) {
            if (nodes[j].leg == 0) {
                detail::scalar_node(ch, nodes[j], u, qw, cf, f, times, o, acc);
            } else {
                detail::contour_node(ch, nodes[j], u, hu, f, powers, times, o, acc);
            }
        }
        partial[c] = std::move(acc);
    }, o.threads);

    for (std::size_t t = 0; t < nt; ++t) {
        StateVector st{ch.s, ch.k, ch.n, u, std::vector<cplx>(n), std::vector<cplx>(n), {}};
        std::vector<cplx> d(n);
        for (const auto& p : partial) {
            for (std::size_t i = 0; i < n; ++i) {
                st.phi[i] += p.phi[t][i];
                st.pi[i] += p.pi[t][i];
                d[i] += p.dphi[t][i];
            }
        }
        // closed-form line integrals of the subtracted terms: pole at z = -i
        cplx c = std::exp(-times[t]);
        for (std::size_t m = 0; m < powers.size(); ++m) {
            if (m > 0) c *= -I * times[t] / static_cast<double>(m);
            for (std::size_t i = 0; i < n; ++i) {
                st.phi[i] += c * powers[m].f1[i];
                st.pi[i] += c * powers[m].f2[i];
            }
        }
        for (std::size_t i = 0; i < n; ++i) {
            const double sq = std::sqrt(cf[i].w2);
            st.phi[i] /= sq;
            st.pi[i] /= sq;
        }
        if (ch.s == 0) {
            st.dphi.resize(n);
            for (std::size_t i = 0; i < n; ++i) {
                const double sq = std::sqrt(cf[i].w2);
                st.dphi[i] = (d[i] - cf[i].G * st.phi[i] * sq) / sq;
            }
        }
        ev.states.push_back(std::move(st));
    }
    return ev;
}

// Relative L^2(du) distance between two states, both components.
inline double relative_l2_distance(const StateVector& a, const StateVector& b) {
    require(a.u == b.u, "states live on different grids");
    auto w = simpson_weights(a.u);
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < a.u.size(); ++i) {
        num += w[i] * (std::norm(a.phi[i] - b.phi[i]) + std::norm(a.pi[i] - b.pi[i]));
        den += w[i] * (std::norm(b.phi[i]) + std::norm(b.pi[i]));
    }
    return den > 0.0 ? std::sqrt(num / den) : std::sqrt(num);
}

// ---------------------------------------------------------------------------------------
// Outgoing energy

// Energy of the part of a far-zone state already moving outward, 1/2 int |phi' + i pi|^2 du
// in the rescaled field (the split of a free wave into u - t and u + t movers). That part
// never reaches the hole, so it counts towards E_out even after it has left a finite grid.
inline double initial_outgoing_energy(const Channel& ch, const StateVector& st) {
    detail::check_state(st);
    require(st.k == ch.k && st.s == ch.s, "state and channel disagree");
    const auto cf = detail::grid_coefficients(ch, st.u);
    std::vector<cplx> d;
    if (st.dphi.empty()) d = detail::first_difference(st.phi, detail::uniform_step(st.u));
    const std::span<const cplx> dphi = st.dphi.empty() ? std::span<const cplx>(d) : std::span<const cplx>(st.dphi);
    const auto w = simpson_weights(st.u);
    double acc = 0.0;
    for (std::size_t i = 0; i < st.u.size(); ++i) {
        const double sq = std::sqrt(cf[i].w2);
        const cplx f_u = sq * (dphi[i] + cf[i].G * st.phi[i]);
        acc += 0.5 * w[i] * std::norm(f_u + I * sq * st.pi[i]);
    }
    return acc;
}

struct OutgoingEnergy {
    double value = 0.0;     // energy in r > r_cut at the last time
    double previous = 0.0;  // same at the second-to-last time
    double trend = 0.0;     // relative change between them
    bool stabilized = false;
};

inline OutgoingEnergy outgoing_energy(const Channel& ch, const Evolution& ev, double r_cut = 0.0,
                                      double stable_rel = 1e-2, bool require_stable = true) {
    require(ev.states.size() >= 2, "outgoing energy needs at least two sampled times");
    if (r_cut == 0.0) r_cut = 2.0 * ch.bh.r_plus();
    require(r_cut > ch.bh.r_plus(), "cut radius must lie outside the horizon");
    const double u_cut = TortoiseMap(ch.bh).tortoise(r_cut);
    OutgoingEnergy out;
    out.value = energy(ch, ev.states.back(), u_cut).total;
    out.previous = energy(ch, ev.states[ev.states.size() - 2], u_cut).total;
    const double scale = std::max(std::abs(out.value), std::abs(out.previous));
    out.trend = scale > 0.0 ? (out.value - out.previous) / scale : 0.0;
    out.stabilized = std::abs(out.trend) < stable_rel;
    if (require_stable && !out.stabilized) throw NumericalFailure("outgoing energy has not stabilized", out.trend);
    return out;
}

} // namespace kerrwave
