#pragma once

// Kerr exterior in Boyer-Lindquist coordinates, signature (+,-,-,-), G = c = 1.

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include "errors.hpp"

namespace kerrwave {

class BlackHole {
public:
    BlackHole(double mass, double spin) : m_(mass), a_(spin) {
        require(std::isfinite(mass) && std::isfinite(spin), "black hole parameters must be finite");
        require(mass > 0.0, "mass must be positive");
        require(mass * mass > spin * spin, "spin must satisfy a^2 < M^2 (non-extreme)");
        double root = std::sqrt(m_ * m_ - a_ * a_);
        r1_ = m_ + root;
        r2_ = m_ - root;
    }

    double mass() const { return m_; }
    double spin() const { return a_; }
    double angular_momentum() const { return a_ * m_; }
    double r_plus() const { return r1_; }
    double r_minus() const { return r2_; }
    // (r1 - M)/(r1^2 + a^2); the exponential rate of Delta in the tortoise coordinate is 2 kappa
    double surface_gravity() const { return (r1_ - m_) / (r1_ * r1_ + a_ * a_); }
    double horizon_angular_velocity() const { return a_ / (r1_ * r1_ + a_ * a_); }
    double delta(double r) const { return r * r - 2.0 * m_ * r + a_ * a_; }

private:
    double m_, a_, r1_, r2_;
};

struct SpacetimePoint {
    double t = 0.0, r = 0.0, theta = 0.0, phi = 0.0;
};

struct MetricScalars {
    double delta;  // r^2 - 2Mr + a^2
    double sigma;  // r^2 + a^2 cos^2(theta)
    double g_tt;
};

namespace detail {
inline void check_radius(const BlackHole& bh, double r) {
    require(std::isfinite(r), "radius must be finite");
    // The horizon itself is admitted so that Delta(r1) = 0 can be evaluated.
    require(r >= bh.r_plus() * (1.0 - 4.0 * std::numeric_limits<double>::epsilon()),
            "radius must lie outside the event horizon");
}
inline void check_polar_closed(double theta) {
    require(theta >= 0.0 && theta <= std::numbers::pi, "polar angle must lie in [0, pi]");
}
inline void check_polar_open(double theta) {
    require(theta > 0.0 && theta < std::numbers::pi, "polar angle must lie strictly between the poles");
}
} // namespace detail

inline MetricScalars metric_scalars(const BlackHole& bh, double r, double theta) {
    detail::check_radius(bh, r);
    detail::check_polar_closed(theta);
    const double a = bh.spin(), s = std::sin(theta), c = std::cos(theta);
    MetricScalars out;
    out.delta = bh.delta(r);
    out.sigma = r * r + a * a * c * c;
    out.g_tt = (out.delta - a * a * s * s) / out.sigma;
    return out;
}

struct HorizonErgo {
    double horizon_radius;
    double ergosphere_radius;
};

inline HorizonErgo horizon_and_ergosphere(const BlackHole& bh, double theta) {
    detail::check_polar_closed(theta);
    const double m = bh.mass(), a = bh.spin(), c = std::cos(theta);
    return {bh.r_plus(), m + std::sqrt(m * m - a * a * c * c)};
}

struct HorizonFrequency {
    double omega0;  // -a k / (r1^2 + a^2)
    double Omega;   // omega - omega0
};

inline HorizonFrequency horizon_frequency(const BlackHole& bh, int k, double omega) {
    const double w0 = -static_cast<double>(k) * bh.horizon_angular_velocity();
    return {w0, omega - w0};
}

inline double irreducible_mass(const BlackHole& bh) {
    const double m = bh.mass(), j = bh.angular_momentum();
    return std::sqrt(0.5 * (m * m + std::sqrt(m * m * m * m - j * j)));
}

// Bound on the angular momentum change for an extraction step dM < 0:
// true iff dJ <= dM / Omega_H  (< 0).
inline bool penrose_bound(const BlackHole& bh, double dM, double dJ) {
    require(bh.spin() > 0.0, "penrose_bound needs a > 0");
    require(dM < 0.0, "penrose_bound needs dM < 0");
    return dJ <= dM / bh.horizon_angular_velocity();
}

// The same bound imposed on both the initial and the post-step hole. For finite
// steps this is what keeps the irreducible mass from decreasing.
inline bool penrose_bound_finite(const BlackHole& bh, double dM, double dJ) {
    if (!penrose_bound(bh, dM, dJ)) return false;
    const double m1 = bh.mass() + dM;
    if (m1 <= 0.0) return false;
    const double a1 = (bh.angular_momentum() + dJ) / m1;
    if (!(a1 > 0.0) || a1 >= m1) return false;
    return penrose_bound(BlackHole(m1, a1), dM, dJ);
}

// Tortoise coordinate u(r) with du/dr = (r^2 + a^2)/Delta, constant fixed so that
// a = 0 gives u = r + 2M log(r - 2M).
class TortoiseMap {
public:
    explicit TortoiseMap(const BlackHole& bh, double tolerance = 1e-12) : bh_(bh), tol_(tolerance) {
        require(tolerance > 0.0, "tortoise tolerance must be positive");
        const double r1 = bh.r_plus(), r2 = bh.r_minus(), m = bh.mass();
        c1_ = 2.0 * m * r1 / (r1 - r2);
        c2_ = 2.0 * m * r2 / (r1 - r2);
    }

    const BlackHole& black_hole() const { return bh_; }
    double tolerance() const { return tol_; }

    double tortoise(double r) const {
        require(std::isfinite(r) && r > bh_.r_plus(), "tortoise: radius must exceed r1");
        return from_log(std::log(r - bh_.r_plus()));
    }

    // u as a function of y = log(r - r1); finite for every real y.
    double from_log(double y) const {
        const double r1 = bh_.r_plus(), r2 = bh_.r_minus();
        const double e = std::exp(y);
        double u = r1 + e + c1_ * y;
        if (c2_ != 0.0) u -= c2_ * std::log(r1 - r2 + e);
        return u;
    }

    // Inverse in terms of y = log(r - r1): safeguarded Newton iteration.
    double inverse_log(double u) const {
        require(std::isfinite(u), "inverse_tortoise: u must be finite");
        const double r1 = bh_.r_plus(), r2 = bh_.r_minus();
        auto dudy = [&](double y) { double e = std::exp(y); return (r1 * r1 + 2 * r1 * e + e * e + spin2()) / (r1 - r2 + e); };
        double lo = 0.0, hi = 0.0;
        if (from_log(0.0) < u) {
            hi = 1.0;
            while (from_log(hi) < u) { lo = hi; hi *= 2.0; }
        } else {
            lo = -1.0;
            while (from_log(lo) > u) { hi = lo; lo *= 2.0; }
        }
        double y = (u > r1 + 1.0) ? std::clamp(std::log(std::max(u - r1, 1e-300)), lo, hi) : 0.5 * (lo + hi);
        const double scale = std::max(1.0, std::abs(u));
        double res = from_log(y) - u;
        for (int it = 0; it < 200; ++it) {
            if (std::abs(res) <= tol_ * scale) return y;
            if (res > 0) hi = y; else lo = y;
            double yn = y - res / dudy(y);
            if (!(yn > lo && yn < hi)) yn = 0.5 * (lo + hi);
            y = yn;
            res = from_log(y) - u;
        }
        throw NumericalFailure("inverse tortoise iteration did not converge", std::abs(res));
    }

    double inverse(double u) const { return bh_.r_plus() + std::exp(inverse_log(u)); }

private:
    double spin2() const { return bh_.spin() * bh_.spin(); }
    BlackHole bh_;
    double tol_;
    double c1_, c2_;
};

using Matrix4 = std::array<std::array<double, 4>, 4>;
using Connection = std::array<Matrix4, 4>;  // Gamma[k][i][j] = Gamma^k_ij

struct MetricDerivatives {
    Matrix4 g;
    Matrix4 dr;
    Matrix4 dtheta;
};

// Coordinate indices.
namespace bl {
inline constexpr int t = 0, r = 1, theta = 2, phi = 3;
}

inline MetricDerivatives metric_with_derivatives(const BlackHole& bh, double r, double theta) {
    const double m = bh.mass(), a = bh.spin();
    const double sn = std::sin(theta), cs = std::cos(theta), sn2 = sn * sn;
    const double U = r * r + a * a * cs * cs;
    const double Ur = 2.0 * r, Uth = -2.0 * a * a * cs * sn;
    const double D = bh.delta(r), Dr = 2.0 * r - 2.0 * m;
    const double w = r * r + a * a;
    const double U2 = U * U;

    MetricDerivatives md{};
    auto& g = md.g;
    g[bl::t][bl::t] = 1.0 - 2.0 * m * r / U;
    g[bl::t][bl::phi] = g[bl::phi][bl::t] = 2.0 * m * r * a * sn2 / U;
    g[bl::phi][bl::phi] = -sn2 * (w + 2.0 * m * a * a * r * sn2 / U);
    g[bl::r][bl::r] = -U / D;
    g[bl::theta][bl::theta] = -U;

    auto& gr = md.dr;
    gr[bl::t][bl::t] = -2.0 * m * (U - r * Ur) / U2;
    gr[bl::t][bl::phi] = gr[bl::phi][bl::t] = 2.0 * m * a * sn2 * (U - r * Ur) / U2;
    gr[bl::phi][bl::phi] = -2.0 * r * sn2 - 2.0 * m * a * a * sn2 * sn2 * (U - r * Ur) / U2;
    gr[bl::r][bl::r] = -(Ur * D - U * Dr) / (D * D);
    gr[bl::theta][bl::theta] = -Ur;

    auto& gt = md.dtheta;
    gt[bl::t][bl::t] = 2.0 * m * r * Uth / U2;
    gt[bl::t][bl::phi] = gt[bl::phi][bl::t] = 2.0 * m * a * r * (2.0 * sn * cs * U - sn2 * Uth) / U2;
    gt[bl::phi][bl::phi] = -2.0 * sn * cs * w - 2.0 * m * a * a * r * (4.0 * sn2 * sn * cs * U - sn2 * sn2 * Uth) / U2;
    gt[bl::r][bl::r] = -Uth / D;
    gt[bl::theta][bl::theta] = -Uth;
    return md;
}

inline Matrix4 inverse_metric(const Matrix4& g) {
    Matrix4 gi{};
    const double det = g[bl::t][bl::t] * g[bl::phi][bl::phi] - g[bl::t][bl::phi] * g[bl::t][bl::phi];
    gi[bl::t][bl::t] = g[bl::phi][bl::phi] / det;
    gi[bl::phi][bl::phi] = g[bl::t][bl::t] / det;
    gi[bl::t][bl::phi] = gi[bl::phi][bl::t] = -g[bl::t][bl::phi] / det;
    gi[bl::r][bl::r] = 1.0 / g[bl::r][bl::r];
    gi[bl::theta][bl::theta] = 1.0 / g[bl::theta][bl::theta];
    return gi;
}

inline void check_exterior(const BlackHole& bh, const SpacetimePoint& x) {
    require(std::isfinite(x.r) && x.r > bh.r_plus(), "point must lie outside the event horizon");
    detail::check_polar_open(x.theta);
}

inline Matrix4 metric(const BlackHole& bh, const SpacetimePoint& x) {
    check_exterior(bh, x);
    return metric_with_derivatives(bh, x.r, x.theta).g;
}

// Christoffel symbols from a metric and its r, theta derivatives (all other
// coordinate derivatives vanish).
inline Connection connection_from(const Matrix4& g, const Matrix4& dr, const Matrix4& dth) {
    const Matrix4 gi = inverse_metric(g);
    auto d = [&](int c, int i, int j) {
        if (c == bl::r) return dr[i][j];
        if (c == bl::theta) return dth[i][j];
        return 0.0;
    };
    Connection G{};
    for (int k = 0; k < 4; ++k)
        for (int i = 0; i < 4; ++i)
            for (int j = i; j < 4; ++j) {
                double acc = 0.0;
                for (int l = 0; l < 4; ++l) {
                    if (gi[k][l] == 0.0) continue;
                    acc += gi[k][l] * (d(i, l, j) + d(j, l, i) - d(l, i, j));
                }
                G[k][i][j] = G[k][j][i] = 0.5 * acc;
            }
    return G;
}

inline Connection christoffel(const BlackHole& bh, const SpacetimePoint& x) {
    check_exterior(bh, x);
    const auto md = metric_with_derivatives(bh, x.r, x.theta);
    return connection_from(md.g, md.dr, md.dtheta);
}

} // namespace kerrwave
