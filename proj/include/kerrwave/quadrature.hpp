#pragma once

#include <cmath>
#include <cstddef>
#include <numbers>
#include <span>
#include <stdexcept>
#include <vector>

#include "errors.hpp"

namespace kerrwave {

struct QuadratureRule {
    std::vector<double> nodes;
    std::vector<double> weights;
};

// Gauss-Legendre rule with n points on [-1, 1] (Newton iteration on P_n).
inline QuadratureRule gauss_legendre(std::size_t n) {
    require(n >= 1, "gauss_legendre: need at least one node");
    QuadratureRule q{std::vector<double>(n), std::vector<double>(n)};
    auto legendre = [n](double x, double& dp) {
        double p0 = 1.0, p1 = x;
        for (std::size_t k = 2; k <= n; ++k) {
            double pk = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / static_cast<double>(k);
            p0 = p1;
            p1 = pk;
        }
        dp = static_cast<double>(n) * (x * p1 - p0) / (x * x - 1.0);
        return p1;
    };
    if (n == 1) {
        q.nodes[0] = 0.0;
        q.weights[0] = 2.0;
        return q;
    }
    for (std::size_t i = 0; i < (n + 1) / 2; ++i) {
        double x = std::cos(std::numbers::pi * (static_cast<double>(i) + 0.75) / (static_cast<double>(n) + 0.5));
        double dp = 0.0;
        for (int it = 0; it < 100; ++it) {
            double dx = legendre(x, dp) / dp;
            x -= dx;
            if (std::abs(dx) < 1e-16) break;
        }
        legendre(x, dp);
        double w = 2.0 / ((1.0 - x * x) * dp * dp);
        q.nodes[i] = -x;
        q.nodes[n - 1 - i] = x;
        q.weights[i] = w;
        q.weights[n - 1 - i] = w;
    }
    return q;
}

// Composite rule: `per_panel` Gauss points on each [breaks[i], breaks[i+1]].
inline QuadratureRule composite_gauss(std::span<const double> breaks, std::size_t per_panel) {
    QuadratureRule base = gauss_legendre(per_panel);
    QuadratureRule q;
    for (std::size_t i = 0; i + 1 < breaks.size(); ++i) {
        double a = breaks[i], b = breaks[i + 1];
        double mid = 0.5 * (a + b), half = 0.5 * (b - a);
        for (std::size_t j = 0; j < per_panel; ++j) {
            q.nodes.push_back(mid + half * base.nodes[j]);
            q.weights.push_back(half * base.weights[j]);
        }
    }
    return q;
}

// Composite Simpson weights for an arbitrary increasing grid (pairs of intervals,
// non-uniform formula; trailing odd interval handled by the three-point end correction).
inline std::vector<double> simpson_weights(std::span<const double> x) {
    const std::size_t n = x.size();
    require(n >= 2, "simpson_weights: need at least two points");
    std::vector<double> w(n, 0.0);
    if (n == 2) {
        w[0] = w[1] = 0.5 * (x[1] - x[0]);
        return w;
    }
    auto pair = [&](std::size_t i) {
        double h0 = x[i + 1] - x[i], h1 = x[i + 2] - x[i + 1], hs = h0 + h1;
        w[i] += hs / 6.0 * (2.0 - h1 / h0);
        w[i + 1] += hs * hs * hs / (6.0 * h0 * h1);
        w[i + 2] += hs / 6.0 * (2.0 - h0 / h1);
    };
    std::size_t i = 0;
    for (; i + 2 < n; i += 2) pair(i);
    if (i + 1 < n) {
        // last interval [x_{n-2}, x_{n-1}] integrated with the parabola through the last three points
        double h0 = x[n - 2] - x[n - 3], h1 = x[n - 1] - x[n - 2];
        w[n - 1] += h1 * (2.0 * h1 + 3.0 * h0) / (6.0 * (h0 + h1));
        w[n - 2] += h1 * (h1 + 3.0 * h0) / (6.0 * h0);
        w[n - 3] -= h1 * h1 * h1 / (6.0 * h0 * (h0 + h1));
    }
    return w;
}

inline std::vector<double> linspace(double a, double b, std::size_t n) {
    require(n >= 1, "linspace: need at least one point");
    std::vector<double> v(n);
    if (n == 1) {
        v[0] = a;
        return v;
    }
    for (std::size_t i = 0; i < n; ++i) v[i] = a + (b - a) * static_cast<double>(i) / static_cast<double>(n - 1);
    v[n - 1] = b;
    return v;
}

} // namespace kerrwave
