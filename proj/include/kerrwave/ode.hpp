#pragma once

// Dormand-Prince 5(4) integrator with embedded error control.
// Steps are shortened so that every requested output abscissa is hit exactly.

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <cstddef>
#include <initializer_list>
#include <limits>
#include <span>
#include <utility>

namespace kerrwave {

template <class T, std::size_t N>
using OdeVec = std::array<T, N>;

struct OdeOptions {
    double rtol = 1e-10;
    double atol = 1e-12;
    double h_init = 0.0;  // 0 selects the step automatically
    double h_max = 0.0;   // 0 means unbounded
    std::size_t max_steps = 20'000'000;
    bool max_norm = false;  // max over components instead of RMS
};

enum class OdeStatus { completed, stopped, step_underflow, too_many_steps };

template <class T, std::size_t N>
struct OdeResult {
    OdeStatus status = OdeStatus::completed;
    double s = 0.0;
    OdeVec<T, N> y{};
    std::size_t accepted = 0;
    std::size_t rejected = 0;
};

namespace detail {

inline double magnitude(double x) { return std::abs(x); }
inline double magnitude(const std::complex<double>& z) { return std::abs(z); }

template <class T, std::size_t N>
double rms_error(const OdeVec<T, N>& err, const OdeVec<T, N>& y0, const OdeVec<T, N>& y1,
                 const OdeOptions& opt) {
    double acc = 0.0;
    for (std::size_t i = 0; i < N; ++i) {
        double sc = opt.atol + opt.rtol * std::max(magnitude(y0[i]), magnitude(y1[i]));
        double e = magnitude(err[i]) / sc;
        acc = opt.max_norm ? std::max(acc, e) : acc + e * e;
    }
    return opt.max_norm ? acc : std::sqrt(acc / static_cast<double>(N));
}

template <class T, std::size_t N>
double rms_norm(const OdeVec<T, N>& v, const OdeVec<T, N>& y, const OdeOptions& opt) {
    double acc = 0.0;
    for (std::size_t i = 0; i < N; ++i) {
        double e = magnitude(v[i]) / (opt.atol + opt.rtol * magnitude(y[i]));
        acc += e * e;
    }
    return std::sqrt(acc / static_cast<double>(N));
}

} // namespace detail

// Integrates dy/ds = f(s, y) from s0 through the ordered abscissae in `outputs`
// (all on one side of s0, monotone). `on_output(s, y)` is invoked at each of them;
// `on_step(s, y)` after every accepted step. Either may return false to stop.
template <class T, std::size_t N, class Rhs, class OnOutput, class OnStep>
OdeResult<T, N> integrate_dp45(Rhs&& f, double s0, OdeVec<T, N> y, std::span<const double> outputs,
                               const OdeOptions& opt, OnOutput&& on_output, OnStep&& on_step) {
    constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
    constexpr double a21 = 1.0 / 5;
    constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
    constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
    constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561,
                     a54 = -212.0 / 729;
    constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247,
                     a64 = 49.0 / 176, a65 = -5103.0 / 18656;
    constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192, b5 = -2187.0 / 6784,
                     b6 = 11.0 / 84;
    constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920,
                     e5 = -17253.0 / 339200, e6 = 22.0 / 525, e7 = -1.0 / 40;

    OdeResult<T, N> res;
    res.s = s0;
    res.y = y;
    if (outputs.empty()) return res;

    double s = s0;
    const double s_end = outputs.back();
    const double dir = (s_end >= s0) ? 1.0 : -1.0;
    std::size_t next = 0;
    while (next < outputs.size() && outputs[next] == s) {
        if (!on_output(s, y)) {
            res.status = OdeStatus::stopped;
            return res;
        }
        ++next;
    }
    if (next == outputs.size()) return res;

    OdeVec<T, N> k1, k2, k3, k4, k5, k6, k7, tmp, ynew, err;
    auto combine = [&](OdeVec<T, N>& out, double h, std::initializer_list<std::pair<double, const OdeVec<T, N>*>> terms) {
        for (std::size_t i = 0; i < N; ++i) {
            T acc = y[i];
            for (const auto& [c, v] : terms) acc += (h * c) * (*v)[i];
            out[i] = acc;
        }
    };

    k1 = f(s, y);
    double h;
    if (opt.h_init > 0) {
        h = opt.h_init;
    } else {
        // Hairer-Norsett-Wanner starting step heuristic.
        double d0 = detail::rms_norm<T, N>(y, y, opt), d1 = detail::rms_norm<T, N>(k1, y, opt);
        double h0 = (d0 < 1e-5 || d1 < 1e-5) ? 1e-6 : 0.01 * d0 / d1;
        h0 = std::min(h0, std::abs(s_end - s));
        combine(tmp, dir * h0, {{1.0, &k1}});
        OdeVec<T, N> f1 = f(s + dir * h0, tmp);
        OdeVec<T, N> df;
        for (std::size_t i = 0; i < N; ++i) df[i] = f1[i] - k1[i];
        double d2 = detail::rms_norm<T, N>(df, y, opt) / h0;
        double dm = std::max(d1, d2);
        double h1 = dm <= 1e-15 ? std::max(1e-6, h0 * 1e-3) : std::pow(0.01 / dm, 0.2);
        h = std::min(100 * h0, h1);
    }
    if (opt.h_max > 0) h = std::min(h, opt.h_max);

    bool last_rejected = false;
    while (true) {
        if (res.accepted + res.rejected >= opt.max_steps) {
            res.status = OdeStatus::too_many_steps;
            break;
        }
        const double target = outputs[next];
        double hstep = std::min(h, std::abs(target - s));
        bool hits = hstep >= std::abs(target - s);
        if (!hits && std::abs(target - s) - hstep < 1e-3 * hstep) {
            hstep = 0.5 * std::abs(target - s);
        }
        if (hstep <= 8.0 * std::numeric_limits<double>::epsilon() * std::max(1.0, std::abs(s))) {
            res.status = OdeStatus::step_underflow;
            break;
        }
        const double hs = dir * hstep;

        combine(tmp, hs, {{a21, &k1}});
        k2 = f(s + c2 * hs, tmp);
        combine(tmp, hs, {{a31, &k1}, {a32, &k2}});
        k3 = f(s + c3 * hs, tmp);
        combine(tmp, hs, {{a41, &k1}, {a42, &k2}, {a43, &k3}});
        k4 = f(s + c4 * hs, tmp);
        combine(tmp, hs, {{a51, &k1}, {a52, &k2}, {a53, &k3}, {a54, &k4}});
        k5 = f(s + c5 * hs, tmp);
        combine(tmp, hs, {{a61, &k1}, {a62, &k2}, {a63, &k3}, {a64, &k4}, {a65, &k5}});
        k6 = f(s + hs, tmp);
        combine(ynew, hs, {{b1, &k1}, {b3, &k3}, {b4, &k4}, {b5, &k5}, {b6, &k6}});
        const double s_new = hits ? target : s + hs;
        k7 = f(s_new, ynew);
        for (std::size_t i = 0; i < N; ++i) {
            err[i] = hs * (e1 * k1[i] + e3 * k3[i] + e4 * k4[i] + e5 * k5[i] + e6 * k6[i] + e7 * k7[i]);
        }
        double en = detail::rms_error<T, N>(err, y, ynew, opt);
        if (!std::isfinite(en)) en = 1e10;

        if (en <= 1.0) {
            s = s_new;
            y = ynew;
            k1 = k7;
            ++res.accepted;
            res.s = s;
            res.y = y;
            double fac = en == 0.0 ? 5.0 : std::clamp(0.9 * std::pow(en, -0.2), 0.2, 5.0);
            if (last_rejected) fac = std::min(fac, 1.0);
            // A clipped step says nothing about how large the next one may be.
            double grow = hits ? std::max(h, hstep) : hstep;
            h = grow * fac;
            if (opt.h_max > 0) h = std::min(h, opt.h_max);
            last_rejected = false;
            if (!on_step(s, y)) {
                res.status = OdeStatus::stopped;
                break;
            }
            if (hits) {
                bool stop = false;
                while (next < outputs.size() && outputs[next] == s) {
                    if (!on_output(s, y)) {
                        stop = true;
                        break;
                    }
                    ++next;
                }
                if (stop) {
                    res.status = OdeStatus::stopped;
                    break;
                }
                if (next == outputs.size()) break;
            }
        } else {
            ++res.rejected;
            h = hstep * std::max(0.2, 0.9 * std::pow(en, -0.2));
            last_rejected = true;
        }
    }
    return res;
}

template <class T, std::size_t N, class Rhs, class OnOutput>
OdeResult<T, N> integrate_dp45(Rhs&& f, double s0, OdeVec<T, N> y, std::span<const double> outputs,
                               const OdeOptions& opt, OnOutput&& on_output) {
    return integrate_dp45<T, N>(std::forward<Rhs>(f), s0, y, outputs, opt,
                                std::forward<OnOutput>(on_output),
                                [](double, const OdeVec<T, N>&) { return true; });
}

} // namespace kerrwave
