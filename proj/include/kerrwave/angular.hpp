#pragma once

// Spin-weighted spheroidal harmonics. With the mode ansatz exp(-i w t - i k phi),
// x = cos(theta) and c = a w, the separated angular operator is
//
//   A = -d/dx (1 - x^2) d/dx + (k - s x)^2 / (1 - x^2) + c^2 (1 - x^2) + 2 c k + 2 s c x,
//
// real and symmetric on L^2(dx). At c = 0 its eigenvalues are l(l+1) - s^2 with
// l = max(|k|, |s|) + n - 1, n = 1, 2, ...

#include <Eigen/Dense>
#include <cmath>
#include <cstdlib>
#include <numbers>
#include <string>
#include <vector>

#include "errors.hpp"
#include "quadrature.hpp"

namespace kerrwave {

struct AngularProblem {
    int s = 0;
    int k = 0;
    double c = 0.0;  // spheroidicity a * omega
    int N = 32;      // basis truncation
};

struct AngularEigenpair {
    int n = 1;  // 1-based, ordered by increasing eigenvalue
    double lambda = 0.0;
    std::vector<double> coefficients;  // in the orthonormal weighted-Jacobi basis
    double normalization = 1.0;        // sign applied to the unit eigenvector
    double convergence_drift = 0.0;    // |lambda(N) - lambda(2N)|
    int s = 0;
    int k = 0;
    double c = 0.0;
};

// Orthonormal basis (1-x)^{alpha/2} (1+x)^{beta/2} p_j(x), alpha = |k - s|, beta = |k + s|,
// p_j orthonormal Jacobi polynomials.
class JacobiBasis {
public:
    JacobiBasis(int s, int k) : alpha_(std::abs(k - s)), beta_(std::abs(k + s)) {}

    double alpha() const { return alpha_; }
    double beta() const { return beta_; }
    // l of the c = 0 eigenfunction carried by basis element j
    double degree(int j) const { return j + 0.5 * (alpha_ + beta_); }

    double diag(int j) const {
        const double ab = alpha_ + beta_;
        if (j == 0) return (beta_ - alpha_) / (ab + 2.0);
        const double t = 2.0 * j + ab;
        return (beta_ * beta_ - alpha_ * alpha_) / (t * (t + 2.0));
    }
    double offdiag(int j) const {
        const double ab = alpha_ + beta_, t = 2.0 * j + ab;
        const double num = (j + 1.0) * (j + alpha_ + 1.0) * (j + beta_ + 1.0) * (j + ab + 1.0);
        return 2.0 / (t + 2.0) * std::sqrt(num / ((t + 1.0) * (t + 3.0)));
    }

    // Matrix of multiplication by x, truncated to n x n.
    Eigen::MatrixXd x_matrix(int n) const {
        Eigen::MatrixXd X = Eigen::MatrixXd::Zero(n, n);
        for (int j = 0; j < n; ++j) {
            X(j, j) = diag(j);
            if (j + 1 < n) X(j, j + 1) = X(j + 1, j) = offdiag(j);
        }
        return X;
    }
    // Exact n x n block of multiplication by x^2.
    Eigen::MatrixXd x2_matrix(int n) const {
        Eigen::MatrixXd X = x_matrix(n + 2);
        return (X * X).topLeftCorner(n, n);
    }

    // Values and x-derivatives of the first n basis functions at x in (-1, 1).
    void evaluate(double x, int n, std::vector<double>& val, std::vector<double>& der) const {
        val.assign(n, 0.0);
        der.assign(n, 0.0);
        const double ab = alpha_ + beta_;
        const double h0 = std::exp((ab + 1.0) * std::numbers::ln2 + std::lgamma(alpha_ + 1.0) +
                                   std::lgamma(beta_ + 1.0) - std::lgamma(ab + 2.0));
        std::vector<double> p(n), dp(n);
        p[0] = 1.0 / std::sqrt(h0);
        dp[0] = 0.0;
        if (n > 1) {
            p[1] = (x - diag(0)) * p[0] / offdiag(0);
            dp[1] = p[0] / offdiag(0);
        }
        for (int j = 1; j + 1 < n; ++j) {
            const double a = offdiag(j), b = diag(j), am = offdiag(j - 1);
            p[j + 1] = ((x - b) * p[j] - am * p[j - 1]) / a;
            dp[j + 1] = (p[j] + (x - b) * dp[j] - am * dp[j - 1]) / a;
        }
        const double w = std::pow(1.0 - x, 0.5 * alpha_) * std::pow(1.0 + x, 0.5 * beta_);
        const double dlogw = -0.5 * alpha_ / (1.0 - x) + 0.5 * beta_ / (1.0 + x);
        for (int j = 0; j < n; ++j) {
            val[j] = w * p[j];
            der[j] = w * (dp[j] + dlogw * p[j]);
        }
    }

private:
    double alpha_, beta_;
};

namespace detail {

inline void check_problem(const AngularProblem& p) {
    require(p.s >= -2 && p.s <= 2, "spin weight must be in {-2, ..., 2}");
    require(std::isfinite(p.c), "spheroidicity must be finite");
    require(p.N >= 16, "basis truncation N must be at least 16");
}

inline Eigen::MatrixXd angular_matrix(const JacobiBasis& B, const AngularProblem& p, int n) {
    const double c = p.c, s = p.s, k = p.k;
    Eigen::MatrixXd A = c * c * (Eigen::MatrixXd::Identity(n, n) - B.x2_matrix(n)) + 2.0 * s * c * B.x_matrix(n);
    for (int j = 0; j < n; ++j) {
        const double l = B.degree(j);
        A(j, j) += l * (l + 1.0) - s * s + 2.0 * c * k;
    }
    return A;
}

} // namespace detail

// Value and d/dx of a harmonic at x = cos(theta).
struct HarmonicValue {
    double value;
    double dx;
};

inline HarmonicValue harmonic_at(const AngularEigenpair& pair, double x) {
    require(x > -1.0 && x < 1.0, "harmonic evaluation needs -1 < cos(theta) < 1");
    JacobiBasis B(pair.s, pair.k);
    std::vector<double> v, d;
    const int n = static_cast<int>(pair.coefficients.size());
    B.evaluate(x, n, v, d);
    HarmonicValue out{0.0, 0.0};
    for (int j = 0; j < n; ++j) {
        out.value += pair.coefficients[j] * v[j];
        out.dx += pair.coefficients[j] * d[j];
    }
    return out;
}

inline double evaluate_harmonic(const AngularEigenpair& pair, double theta) {
    require(theta > 0.0 && theta < std::numbers::pi, "harmonic evaluation excludes the poles");
    return harmonic_at(pair, std::cos(theta)).value;
}

inline std::vector<AngularEigenpair> spheroidal_eigenvalues(const AngularProblem& problem, int count) {
    detail::check_problem(problem);
    require(count >= 1, "count must be at least 1");
    JacobiBasis B(problem.s, problem.k);
    const int n1 = std::max(problem.N, count + 16);
    const int n2 = 2 * n1;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> coarse(detail::angular_matrix(B, problem, n1), Eigen::EigenvaluesOnly);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> fine(detail::angular_matrix(B, problem, n2));
    if (coarse.info() != Eigen::Success || fine.info() != Eigen::Success) {
        throw NumericalFailure("angular eigen-solve failed", 0.0);
    }
    std::vector<AngularEigenpair> out;
    double worst = 0.0;
    for (int i = 0; i < count; ++i) {
        AngularEigenpair ep;
        ep.n = i + 1;
        ep.s = problem.s;
        ep.k = problem.k;
        ep.c = problem.c;
        ep.lambda = fine.eigenvalues()(i);
        ep.convergence_drift = std::abs(fine.eigenvalues()(i) - coarse.eigenvalues()(i));
        worst = std::max(worst, ep.convergence_drift);
        Eigen::VectorXd v = fine.eigenvectors().col(i);
        ep.coefficients.assign(v.data(), v.data() + v.size());
        out.push_back(std::move(ep));
    }
    if (worst >= 1e-10) {
        throw NumericalFailure("angular convergence gate failed: eigenvalue drift under basis doubling", worst);
    }
    for (int i = 0; i + 1 < count; ++i) {
        if (!(out[i + 1].lambda > out[i].lambda)) {
            throw NumericalFailure("angular spectrum not resolved as non-degenerate", out[i + 1].lambda - out[i].lambda);
        }
    }
    // Sign: positive just below theta = pi/2, i.e. at x = 0+.
    for (auto& ep : out) {
        auto h = harmonic_at(ep, 0.0);
        double scale = 0.0;
        for (double c : ep.coefficients) scale = std::max(scale, std::abs(c));
        double sgn = std::abs(h.value) > 1e-10 * scale ? h.value : h.dx;
        if (sgn < 0) {
            for (double& c : ep.coefficients) c = -c;
            ep.normalization = -1.0;
        }
    }
    return out;
}

// Expectation values used by the channel model.
struct AngularProfile {
    double lambda;    // eigenvalue at the reference spheroidicity
    double sin2;      // <1 - x^2>
    double inv_sin2;  // <1/(1 - x^2)>; s = 0 and k != 0 only (elsewhere it appears multiplied by k^2 = 0)
};

inline AngularProfile angular_profile(const AngularEigenpair& pair) {
    JacobiBasis B(pair.s, pair.k);
    const int n = static_cast<int>(pair.coefficients.size());
    Eigen::Map<const Eigen::VectorXd> v(pair.coefficients.data(), n);
    AngularProfile prof{pair.lambda, 0.0, 0.0};
    prof.sin2 = v.dot((Eigen::MatrixXd::Identity(n, n) - B.x2_matrix(n)) * v);
    if (pair.k != 0 && pair.s == 0) {
        auto q = gauss_legendre(static_cast<std::size_t>(n + std::abs(pair.k) + 40));
        for (std::size_t i = 0; i < q.nodes.size(); ++i) {
            const double x = q.nodes[i];
            const double th = harmonic_at(pair, x).value;
            prof.inv_sin2 += q.weights[i] * th * th / (1.0 - x * x);
        }
    }
    return prof;
}

} // namespace kerrwave
