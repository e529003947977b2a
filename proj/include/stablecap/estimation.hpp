#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "stablecap/utility.hpp"

namespace stablecap {

enum class RhoMethod { method1, method2 };

/// Result of a risk-aversion estimation. Non-positive estimates are kept
/// and flagged (outlier exclusion belongs to reporting, not estimation).
struct RiskAversionEstimate {
    double rho = 0.0;
    RhoMethod method = RhoMethod::method1;
    bool positive = false;
    double residual = 0.0; ///< least-squares residual (method 2, k > 1)
    // echo of the inputs the estimate was computed from
    double wealth = 0.0;
    double alpha = 0.0;
    double expected_return = 0.0;
    double variance = 0.0;
    double risk_free = 0.0;
};

/// Arrow-Pratt coefficient of absolute risk aversion -u''(w)/u'(w) by
/// central finite differences. With step = 0 the step is chosen in two
/// passes: a coarse estimate of the curvature scale, then a step sized to
/// balance truncation against cancellation so CARA stays flat to 1e-6
/// across wealth scales.
inline double arrow_pratt(const UtilityFunction& u, double w, double step = 0.0) {
    const auto second_over_first = [&](double h) {
        const double up = u(w + h);
        const double um = u(w - h);
        const double u0 = u(w);
        const double d1 = (up - um) / (2.0 * h);
        const double d2 = (up - 2.0 * u0 + um) / (h * h);
        if (d1 == 0.0) throw std::domain_error("arrow_pratt: u'(w) vanishes");
        return -d2 / d1;
    };
    if (step > 0.0) return second_over_first(step);
    const double h0 = 1e-3 * std::max(1.0, std::abs(w));
    const double a0 = second_over_first(h0);
    const double scale = std::max(std::abs(a0), 1e-3);
    const double h = std::clamp(1.2e-4 / scale, 1e-8, 0.45 * std::max(std::abs(w), 1.0));
    return second_over_first(h);
}

/// Optimal fraction of wealth in the risky asset for a mean-variance
/// maximizer: alpha* = (E[R] - r) / (rho Var(R) w).
inline double optimal_alpha(double w, double er, double var_r, double r_free, double rho) {
    if (!(w > 0.0)) throw std::invalid_argument("optimal_alpha: wealth must be > 0");
    if (!(var_r > 0.0)) throw std::invalid_argument("optimal_alpha: variance must be > 0");
    if (!(rho > 0.0)) throw std::invalid_argument("optimal_alpha: rho must be > 0");
    return (er - r_free) / (rho * var_r * w);
}

/// The single-asset objective the optimal alpha maximizes:
/// w[r + alpha(E[R] - r)] - rho w^2 alpha^2 Var(R) / 2.
inline double mean_variance_objective(double alpha, double w, double er, double var_r,
                                      double r_free, double rho) {
    return w * (r_free + alpha * (er - r_free)) - 0.5 * rho * w * w * alpha * alpha * var_r;
}

/// Method 1: rho from the observed risky-asset fraction,
/// rho = (E[R] - r) / (alpha w Var(R)). The sign is preserved: a negative
/// risk premium held with positive leverage yields a flagged negative rho.
inline RiskAversionEstimate estimate_rho_m1(double w, double alpha, double er, double var_r,
                                            double r_free) {
    const double denom = alpha * w * var_r;
    if (denom == 0.0) throw std::invalid_argument("estimate_rho_m1: alpha*w*Var(R) must be nonzero");
    RiskAversionEstimate est;
    est.method = RhoMethod::method1;
    est.rho = (er - r_free) / denom;
    est.positive = est.rho > 0.0;
    est.wealth = w;
    est.alpha = alpha;
    est.expected_return = er;
    est.variance = var_r;
    est.risk_free = r_free;
    return est;
}

namespace detail {

/// Cholesky factorization; throws if the matrix is not positive definite.
/// Row-major k x k input.
inline std::vector<double> cholesky(const std::vector<double>& a, std::size_t k) {
    std::vector<double> l(k * k, 0.0);
    for (std::size_t i = 0; i < k; ++i) {
        for (std::size_t j = 0; j <= i; ++j) {
            double s = a[i * k + j];
            for (std::size_t m = 0; m < j; ++m) s -= l[i * k + m] * l[j * k + m];
            if (i == j) {
                if (!(s > 0.0))
                    throw std::invalid_argument("sigma must be positive definite");
                l[i * k + i] = std::sqrt(s);
            } else {
                l[i * k + j] = s / l[j * k + j];
            }
        }
    }
    return l;
}

/// Solves Sigma x = b via the Cholesky factor.
inline std::vector<double> spd_solve(const std::vector<double>& sigma, std::size_t k,
                                     const std::vector<double>& b) {
    const auto l = cholesky(sigma, k);
    std::vector<double> y(k), x(k);
    for (std::size_t i = 0; i < k; ++i) {
        double s = b[i];
        for (std::size_t j = 0; j < i; ++j) s -= l[i * k + j] * y[j];
        y[i] = s / l[i * k + i];
    }
    for (std::size_t ii = k; ii-- > 0;) {
        double s = y[ii];
        for (std::size_t j = ii + 1; j < k; ++j) s -= l[j * k + ii] * x[j];
        x[ii] = s / l[ii * k + ii];
    }
    return x;
}

} // namespace detail

/// Method 2: rho from multi-period portfolio weights. The optimal-weight
/// relation w* rho W Prod(Rf) = Sigma^{-1} mu_hat equates a k-vector to a
/// scalar multiple of the weights, so k = 1 inverts exactly and k > 1
/// takes the least-squares scalar with the fit residual reported.
inline RiskAversionEstimate estimate_rho_m2(const std::vector<double>& weights, double wealth,
                                            double rf_product, const std::vector<double>& sigma,
                                            const std::vector<double>& mu_hat) {
    const std::size_t k = weights.size();
    if (k == 0) throw std::invalid_argument("estimate_rho_m2: empty weights");
    if (mu_hat.size() != k || sigma.size() != k * k)
        throw std::invalid_argument("estimate_rho_m2: dimension mismatch");
    if (!(wealth * rf_product > 0.0))
        throw std::invalid_argument("estimate_rho_m2: wealth * rf_product must be > 0");
    bool all_zero = true;
    for (double wi : weights)
        if (wi != 0.0) all_zero = false;
    if (all_zero) throw std::invalid_argument("estimate_rho_m2: zero weights vector");

    const auto m = detail::spd_solve(sigma, k, mu_hat); // Sigma^{-1} mu_hat
    RiskAversionEstimate est;
    est.method = RhoMethod::method2;
    est.wealth = wealth;

    const double scale = wealth * rf_product;
    if (k == 1) {
        est.rho = m[0] / (weights[0] * scale);
        est.residual = 0.0;
    } else {
        // least squares for  (weights * scale) rho ~= m
        double vtv = 0.0, vtm = 0.0;
        for (std::size_t i = 0; i < k; ++i) {
            const double v = weights[i] * scale;
            vtv += v * v;
            vtm += v * m[i];
        }
        est.rho = vtm / vtv;
        double rss = 0.0;
        for (std::size_t i = 0; i < k; ++i) {
            const double e = weights[i] * scale * est.rho - m[i];
            rss += e * e;
        }
        est.residual = std::sqrt(rss);
    }
    est.positive = est.rho > 0.0;
    return est;
}

} // namespace stablecap
