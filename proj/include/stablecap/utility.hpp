#pragma once

#include <cmath>
#include <functional>
#include <stdexcept>
#include <string>

#include "stablecap/params.hpp"
#include "stablecap/returns.hpp"

namespace stablecap {

enum class UtilityKind { risk_neutral, cara, mean_variance, hara };

/// HARA utility ((1-g)/g) * (a*w/(1-g) + b)^g. Risk tolerance is linear
/// in wealth; a > 0, g not in {0, 1}, and a*w/(1-g) + b must be positive
/// at the evaluated wealth.
inline double hara_utility(double w, double a, double b_h, double gamma_u) {
    if (!(a > 0.0)) throw std::domain_error("hara_utility: a must be > 0");
    if (gamma_u == 0.0 || gamma_u == 1.0)
        throw std::domain_error("hara_utility: gamma must not be 0 or 1");
    const double inner = a * w / (1.0 - gamma_u) + b_h;
    if (!(inner > 0.0))
        throw std::domain_error("hara_utility: a*w/(1-gamma) + b must be > 0");
    return (1.0 - gamma_u) / gamma_u * std::pow(inner, gamma_u);
}

/// Preference specification used wherever the models take an expectation
/// of a utility. Mean-variance is a functional of the payoff distribution
/// rather than a pointwise map, so it is only usable through
/// expected_utility().
struct UtilityFunction {
    UtilityKind kind = UtilityKind::risk_neutral;
    double rho = 1.0;     ///< CARA / mean-variance risk aversion, > 0
    double a = 1.0;       ///< HARA slope
    double b_h = 1.0;     ///< HARA intercept
    double gamma_u = 0.5; ///< HARA exponent

    static UtilityFunction risk_neutral() { return {}; }

    static UtilityFunction cara(double rho_) {
        UtilityFunction u;
        u.kind = UtilityKind::cara;
        u.rho = rho_;
        return u;
    }

    static UtilityFunction mean_variance(double rho_) {
        UtilityFunction u;
        u.kind = UtilityKind::mean_variance;
        u.rho = rho_;
        return u;
    }

    static UtilityFunction hara(double a_, double b_, double g_) {
        UtilityFunction u;
        u.kind = UtilityKind::hara;
        u.a = a_;
        u.b_h = b_;
        u.gamma_u = g_;
        return u;
    }

    /// Pointwise utility of wealth w.
    double operator()(double w) const {
        switch (kind) {
        case UtilityKind::risk_neutral: return w;
        case UtilityKind::cara: return -std::exp(-rho * w);
        case UtilityKind::hara: return hara_utility(w, a, b_h, gamma_u);
        case UtilityKind::mean_variance:
            throw std::domain_error("mean-variance utility has no pointwise value");
        }
        return w;
    }
};

inline ValidationReport validate(const UtilityFunction& u) {
    ValidationReport rep;
    switch (u.kind) {
    case UtilityKind::risk_neutral: break;
    case UtilityKind::cara:
    case UtilityKind::mean_variance:
        if (!(u.rho > 0.0)) rep.errors.push_back("rho must be > 0");
        break;
    case UtilityKind::hara:
        if (!(u.a > 0.0)) rep.errors.push_back("HARA a must be > 0");
        if (u.gamma_u == 0.0 || u.gamma_u == 1.0)
            rep.errors.push_back("HARA gamma must not be 0 or 1");
        else if (!(u.b_h > 0.0)) // domain a*w/(1-g) + b > 0 evaluated at w = 0
            rep.errors.push_back("HARA domain violation at w = 0");
        break;
    }
    return rep;
}

struct Estimate {
    double value = 0.0;
    double std_error = 0.0;
};

/// Sample-mean estimate of E[payoff(R)]. Exact sets give the exact
/// expectation with zero standard error; Monte Carlo sets report
/// sd / sqrt(count).
template <typename Payoff>
Estimate expected_value(Payoff&& payoff, const SampleSet& samples) {
    if (samples.count() == 0) throw std::invalid_argument("expected_value: empty samples");
    const std::size_t n = samples.count();
    const bool weighted = !samples.weights.empty();
    std::vector<double> vals(n);
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double v = payoff(samples.returns[i]);
        if (!std::isfinite(v))
            throw std::domain_error("expected_value: payoff not finite at sample " +
                                    std::to_string(i));
        vals[i] = v;
        acc += weighted ? samples.weights[i] * v : v;
    }
    const double mean = weighted ? acc : acc / static_cast<double>(n);
    if (samples.exact) return {mean, 0.0};
    double ss = 0.0;
    for (double v : vals) ss += (v - mean) * (v - mean);
    const double var = n > 1 ? ss / static_cast<double>(n - 1) : 0.0;
    return {mean, std::sqrt(var / static_cast<double>(n))};
}

/// Variance of the payoff under the sample set: exact (population) for
/// enumerated sets, n-1 sample variance for Monte Carlo sets.
template <typename Payoff>
double payoff_variance(Payoff&& payoff, const SampleSet& samples) {
    const std::size_t n = samples.count();
    const double mean = expected_value(payoff, samples).value;
    double ss = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double d = payoff(samples.returns[i]) - mean;
        ss += samples.weight(i) * d * d;
    }
    if (!samples.exact && n > 1)
        ss *= static_cast<double>(n) / static_cast<double>(n - 1);
    return ss;
}

/// Expected utility of a payoff over the sample set.
///
/// Risk-neutral reduces to expected_value; CARA returns E[-exp(-rho w)];
/// mean-variance returns mu - rho*sigma^2/2 over the sample payoff
/// moments (a modeling approximation for non-normal payoffs); HARA takes
/// the pointwise expectation and propagates domain errors.
template <typename Payoff>
double expected_utility(const UtilityFunction& u, Payoff&& payoff, const SampleSet& samples) {
    if (samples.count() == 0) throw std::invalid_argument("expected_utility: empty samples");
    switch (u.kind) {
    case UtilityKind::risk_neutral:
        return expected_value(payoff, samples).value;
    case UtilityKind::mean_variance: {
        const double mu = expected_value(payoff, samples).value;
        const double var = payoff_variance(payoff, samples);
        return mu - u.rho * var / 2.0;
    }
    case UtilityKind::cara:
    case UtilityKind::hara:
        return expected_value([&](double r) { return u(payoff(r)); }, samples).value;
    }
    return 0.0;
}

} // namespace stablecap
