#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "stablecap/params.hpp"

namespace stablecap {

enum class ReturnKind { deterministic, two_point, lognormal };

/// Distribution of the collateral return rate R.
///
/// `deterministic` uses `value`; `two_point` (general finite support)
/// uses parallel `values`/`probabilities`; `lognormal` draws
/// 1 + R = exp(N(log_mean, log_sd)), which keeps 1 + R > 0 almost surely.
struct ReturnModel {
    ReturnKind kind = ReturnKind::deterministic;
    double value = 0.0;
    std::vector<double> values;
    std::vector<double> probabilities;
    double log_mean = 0.0;
    double log_sd = 0.0;

    static ReturnModel deterministic(double r) {
        ReturnModel m;
        m.kind = ReturnKind::deterministic;
        m.value = r;
        return m;
    }

    static ReturnModel two_point(std::vector<double> vals, std::vector<double> probs) {
        ReturnModel m;
        m.kind = ReturnKind::two_point;
        m.values = std::move(vals);
        m.probabilities = std::move(probs);
        return m;
    }

    static ReturnModel lognormal(double mu, double sd) {
        ReturnModel m;
        m.kind = ReturnKind::lognormal;
        m.log_mean = mu;
        m.log_sd = sd;
        return m;
    }

    bool finite_support() const { return kind != ReturnKind::lognormal; }

    /// Analytic mean of R.
    double mean() const {
        switch (kind) {
        case ReturnKind::deterministic: return value;
        case ReturnKind::two_point: {
            double m = 0.0;
            for (std::size_t i = 0; i < values.size(); ++i) m += values[i] * probabilities[i];
            return m;
        }
        case ReturnKind::lognormal:
            return std::exp(log_mean + 0.5 * log_sd * log_sd) - 1.0;
        }
        return 0.0;
    }
};

inline ValidationReport validate(const ReturnModel& m) {
    ValidationReport rep;
    switch (m.kind) {
    case ReturnKind::deterministic:
        if (!(m.value > -1.0)) rep.errors.push_back("return value must satisfy 1+R > 0");
        break;
    case ReturnKind::two_point: {
        if (m.values.empty() || m.values.size() != m.probabilities.size()) {
            rep.errors.push_back("values and probabilities must be non-empty and equal length");
            break;
        }
        double sum = 0.0;
        for (double p : m.probabilities) {
            if (!(p >= 0.0)) rep.errors.push_back("probabilities must be >= 0");
            sum += p;
        }
        if (std::abs(sum - 1.0) > 1e-9) rep.errors.push_back("probabilities must sum to 1");
        for (double v : m.values)
            if (!(v > -1.0)) rep.errors.push_back("return value must satisfy 1+R > 0");
        break;
    }
    case ReturnKind::lognormal:
        if (!(m.log_sd >= 0.0)) rep.errors.push_back("log_sd must be >= 0");
        if (!std::isfinite(m.log_mean)) rep.errors.push_back("log_mean must be finite");
        break;
    }
    return rep;
}

/// A frozen draw of return realizations. All candidate decisions inside a
/// solver call are evaluated on one SampleSet (common random numbers).
///
/// When `exact` is set the samples enumerate the full support of a
/// finite-support model and `weights` carry the exact probabilities;
/// estimates over such a set are exact and report zero standard error.
struct SampleSet {
    std::uint64_t seed = 0;
    std::vector<double> returns;
    std::vector<double> weights; ///< empty => uniform 1/count
    bool exact = false;

    std::size_t count() const { return returns.size(); }

    double weight(std::size_t i) const {
        return weights.empty() ? 1.0 / static_cast<double>(returns.size()) : weights[i];
    }
};

namespace detail {

/// Uniforms come from the top 53 bits of mt19937_64, normals from
/// Box-Muller. The <random> distribution templates are avoided because
/// their streams are implementation-defined; this way the same seed
/// reproduces bit-identical samples on every platform.
class Rng {
  public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    double normal() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double u1 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        const double u2 = uniform();
        const double mag = std::sqrt(-2.0 * std::log(u1));
        constexpr double two_pi = 6.283185307179586476925286766559;
        spare_ = mag * std::sin(two_pi * u2);
        have_spare_ = true;
        return mag * std::cos(two_pi * u2);
    }

  private:
    std::mt19937_64 engine_;
    bool have_spare_ = false;
    double spare_ = 0.0;
};

} // namespace detail

/// Monte Carlo draw of `count` return realizations. Deterministic given
/// (model, count, seed).
inline SampleSet draw_returns(const ReturnModel& model, std::size_t count, std::uint64_t seed) {
    if (count == 0) throw std::invalid_argument("draw_returns: count must be >= 1");
    const auto rep = validate(model);
    if (!rep.ok()) throw std::invalid_argument("draw_returns: " + rep.joined());

    SampleSet set;
    set.seed = seed;
    set.returns.resize(count);
    detail::Rng rng(seed);
    switch (model.kind) {
    case ReturnKind::deterministic:
        for (auto& r : set.returns) r = model.value;
        break;
    case ReturnKind::two_point:
        for (auto& r : set.returns) {
            const double u = rng.uniform();
            double acc = 0.0;
            r = model.values.back();
            for (std::size_t i = 0; i < model.values.size(); ++i) {
                acc += model.probabilities[i];
                if (u < acc) {
                    r = model.values[i];
                    break;
                }
            }
        }
        break;
    case ReturnKind::lognormal:
        for (auto& r : set.returns)
            r = std::exp(model.log_mean + model.log_sd * rng.normal()) - 1.0;
        break;
    }
    return set;
}

/// Exact enumeration of a finite-support model: one sample per support
/// point, weighted by its probability.
inline SampleSet enumerate_returns(const ReturnModel& model) {
    if (!model.finite_support())
        throw std::invalid_argument("enumerate_returns: model has infinite support");
    const auto rep = validate(model);
    if (!rep.ok()) throw std::invalid_argument("enumerate_returns: " + rep.joined());

    SampleSet set;
    set.exact = true;
    if (model.kind == ReturnKind::deterministic) {
        set.returns = {model.value};
        set.weights = {1.0};
    } else {
        set.returns = model.values;
        set.weights = model.probabilities;
    }
    return set;
}

/// Enumerates finite-support models exactly and falls back to Monte Carlo
/// otherwise. Solvers use this so that small games are solved without
/// sampling noise.
inline SampleSet sample_returns(const ReturnModel& model, std::size_t count, std::uint64_t seed) {
    if (model.finite_support()) return enumerate_returns(model);
    return draw_returns(model, count, seed);
}

} // namespace stablecap
