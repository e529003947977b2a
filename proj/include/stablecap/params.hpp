#pragma once

#include <cmath>
#include <string>
#include <vector>

namespace stablecap {

/// All model parameters shared by the capital-structure games.
///
/// Dollar-denominated fields carry a `_usd` suffix in the scenario file
/// format; plain fields are dimensionless fractions or rates. The same
/// struct feeds every solver; fields a given problem does not use are
/// simply ignored by it.
struct ScenarioParams {
    double beta = 0.66;        ///< collateral factor, in (0, 1]
    double kappa_usd = 10.0;   ///< terminal GOV valuation, >= 0
    double b_rate = 0.2;       ///< return rate on the vault's new opportunity
    double u_vault_usd = 0.0;  ///< vault outside-opportunity utility
    double u_holder_usd = 0.0; ///< stablecoin-holder outside utility (miner game)
    double zeta = 0.1;         ///< attack-threshold GOV fraction, in (0, 1)
    double gamma = 1.0;        ///< stealable collateral fraction, >= 0 (may exceed 1)
    double alpha_usd = 0.0;    ///< outside attack cost
    double epsilon = 0.0;      ///< outside-governor GOV fraction, in [0, 1)
    double n_bar_usd = 100.0;  ///< vault collateral endowment
    double x_bar_usd = 100.0;  ///< vault portfolio endowment (collusion game)
    double y_bar_usd = 100.0;  ///< holder portfolio endowment (collusion game)
    double r_discount = 0.05;  ///< discount rate in the kappa = delta*F/(1-r) coupling
    double c_usd = 0.0;        ///< block-production cost (miner game)
    double delta_cost = 0.0;   ///< STBL acquisition cost fraction (miner game)
    double r_free_rate = 0.02; ///< risk-free rate per period (estimation)
};

struct ValidationReport {
    std::vector<std::string> errors;

    bool ok() const { return errors.empty(); }

    std::string joined() const {
        std::string out;
        for (const auto& e : errors) {
            if (!out.empty()) out += "; ";
            out += e;
        }
        return out;
    }
};

namespace detail {

inline void require(ValidationReport& rep, bool cond, std::string msg) {
    if (!cond) rep.errors.push_back(std::move(msg));
}

inline bool finite(double v) { return std::isfinite(v); }

} // namespace detail

/// Checks every ScenarioParams invariant and reports all violations at
/// once rather than stopping at the first.
inline ValidationReport validate(const ScenarioParams& p) {
    using detail::finite;
    using detail::require;
    ValidationReport rep;
    require(rep, finite(p.beta) && p.beta > 0.0, "beta must be > 0");
    require(rep, !finite(p.beta) || p.beta <= 1.0, "beta must be <= 1");
    require(rep, finite(p.kappa_usd) && p.kappa_usd >= 0.0, "kappa_usd must be >= 0");
    require(rep, finite(p.b_rate) && p.b_rate > -1.0, "b_rate must be > -1");
    require(rep, finite(p.u_vault_usd) && p.u_vault_usd >= 0.0, "u_vault_usd must be >= 0");
    require(rep, finite(p.u_holder_usd) && p.u_holder_usd >= 0.0, "u_holder_usd must be >= 0");
    require(rep, finite(p.zeta) && p.zeta > 0.0 && p.zeta < 1.0, "zeta must be in (0, 1)");
    require(rep, finite(p.gamma) && p.gamma >= 0.0, "gamma must be >= 0");
    require(rep, finite(p.alpha_usd) && p.alpha_usd >= 0.0, "alpha_usd must be >= 0");
    require(rep, finite(p.epsilon) && p.epsilon >= 0.0 && p.epsilon < 1.0,
            "epsilon must be in [0, 1)");
    require(rep, finite(p.n_bar_usd) && p.n_bar_usd >= 0.0, "n_bar_usd must be >= 0");
    require(rep, finite(p.x_bar_usd) && p.x_bar_usd >= 0.0, "x_bar_usd must be >= 0");
    require(rep, finite(p.y_bar_usd) && p.y_bar_usd >= 0.0, "y_bar_usd must be >= 0");
    require(rep, finite(p.r_discount) && p.r_discount > 0.0 && p.r_discount < 1.0,
            "r_discount must be in (0, 1)");
    require(rep, finite(p.c_usd) && p.c_usd >= 0.0, "c_usd must be >= 0");
    require(rep, finite(p.delta_cost) && p.delta_cost >= 0.0 && p.delta_cost < 1.0,
            "delta_cost must be in [0, 1)");
    require(rep, finite(p.r_free_rate) && p.r_free_rate >= 0.0, "r_free_rate must be >= 0");
    return rep;
}

} // namespace stablecap
