#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "stablecap/grid.hpp"
#include "stablecap/params.hpp"
#include "stablecap/problem1.hpp" // stbl_payoff_per_coin
#include "stablecap/report.hpp"
#include "stablecap/returns.hpp"
#include "stablecap/utility.hpp"

namespace stablecap {

/// Endogenous GOV / STBL price functions. The game's behavior depends
/// heavily on this choice, so both are pluggable; the defaults are a
/// linear demand-pressure GOV price and a capped-linear STBL price.
struct PriceFunctions {
    std::function<double(double x_gov, double y_gov, double delta, double f)> gov_price;
    std::function<double(double f, double y_stbl)> stbl_price;
};

/// Default GOV price: the no-participation baseline delta*F + kappa plus a
/// linear demand-pressure term on strategic GOV holdings.
inline double gov_price_default(double x_gov, double y_gov, double delta, double f, double kappa,
                                double pressure) {
    return delta * f + kappa + pressure * (x_gov + y_gov);
}

/// Default STBL price: supply/demand balance capped at b_max (par).
/// F = 0 returns b_max by convention.
inline double stbl_price_default(double f, double y_stbl, double b_max) {
    if (f <= 0.0) return b_max;
    return std::min(b_max, y_stbl / f);
}

inline PriceFunctions default_price_functions(double kappa, double pressure, double b_max) {
    PriceFunctions pf;
    pf.gov_price = [kappa, pressure](double x_g, double y_g, double delta, double f) {
        return gov_price_default(x_g, y_g, delta, f, kappa, pressure);
    };
    pf.stbl_price = [b_max](double f, double y_s) { return stbl_price_default(f, y_s, b_max); };
    return pf;
}

struct GovernorDecisionP3 {
    double delta = 0.0;
    int d_n = 1, d_v = 0, d_s = 0;
    double objective = 0.0;

    bool operator==(const GovernorDecisionP3& o) const {
        return delta == o.delta && d_n == o.d_n && d_v == o.d_v && d_s == o.d_s;
    }
};

struct VaultDecisionP3 {
    double x_col = 0.0, x_gov = 0.0;
    double n = 0.0, f = 0.0;
    double gamma_v = 0.0;
    bool participates = false;
    double objective = 0.0;

    bool operator==(const VaultDecisionP3& o) const {
        return x_col == o.x_col && x_gov == o.x_gov && n == o.n && f == o.f &&
               gamma_v == o.gamma_v;
    }
};

struct HolderDecisionP3 {
    double y_col = 0.0, y_gov = 0.0, y_stbl = 0.0;
    double gamma_s = 0.0;
    double objective = 0.0;

    bool operator==(const HolderDecisionP3& o) const {
        return y_col == o.y_col && y_gov == o.y_gov && y_stbl == o.y_stbl && gamma_s == o.gamma_s;
    }
};

namespace detail {

/// GOV ownership share of a dollar position at price p1. A zero-priced
/// token makes any positive position an unbounded share.
inline double gov_share(double amount, double p1) {
    if (amount <= 0.0) return 0.0;
    if (p1 <= 0.0) return std::numeric_limits<double>::infinity();
    return amount / p1;
}

/// Dollar value of a GOV position entitled to the dividend delta*F plus
/// the price p1 per token. A position in a zero-priced token is worthless
/// (it cannot be acquired in meaningful quantity).
inline double gov_position_value(double amount, double p1, double dividend_plus_price) {
    if (amount <= 0.0 || p1 <= 0.0) return 0.0;
    return amount / p1 * dividend_plus_price;
}

struct CollusionBounds {
    int lb_v = 0, ub_v = 0, lb_s = 0, ub_s = 0;
};

inline CollusionBounds collusion_bounds(double x_gov, double y_gov, double p1, double epsilon,
                                        double zeta) {
    CollusionBounds cb;
    cb.lb_v = gov_share(x_gov, p1) >= zeta ? 1 : 0;
    cb.ub_v = epsilon + gov_share(x_gov, p1) >= zeta ? 1 : 0;
    cb.lb_s = gov_share(y_gov, p1) >= zeta ? 1 : 0;
    cb.ub_s = epsilon + gov_share(y_gov, p1) >= zeta ? 1 : 0;
    return cb;
}

} // namespace detail

/// Outside-governor best response: picks the interest rate and the one-hot
/// collusion indicators maximizing
/// E[d_n e(dF + P1) + d_v(g_v(F - x_G) - a) + d_s(g_s(N - y_G) - a)]
/// subject to the feasibility sandwich on d_v and d_s. Ties prefer the
/// smaller rate, then no-attack over vault collusion over holder
/// collusion. Throws when no indicator assignment is feasible anywhere on
/// the rate grid.
inline GovernorDecisionP3 outside_gov_choice(const VaultDecisionP3& vault,
                                             const HolderDecisionP3& holder,
                                             const ScenarioParams& params,
                                             const PriceFunctions& prices,
                                             const std::vector<double>& delta_grid) {
    GovernorDecisionP3 best;
    bool found = false;
    for (double delta : delta_grid) {
        const double p1 = prices.gov_price(vault.x_gov, holder.y_gov, delta, vault.f);
        const auto cb =
            detail::collusion_bounds(vault.x_gov, holder.y_gov, p1, params.epsilon, params.zeta);
        // one-hot assignments in preference order: no attack, vault, holder
        struct Option {
            int d_n, d_v, d_s;
            bool feasible;
        };
        const Option options[3] = {
            {1, 0, 0, cb.lb_v == 0 && cb.lb_s == 0},
            {0, 1, 0, cb.ub_v == 1 && cb.lb_s == 0},
            {0, 0, 1, cb.ub_s == 1 && cb.lb_v == 0},
        };
        for (const auto& opt : options) {
            if (!opt.feasible) continue;
            const double obj =
                opt.d_n * params.epsilon * (delta * vault.f + p1) +
                opt.d_v * (vault.gamma_v * (vault.f - vault.x_gov) - params.alpha_usd) +
                opt.d_s * (holder.gamma_s * (vault.n - holder.y_gov) - params.alpha_usd);
            if (!found || obj > best.objective) {
                best.delta = delta;
                best.d_n = opt.d_n;
                best.d_v = opt.d_v;
                best.d_s = opt.d_s;
                best.objective = obj;
                found = true;
            }
        }
    }
    if (!found)
        throw std::domain_error(
            "outside_gov_choice: infeasible indicator configuration (both collusions forced)");
    return best;
}

/// Vault best response: grid argmax over (x_G, N, F, gamma_v) of
/// E[x_C R + F(Bb - d) + d_n (x_G/P1)(dF + P1) + d_v(1-g_v)(F - x_G) - d_s N]
/// subject to the portfolio identity, 0 <= N <= x_C, F <= beta N and the
/// participation constraint. The vault is risk neutral. Ties keep the
/// first maximizer in grid order (x_G, N, F, gamma_v ascending).
inline VaultDecisionP3 vault_choice_p3(const GovernorDecisionP3& gov,
                                       const HolderDecisionP3& holder,
                                       const ScenarioParams& params, const PriceFunctions& prices,
                                       const SampleSet& samples, const SolverConfig& cfg = {}) {
    if (cfg.portfolio_grid_points == 0 || cfg.bribe_grid_points == 0)
        throw std::invalid_argument("vault_choice_p3: empty grid");
    const double x_bar = params.x_bar_usd;
    const double mean_r = expected_value([](double r) { return r; }, samples).value;
    const auto xg_grid =
        x_bar > 0.0 ? linspace(0.0, x_bar, cfg.portfolio_grid_points) : std::vector<double>{0.0};
    const auto bribe_grid = linspace(0.0, 0.9, cfg.bribe_grid_points);

    VaultDecisionP3 best;
    bool first = true;
    for (double x_gov : xg_grid) {
        const double x_col = x_bar - x_gov;
        const auto n_grid =
            x_col > 0.0 ? linspace(0.0, x_col, cfg.portfolio_grid_points) : std::vector<double>{0.0};
        for (double n : n_grid) {
            const auto f_grid = n > 0.0 ? linspace(0.0, params.beta * n, cfg.portfolio_grid_points)
                                        : std::vector<double>{0.0};
            for (double f : f_grid) {
                const double b = prices.stbl_price(f, holder.y_stbl);
                const double p1 = prices.gov_price(x_gov, holder.y_gov, gov.delta, f);
                const double gov_value =
                    detail::gov_position_value(x_gov, p1, gov.delta * f + p1);
                for (double gamma_v : bribe_grid) {
                    const double system_payoff =
                        f * (b * params.b_rate - gov.delta) + gov.d_n * gov_value +
                        gov.d_v * (1.0 - gamma_v) * (f - x_gov) - gov.d_s * n;
                    if (n > 0.0 && system_payoff < params.u_vault_usd) continue;
                    const double obj = x_col * mean_r + system_payoff;
                    if (first || obj > best.objective) {
                        best.x_col = x_col;
                        best.x_gov = x_gov;
                        best.n = n;
                        best.f = f;
                        best.gamma_v = gamma_v;
                        best.objective = obj;
                        first = false;
                    }
                }
            }
        }
    }
    if (first) throw std::domain_error("vault_choice_p3: no feasible decision");
    best.participates = best.n > 0.0;
    return best;
}

/// Stablecoin-holder best response: grid argmax over (y_G, y_S, gamma_s) of
/// E[U(y_C R + d_n(min(y_S/B, N(1+R) - dF) + (y_G/P1)(dF + P1))
///        + d_s(1-g_s)(N - y_G))].
/// Candidates with y_S > 0 at a zero STBL price are infeasible (undefined
/// coin count). Ties keep the first maximizer in grid order.
inline HolderDecisionP3 holder_choice_p3(const GovernorDecisionP3& gov,
                                         const VaultDecisionP3& vault,
                                         const ScenarioParams& params,
                                         const PriceFunctions& prices, const SampleSet& samples,
                                         const UtilityFunction& holder_u,
                                         const SolverConfig& cfg = {}) {
    if (cfg.portfolio_grid_points == 0 || cfg.bribe_grid_points == 0)
        throw std::invalid_argument("holder_choice_p3: empty grid");
    const double y_bar = params.y_bar_usd;
    const auto yg_grid =
        y_bar > 0.0 ? linspace(0.0, y_bar, cfg.portfolio_grid_points) : std::vector<double>{0.0};
    const auto bribe_grid = linspace(0.0, 0.9, cfg.bribe_grid_points);

    HolderDecisionP3 best;
    bool first = true;
    for (double y_gov : yg_grid) {
        const double budget = y_bar - y_gov;
        const auto ys_grid =
            budget > 0.0 ? linspace(0.0, budget, cfg.portfolio_grid_points) : std::vector<double>{0.0};
        const double p1 = prices.gov_price(vault.x_gov, y_gov, gov.delta, vault.f);
        const double gov_value = detail::gov_position_value(y_gov, p1, gov.delta * vault.f + p1);
        for (double y_stbl : ys_grid) {
            const double y_col = budget - y_stbl;
            const double b = prices.stbl_price(vault.f, y_stbl);
            if (y_stbl > 0.0 && b <= 0.0) continue; // undefined coin count
            const double coins = y_stbl > 0.0 ? y_stbl / b : 0.0;
            for (double gamma_s : bribe_grid) {
                const double obj = expected_utility(
                    holder_u,
                    [&](double r) {
                        const double redemption = std::max(
                            0.0, std::min(coins, vault.n * (1.0 + r) - gov.delta * vault.f));
                        return y_col * r + gov.d_n * (redemption + gov_value) +
                               gov.d_s * (1.0 - gamma_s) * (vault.n - y_gov);
                    },
                    samples);
                if (first || obj > best.objective) {
                    best.y_col = y_col;
                    best.y_gov = y_gov;
                    best.y_stbl = y_stbl;
                    best.gamma_s = gamma_s;
                    best.objective = obj;
                    first = false;
                }
            }
        }
    }
    if (first) throw std::domain_error("holder_choice_p3: no feasible decision");
    return best;
}

namespace detail {

inline double damp_snap(double old_v, double new_v, double damping,
                        const std::vector<double>& grid) {
    const double v = damping * old_v + (1.0 - damping) * new_v;
    std::size_t idx = nearest_index(grid, v);
    // Snapping must not stall short of the response: when the damped value
    // rounds back to the incumbent cell but the response sits elsewhere,
    // advance one cell toward it.
    const std::size_t old_idx = nearest_index(grid, old_v);
    const std::size_t new_idx = nearest_index(grid, new_v);
    if (idx == old_idx && new_idx != old_idx)
        idx = new_idx > old_idx ? old_idx + 1 : old_idx - 1;
    return grid[idx];
}

} // namespace detail

/// Problem 3 equilibrium search: damped best-response iteration in the
/// fixed order governor -> vault -> holder. Convergence is declared only
/// when every agent's raw (undamped) best response reproduces its current
/// decision exactly, which makes the fixed-point audit hold by
/// construction. Non-convergence is reported, not raised.
inline EquilibriumReport solve_p3(const ScenarioParams& params, const ReturnModel& model,
                                  const UtilityFunction& holder_u, const PriceFunctions& prices,
                                  std::uint64_t seed, const SolverConfig& cfg = {}) {
    {
        ValidationReport v = validate(params);
        const auto vm = validate(model);
        const auto vu = validate(holder_u);
        v.errors.insert(v.errors.end(), vm.errors.begin(), vm.errors.end());
        v.errors.insert(v.errors.end(), vu.errors.begin(), vu.errors.end());
        if (!v.ok()) throw std::invalid_argument("solve_p3: " + v.joined());
    }
    const SampleSet samples = sample_returns(model, cfg.sample_count, seed);
    const auto delta_grid = step_grid(0.0, 1.0, cfg.delta_grid_step);
    const auto bribe_grid = linspace(0.0, 0.9, cfg.bribe_grid_points);

    GovernorDecisionP3 gov;
    gov.delta = delta_grid[0];
    VaultDecisionP3 vault;
    vault.x_col = params.x_bar_usd;
    HolderDecisionP3 holder;
    holder.y_col = params.y_bar_usd;

    bool converged = false;
    std::size_t iter = 0;
    std::string note;
    try {
        for (; iter < cfg.max_iterations; ++iter) {
            const GovernorDecisionP3 raw_gov =
                outside_gov_choice(vault, holder, params, prices, delta_grid);
            GovernorDecisionP3 new_gov = raw_gov;
            new_gov.delta = detail::damp_snap(gov.delta, raw_gov.delta, cfg.damping, delta_grid);

            const VaultDecisionP3 raw_vault =
                vault_choice_p3(new_gov, holder, params, prices, samples, cfg);
            VaultDecisionP3 new_vault = raw_vault;
            if (params.x_bar_usd > 0.0) {
                const auto xg_grid = linspace(0.0, params.x_bar_usd, cfg.portfolio_grid_points);
                new_vault.x_gov =
                    detail::damp_snap(vault.x_gov, raw_vault.x_gov, cfg.damping, xg_grid);
                new_vault.x_col = params.x_bar_usd - new_vault.x_gov;
                const auto n_grid = new_vault.x_col > 0.0
                                        ? linspace(0.0, new_vault.x_col, cfg.portfolio_grid_points)
                                        : std::vector<double>{0.0};
                new_vault.n = detail::damp_snap(vault.n, raw_vault.n, cfg.damping, n_grid);
                const auto f_grid =
                    new_vault.n > 0.0
                        ? linspace(0.0, params.beta * new_vault.n, cfg.portfolio_grid_points)
                        : std::vector<double>{0.0};
                new_vault.f = detail::damp_snap(vault.f, raw_vault.f, cfg.damping, f_grid);
            }
            new_vault.gamma_v =
                detail::damp_snap(vault.gamma_v, raw_vault.gamma_v, cfg.damping, bribe_grid);
            new_vault.participates = new_vault.n > 0.0;

            const HolderDecisionP3 raw_holder =
                holder_choice_p3(new_gov, new_vault, params, prices, samples, holder_u, cfg);
            HolderDecisionP3 new_holder = raw_holder;
            if (params.y_bar_usd > 0.0) {
                const auto yg_grid = linspace(0.0, params.y_bar_usd, cfg.portfolio_grid_points);
                new_holder.y_gov =
                    detail::damp_snap(holder.y_gov, raw_holder.y_gov, cfg.damping, yg_grid);
                const double budget = params.y_bar_usd - new_holder.y_gov;
                const auto ys_grid = budget > 0.0
                                         ? linspace(0.0, budget, cfg.portfolio_grid_points)
                                         : std::vector<double>{0.0};
                new_holder.y_stbl =
                    detail::damp_snap(holder.y_stbl, raw_holder.y_stbl, cfg.damping, ys_grid);
                new_holder.y_col = budget - new_holder.y_stbl;
            }
            new_holder.gamma_s =
                detail::damp_snap(holder.gamma_s, raw_holder.gamma_s, cfg.damping, bribe_grid);

            const bool stationary =
                new_gov == gov && new_vault == vault && new_holder == holder;
            gov = new_gov;
            vault = new_vault;
            holder = new_holder;
            if (stationary) {
                // The damped update is a fixed point; converged only if the
                // raw best responses also agree (the audit property).
                const auto audit_gov = outside_gov_choice(vault, holder, params, prices, delta_grid);
                const auto audit_vault = vault_choice_p3(gov, holder, params, prices, samples, cfg);
                const auto audit_holder =
                    holder_choice_p3(gov, vault, params, prices, samples, holder_u, cfg);
                if (audit_gov == gov && audit_vault == vault && audit_holder == holder) {
                    gov.objective = audit_gov.objective;
                    vault.objective = audit_vault.objective;
                    vault.participates = audit_vault.participates;
                    holder.objective = audit_holder.objective;
                    converged = true;
                    ++iter;
                    break;
                }
                note = "stationary under damping but not a best-response fixed point";
                ++iter;
                break;
            }
        }
        if (!converged && note.empty()) note = "max iterations reached without a fixed point";
    } catch (const std::domain_error& e) {
        converged = false;
        note = e.what();
    }

    EquilibriumReport rep;
    rep.problem = "p3";
    rep.delta_star = gov.delta;
    rep.f_star = vault.f;
    rep.n_star = vault.n;
    rep.b_price = prices.stbl_price(vault.f, holder.y_stbl);
    rep.participates = vault.n > 0.0;
    rep.attack.d_n = gov.d_n;
    rep.attack.d_v = gov.d_v;
    rep.attack.d_s = gov.d_s;
    rep.attack.probability = 1.0 - gov.d_n;
    rep.bribes.gamma_v = vault.gamma_v;
    rep.bribes.gamma_s = holder.gamma_s;
    rep.x_col = vault.x_col;
    rep.x_gov = vault.x_gov;
    rep.y_col = holder.y_col;
    rep.y_gov = holder.y_gov;
    rep.y_stbl = holder.y_stbl;
    rep.objectives.governance = gov.objective;
    rep.objectives.vault = vault.objective;
    rep.objectives.holder = holder.objective;
    const double p1 = prices.gov_price(vault.x_gov, holder.y_gov, gov.delta, vault.f);
    rep.gov_path.p1 = p1;
    rep.gov_path.p2 = p1; // P2 = P1 conditional on no attack
    rep.gov_path.p0 = gov.objective;
    rep.diagnostics.converged = converged;
    rep.diagnostics.iterations = iter;
    rep.diagnostics.note = note;
    rep.diagnostics.delta_grid_size = delta_grid.size();
    rep.diagnostics.f_grid_size = cfg.portfolio_grid_points;
    rep.diagnostics.n_grid_size = cfg.portfolio_grid_points;
    rep.diagnostics.sample_count = samples.count();
    rep.seed = samples.seed;
    return rep;
}

} // namespace stablecap
