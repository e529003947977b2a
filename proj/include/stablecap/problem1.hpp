#pragma once

#include <algorithm>
#include <cmath>
#include <set>
#include <stdexcept>
#include <utility>
#include <vector>

#include "stablecap/grid.hpp"
#include "stablecap/params.hpp"
#include "stablecap/report.hpp"
#include "stablecap/returns.hpp"
#include "stablecap/utility.hpp"

namespace stablecap {

/// Per-coin payoff to a stablecoin holder: face value capped by what the
/// collateral covers after the interest fee, floored at zero (holders
/// carry no liability beyond their coins).
inline double stbl_payoff_per_coin(double f, double collateral_after_fee) {
    if (f <= 0.0) return 1.0; // full-repayment limit convention
    return std::max(0.0, std::min(f, collateral_after_fee)) / f;
}

/// STBL issuance price: the holder's expected utility of one coin,
/// B = E[U(min(F, N(1+R) - dF)/F)]. F = 0 uses the full-repayment limit
/// B = E[U(1)].
inline double stbl_price_p1(double f, double n, double delta, const SampleSet& samples,
                            const UtilityFunction& holder_u) {
    if (!(n > 0.0)) throw std::invalid_argument("stbl_price_p1: n must be > 0");
    if (f < 0.0) throw std::invalid_argument("stbl_price_p1: f must be >= 0");
    return expected_utility(
        holder_u,
        [&](double r) { return stbl_payoff_per_coin(f, n * (1.0 + r) - delta * f); },
        samples);
}

struct VaultDecisionP1 {
    double f = 0.0;
    bool participates = false;
    double objective = 0.0; ///< expected dollars; the outside utility u when out
    double b_price = 0.0;
};

/// Vault best response for Problem 1: argmax of E[NR + F(Bb - d)] over the
/// F grid [0, beta*N], smallest maximizer first. The participation
/// constraint u <= E[NR + F(Bb - d)] is checked at the optimum; when it
/// fails the vault takes the outside opportunity and issues nothing.
inline VaultDecisionP1 vault_best_response_p1(double delta, const ScenarioParams& params,
                                              double n, const SampleSet& samples,
                                              const UtilityFunction& holder_u,
                                              const SolverConfig& cfg = {}) {
    if (!(n > 0.0)) throw std::invalid_argument("vault_best_response_p1: n must be > 0");
    if (cfg.f_grid_points == 0) throw std::invalid_argument("vault_best_response_p1: empty F grid");
    const auto f_grid = linspace(0.0, params.beta * n, cfg.f_grid_points);
    const double mean_nr = n * expected_value([](double r) { return r; }, samples).value;

    VaultDecisionP1 best;
    bool first = true;
    for (double f : f_grid) {
        const double b = stbl_price_p1(f, n, delta, samples, holder_u);
        const double obj = mean_nr + f * (b * params.b_rate - delta);
        if (first || obj > best.objective) {
            best.f = f;
            best.objective = obj;
            best.b_price = b;
            first = false;
        }
    }
    best.participates = best.objective >= params.u_vault_usd;
    if (!best.participates) {
        best.f = 0.0;
        best.b_price = stbl_price_p1(0.0, n, delta, samples, holder_u);
        best.objective = params.u_vault_usd;
    }
    return best;
}

namespace detail {

inline EquilibriumReport make_p1_report(const ScenarioParams& params, double delta,
                                        const VaultDecisionP1& vd, double n,
                                        const SampleSet& samples, const SolverConfig& cfg) {
    EquilibriumReport rep;
    rep.problem = "p1";
    rep.delta_star = delta;
    rep.f_star = vd.f;
    rep.n_star = n;
    rep.b_price = vd.b_price;
    rep.participates = vd.participates;
    const double gov_obj = delta * vd.f + params.kappa_usd;
    rep.gov_path.p2 = delta * vd.f + params.kappa_usd;
    rep.gov_path.p1 = rep.gov_path.p2; // no attack vector
    rep.gov_path.p0 = gov_obj;
    rep.objectives.governance = gov_obj;
    rep.objectives.vault = vd.objective;
    rep.attack.probability = 0.0;
    rep.diagnostics.delta_grid_size = step_grid(0.0, 1.0, cfg.delta_grid_step).size();
    rep.diagnostics.f_grid_size = cfg.f_grid_points;
    rep.diagnostics.sample_count = samples.count();
    // Monte Carlo noise on the equilibrium vault objective (zero for
    // enumerated sample sets).
    const double margin = vd.f * (vd.b_price * params.b_rate - delta);
    rep.diagnostics.objective_std_error =
        expected_value([&](double r) { return n * r + margin; }, samples).std_error;
    rep.seed = samples.seed;
    return rep;
}

} // namespace detail

/// Problem 1, sequential (Stackelberg) form: governance picks the interest
/// rate anticipating the vault's issuance response; ties resolve to the
/// smallest rate.
inline EquilibriumReport solve_p1(const ScenarioParams& params, const ReturnModel& model,
                                  const UtilityFunction& holder_u, std::uint64_t seed,
                                  const SolverConfig& cfg = {}) {
    {
        ValidationReport v = validate(params);
        const auto vm = validate(model);
        const auto vu = validate(holder_u);
        v.errors.insert(v.errors.end(), vm.errors.begin(), vm.errors.end());
        v.errors.insert(v.errors.end(), vu.errors.begin(), vu.errors.end());
        if (!v.ok()) throw std::invalid_argument("solve_p1: " + v.joined());
    }
    if (!(params.n_bar_usd > 0.0))
        throw std::invalid_argument("solve_p1: vault endowment n_bar_usd must be > 0");

    const SampleSet samples = sample_returns(model, cfg.sample_count, seed);
    const double n = params.n_bar_usd;
    const auto delta_grid = step_grid(0.0, 1.0, cfg.delta_grid_step);

    if (cfg.concurrent_moves) {
        // Pure Nash on the grid via alternating best responses with cycle
        // detection. Governance best-responds to F directly: any rate ties
        // when F = 0, otherwise the largest grid rate that the vault still
        // accepts is found by the next sweep.
        std::size_t di = 0;
        VaultDecisionP1 vd = vault_best_response_p1(delta_grid[di], params, n, samples, holder_u, cfg);
        std::set<std::pair<std::size_t, long long>> seen;
        bool converged = false;
        std::size_t iter = 0;
        for (; iter < cfg.max_iterations; ++iter) {
            // governance best response to the current F (smallest maximizer)
            std::size_t best_di = 0;
            double best_obj = delta_grid[0] * vd.f + params.kappa_usd;
            for (std::size_t k = 1; k < delta_grid.size(); ++k) {
                const double obj = delta_grid[k] * vd.f + params.kappa_usd;
                if (obj > best_obj) {
                    best_obj = obj;
                    best_di = k;
                }
            }
            VaultDecisionP1 vd_next =
                vault_best_response_p1(delta_grid[best_di], params, n, samples, holder_u, cfg);
            const long long f_cell = std::llround(vd_next.f * 1e9);
            if (best_di == di && vd_next.f == vd.f) {
                converged = true;
                vd = vd_next;
                break;
            }
            if (!seen.insert({best_di, f_cell}).second) {
                di = best_di;
                vd = vd_next;
                break; // revisited state: best-response cycle
            }
            di = best_di;
            vd = vd_next;
        }
        EquilibriumReport rep = detail::make_p1_report(params, delta_grid[di], vd, n, samples, cfg);
        rep.problem = "p1-concurrent";
        rep.diagnostics.converged = converged;
        rep.diagnostics.iterations = iter + 1;
        if (!converged) rep.diagnostics.note = "best-response iteration cycled";
        return rep;
    }

    std::vector<VaultDecisionP1> responses(delta_grid.size());
    parallel_for(delta_grid.size(), cfg.threads, [&](std::size_t i) {
        responses[i] = vault_best_response_p1(delta_grid[i], params, n, samples, holder_u, cfg);
    });

    std::size_t best = 0;
    double best_obj = delta_grid[0] * responses[0].f + params.kappa_usd;
    for (std::size_t i = 1; i < delta_grid.size(); ++i) {
        const double obj = delta_grid[i] * responses[i].f + params.kappa_usd;
        if (obj > best_obj) {
            best_obj = obj;
            best = i;
        }
    }
    EquilibriumReport rep =
        detail::make_p1_report(params, delta_grid[best], responses[best], n, samples, cfg);
    rep.diagnostics.iterations = 1;
    return rep;
}

} // namespace stablecap
