#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "stablecap/grid.hpp"
#include "stablecap/params.hpp"
#include "stablecap/problem1.hpp"
#include "stablecap/report.hpp"
#include "stablecap/returns.hpp"
#include "stablecap/utility.hpp"

namespace stablecap {

/// Governance-attack profitability test for one realized return:
/// 1 iff gamma*N*(1+R) > zeta*(delta*F + kappa) + alpha, strictly.
inline int attack_indicator(double r_realized, double n, double f, double delta,
                            const ScenarioParams& params) {
    const double proceeds = params.gamma * n * (1.0 + r_realized);
    const double opportunity_cost = params.zeta * (delta * f + params.kappa_usd) + params.alpha_usd;
    return proceeds > opportunity_cost ? 1 : 0;
}

struct VaultDecisionP2 {
    double n = 0.0;
    double f = 0.0;
    bool participates = false; ///< n > 0
    double objective = 0.0;
    double b_price = 0.0;
    double attack_probability = 0.0;
};

/// Vault best response for Problem 2: joint argmax over the (N, F) grid of
/// E[(Nbar - N)R + (1-d)NR + F(Bb - d) - dN(1+R)] subject to F <= beta*N,
/// the participation constraint 1(N>0) u <= E[F(Bb - d) - d*gamma*N(1+R)],
/// and the attacked stablecoin price with the (1 - gamma*d) haircut.
/// Ties prefer the smaller F, then the larger N (lock everything when
/// indifferent, matching the no-attack-vector reading of Problem 1).
inline VaultDecisionP2 vault_best_response_p2(double delta, const ScenarioParams& params,
                                              const SampleSet& samples,
                                              const UtilityFunction& holder_u,
                                              const SolverConfig& cfg = {}) {
    if (cfg.n_grid_points == 0 || cfg.f_grid_points == 0)
        throw std::invalid_argument("vault_best_response_p2: empty grid");
    const double n_bar = params.n_bar_usd;
    if (n_bar == 0.0) return {0.0, 0.0, false, 0.0, 0.0, 0.0};

    const auto n_grid = linspace(0.0, n_bar, cfg.n_grid_points);
    const double mean_r = expected_value([](double r) { return r; }, samples).value;

    VaultDecisionP2 best;
    bool first = true;
    for (double n : n_grid) {
        const auto f_grid =
            n > 0.0 ? linspace(0.0, params.beta * n, cfg.f_grid_points) : std::vector<double>{0.0};
        for (double f : f_grid) {
            // Per-sample attack indicator, then the expectations that depend
            // on it. Sums are kept factored (n multiplied outside) so that
            // the d == 0 case reproduces the Problem 1 arithmetic exactly.
            double b = 0.0;
            double attack_prob = 0.0;
            double kept_return = 0.0;   // E[(1-d) R]
            double seized_factor = 0.0; // E[d (1+R)]
            for (std::size_t i = 0; i < samples.count(); ++i) {
                const double r = samples.returns[i];
                const double w = samples.weight(i);
                const int d = attack_indicator(r, n, f, delta, params);
                attack_prob += w * d;
                const double haircut = 1.0 - params.gamma * d;
                b += w * stbl_payoff_per_coin(f, haircut * (n * (1.0 + r) - delta * f));
                if (d) {
                    seized_factor += w * (1.0 + r);
                } else {
                    kept_return += w * r;
                }
            }
            if (holder_u.kind != UtilityKind::risk_neutral) {
                b = expected_utility(
                    holder_u,
                    [&](double r) {
                        const int d = attack_indicator(r, n, f, delta, params);
                        const double haircut = 1.0 - params.gamma * d;
                        return stbl_payoff_per_coin(f, haircut * (n * (1.0 + r) - delta * f));
                    },
                    samples);
            }
            const double margin = f * (b * params.b_rate - delta);
            // E[(Nbar-N)R + (1-d)NR - dN(1+R)] + margin, written as
            // Nbar E[R] - N E[dR] - N E[d(1+R)] so the no-attack case is
            // exactly flat in N and ties resolve by the stated rule.
            const double obj =
                n_bar * mean_r + n * (kept_return - mean_r) - n * seized_factor + margin;
            const double leverage_profit = margin - params.gamma * n * seized_factor;
            if (n > 0.0 && leverage_profit < params.u_vault_usd) continue; // infeasible
            const bool better =
                first || obj > best.objective ||
                (obj == best.objective && (f < best.f || (f == best.f && n > best.n)));
            if (better) {
                best.n = n;
                best.f = f;
                best.objective = obj;
                best.b_price = b;
                best.attack_probability = attack_prob;
                first = false;
            }
        }
    }
    best.participates = best.n > 0.0;
    return best;
}

/// Problem 2: the non-attack governance group picks the interest rate to
/// maximize E[(1-d)(delta*F + kappa)] against the vault's joint (N, F)
/// response; the attack group's decision is the per-sample indicator.
/// Only the zeta < 0.5 formulation is solved.
inline EquilibriumReport solve_p2(const ScenarioParams& params, const ReturnModel& model,
                                  const UtilityFunction& holder_u, std::uint64_t seed,
                                  const SolverConfig& cfg = {}) {
    {
        ValidationReport v = validate(params);
        const auto vm = validate(model);
        const auto vu = validate(holder_u);
        v.errors.insert(v.errors.end(), vm.errors.begin(), vm.errors.end());
        v.errors.insert(v.errors.end(), vu.errors.begin(), vu.errors.end());
        if (!v.ok()) throw std::invalid_argument("solve_p2: " + v.joined());
    }
    if (params.zeta >= 0.5)
        throw std::invalid_argument(
            "solve_p2: only zeta < 0.5 is modeled; the zeta >= 0.5 reformulation "
            "(attack group sets the rate) is out of scope");

    const SampleSet samples = sample_returns(model, cfg.sample_count, seed);
    const auto delta_grid = step_grid(0.0, 1.0, cfg.delta_grid_step);

    std::vector<VaultDecisionP2> responses(delta_grid.size());
    std::vector<double> gov_objs(delta_grid.size());
    parallel_for(delta_grid.size(), cfg.threads, [&](std::size_t i) {
        responses[i] = vault_best_response_p2(delta_grid[i], params, samples, holder_u, cfg);
        // E[(1-d)(dF + kappa)] = (dF + kappa)(1 - P[attack]); d was resolved
        // per sample inside the best response.
        const double face = delta_grid[i] * responses[i].f + params.kappa_usd;
        gov_objs[i] = responses[i].attack_probability == 0.0
                          ? face
                          : face * (1.0 - responses[i].attack_probability);
    });

    std::size_t best = 0;
    for (std::size_t i = 1; i < delta_grid.size(); ++i)
        if (gov_objs[i] > gov_objs[best]) best = i;

    const auto& vd = responses[best];
    EquilibriumReport rep;
    rep.problem = "p2";
    rep.delta_star = delta_grid[best];
    rep.f_star = vd.f;
    rep.n_star = vd.n;
    rep.b_price = vd.b_price;
    rep.participates = vd.participates;
    rep.attack.probability = vd.attack_probability;
    rep.attack.d_n = 1.0 - vd.attack_probability;
    rep.attack.d_v = 0.0;
    rep.attack.d_s = 0.0;
    rep.gov_path.p2 = rep.delta_star * vd.f + params.kappa_usd;
    rep.gov_path.p1 = (1.0 - vd.attack_probability) * rep.gov_path.p2;
    rep.gov_path.p0 = gov_objs[best];
    rep.objectives.governance = gov_objs[best];
    rep.objectives.vault = vd.objective;
    rep.diagnostics.delta_grid_size = delta_grid.size();
    rep.diagnostics.f_grid_size = cfg.f_grid_points;
    rep.diagnostics.n_grid_size = cfg.n_grid_points;
    rep.diagnostics.sample_count = samples.count();
    rep.diagnostics.iterations = 1;
    const double margin = vd.f * (vd.b_price * params.b_rate - rep.delta_star);
    rep.diagnostics.objective_std_error =
        expected_value(
            [&](double r) {
                const int d = attack_indicator(r, vd.n, vd.f, rep.delta_star, params);
                return (params.n_bar_usd - vd.n) * r + (1 - d) * vd.n * r -
                       d * vd.n * (1.0 + r) + margin;
            },
            samples)
            .std_error;
    rep.seed = samples.seed;
    return rep;
}

/// One point of the incentive-security map.
struct RegionPoint {
    double gamma = 0.0, zeta = 0.0, delta = 0.0, beta = 0.0, r = 0.0;
    bool analytic_secure = false;  ///< gamma*r/(zeta*delta) < beta
    bool empirical_secure = false; ///< solve_p2 equilibrium participates with no attack
    double kappa_fixed_point = 0.0;
    double f_star = 0.0;
    bool kappa_converged = true;
};

/// Analytic incentive-security condition at alpha = 0 under the long-run
/// coupling of the terminal valuation to the geometric fee sum.
inline bool analytic_incentive_security(double gamma, double zeta, double delta, double beta,
                                        double r) {
    if (zeta * delta == 0.0)
        throw std::domain_error("incentive security condition undefined at zeta*delta = 0");
    return gamma * r / (zeta * delta) < beta;
}

/// Evaluates one region point: the analytic condition plus the empirical
/// flag from solve_p2 with alpha = 0, the rate pinned to the point's
/// delta, and kappa iterated to the fixed point kappa = delta*F/(1-r)
/// (damping 0.5, at most 100 iterations, relative tolerance 1e-6; the
/// iteration starts from the maximal-issuance value so that an optimistic
/// fixed point is found when one exists).
inline RegionPoint evaluate_region_point(double gamma, double zeta, double delta, double beta,
                                         double r, const ScenarioParams& base,
                                         const ReturnModel& model, const SolverConfig& cfg = {}) {
    RegionPoint pt;
    pt.gamma = gamma;
    pt.zeta = zeta;
    pt.delta = delta;
    pt.beta = beta;
    pt.r = r;
    pt.analytic_secure = analytic_incentive_security(gamma, zeta, delta, beta, r);

    ScenarioParams p = base;
    p.gamma = gamma;
    p.zeta = zeta;
    p.beta = beta;
    p.alpha_usd = 0.0;
    p.r_discount = r;

    SolverConfig point_cfg = cfg;
    point_cfg.threads = 1;
    const SampleSet samples = sample_returns(model, cfg.sample_count, cfg.seed);

    double kappa = delta * beta * p.n_bar_usd / (1.0 - r);
    VaultDecisionP2 vd;
    bool converged = false;
    for (std::size_t it = 0; it < 100; ++it) {
        p.kappa_usd = kappa;
        vd = vault_best_response_p2(delta, p, samples, UtilityFunction::risk_neutral(), point_cfg);
        const double kappa_next = delta * vd.f / (1.0 - r);
        const double diff = std::abs(kappa_next - kappa);
        kappa += 0.5 * (kappa_next - kappa);
        if (diff <= 1e-6 * std::max(1.0, std::abs(kappa))) {
            converged = true;
            break;
        }
    }
    pt.kappa_converged = converged;
    pt.kappa_fixed_point = kappa;
    pt.f_star = vd.f;
    pt.empirical_secure = vd.participates && vd.f > 0.0 && vd.attack_probability == 0.0;
    return pt;
}

/// Sweeps the analytic and empirical incentive-security flags over a
/// parameter grid. Points run concurrently; each is pure.
inline std::vector<RegionPoint> incentive_security_region(
    const std::vector<double>& gammas, const std::vector<double>& zetas,
    const std::vector<double>& deltas, const std::vector<double>& betas, double r,
    const ScenarioParams& base, const ReturnModel& model, const SolverConfig& cfg = {}) {
    for (double z : zetas)
        for (double d : deltas)
            if (z * d == 0.0)
                throw std::domain_error("incentive_security_region: zeta*delta = 0 on grid");

    std::vector<RegionPoint> out(gammas.size() * zetas.size() * deltas.size() * betas.size());
    const std::size_t nz = zetas.size(), nd = deltas.size(), nb = betas.size();
    parallel_for(out.size(), cfg.threads, [&](std::size_t idx) {
        std::size_t rem = idx;
        const std::size_t gi = rem / (nz * nd * nb);
        rem %= nz * nd * nb;
        const std::size_t zi = rem / (nd * nb);
        rem %= nd * nb;
        const std::size_t di = rem / nb;
        const std::size_t bi = rem % nb;
        out[idx] = evaluate_region_point(gammas[gi], zetas[zi], deltas[di], betas[bi], r, base,
                                         model, cfg);
    });
    return out;
}

struct PriceOfAnarchyResult {
    double ratio = 0.0;
    double decentralized_welfare = 0.0;
    double centralized_welfare = 0.0;
    EquilibriumReport decentralized;
    EquilibriumReport centralized;
};

/// Ratio of total welfare (governance plus vault expected objectives) in
/// the attack-exposed equilibrium to the attack-free benchmark, the
/// latter being Problem 1 (the alpha -> infinity limit).
inline PriceOfAnarchyResult price_of_anarchy(const ScenarioParams& params,
                                             const ReturnModel& model,
                                             const UtilityFunction& holder_u, std::uint64_t seed,
                                             const SolverConfig& cfg = {}) {
    PriceOfAnarchyResult res;
    res.decentralized = solve_p2(params, model, holder_u, seed, cfg);
    res.centralized = solve_p1(params, model, holder_u, seed, cfg);
    res.decentralized_welfare =
        res.decentralized.objectives.governance + res.decentralized.objectives.vault;
    res.centralized_welfare =
        res.centralized.objectives.governance + res.centralized.objectives.vault;
    if (!(res.centralized_welfare > 0.0))
        throw std::domain_error("price_of_anarchy: centralized welfare is not positive");
    res.ratio = res.decentralized_welfare / res.centralized_welfare;
    return res;
}

} // namespace stablecap
