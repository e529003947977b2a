#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <span>
#include <stdexcept>
#include <vector>

#include "stablecap/grid.hpp"
#include "stablecap/params.hpp"
#include "stablecap/returns.hpp"
#include "stablecap/utility.hpp"

namespace stablecap {

/// Stablecoin-holder portfolio in the miner game: STBL and an exogenous
/// stablecoin. Holdings are coin counts valued near par (the exogenous
/// coin price B_A is held constant at 1).
struct HolderPortfolioP4 {
    double y_stbl = 0.0;
    double y_exo = 0.0;
};

/// Abstract price functions of the miner game: the STBL price
/// B(r, y1, d, P1) and the long-term confidence P(y_S, d).
struct P4PriceModel {
    std::function<double(double r, const HolderPortfolioP4& y1, int d, double p1)> price;
    std::function<double(double y_stbl, int d)> confidence;
};

/// Default linear price family. Demand pressure is the STBL holding change
/// against the previous block, normalized by supply; issuance depresses
/// the price through the fraction of rewards miners actually spend.
/// Confidence is proportional to STBL holdings while blocks are produced.
inline P4PriceModel default_p4_price_model(double lambda_demand, double lambda_issuance,
                                           double spend_fraction, double rho_confidence,
                                           double y0_stbl, double f_supply) {
    P4PriceModel m;
    m.price = [=](double r, const HolderPortfolioP4& y1, int /*d*/, double /*p1*/) {
        const double scale = std::max(f_supply, 1.0);
        const double b = 1.0 + lambda_demand * (y1.y_stbl - y0_stbl) / scale -
                         lambda_issuance * (spend_fraction * r) / scale;
        return std::max(0.0, b);
    };
    m.confidence = [=](double y_stbl, int d) { return rho_confidence * y_stbl * d; };
    return m;
}

/// Issuance algorithm: the grid reward minimizing |B(r, y1, 1, P1) - 1|,
/// assuming a block is produced. Rewards are floored at zero (the
/// proof-of-work reading); ties resolve to the smallest reward.
inline double issuance_optimize(const P4PriceModel& model, const HolderPortfolioP4& y1, double p1,
                                std::span<const double> r_grid) {
    if (r_grid.empty()) throw std::invalid_argument("issuance_optimize: empty reward grid");
    if (r_grid[0] < 0.0) throw std::invalid_argument("issuance_optimize: rewards must be >= 0");
    double best_r = r_grid[0];
    double best_gap = std::abs(model.price(r_grid[0], y1, 1, p1) - 1.0);
    for (double r : r_grid.subspan(1)) {
        if (r < 0.0) throw std::invalid_argument("issuance_optimize: rewards must be >= 0");
        const double gap = std::abs(model.price(r, y1, 1, p1) - 1.0);
        if (gap < best_gap) {
            best_gap = gap;
            best_r = r;
        }
    }
    return best_r;
}

/// Miner block-production decision: produce iff mining weakly increases
/// the objective E[d(Bbr - c) + P1] and the outside-utility constraint
/// d u <= E[Bbr - c] holds.
inline int miner_decision(double b_price, double b_rate, double r, double c, double /*p1*/,
                          double u_outside) {
    const double margin = b_price * b_rate * r - c;
    return (margin >= 0.0 && margin >= u_outside) ? 1 : 0;
}

/// Holder rebalance: grid argmax of
/// E[U(y1_S * Bfuture + y0_A * B_A + (y0_S - y1_S) * Bexec (1 - dc))].
/// Kept coins ride the (possibly uncertain) future price `b_future`;
/// the net trade executes at the known price `b_exec` with the
/// acquisition-cost haircut. Ties keep the holding closest to y0.
inline HolderPortfolioP4 holder_rebalance(const HolderPortfolioP4& y0, double b_exec,
                                          const SampleSet& b_future, double b_a,
                                          double delta_cost, const UtilityFunction& holder_u,
                                          std::span<const double> y1s_grid) {
    if (y1s_grid.empty()) throw std::invalid_argument("holder_rebalance: empty grid");
    double best_y = y1s_grid[0];
    double best_obj = 0.0;
    bool first = true;
    for (double y1s : y1s_grid) {
        const double obj = expected_utility(
            holder_u,
            [&](double b_next) {
                return y1s * b_next + y0.y_exo * b_a + (y0.y_stbl - y1s) * b_exec * (1.0 - delta_cost);
            },
            b_future);
        const bool better = first || obj > best_obj ||
                            (obj == best_obj &&
                             std::abs(y1s - y0.y_stbl) < std::abs(best_y - y0.y_stbl));
        if (better) {
            best_y = y1s;
            best_obj = obj;
            first = false;
        }
    }
    HolderPortfolioP4 y1;
    y1.y_stbl = best_y;
    // Value conservation: the net STBL trade settles into the exogenous
    // coin at the executed price net of the acquisition cost.
    y1.y_exo = y0.y_exo + (y0.y_stbl - best_y) * b_exec * (1.0 - delta_cost) / b_a;
    return y1;
}

/// Scenario knobs for the round-based simulation.
struct P4Params {
    double b_rate = 1.0;        ///< miner return rate on rewards
    double c_usd = 0.01;        ///< block production cost
    double u_outside_usd = 0.0; ///< miner outside utility
    double delta_cost = 0.01;   ///< STBL acquisition cost fraction
    double lambda_demand = 1.0;
    double lambda_issuance = 1.0;
    double spend_fraction = 1.0;
    double rho_confidence = 0.01;
    double income_usd = 0.0;    ///< per-round exogenous-coin income (buying power)
    double belief_drift = 0.0;  ///< expected next-price drift applied by the holder
    double y0_stbl = 100.0;
    double y0_exo = 0.0;
    double f_initial = 100.0;   ///< initial STBL supply
    std::size_t r_grid_points = 1501;
    std::size_t y_grid_points = 201;
};

struct P4RoundRecord {
    std::size_t round = 0;
    double reward = 0.0;
    int produced = 1;
    double b_price = 1.0;
    double p1 = 0.0;
    double y_stbl = 0.0;
    double y_exo = 0.0;
    double f_supply = 0.0;
};

/// Round loop: income arrives in the exogenous coin, the holder rebalances
/// against expected prices, issuance minimizes the peg gap assuming a
/// block is produced, the miner decides, prices update, and supply grows
/// by the rewards of produced blocks.
inline std::vector<P4RoundRecord> simulate_p4(const P4Params& p,
                                              const UtilityFunction& holder_u,
                                              std::size_t rounds) {
    std::vector<P4RoundRecord> trajectory;
    trajectory.reserve(rounds);

    HolderPortfolioP4 y{p.y0_stbl, p.y0_exo};
    double f_supply = p.f_initial;
    double b_prev = 1.0;
    const double b_a = 1.0;

    for (std::size_t t = 0; t < rounds; ++t) {
        y.y_exo += p.income_usd;

        const P4PriceModel model =
            default_p4_price_model(p.lambda_demand, p.lambda_issuance, p.spend_fraction,
                                   p.rho_confidence, y.y_stbl, f_supply);

        // Holder expectation of the next price: the last realized price
        // with a belief drift. Deterministic, so the expected-utility grid
        // search reduces to the payoff comparison.
        SampleSet belief;
        belief.exact = true;
        belief.returns = {b_prev * (1.0 + p.belief_drift)};
        belief.weights = {1.0};

        const double budget_cap =
            y.y_stbl + std::max(0.0, y.y_exo) / (std::max(b_prev, 1e-12) * (1.0 - p.delta_cost));
        const auto y_grid = linspace(0.0, budget_cap, p.y_grid_points);
        const HolderPortfolioP4 y1 =
            holder_rebalance(y, b_prev, belief, b_a, p.delta_cost, holder_u, y_grid);

        const double p1_assumed = model.confidence(y1.y_stbl, 1);

        // Reward grid sized to bracket the demand gap the issuance must
        // counteract; resolution follows from the point count.
        const double gap = y1.y_stbl - y.y_stbl;
        const double sf = std::max(p.spend_fraction, 1e-9);
        const double r_upper =
            1.0 + 1.5 * p.lambda_demand * std::max(gap, 0.0) / (p.lambda_issuance * sf);
        const auto r_grid = linspace(0.0, r_upper, p.r_grid_points);
        const double r_star = issuance_optimize(model, y1, p1_assumed, r_grid);

        const double b_at_r = model.price(r_star, y1, 1, p1_assumed);
        const int d = miner_decision(b_at_r, p.b_rate, r_star, p.c_usd, p1_assumed,
                                     p.u_outside_usd);

        P4RoundRecord rec;
        rec.round = t;
        rec.reward = r_star;
        rec.produced = d;
        rec.b_price = model.price(r_star, y1, d, p1_assumed);
        rec.p1 = model.confidence(y1.y_stbl, d);
        rec.y_stbl = y1.y_stbl;
        rec.y_exo = y1.y_exo;
        rec.f_supply = f_supply;
        trajectory.push_back(rec);

        y = y1;
        b_prev = rec.b_price;
        if (d == 1) f_supply += r_star;
    }
    return trajectory;
}

} // namespace stablecap
