#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include <json.hpp>

#include "stablecap/version.hpp"

namespace stablecap {

using ordered_json = nlohmann::ordered_json;

/// GOV valuations at model times 0, 1, 2. p2 stores the no-attack
/// conditional value delta*F + kappa (an attacked outcome values GOV at
/// zero; that side is carried by the attack probability). p0 stores the
/// governance objective value.
struct GovTokenPath {
    double p0 = 0.0;
    double p1 = 0.0;
    double p2 = 0.0;
};

/// Shared knobs for the grid solvers. Defaults keep desk-scale runs under
/// a second while matching the documented grid conventions: the interest
/// rate is searched on a closed step grid inside [0, 1), quantity grids
/// are point counts over their feasible ranges.
struct SolverConfig {
    double delta_grid_step = 0.01;
    std::size_t f_grid_points = 101;
    std::size_t n_grid_points = 101;
    std::size_t portfolio_grid_points = 11;
    std::size_t bribe_grid_points = 10; ///< {0, 0.1, ..., 0.9}
    std::size_t sample_count = 10000;
    std::uint64_t seed = 1;
    bool concurrent_moves = false; ///< Problem 1: Nash via best-response iteration
    double damping = 0.5;          ///< Problem 3 update damping on continuous decisions
    std::size_t max_iterations = 200;
    double pressure = 0.0; ///< GOV demand-pressure coefficient (Problem 3 default prices)
    double b_max = 1.0;    ///< STBL price cap (Problem 3 default prices)
    unsigned threads = 1;
};

struct AttackStats {
    double probability = 0.0; ///< fraction of samples with a profitable attack
    double d_n = 1.0;         ///< one-hot collusion indicators (Problem 3)
    double d_v = 0.0;
    double d_s = 0.0;
};

struct Bribes {
    double gamma_v = 0.0;
    double gamma_s = 0.0;
};

struct Objectives {
    double governance = 0.0;
    double vault = 0.0;
    double holder = 0.0;
};

struct Diagnostics {
    bool converged = true;
    std::size_t iterations = 0;
    std::size_t delta_grid_size = 0;
    std::size_t f_grid_size = 0;
    std::size_t n_grid_size = 0;
    std::size_t sample_count = 0;
    double objective_std_error = 0.0;
    std::string note;
};

/// Solved decisions, prices and diagnostics for any of the four games.
/// Field order in the serialized JSON is fixed.
struct EquilibriumReport {
    std::string problem;     ///< "p1", "p1-concurrent", "p2", "p3"
    double delta_star = 0.0; ///< interest rate in [0, 1)
    double f_star = 0.0;     ///< stablecoin face value
    double n_star = 0.0;     ///< locked collateral
    double b_price = 0.0;    ///< STBL issuance price
    bool participates = false;
    GovTokenPath gov_path;
    AttackStats attack;
    Bribes bribes;
    // Problem 3 portfolios (zero elsewhere).
    double x_col = 0.0, x_gov = 0.0;
    double y_col = 0.0, y_gov = 0.0, y_stbl = 0.0;
    Objectives objectives;
    Diagnostics diagnostics;
    std::uint64_t seed = 0;
};

/// Reproducibility header embedded in every CLI output document.
inline ordered_json run_header(std::uint64_t seed, const SolverConfig& cfg) {
    ordered_json h;
    h["artifact_version"] = kVersion;
    h["seed"] = seed;
    h["sample_count"] = cfg.sample_count;
    h["delta_grid_step"] = cfg.delta_grid_step;
    h["f_grid_points"] = cfg.f_grid_points;
    h["n_grid_points"] = cfg.n_grid_points;
    h["portfolio_grid_points"] = cfg.portfolio_grid_points;
    h["bribe_grid_points"] = cfg.bribe_grid_points;
    return h;
}

inline ordered_json to_json(const EquilibriumReport& r) {
    ordered_json j;
    j["problem"] = r.problem;
    j["delta_star"] = r.delta_star;
    j["f_star"] = r.f_star;
    j["n_star"] = r.n_star;
    j["b_price"] = r.b_price;
    j["participates"] = r.participates;
    j["gov_path"] = {{"p0", r.gov_path.p0}, {"p1", r.gov_path.p1}, {"p2", r.gov_path.p2}};
    j["attack"] = {{"probability", r.attack.probability},
                   {"d_n", r.attack.d_n},
                   {"d_v", r.attack.d_v},
                   {"d_s", r.attack.d_s}};
    j["bribes"] = {{"gamma_v", r.bribes.gamma_v}, {"gamma_s", r.bribes.gamma_s}};
    j["portfolios"] = {{"x_col", r.x_col},
                       {"x_gov", r.x_gov},
                       {"y_col", r.y_col},
                       {"y_gov", r.y_gov},
                       {"y_stbl", r.y_stbl}};
    j["objectives"] = {{"governance", r.objectives.governance},
                       {"vault", r.objectives.vault},
                       {"holder", r.objectives.holder}};
    j["diagnostics"] = {{"converged", r.diagnostics.converged},
                        {"iterations", r.diagnostics.iterations},
                        {"delta_grid_size", r.diagnostics.delta_grid_size},
                        {"f_grid_size", r.diagnostics.f_grid_size},
                        {"n_grid_size", r.diagnostics.n_grid_size},
                        {"sample_count", r.diagnostics.sample_count},
                        {"objective_std_error", r.diagnostics.objective_std_error},
                        {"note", r.diagnostics.note}};
    j["seed"] = r.seed;
    return j;
}

} // namespace stablecap
