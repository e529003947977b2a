// Scenario-driven front end for the capital-structure game solvers, the
// miner-game simulator and the risk-aversion estimation pipeline.
//
// Exit codes: 0 success, 2 scenario validation failure, 3 solver
// non-convergence (diagnostic report still written), 64 usage error,
// 66 unreadable input file.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "stablecap/cdp.hpp"
#include "stablecap/grid.hpp"
#include "stablecap/problem1.hpp"
#include "stablecap/problem2.hpp"
#include "stablecap/problem3.hpp"
#include "stablecap/problem4.hpp"
#include "stablecap/scenario.hpp"
#include "stablecap/version.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitValidation = 2;
constexpr int kExitNoConvergence = 3;
constexpr int kExitUsage = 64;
constexpr int kExitNoInput = 66;

struct CliError {
    int code;
    std::string message;
};

void write_file_atomic(const std::string& path, const std::string& content) {
    const std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary);
        if (!out) throw CliError{kExitNoInput, "cannot write " + path};
        out << content;
    }
    std::filesystem::rename(tmp, path);
}

stablecap::ConfigMap read_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw CliError{kExitNoInput, "cannot read scenario file " + path};
    try {
        return stablecap::parse_config(in);
    } catch (const std::invalid_argument& e) {
        throw CliError{kExitValidation, path + ": " + e.what()};
    }
}

stablecap::ScenarioFile resolve_scenario(const stablecap::ConfigMap& map,
                                         std::optional<std::uint64_t> seed_override) {
    stablecap::ValidationReport rep;
    stablecap::ScenarioFile s = stablecap::load_scenario(map, rep);
    if (!rep.ok()) {
        std::string msg = "scenario validation failed:";
        for (const auto& e : rep.errors) msg += "\n  - " + e;
        throw CliError{kExitValidation, msg};
    }
    if (seed_override) s.solver.seed = *seed_override;
    return s;
}

std::string report_document(const stablecap::ScenarioFile& s,
                            const stablecap::EquilibriumReport& rep) {
    stablecap::ordered_json doc;
    doc["header"] = stablecap::run_header(s.solver.seed, s.solver);
    doc["scenario"] = stablecap::to_config_string(s);
    doc["report"] = stablecap::to_json(rep);
    return doc.dump(2) + "\n";
}

/// Output path for sweep cell i: base.json -> base_007.json.
std::string cell_path(const std::string& base, std::size_t i, std::size_t total) {
    if (total <= 1) return base;
    char suffix[16];
    std::snprintf(suffix, sizeof suffix, "_%03zu", i);
    const auto dot = base.rfind('.');
    if (dot == std::string::npos) return base + suffix;
    return base.substr(0, dot) + suffix + base.substr(dot);
}

/// Runs fn over every sweep cell (one cell when no sweep block exists).
/// Returns the worst exit code seen.
template <typename Fn>
int for_each_cell(const stablecap::ConfigMap& map, std::optional<std::uint64_t> seed,
                  const std::string& out, Fn&& fn) {
    const auto cells = stablecap::expand_sweep(map);
    int exit_code = kExitOk;
    std::vector<int> codes(cells.size(), kExitOk);
    std::vector<std::string> errors(cells.size());
    const auto run_cell = [&](std::size_t i) {
        try {
            const auto scenario = resolve_scenario(cells[i], seed);
            codes[i] = fn(scenario, cell_path(out, i, cells.size()));
        } catch (const CliError& e) {
            codes[i] = e.code;
            errors[i] = e.message;
        } catch (const std::exception& e) {
            codes[i] = kExitValidation;
            errors[i] = e.what();
        }
    };
    if (cells.size() > 1) {
        unsigned workers = 0; // bounded pool; each cell writes its own file
        stablecap::parallel_for(cells.size(), workers, run_cell);
    } else {
        run_cell(0);
    }
    for (std::size_t i = 0; i < cells.size(); ++i) {
        if (!errors[i].empty()) std::cerr << "cell " << i << ": " << errors[i] << "\n";
        exit_code = std::max(exit_code, codes[i]);
    }
    return exit_code;
}

std::vector<double> parse_range(const std::string& spec) {
    // "lo:hi:count" or a single value
    std::vector<std::string> parts;
    std::stringstream ss(spec);
    std::string item;
    while (std::getline(ss, item, ':')) parts.push_back(item);
    try {
        if (parts.size() == 1) return {std::stod(parts[0])};
        if (parts.size() == 3)
            return stablecap::linspace(std::stod(parts[0]), std::stod(parts[1]),
                                       static_cast<std::size_t>(std::stoul(parts[2])));
    } catch (const std::exception&) {
    }
    throw CliError{kExitUsage, "bad range \"" + spec + "\" (want lo:hi:count or a value)"};
}

std::string csv_bool(bool b) { return b ? "1" : "0"; }

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"stablecap: capital-structure games of non-custodial stablecoins"};
    app.set_version_flag("--version", std::string(stablecap::kVersion));
    app.require_subcommand(1);

    std::string scenario_path, out_path;
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> rounds_override;

    auto add_common = [&](CLI::App* cmd, bool need_out = true) {
        cmd->add_option("--scenario", scenario_path, "scenario config file")->required();
        auto* o = cmd->add_option("--out", out_path, "output file");
        if (need_out) o->required();
        cmd->add_option("--seed", seed, "override the scenario seed");
    };

    auto* p1 = app.add_subcommand("solve-p1", "capital structure with no attack vectors");
    add_common(p1);
    auto* p2 = app.add_subcommand("solve-p2", "capital structure with governance attack vector");
    add_common(p2);
    auto* p3 = app.add_subcommand("solve-p3", "portfolio selection with collusion attack vector");
    add_common(p3);
    std::string price_model_flag;
    p3->add_option("--price-model", price_model_flag, "price function family (linear-pressure)");
    auto* p4 = app.add_subcommand("simulate-p4", "miner-absorbed stablecoin simulation");
    add_common(p4);
    p4->add_option("--rounds", rounds_override, "number of rounds");
    auto* poa = app.add_subcommand("price-of-anarchy",
                                   "welfare ratio of the attack-exposed equilibrium to the "
                                   "attack-free benchmark");
    add_common(poa);

    auto* region = app.add_subcommand("security-region", "incentive-security region sweep");
    std::string gamma_spec = "0.1:2.0:10", zeta_spec = "0.1", delta_spec = "0.01:0.2:10",
                beta_spec = "0.1:2.0:10";
    double region_r = 0.05;
    std::string region_scenario;
    region->add_option("--gamma", gamma_spec, "gamma range lo:hi:count");
    region->add_option("--zeta", zeta_spec, "zeta range lo:hi:count");
    region->add_option("--delta", delta_spec, "interest-rate range lo:hi:count");
    region->add_option("--beta", beta_spec, "collateral-factor range lo:hi:count");
    region->add_option("--r", region_r, "discount rate for the kappa coupling");
    region->add_option("--scenario", region_scenario, "base scenario (optional)");
    region->add_option("--out", out_path, "output CSV")->required();

    auto* rho = app.add_subcommand("estimate-rho", "CDP risk-aversion estimation pipeline");
    std::string actions_path, prices_path, out_dir, cutoff_date = "2019-11-18";
    double min_collateral = 50.0, r_free_annual = 0.02, hist_cap = 1.0;
    std::size_t active_threshold = 10, hist_bins = 50;
    bool eoa_only = false, no_reinvest = false, final_snapshot = false;
    rho->add_option("--actions", actions_path, "CDP action CSV")->required();
    rho->add_option("--prices", prices_path, "daily price CSV (date,close)")->required();
    rho->add_option("--out-dir", out_dir, "output directory")->required();
    rho->add_option("--min-collateral-usd", min_collateral, "peak collateral filter");
    rho->add_option("--cutoff", cutoff_date, "drop actions after this date (YYYY-MM-DD)");
    rho->add_flag("--eoa-only", eoa_only, "drop contract-address rows");
    rho->add_option("--active-threshold", active_threshold,
                    "actions required for the active-address table");
    rho->add_option("--r-free-annual", r_free_annual, "annual risk-free rate");
    rho->add_option("--hist-bins", hist_bins, "histogram bin count");
    rho->add_option("--hist-cap", hist_cap, "histogram reporting cap on rho");
    rho->add_flag("--no-reinvest", no_reinvest,
                  "treat drawn stablecoins as cash instead of repurchased collateral");
    rho->add_flag("--final-snapshot", final_snapshot,
                  "estimate from each CDP's final state instead of the per-action mean");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitUsage;
    }

    using namespace stablecap;
    try {
        if (p1->parsed() || p2->parsed() || poa->parsed()) {
            const auto map = read_config(scenario_path);
            return for_each_cell(map, seed, out_path, [&](const ScenarioFile& s,
                                                          const std::string& path) {
                if (p1->parsed()) {
                    const auto rep = solve_p1(s.params, s.returns, s.utility, s.solver.seed, s.solver);
                    write_file_atomic(path, report_document(s, rep));
                    return rep.diagnostics.converged ? kExitOk : kExitNoConvergence;
                }
                if (p2->parsed()) {
                    const auto rep = solve_p2(s.params, s.returns, s.utility, s.solver.seed, s.solver);
                    write_file_atomic(path, report_document(s, rep));
                    return kExitOk;
                }
                const auto res = price_of_anarchy(s.params, s.returns, s.utility, s.solver.seed,
                                                  s.solver);
                ordered_json doc;
                doc["header"] = run_header(s.solver.seed, s.solver);
                doc["scenario"] = to_config_string(s);
                doc["price_of_anarchy"] = res.ratio;
                doc["decentralized_welfare"] = res.decentralized_welfare;
                doc["centralized_welfare"] = res.centralized_welfare;
                doc["decentralized"] = to_json(res.decentralized);
                doc["centralized"] = to_json(res.centralized);
                write_file_atomic(path, doc.dump(2) + "\n");
                return kExitOk;
            });
        }

        if (p3->parsed()) {
            const auto map = read_config(scenario_path);
            return for_each_cell(map, seed, out_path, [&](const ScenarioFile& s,
                                                          const std::string& path) {
                if (!price_model_flag.empty() && price_model_flag != "linear-pressure")
                    throw CliError{kExitValidation,
                                   "unknown price model \"" + price_model_flag + "\""};
                const auto prices = default_price_functions(s.params.kappa_usd, s.solver.pressure,
                                                            s.solver.b_max);
                const auto rep = solve_p3(s.params, s.returns, s.utility, prices, s.solver.seed,
                                          s.solver);
                write_file_atomic(path, report_document(s, rep));
                return rep.diagnostics.converged ? kExitOk : kExitNoConvergence;
            });
        }

        if (p4->parsed()) {
            const auto map = read_config(scenario_path);
            return for_each_cell(map, seed, out_path, [&](const ScenarioFile& s,
                                                          const std::string& path) {
                const std::size_t rounds = rounds_override.value_or(s.p4_rounds);
                const auto traj = simulate_p4(s.p4, s.utility, rounds);
                std::ostringstream csv;
                csv << "round,r,d,B,P1,y_s,y_a,F\n";
                csv.precision(17);
                for (const auto& rec : traj)
                    csv << rec.round << ',' << rec.reward << ',' << rec.produced << ','
                        << rec.b_price << ',' << rec.p1 << ',' << rec.y_stbl << ',' << rec.y_exo
                        << ',' << rec.f_supply << "\n";
                write_file_atomic(path, csv.str());
                return kExitOk;
            });
        }

        if (region->parsed()) {
            ScenarioParams base;
            ReturnModel model = ReturnModel::deterministic(0.0);
            SolverConfig cfg;
            cfg.n_grid_points = 41;
            cfg.f_grid_points = 41;
            cfg.threads = 0;
            if (!region_scenario.empty()) {
                const auto map = read_config(region_scenario);
                const auto s = resolve_scenario(map, std::nullopt);
                base = s.params;
                model = s.returns;
                cfg = s.solver;
            }
            const auto points = incentive_security_region(
                parse_range(gamma_spec), parse_range(zeta_spec), parse_range(delta_spec),
                parse_range(beta_spec), region_r, base, model, cfg);
            std::ostringstream csv;
            csv << "gamma,zeta,delta,beta,r,analytic_secure,empirical_secure\n";
            csv.precision(17);
            for (const auto& pt : points)
                csv << pt.gamma << ',' << pt.zeta << ',' << pt.delta << ',' << pt.beta << ','
                    << pt.r << ',' << csv_bool(pt.analytic_secure) << ','
                    << csv_bool(pt.empirical_secure) << "\n";
            write_file_atomic(out_path, csv.str());
            return kExitOk;
        }

        if (rho->parsed()) {
            std::vector<cdp::CdpActionRecord> records;
            cdp::DailyMoments moments;
            try {
                records = cdp::load_cdp_csv(actions_path);
                moments = cdp::load_price_moments(prices_path);
            } catch (const std::runtime_error& e) {
                throw CliError{kExitNoInput, e.what()};
            } catch (const std::invalid_argument& e) {
                throw CliError{kExitValidation, e.what()};
            }
            const std::int64_t cutoff =
                (cdp::detail::parse_date_days(cutoff_date) + 1) * 86400 - 1;
            const auto filtered = cdp::clean_filter(records, min_collateral, cutoff, eoa_only);
            const auto report =
                cdp::rho_report(filtered, moments, r_free_annual, active_threshold,
                                final_snapshot ? cdp::RhoSnapshotMode::final_snapshot
                                               : cdp::RhoSnapshotMode::per_action_mean,
                                !no_reinvest);

            std::filesystem::create_directories(out_dir);
            std::ostringstream per_cdp;
            per_cdp << "cdp_id,address,snapshots_used,snapshots_skipped,rho_mean\n";
            per_cdp.precision(17);
            for (const auto& row : report.per_cdp)
                per_cdp << row.cdp_id << ',' << row.address << ',' << row.snapshots_used << ','
                        << row.snapshots_skipped << ',' << row.rho_mean << "\n";
            write_file_atomic(out_dir + "/rho_per_cdp.csv", per_cdp.str());

            std::ostringstream per_addr;
            per_addr << "address,cdp_count,action_count,active,rho_mean\n";
            per_addr.precision(17);
            for (const auto& row : report.per_address)
                per_addr << row.address << ',' << row.cdp_count << ',' << row.action_count << ','
                         << csv_bool(row.active) << ',' << row.rho_mean << "\n";
            write_file_atomic(out_dir + "/rho_per_address.csv", per_addr.str());

            // histogram of per-CDP estimates below the reporting cap
            std::vector<std::size_t> bins(hist_bins, 0);
            const double lo = 0.0, hi = hist_cap;
            std::size_t excluded = 0;
            for (const auto& row : report.per_cdp) {
                if (row.snapshots_used == 0) continue;
                if (row.rho_mean < lo || row.rho_mean > hi) {
                    ++excluded;
                    continue;
                }
                auto b = static_cast<std::size_t>((row.rho_mean - lo) / (hi - lo) *
                                                  static_cast<double>(hist_bins));
                if (b >= hist_bins) b = hist_bins - 1;
                ++bins[b];
            }
            std::ostringstream hist;
            hist << "bin_lo,bin_hi,count\n";
            hist.precision(17);
            for (std::size_t i = 0; i < hist_bins; ++i) {
                const double w = (hi - lo) / static_cast<double>(hist_bins);
                hist << lo + w * static_cast<double>(i) << ','
                     << lo + w * static_cast<double>(i + 1) << ',' << bins[i] << "\n";
            }
            write_file_atomic(out_dir + "/rho_histogram.csv", hist.str());
            std::cout << "cdp rows: " << report.per_cdp.size()
                      << ", addresses: " << report.per_address.size()
                      << ", snapshots skipped: " << report.total_snapshots_skipped
                      << ", histogram outliers excluded: " << excluded << "\n";
            return kExitOk;
        }
    } catch (const CliError& e) {
        std::cerr << "error: " << e.message << "\n";
        return e.code;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitValidation;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitValidation;
    }
    return kExitUsage;
}
