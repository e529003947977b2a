#pragma once

#include <cctype>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "stablecap/params.hpp"
#include "stablecap/problem4.hpp"
#include "stablecap/report.hpp"
#include "stablecap/returns.hpp"
#include "stablecap/utility.hpp"

namespace stablecap {

/// Scenario files are a small TOML subset: `[section]` headers, `key =
/// value` lines, `#` comments. Values are numbers, quoted strings,
/// booleans, or bracketed arrays of numbers. Keys carry explicit units in
/// their names (kappa_usd, b_rate, ...) so dollar amounts and fractions
/// cannot be silently confused.
using ConfigValue = std::variant<double, std::string, bool, std::vector<double>>;
using ConfigMap = std::map<std::string, ConfigValue>;

namespace detail {

inline std::string trim(const std::string& s) {
    std::size_t a = 0, b = s.size();
    while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
    while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
    return s.substr(a, b - a);
}

inline ConfigValue parse_value(const std::string& raw, std::size_t line_no) {
    const std::string v = trim(raw);
    if (v.empty()) throw std::invalid_argument("line " + std::to_string(line_no) + ": empty value");
    if (v == "true") return true;
    if (v == "false") return false;
    if (v.front() == '"') {
        if (v.size() < 2 || v.back() != '"')
            throw std::invalid_argument("line " + std::to_string(line_no) + ": unterminated string");
        return v.substr(1, v.size() - 2);
    }
    if (v.front() == '[') {
        if (v.back() != ']')
            throw std::invalid_argument("line " + std::to_string(line_no) + ": unterminated array");
        std::vector<double> arr;
        std::stringstream ss(v.substr(1, v.size() - 2));
        std::string item;
        while (std::getline(ss, item, ',')) {
            const std::string t = trim(item);
            if (t.empty()) continue;
            std::size_t pos = 0;
            arr.push_back(std::stod(t, &pos));
            if (pos != t.size())
                throw std::invalid_argument("line " + std::to_string(line_no) +
                                            ": bad array element \"" + t + "\"");
        }
        return arr;
    }
    std::size_t pos = 0;
    double d = 0.0;
    try {
        d = std::stod(v, &pos);
    } catch (const std::exception&) {
        throw std::invalid_argument("line " + std::to_string(line_no) + ": bad value \"" + v + "\"");
    }
    if (pos != v.size())
        throw std::invalid_argument("line " + std::to_string(line_no) + ": bad value \"" + v + "\"");
    return d;
}

} // namespace detail

inline ConfigMap parse_config(std::istream& in) {
    ConfigMap out;
    std::string line, section;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = detail::trim(line);
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']')
                throw std::invalid_argument("line " + std::to_string(line_no) + ": bad section");
            section = detail::trim(line.substr(1, line.size() - 2));
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw std::invalid_argument("line " + std::to_string(line_no) + ": expected key = value");
        const std::string key = detail::trim(line.substr(0, eq));
        if (key.empty())
            throw std::invalid_argument("line " + std::to_string(line_no) + ": empty key");
        const std::string full = section.empty() ? key : section + "." + key;
        out[full] = detail::parse_value(line.substr(eq + 1), line_no);
    }
    return out;
}

inline ConfigMap parse_config_string(const std::string& text) {
    std::istringstream ss(text);
    return parse_config(ss);
}

/// A fully resolved scenario: model parameters, return distribution,
/// holder preferences, solver options and the miner-game knobs.
struct ScenarioFile {
    ScenarioParams params;
    ReturnModel returns;
    UtilityFunction utility;
    SolverConfig solver;
    P4Params p4;
    std::size_t p4_rounds = 50;
    std::string output_path;
    std::string price_model = "linear-pressure";
};

namespace detail {

class ConfigReader {
  public:
    ConfigReader(const ConfigMap& map, ValidationReport& rep) : map_(map), rep_(rep) {}

    double number(const std::string& key, double fallback) {
        const auto it = map_.find(key);
        if (it == map_.end()) return fallback;
        seen_.insert(it->first);
        if (const double* d = std::get_if<double>(&it->second)) return *d;
        rep_.errors.push_back(key + " must be a number");
        return fallback;
    }

    bool boolean(const std::string& key, bool fallback) {
        const auto it = map_.find(key);
        if (it == map_.end()) return fallback;
        seen_.insert(it->first);
        if (const bool* b = std::get_if<bool>(&it->second)) return *b;
        rep_.errors.push_back(key + " must be true or false");
        return fallback;
    }

    std::string text(const std::string& key, std::string fallback) {
        const auto it = map_.find(key);
        if (it == map_.end()) return fallback;
        seen_.insert(it->first);
        if (const std::string* s = std::get_if<std::string>(&it->second)) return *s;
        rep_.errors.push_back(key + " must be a string");
        return fallback;
    }

    std::vector<double> array(const std::string& key) {
        const auto it = map_.find(key);
        if (it == map_.end()) return {};
        seen_.insert(it->first);
        if (const auto* a = std::get_if<std::vector<double>>(&it->second)) return *a;
        rep_.errors.push_back(key + " must be an array");
        return {};
    }

    void check_unknown() {
        for (const auto& [key, _] : map_) {
            if (key.rfind("sweep.", 0) == 0) continue;
            if (!seen_.count(key)) rep_.errors.push_back("unknown key \"" + key + "\"");
        }
    }

  private:
    const ConfigMap& map_;
    ValidationReport& rep_;
    std::set<std::string> seen_;
};

} // namespace detail

/// Builds a ScenarioFile from parsed keys. All violations (unknown keys,
/// type errors, invariant breaches) are accumulated into `rep`.
inline ScenarioFile load_scenario(const ConfigMap& map, ValidationReport& rep) {
    detail::ConfigReader r(map, rep);
    ScenarioFile s;

    auto& p = s.params;
    p.beta = r.number("model.beta", p.beta);
    p.kappa_usd = r.number("model.kappa_usd", p.kappa_usd);
    p.b_rate = r.number("model.b_rate", p.b_rate);
    p.u_vault_usd = r.number("model.u_vault_usd", p.u_vault_usd);
    p.u_holder_usd = r.number("model.u_holder_usd", p.u_holder_usd);
    p.zeta = r.number("model.zeta", p.zeta);
    p.gamma = r.number("model.gamma", p.gamma);
    p.alpha_usd = r.number("model.alpha_usd", p.alpha_usd);
    p.epsilon = r.number("model.epsilon", p.epsilon);
    p.n_bar_usd = r.number("model.n_bar_usd", p.n_bar_usd);
    p.x_bar_usd = r.number("model.x_bar_usd", p.x_bar_usd);
    p.y_bar_usd = r.number("model.y_bar_usd", p.y_bar_usd);
    p.r_discount = r.number("model.r_discount", p.r_discount);
    p.c_usd = r.number("model.c_usd", p.c_usd);
    p.delta_cost = r.number("model.delta_cost", p.delta_cost);
    p.r_free_rate = r.number("model.r_free_rate", p.r_free_rate);

    const std::string rk = r.text("returns.kind", "deterministic");
    if (rk == "deterministic") {
        s.returns = ReturnModel::deterministic(r.number("returns.value", 0.0));
    } else if (rk == "two-point") {
        s.returns = ReturnModel::two_point(r.array("returns.values"), r.array("returns.probabilities"));
    } else if (rk == "lognormal") {
        s.returns = ReturnModel::lognormal(r.number("returns.log_mean", 0.0),
                                           r.number("returns.log_sd", 0.1));
    } else {
        rep.errors.push_back("returns.kind must be deterministic, two-point or lognormal");
    }

    const std::string uk = r.text("utility.kind", "risk-neutral");
    if (uk == "risk-neutral") {
        s.utility = UtilityFunction::risk_neutral();
    } else if (uk == "cara") {
        s.utility = UtilityFunction::cara(r.number("utility.rho", 1.0));
    } else if (uk == "mean-variance") {
        s.utility = UtilityFunction::mean_variance(r.number("utility.rho", 1.0));
    } else if (uk == "hara") {
        s.utility = UtilityFunction::hara(r.number("utility.a", 1.0), r.number("utility.b", 1.0),
                                          r.number("utility.gamma", 0.5));
    } else {
        rep.errors.push_back("utility.kind must be risk-neutral, cara, mean-variance or hara");
    }

    auto& c = s.solver;
    c.delta_grid_step = r.number("solver.delta_grid_step", c.delta_grid_step);
    c.f_grid_points = static_cast<std::size_t>(r.number("solver.f_grid_points",
                                                        static_cast<double>(c.f_grid_points)));
    c.n_grid_points = static_cast<std::size_t>(r.number("solver.n_grid_points",
                                                        static_cast<double>(c.n_grid_points)));
    c.portfolio_grid_points = static_cast<std::size_t>(r.number(
        "solver.portfolio_grid_points", static_cast<double>(c.portfolio_grid_points)));
    c.bribe_grid_points = static_cast<std::size_t>(r.number(
        "solver.bribe_grid_points", static_cast<double>(c.bribe_grid_points)));
    c.sample_count = static_cast<std::size_t>(r.number("solver.sample_count",
                                                       static_cast<double>(c.sample_count)));
    c.seed = static_cast<std::uint64_t>(r.number("solver.seed", static_cast<double>(c.seed)));
    c.concurrent_moves = r.boolean("solver.concurrent_moves", c.concurrent_moves);
    c.damping = r.number("solver.damping", c.damping);
    c.max_iterations = static_cast<std::size_t>(r.number("solver.max_iterations",
                                                         static_cast<double>(c.max_iterations)));
    c.pressure = r.number("solver.pressure", c.pressure);
    c.b_max = r.number("solver.b_max", c.b_max);
    c.threads = static_cast<unsigned>(r.number("solver.threads", c.threads));

    s.price_model = r.text("solver.price_model", s.price_model);
    if (s.price_model != "linear-pressure")
        rep.errors.push_back("unknown price model \"" + s.price_model + "\"");

    auto& q = s.p4;
    q.b_rate = r.number("p4.b_rate", q.b_rate);
    q.c_usd = r.number("p4.c_usd", q.c_usd);
    q.u_outside_usd = r.number("p4.u_outside_usd", q.u_outside_usd);
    q.delta_cost = r.number("p4.delta_cost", q.delta_cost);
    q.lambda_demand = r.number("p4.lambda_demand", q.lambda_demand);
    q.lambda_issuance = r.number("p4.lambda_issuance", q.lambda_issuance);
    q.spend_fraction = r.number("p4.spend_fraction", q.spend_fraction);
    q.rho_confidence = r.number("p4.rho_confidence", q.rho_confidence);
    q.income_usd = r.number("p4.income_usd", q.income_usd);
    q.belief_drift = r.number("p4.belief_drift", q.belief_drift);
    q.y0_stbl = r.number("p4.y0_stbl", q.y0_stbl);
    q.y0_exo = r.number("p4.y0_exo", q.y0_exo);
    q.f_initial = r.number("p4.f_initial", q.f_initial);
    q.r_grid_points = static_cast<std::size_t>(r.number("p4.r_grid_points",
                                                        static_cast<double>(q.r_grid_points)));
    q.y_grid_points = static_cast<std::size_t>(r.number("p4.y_grid_points",
                                                        static_cast<double>(q.y_grid_points)));
    s.p4_rounds = static_cast<std::size_t>(r.number("p4.rounds",
                                                    static_cast<double>(s.p4_rounds)));

    s.output_path = r.text("output.path", "");

    r.check_unknown();
    const auto vp = validate(s.params);
    rep.errors.insert(rep.errors.end(), vp.errors.begin(), vp.errors.end());
    const auto vr = validate(s.returns);
    rep.errors.insert(rep.errors.end(), vr.errors.begin(), vr.errors.end());
    const auto vu = validate(s.utility);
    rep.errors.insert(rep.errors.end(), vu.errors.begin(), vu.errors.end());
    return s;
}

inline ScenarioFile load_scenario_file(const std::string& path, ValidationReport& rep) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);
    const auto map = parse_config(in);
    return load_scenario(map, rep);
}

/// Sweep expansion: every `[sweep] key = [values...]` entry ranges over a
/// known scenario key. Cells are produced in lexicographic order of the
/// sweep key names, innermost last, each cell a full ConfigMap with the
/// swept scalars substituted.
inline std::vector<ConfigMap> expand_sweep(const ConfigMap& map) {
    std::vector<std::pair<std::string, std::vector<double>>> axes;
    for (const auto& [key, value] : map) {
        if (key.rfind("sweep.", 0) != 0) continue;
        const auto* arr = std::get_if<std::vector<double>>(&value);
        if (arr == nullptr || arr->empty())
            throw std::invalid_argument("sweep key \"" + key + "\" must be a non-empty array");
        axes.emplace_back(key.substr(6), *arr);
    }
    ConfigMap base;
    for (const auto& [key, value] : map)
        if (key.rfind("sweep.", 0) != 0) base[key] = value;
    if (axes.empty()) return {base};

    std::vector<ConfigMap> cells;
    std::vector<std::size_t> idx(axes.size(), 0);
    for (;;) {
        ConfigMap cell = base;
        for (std::size_t a = 0; a < axes.size(); ++a) cell[axes[a].first] = axes[a].second[idx[a]];
        cells.push_back(std::move(cell));
        std::size_t a = axes.size();
        while (a-- > 0) {
            if (++idx[a] < axes[a].second.size()) break;
            idx[a] = 0;
            if (a == 0) return cells;
        }
    }
}

namespace detail {

inline std::string format_number(double v) {
    std::ostringstream ss;
    ss.precision(17);
    ss << v;
    return ss.str();
}

} // namespace detail

/// Serializes the scenario back to the config format; parsing the result
/// reproduces the scenario exactly (round-trip identity).
inline std::string to_config_string(const ScenarioFile& s) {
    using detail::format_number;
    std::ostringstream o;
    o << "[model]\n";
    o << "beta = " << format_number(s.params.beta) << "\n";
    o << "kappa_usd = " << format_number(s.params.kappa_usd) << "\n";
    o << "b_rate = " << format_number(s.params.b_rate) << "\n";
    o << "u_vault_usd = " << format_number(s.params.u_vault_usd) << "\n";
    o << "u_holder_usd = " << format_number(s.params.u_holder_usd) << "\n";
    o << "zeta = " << format_number(s.params.zeta) << "\n";
    o << "gamma = " << format_number(s.params.gamma) << "\n";
    o << "alpha_usd = " << format_number(s.params.alpha_usd) << "\n";
    o << "epsilon = " << format_number(s.params.epsilon) << "\n";
    o << "n_bar_usd = " << format_number(s.params.n_bar_usd) << "\n";
    o << "x_bar_usd = " << format_number(s.params.x_bar_usd) << "\n";
    o << "y_bar_usd = " << format_number(s.params.y_bar_usd) << "\n";
    o << "r_discount = " << format_number(s.params.r_discount) << "\n";
    o << "c_usd = " << format_number(s.params.c_usd) << "\n";
    o << "delta_cost = " << format_number(s.params.delta_cost) << "\n";
    o << "r_free_rate = " << format_number(s.params.r_free_rate) << "\n";
    o << "\n[returns]\n";
    switch (s.returns.kind) {
    case ReturnKind::deterministic:
        o << "kind = \"deterministic\"\n";
        o << "value = " << format_number(s.returns.value) << "\n";
        break;
    case ReturnKind::two_point: {
        o << "kind = \"two-point\"\n";
        o << "values = [";
        for (std::size_t i = 0; i < s.returns.values.size(); ++i)
            o << (i ? ", " : "") << format_number(s.returns.values[i]);
        o << "]\nprobabilities = [";
        for (std::size_t i = 0; i < s.returns.probabilities.size(); ++i)
            o << (i ? ", " : "") << format_number(s.returns.probabilities[i]);
        o << "]\n";
        break;
    }
    case ReturnKind::lognormal:
        o << "kind = \"lognormal\"\n";
        o << "log_mean = " << format_number(s.returns.log_mean) << "\n";
        o << "log_sd = " << format_number(s.returns.log_sd) << "\n";
        break;
    }
    o << "\n[utility]\n";
    switch (s.utility.kind) {
    case UtilityKind::risk_neutral: o << "kind = \"risk-neutral\"\n"; break;
    case UtilityKind::cara:
        o << "kind = \"cara\"\nrho = " << format_number(s.utility.rho) << "\n";
        break;
    case UtilityKind::mean_variance:
        o << "kind = \"mean-variance\"\nrho = " << format_number(s.utility.rho) << "\n";
        break;
    case UtilityKind::hara:
        o << "kind = \"hara\"\na = " << format_number(s.utility.a)
          << "\nb = " << format_number(s.utility.b_h)
          << "\ngamma = " << format_number(s.utility.gamma_u) << "\n";
        break;
    }
    o << "\n[solver]\n";
    o << "delta_grid_step = " << format_number(s.solver.delta_grid_step) << "\n";
    o << "f_grid_points = " << s.solver.f_grid_points << "\n";
    o << "n_grid_points = " << s.solver.n_grid_points << "\n";
    o << "portfolio_grid_points = " << s.solver.portfolio_grid_points << "\n";
    o << "bribe_grid_points = " << s.solver.bribe_grid_points << "\n";
    o << "sample_count = " << s.solver.sample_count << "\n";
    o << "seed = " << s.solver.seed << "\n";
    o << "concurrent_moves = " << (s.solver.concurrent_moves ? "true" : "false") << "\n";
    o << "damping = " << format_number(s.solver.damping) << "\n";
    o << "max_iterations = " << s.solver.max_iterations << "\n";
    o << "pressure = " << format_number(s.solver.pressure) << "\n";
    o << "b_max = " << format_number(s.solver.b_max) << "\n";
    o << "threads = " << s.solver.threads << "\n";
    o << "price_model = \"" << s.price_model << "\"\n";
    o << "\n[p4]\n";
    o << "rounds = " << s.p4_rounds << "\n";
    o << "b_rate = " << format_number(s.p4.b_rate) << "\n";
    o << "c_usd = " << format_number(s.p4.c_usd) << "\n";
    o << "u_outside_usd = " << format_number(s.p4.u_outside_usd) << "\n";
    o << "delta_cost = " << format_number(s.p4.delta_cost) << "\n";
    o << "lambda_demand = " << format_number(s.p4.lambda_demand) << "\n";
    o << "lambda_issuance = " << format_number(s.p4.lambda_issuance) << "\n";
    o << "spend_fraction = " << format_number(s.p4.spend_fraction) << "\n";
    o << "rho_confidence = " << format_number(s.p4.rho_confidence) << "\n";
    o << "income_usd = " << format_number(s.p4.income_usd) << "\n";
    o << "belief_drift = " << format_number(s.p4.belief_drift) << "\n";
    o << "y0_stbl = " << format_number(s.p4.y0_stbl) << "\n";
    o << "y0_exo = " << format_number(s.p4.y0_exo) << "\n";
    o << "f_initial = " << format_number(s.p4.f_initial) << "\n";
    o << "r_grid_points = " << s.p4.r_grid_points << "\n";
    o << "y_grid_points = " << s.p4.y_grid_points << "\n";
    if (!s.output_path.empty()) o << "\n[output]\npath = \"" << s.output_path << "\"\n";
    return o.str();
}

} // namespace stablecap
