#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <sstream>

#include "stablecap/params.hpp"
#include "stablecap/returns.hpp"
#include "stablecap/scenario.hpp"
#include "stablecap/utility.hpp"

using namespace stablecap;

TEST_CASE("validate accepts the Maker-like baseline") {
    ScenarioParams p;
    p.beta = 0.66;
    p.zeta = 0.1;
    p.gamma = 1.0;
    CHECK(validate(p).ok());
}

TEST_CASE("validate reports every violated invariant") {
    ScenarioParams p;
    p.beta = 0.0;
    p.kappa_usd = -1.0;
    p.zeta = 1.5;
    const auto rep = validate(p);
    REQUIRE_FALSE(rep.ok());
    CHECK(rep.errors.size() == 3);
    CHECK(rep.errors[0] == "beta must be > 0");
}

TEST_CASE("gamma may exceed 1") {
    ScenarioParams p;
    p.gamma = 1.5;
    CHECK(validate(p).ok());
}

TEST_CASE("return model validation") {
    CHECK(validate(ReturnModel::deterministic(0.05)).ok());
    const auto bad = validate(ReturnModel::two_point({-0.5, 0.5}, {0.6, 0.5}));
    REQUIRE_FALSE(bad.ok());
    CHECK(bad.errors[0] == "probabilities must sum to 1");
    CHECK_FALSE(validate(ReturnModel::deterministic(-1.0)).ok());
}

TEST_CASE("draw_returns: deterministic model repeats the value") {
    const auto s = draw_returns(ReturnModel::deterministic(0.05), 3, 42);
    REQUIRE(s.count() == 3);
    for (double r : s.returns) CHECK(r == 0.05);
}

TEST_CASE("draw_returns: same seed reproduces the identical sample set") {
    const auto m = ReturnModel::two_point({-0.5, 0.5}, {0.5, 0.5});
    const auto a = draw_returns(m, 1000, 7);
    const auto b = draw_returns(m, 1000, 7);
    CHECK(a.returns == b.returns);
    const auto c = draw_returns(m, 1000, 8);
    CHECK(a.returns != c.returns);
}

TEST_CASE("draw_returns: two-point sample mean within 3 standard errors") {
    const auto m = ReturnModel::two_point({-0.5, 0.5}, {0.5, 0.5});
    const std::size_t n = 100000;
    const auto s = draw_returns(m, n, 1234);
    double mean = 0.0;
    for (double r : s.returns) mean += r;
    mean /= static_cast<double>(n);
    const double se = 0.5 / std::sqrt(static_cast<double>(n));
    CHECK(std::abs(mean - 0.0) < 3.0 * se);
}

TEST_CASE("draw_returns rejects a zero count") {
    CHECK_THROWS_AS(draw_returns(ReturnModel::deterministic(0.0), 0, 1), std::invalid_argument);
}

TEST_CASE("lognormal draws keep 1+R positive and match the analytic mean") {
    const auto m = ReturnModel::lognormal(0.01, 0.2);
    const auto s = draw_returns(m, 50000, 99);
    double mean = 0.0;
    for (double r : s.returns) {
        REQUIRE(1.0 + r > 0.0);
        mean += r;
    }
    mean /= static_cast<double>(s.count());
    CHECK(mean == doctest::Approx(m.mean()).epsilon(0.02));
}

TEST_CASE("expected_value: constant payoff has zero standard error") {
    const auto s = draw_returns(ReturnModel::two_point({-0.5, 0.5}, {0.5, 0.5}), 100, 5);
    const auto est = expected_value([](double) { return 7.0; }, s);
    CHECK(est.value == 7.0);
    CHECK(est.std_error == 0.0);
}

TEST_CASE("expected_value: exact enumeration of a two-point model") {
    const auto s = enumerate_returns(ReturnModel::two_point({-0.5, 0.5}, {0.5, 0.5}));
    REQUIRE(s.exact);
    const auto est = expected_value([](double r) { return 1.0 + r; }, s);
    CHECK(est.value == 1.0);
    CHECK(est.std_error == 0.0);
}

TEST_CASE("expected_value: deterministic return") {
    const auto s = enumerate_returns(ReturnModel::deterministic(0.05));
    const auto est = expected_value([](double r) { return r; }, s);
    CHECK(est.value == 0.05);
    CHECK(est.std_error == 0.0);
}

TEST_CASE("enumeration agrees with Monte Carlo within 3 standard errors") {
    const auto m = ReturnModel::two_point({-0.3, 0.4}, {0.25, 0.75});
    const auto exact = enumerate_returns(m);
    const auto mc = draw_returns(m, 20000, 31);
    const auto payoff = [](double r) { return (1.0 + r) * (1.0 + r); };
    const auto te = expected_value(payoff, exact);
    const auto me = expected_value(payoff, mc);
    REQUIRE(me.std_error > 0.0);
    CHECK(std::abs(te.value - me.value) < 3.0 * me.std_error);
}

TEST_CASE("expected_value rejects non-finite payoffs") {
    const auto s = enumerate_returns(ReturnModel::deterministic(0.0));
    CHECK_THROWS_AS(expected_value([](double) { return std::nan(""); }, s), std::domain_error);
}

TEST_CASE("expected_utility: risk-neutral constant") {
    const auto s = enumerate_returns(ReturnModel::deterministic(0.0));
    CHECK(expected_utility(UtilityFunction::risk_neutral(), [](double) { return 1.0; }, s) == 1.0);
}

TEST_CASE("expected_utility: mean-variance uses the sample moments") {
    // payoffs {0.8, 1.2} equally likely: mean 1, variance 0.04; rho = 2
    // gives 1 - 2*0.04/2 = 0.96
    const auto s = enumerate_returns(ReturnModel::two_point({-0.5, 0.5}, {0.5, 0.5}));
    const auto u = expected_utility(UtilityFunction::mean_variance(2.0),
                                    [](double r) { return r < 0.0 ? 0.8 : 1.2; }, s);
    CHECK(u == doctest::Approx(0.96).epsilon(1e-12));
}

TEST_CASE("expected_utility: CARA of a zero payoff is -1") {
    const auto s = enumerate_returns(ReturnModel::deterministic(0.0));
    CHECK(expected_utility(UtilityFunction::cara(1.0), [](double) { return 0.0; }, s) == -1.0);
}

TEST_CASE("expected_utility: risk-neutral is linear in payoff scaling") {
    const auto s = draw_returns(ReturnModel::lognormal(0.0, 0.3), 500, 11);
    const auto u = UtilityFunction::risk_neutral();
    const double base = expected_utility(u, [](double r) { return 1.0 + r; }, s);
    for (double k : {0.5, 2.0, 7.25}) {
        const double scaled = expected_utility(u, [k](double r) { return k * (1.0 + r); }, s);
        CHECK(scaled == doctest::Approx(k * base).epsilon(1e-12));
    }
}

TEST_CASE("mean-variance utility has no pointwise value") {
    const auto u = UtilityFunction::mean_variance(1.0);
    CHECK_THROWS_AS(u(1.0), std::domain_error);
}

TEST_CASE("utility validation catches the HARA domain violation at zero wealth") {
    auto u = UtilityFunction::hara(1.0, 0.0, 0.5);
    const auto rep = validate(u);
    REQUIRE_FALSE(rep.ok());
    CHECK(rep.errors[0] == "HARA domain violation at w = 0");
}

TEST_CASE("scenario config parses sections, types and comments") {
    const std::string text = R"(
# baseline scenario
[model]
beta = 0.66
kappa_usd = 10.0

[returns]
kind = "two-point"
values = [-0.5, 0.5]
probabilities = [0.5, 0.5]

[solver]
seed = 42
concurrent_moves = false
)";
    const auto map = parse_config_string(text);
    ValidationReport rep;
    const auto s = load_scenario(map, rep);
    CHECK(rep.ok());
    CHECK(s.params.beta == 0.66);
    CHECK(s.returns.kind == ReturnKind::two_point);
    CHECK(s.solver.seed == 42);
}

TEST_CASE("scenario config rejects unknown keys") {
    const auto map = parse_config_string("[model]\nbeta = 0.5\nbeta_typo = 1\n");
    ValidationReport rep;
    load_scenario(map, rep);
    REQUIRE_FALSE(rep.ok());
    CHECK(rep.errors[0] == "unknown key \"model.beta_typo\"");
}

TEST_CASE("scenario config surfaces model invariant violations") {
    const auto map = parse_config_string("[model]\nbeta = 0\nzeta = 2\n");
    ValidationReport rep;
    load_scenario(map, rep);
    REQUIRE_FALSE(rep.ok());
    CHECK(rep.errors.size() == 2);
}

TEST_CASE("scenario round-trips through the config format") {
    ValidationReport rep;
    auto s = load_scenario(parse_config_string("[model]\nbeta = 0.375\nkappa_usd = 12.5\n"
                                               "[returns]\nkind = \"two-point\"\n"
                                               "values = [-0.125, 0.25]\n"
                                               "probabilities = [0.5, 0.5]\n"
                                               "[utility]\nkind = \"cara\"\nrho = 0.75\n"
                                               "[solver]\nseed = 9\nsample_count = 5000\n"),
                           rep);
    REQUIRE(rep.ok());
    ValidationReport rep2;
    const auto s2 = load_scenario(parse_config_string(to_config_string(s)), rep2);
    REQUIRE(rep2.ok());
    CHECK(s2.params.beta == s.params.beta);
    CHECK(s2.params.kappa_usd == s.params.kappa_usd);
    CHECK(s2.returns.values == s.returns.values);
    CHECK(s2.returns.probabilities == s.returns.probabilities);
    CHECK(s2.utility.kind == s.utility.kind);
    CHECK(s2.utility.rho == s.utility.rho);
    CHECK(s2.solver.seed == s.solver.seed);
    CHECK(s2.solver.sample_count == s.solver.sample_count);
    CHECK(to_config_string(s2) == to_config_string(s));
}

TEST_CASE("sweep expansion is lexicographic in key names, innermost last") {
    const auto map = parse_config_string(
        "[model]\nbeta = 0.5\n"
        "[sweep]\nmodel.kappa_usd = [1, 2]\nmodel.b_rate = [0.1, 0.2, 0.3]\n");
    const auto cells = expand_sweep(map);
    REQUIRE(cells.size() == 6);
    // axes sorted: model.b_rate before model.kappa_usd; kappa varies fastest
    CHECK(std::get<double>(cells[0].at("model.b_rate")) == 0.1);
    CHECK(std::get<double>(cells[0].at("model.kappa_usd")) == 1.0);
    CHECK(std::get<double>(cells[1].at("model.kappa_usd")) == 2.0);
    CHECK(std::get<double>(cells[2].at("model.b_rate")) == 0.2);
    CHECK(std::get<double>(cells[5].at("model.b_rate")) == 0.3);
    CHECK(std::get<double>(cells[5].at("model.kappa_usd")) == 2.0);
    for (const auto& cell : cells) {
        ValidationReport rep;
        load_scenario(cell, rep);
        CHECK(rep.ok());
    }
}

TEST_CASE("a config without a sweep block expands to a single cell") {
    const auto map = parse_config_string("[model]\nbeta = 0.5\n");
    const auto cells = expand_sweep(map);
    REQUIRE(cells.size() == 1);
    ValidationReport rep;
    const auto s = load_scenario(cells[0], rep);
    CHECK(rep.ok());
    CHECK(s.params.beta == 0.5);
}
