#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>

#include "stablecap/cdp.hpp"

using namespace stablecap;

namespace {

const char* kHeader = "timestamp,cdp_id,address,action,collateral_delta,debt_delta,eth_usd\n";

std::string write_temp(const std::string& name, const std::string& content) {
    const auto path = (std::filesystem::temp_directory_path() / name).string();
    std::ofstream out(path);
    out << content;
    return path;
}

} // namespace

TEST_CASE("load_cdp_csv parses and sorts a small fixture") {
    const auto path = write_temp("cdp_small.csv",
                                 std::string(kHeader) +
                                     "200,c1,a1,draw,0,100,150\n"
                                     "100,c1,a1,open,1.0,0,150\n"
                                     "150,c1,a1,lock,0.5,0,150\n");
    const auto recs = cdp::load_cdp_csv(path);
    REQUIRE(recs.size() == 3);
    CHECK(recs[0].timestamp == 100);
    CHECK(recs[0].action == cdp::Action::open);
    CHECK(recs[1].timestamp == 150);
    CHECK(recs[2].action == cdp::Action::draw);
    CHECK(recs[2].debt_delta == 100.0);
}

TEST_CASE("load_cdp_csv reports the line number of an unknown action") {
    const auto path = write_temp("cdp_bad.csv", std::string(kHeader) +
                                                    "100,c1,a1,open,1,0,150\n"
                                                    "200,c1,a1,frob,1,0,150\n");
    CHECK_THROWS_WITH_AS(cdp::load_cdp_csv(path), doctest::Contains(":3:"),
                         std::invalid_argument);
}

TEST_CASE("load_cdp_csv: empty file with header yields an empty list") {
    const auto path = write_temp("cdp_empty.csv", kHeader);
    CHECK(cdp::load_cdp_csv(path).empty());
}

TEST_CASE("load_cdp_csv rejects a wrong header and a missing file") {
    const auto path = write_temp("cdp_hdr.csv", "time,cdp,addr\n1,2,3\n");
    CHECK_THROWS_AS(cdp::load_cdp_csv(path), std::invalid_argument);
    CHECK_THROWS_AS(cdp::load_cdp_csv("/nonexistent/actions.csv"), std::runtime_error);
}

TEST_CASE("clean_filter drops CDPs at or below the peak-collateral threshold") {
    std::vector<cdp::CdpActionRecord> recs;
    cdp::CdpActionRecord a;
    a.timestamp = 100;
    a.cdp_id = "small";
    a.address = "a1";
    a.action = cdp::Action::open;
    a.collateral_delta = 0.2; // 40 USD at 200
    a.eth_usd = 200.0;
    recs.push_back(a);
    a.cdp_id = "big";
    a.collateral_delta = 1.0; // 200 USD
    recs.push_back(a);

    const auto kept = cdp::clean_filter(recs, 50.0, 1'000'000, false);
    REQUIRE(kept.size() == 1);
    CHECK(kept[0].cdp_id == "big");

    CHECK(cdp::clean_filter(recs, 0.0, 1'000'000, false).size() == 2);
}

TEST_CASE("clean_filter drops records after the cutoff") {
    std::vector<cdp::CdpActionRecord> recs;
    cdp::CdpActionRecord a;
    a.cdp_id = "c";
    a.action = cdp::Action::open;
    a.collateral_delta = 1.0;
    a.eth_usd = 150.0;
    a.timestamp = 100;
    recs.push_back(a);
    a.timestamp = 5000;
    a.action = cdp::Action::draw;
    recs.push_back(a);
    const auto kept = cdp::clean_filter(recs, 0.0, 4000, false);
    REQUIRE(kept.size() == 1);
    CHECK(kept[0].timestamp == 100);
}

TEST_CASE("clean_filter removes contract addresses only when asked") {
    std::vector<cdp::CdpActionRecord> recs;
    cdp::CdpActionRecord a;
    a.cdp_id = "c";
    a.action = cdp::Action::open;
    a.collateral_delta = 1.0;
    a.eth_usd = 150.0;
    a.is_contract = true;
    recs.push_back(a);
    CHECK(cdp::clean_filter(recs, 0.0, 100, true).empty());
    CHECK(cdp::clean_filter(recs, 0.0, 100, false).size() == 1);
}

TEST_CASE("filtering monotonicity: raising the threshold never grows the survivor set") {
    std::vector<cdp::CdpActionRecord> recs;
    for (int i = 0; i < 20; ++i) {
        cdp::CdpActionRecord a;
        a.timestamp = 100 + i;
        a.cdp_id = "c" + std::to_string(i);
        a.action = cdp::Action::open;
        a.collateral_delta = 0.1 * (i + 1);
        a.eth_usd = 100.0;
        recs.push_back(a);
    }
    std::size_t prev = recs.size();
    for (double thr : {0.0, 30.0, 60.0, 90.0, 500.0}) {
        const auto kept = cdp::clean_filter(recs, thr, 1'000'000, false).size();
        CHECK(kept <= prev);
        prev = kept;
    }
}

TEST_CASE("position_series reproduces the 150/100 worked example") {
    // lock 1 ETH at 150 USD, draw 100 USD reinvested: holdings 250 USD of
    // ETH, debt 100, wealth 150, alpha = 250/150
    std::vector<cdp::CdpActionRecord> recs(2);
    recs[0].cdp_id = recs[1].cdp_id = "c1";
    recs[0].address = recs[1].address = "a1";
    recs[0].timestamp = 100;
    recs[0].action = cdp::Action::lock;
    recs[0].collateral_delta = 1.0;
    recs[0].eth_usd = 150.0;
    recs[1].timestamp = 200;
    recs[1].action = cdp::Action::draw;
    recs[1].debt_delta = 100.0;
    recs[1].eth_usd = 150.0;

    const auto series = cdp::position_series(recs);
    REQUIRE(series.snapshots.size() == 2);
    const auto& s = series.snapshots[1];
    CHECK(s.wealth_usd == doctest::Approx(150.0).epsilon(1e-12));
    CHECK(s.alpha == doctest::Approx(1.0 + 100.0 / 150.0).epsilon(1e-12));
    CHECK(s.debt_usd == 100.0);
}

TEST_CASE("position_series without reinvestment holds drawn coins as cash at par") {
    std::vector<cdp::CdpActionRecord> recs(2);
    recs[0].cdp_id = recs[1].cdp_id = "c1";
    recs[0].timestamp = 1;
    recs[0].action = cdp::Action::lock;
    recs[0].collateral_delta = 1.0;
    recs[0].eth_usd = 150.0;
    recs[1].timestamp = 2;
    recs[1].action = cdp::Action::draw;
    recs[1].debt_delta = 100.0;
    recs[1].eth_usd = 150.0;
    const auto series = cdp::position_series(recs, /*assume_reinvest=*/false);
    const auto& s = series.snapshots[1];
    CHECK(s.alpha == 1.0); // no extra collateral exposure
    CHECK(s.wealth_usd == doctest::Approx(150.0).epsilon(1e-12)); // 150 + 100 cash - 100 debt
    CHECK(s.purchased_eth == 0.0);
}

TEST_CASE("position_series without draws keeps alpha at 1") {
    std::vector<cdp::CdpActionRecord> recs(1);
    recs[0].cdp_id = "c1";
    recs[0].action = cdp::Action::lock;
    recs[0].collateral_delta = 2.0;
    recs[0].eth_usd = 120.0;
    const auto series = cdp::position_series(recs);
    CHECK(series.snapshots[0].alpha == 1.0);
    CHECK(series.snapshots[0].wealth_usd == 240.0);
}

TEST_CASE("position_series: a full wipe unwinds leverage back to alpha = 1") {
    std::vector<cdp::CdpActionRecord> recs(3);
    for (auto& r : recs) {
        r.cdp_id = "c1";
        r.eth_usd = 150.0;
    }
    recs[0].timestamp = 1;
    recs[0].action = cdp::Action::lock;
    recs[0].collateral_delta = 1.0;
    recs[1].timestamp = 2;
    recs[1].action = cdp::Action::draw;
    recs[1].debt_delta = 100.0;
    recs[2].timestamp = 3;
    recs[2].action = cdp::Action::wipe;
    recs[2].debt_delta = 100.0;
    const auto series = cdp::position_series(recs);
    CHECK(series.snapshots[1].alpha > 1.0);
    CHECK(series.snapshots[2].alpha == 1.0);
    CHECK(series.snapshots[2].debt_usd == 0.0);
}

TEST_CASE("position_series rejects a draw before any collateral exists") {
    std::vector<cdp::CdpActionRecord> recs(1);
    recs[0].cdp_id = "c1";
    recs[0].action = cdp::Action::draw;
    recs[0].debt_delta = 50.0;
    recs[0].eth_usd = 150.0;
    CHECK_THROWS_AS(cdp::position_series(recs), std::invalid_argument);
}

TEST_CASE("position_series rejects negative running collateral") {
    std::vector<cdp::CdpActionRecord> recs(2);
    recs[0].cdp_id = recs[1].cdp_id = "c1";
    recs[0].action = cdp::Action::lock;
    recs[0].collateral_delta = 1.0;
    recs[0].eth_usd = 100.0;
    recs[1].action = cdp::Action::free_;
    recs[1].collateral_delta = 2.0;
    recs[1].eth_usd = 100.0;
    CHECK_THROWS_AS(cdp::position_series(recs), std::invalid_argument);
}

TEST_CASE("rolling_moments: constant prices produce zero moments") {
    const auto m = cdp::rolling_moments({0, 1, 2, 3}, {100.0, 100.0, 100.0, 100.0});
    REQUIRE(m.mean.size() == 3);
    for (double v : m.mean) CHECK(v == 0.0);
    for (double v : m.variance) CHECK(v == 0.0);
}

TEST_CASE("rolling_moments hand example [100, 110, 99]") {
    const auto m = cdp::rolling_moments({0, 1, 2}, {100.0, 110.0, 99.0});
    REQUIRE(m.mean.size() == 2);
    CHECK(m.mean[0] == doctest::Approx(0.10).epsilon(1e-12));
    CHECK(m.variance[0] == 0.0);
    CHECK(m.mean[1] == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(m.variance[1] == doctest::Approx(0.02).epsilon(1e-12));
}

TEST_CASE("rolling_moments needs at least two prices") {
    CHECK_THROWS_AS(cdp::rolling_moments({0}, {100.0}), std::invalid_argument);
}

TEST_CASE("rolling_moments agrees exactly with a naive recompute") {
    std::vector<std::int64_t> days;
    std::vector<double> closes;
    double p = 100.0;
    for (int i = 0; i < 40; ++i) {
        days.push_back(i);
        closes.push_back(p);
        p *= 1.0 + 0.01 * ((i * 37 % 11) - 5);
    }
    const auto m = cdp::rolling_moments(days, closes);
    std::vector<double> rets(closes.size() - 1);
    for (std::size_t i = 1; i < closes.size(); ++i) rets[i - 1] = closes[i] / closes[i - 1] - 1.0;
    for (std::size_t t = 0; t < rets.size(); ++t) {
        double sum = 0.0;
        for (std::size_t i = 0; i <= t; ++i) sum += rets[i];
        const double mean = sum / static_cast<double>(t + 1);
        double ss = 0.0;
        for (std::size_t i = 0; i <= t; ++i) ss += (rets[i] - mean) * (rets[i] - mean);
        const double var = t > 0 ? ss / static_cast<double>(t) : 0.0;
        CHECK(m.mean[t] == mean);
        CHECK(m.variance[t] == var);
    }
}

TEST_CASE("load_price_moments parses dates and closes") {
    const auto path = write_temp("prices.csv", "date,close\n2019-01-01,100\n2019-01-02,110\n"
                                               "2019-01-03,99\n");
    const auto m = cdp::load_price_moments(path);
    REQUIRE(m.mean.size() == 2);
    CHECK(m.day[0] == cdp::detail::parse_date_days("2019-01-02"));
    CHECK(m.mean[1] == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("rho_report: per-CDP and per-address means with the active partition") {
    // Two CDPs for address a1 (12 actions total -> active at threshold 10),
    // one for a2 (2 actions -> inactive).
    std::vector<cdp::CdpActionRecord> recs;
    const auto add = [&](const char* cdp_id, const char* addr, std::int64_t ts,
                         cdp::Action action, double col, double debt) {
        cdp::CdpActionRecord r;
        r.cdp_id = cdp_id;
        r.address = addr;
        r.timestamp = ts;
        r.action = action;
        r.collateral_delta = col;
        r.debt_delta = debt;
        r.eth_usd = 100.0;
        recs.push_back(r);
    };
    // day 2 onward so moments exist (moments start at the second price day)
    const std::int64_t day2 = 2 * 86400 + 10;
    add("c1", "a1", day2, cdp::Action::open, 10.0, 0.0);
    for (int i = 0; i < 5; ++i) add("c1", "a1", day2 + 100 + i, cdp::Action::draw, 0.0, 50.0);
    add("c2", "a1", day2, cdp::Action::open, 8.0, 0.0);
    for (int i = 0; i < 5; ++i) add("c2", "a1", day2 + 200 + i, cdp::Action::draw, 0.0, 30.0);
    add("c3", "a2", day2, cdp::Action::open, 5.0, 0.0);
    add("c3", "a2", day2 + 100, cdp::Action::draw, 0.0, 20.0);

    const auto moments = cdp::rolling_moments({0, 1, 2}, {100.0, 104.0, 109.0});
    const auto report = cdp::rho_report(recs, moments, 0.02, 10);
    REQUIRE(report.per_cdp.size() == 3);
    REQUIRE(report.per_address.size() == 2);
    CHECK(report.r_free_daily == doctest::Approx(0.02 / 365.0));

    // every contributing snapshot is a plain method-1 estimate
    for (const auto& row : report.per_cdp) CHECK(row.snapshots_used > 0);

    const auto& a1 = report.per_address[0];
    CHECK(a1.address == "a1");
    CHECK(a1.action_count == 12);
    CHECK(a1.active);
    const auto& a2 = report.per_address[1];
    CHECK(a2.action_count == 2);
    CHECK_FALSE(a2.active);

    // address mean is the unweighted mean of its CDP means
    const double expect = (report.per_cdp[0].rho_mean + report.per_cdp[1].rho_mean) / 2.0;
    CHECK(a1.rho_mean == doctest::Approx(expect).epsilon(1e-15));
}

TEST_CASE("rho_report is deterministic") {
    std::vector<cdp::CdpActionRecord> recs(2);
    recs[0].cdp_id = recs[1].cdp_id = "c1";
    recs[0].address = recs[1].address = "a1";
    recs[0].timestamp = 86400 + 5;
    recs[0].action = cdp::Action::open;
    recs[0].collateral_delta = 10.0;
    recs[0].eth_usd = 100.0;
    recs[1].timestamp = 86400 + 6;
    recs[1].action = cdp::Action::draw;
    recs[1].debt_delta = 100.0;
    recs[1].eth_usd = 100.0;
    const auto moments = cdp::rolling_moments({0, 1}, {100.0, 105.0});
    const auto r1 = cdp::rho_report(recs, moments, 0.02, 10);
    const auto r2 = cdp::rho_report(recs, moments, 0.02, 10);
    REQUIRE(r1.per_cdp.size() == r2.per_cdp.size());
    for (std::size_t i = 0; i < r1.per_cdp.size(); ++i)
        CHECK(r1.per_cdp[i].rho_mean == r2.per_cdp[i].rho_mean);
}

TEST_CASE("rho_report snapshot rows re-estimate exactly from their echoed inputs") {
    std::vector<cdp::CdpActionRecord> recs;
    const auto add = [&](std::int64_t ts, cdp::Action a, double col, double debt) {
        cdp::CdpActionRecord r;
        r.cdp_id = "c1";
        r.address = "a1";
        r.timestamp = ts;
        r.action = a;
        r.collateral_delta = col;
        r.debt_delta = debt;
        r.eth_usd = 100.0;
        recs.push_back(r);
    };
    add(2 * 86400 + 1, cdp::Action::open, 10.0, 0.0);
    add(2 * 86400 + 2, cdp::Action::draw, 0.0, 300.0);
    add(3 * 86400 + 1, cdp::Action::draw, 0.0, 100.0);
    const auto moments = cdp::rolling_moments({0, 1, 2, 3}, {100.0, 104.0, 99.0, 103.0});
    const auto report = cdp::rho_report(recs, moments, 0.02, 10);
    REQUIRE_FALSE(report.snapshots.empty());
    double mean = 0.0;
    for (const auto& s : report.snapshots) {
        const auto est = stablecap::estimate_rho_m1(s.wealth_usd, s.alpha, s.mean_return,
                                                    s.variance, report.r_free_daily);
        CHECK(s.rho == est.rho);
        mean += s.rho;
    }
    mean /= static_cast<double>(report.snapshots.size());
    CHECK(report.per_cdp[0].rho_mean == doctest::Approx(mean).epsilon(1e-15));
}

TEST_CASE("rho_report final-snapshot mode uses only the last state") {
    std::vector<cdp::CdpActionRecord> recs(2);
    recs[0].cdp_id = recs[1].cdp_id = "c1";
    recs[0].address = recs[1].address = "a1";
    recs[0].timestamp = 2 * 86400 + 1;
    recs[0].action = cdp::Action::open;
    recs[0].collateral_delta = 10.0;
    recs[0].eth_usd = 100.0;
    recs[1].timestamp = 2 * 86400 + 2;
    recs[1].action = cdp::Action::draw;
    recs[1].debt_delta = 200.0;
    recs[1].eth_usd = 100.0;
    const auto moments = cdp::rolling_moments({0, 1, 2}, {100.0, 104.0, 99.0});
    const auto all = cdp::rho_report(recs, moments, 0.02, 10);
    const auto last =
        cdp::rho_report(recs, moments, 0.02, 10, cdp::RhoSnapshotMode::final_snapshot);
    CHECK(all.per_cdp[0].snapshots_used == 2);
    CHECK(last.per_cdp[0].snapshots_used == 1);
    CHECK(last.per_cdp[0].rho_mean == last.snapshots.back().rho);
}

TEST_CASE("rho_report skips zero-variance snapshots with a count") {
    std::vector<cdp::CdpActionRecord> recs(1);
    recs[0].cdp_id = "c1";
    recs[0].address = "a1";
    recs[0].timestamp = 86400 + 5; // day 1: first moment day has variance 0
    recs[0].action = cdp::Action::open;
    recs[0].collateral_delta = 10.0;
    recs[0].eth_usd = 100.0;
    const auto moments = cdp::rolling_moments({0, 1}, {100.0, 105.0});
    REQUIRE(moments.variance[0] == 0.0);
    const auto report = cdp::rho_report(recs, moments, 0.02, 10);
    CHECK(report.per_cdp[0].snapshots_used == 0);
    CHECK(report.per_cdp[0].snapshots_skipped == 1);
    CHECK(report.total_snapshots_skipped == 1);
}
