#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "stablecap/estimation.hpp"

namespace stablecap::cdp {

enum class Action { open, lock, free_, draw, wipe, shut, bite };

inline const char* to_string(Action a) {
    switch (a) {
    case Action::open: return "open";
    case Action::lock: return "lock";
    case Action::free_: return "free";
    case Action::draw: return "draw";
    case Action::wipe: return "wipe";
    case Action::shut: return "shut";
    case Action::bite: return "bite";
    }
    return "?";
}

inline Action parse_action(const std::string& s) {
    if (s == "open") return Action::open;
    if (s == "lock") return Action::lock;
    if (s == "free") return Action::free_;
    if (s == "draw") return Action::draw;
    if (s == "wipe") return Action::wipe;
    if (s == "shut") return Action::shut;
    if (s == "bite") return Action::bite;
    throw std::invalid_argument("unknown action \"" + s + "\"");
}

/// One CDP event row. collateral_delta is in ETH, debt_delta in stablecoin
/// units (USD at par), eth_usd the price at action time.
struct CdpActionRecord {
    std::int64_t timestamp = 0; ///< UTC seconds
    std::string cdp_id;
    std::string address;
    Action action = Action::open;
    double collateral_delta = 0.0;
    double debt_delta = 0.0;
    double eth_usd = 0.0;
    bool is_contract = false; ///< from the optional address_type column
};

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string field;
    std::stringstream ss(line);
    while (std::getline(ss, field, ',')) out.push_back(field);
    if (!line.empty() && line.back() == ',') out.push_back("");
    return out;
}

inline double parse_double(const std::string& s, const char* what) {
    std::size_t pos = 0;
    double v = 0.0;
    try {
        v = std::stod(s, &pos);
    } catch (const std::exception&) {
        throw std::invalid_argument(std::string("bad ") + what + " \"" + s + "\"");
    }
    if (pos != s.size() || !std::isfinite(v))
        throw std::invalid_argument(std::string("bad ") + what + " \"" + s + "\"");
    return v;
}

/// Days since the Unix epoch for a calendar date (civil-days algorithm).
inline std::int64_t days_from_civil(int y, int m, int d) {
    y -= m <= 2;
    const int era = (y >= 0 ? y : y - 399) / 400;
    const unsigned yoe = static_cast<unsigned>(y - era * 400);
    const unsigned doy = (153u * static_cast<unsigned>(m + (m > 2 ? -3 : 9)) + 2u) / 5u +
                         static_cast<unsigned>(d) - 1u;
    const unsigned doe = yoe * 365u + yoe / 4u - yoe / 100u + doy;
    return static_cast<std::int64_t>(era) * 146097 + static_cast<std::int64_t>(doe) - 719468;
}

/// Parses "YYYY-MM-DD" to days since the epoch.
inline std::int64_t parse_date_days(const std::string& s) {
    if (s.size() != 10 || s[4] != '-' || s[7] != '-')
        throw std::invalid_argument("bad date \"" + s + "\" (want YYYY-MM-DD)");
    const int y = std::stoi(s.substr(0, 4));
    const int m = std::stoi(s.substr(5, 2));
    const int d = std::stoi(s.substr(8, 2));
    if (m < 1 || m > 12 || d < 1 || d > 31)
        throw std::invalid_argument("bad date \"" + s + "\"");
    return days_from_civil(y, m, d);
}

} // namespace detail

/// Loads CDP action rows from a CSV file. The header must name the
/// columns timestamp,cdp_id,address,action,collateral_delta,debt_delta,
/// eth_usd, optionally followed by address_type. Rows are returned sorted
/// by timestamp (stable, so same-time rows keep file order). Malformed
/// rows raise with their line number.
inline std::vector<CdpActionRecord> load_cdp_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);
    std::string line;
    if (!std::getline(in, line)) throw std::invalid_argument(path + ": missing header");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const auto header = detail::split_csv_line(line);
    const std::vector<std::string> expected = {"timestamp",        "cdp_id",     "address",
                                               "action",           "collateral_delta",
                                               "debt_delta",       "eth_usd"};
    if (header.size() < expected.size())
        throw std::invalid_argument(path + ": header does not match the CDP action schema");
    for (std::size_t i = 0; i < expected.size(); ++i)
        if (header[i] != expected[i])
            throw std::invalid_argument(path + ": header column " + std::to_string(i + 1) +
                                        " is \"" + header[i] + "\", want \"" + expected[i] + "\"");
    const bool has_type = header.size() > expected.size() && header[expected.size()] == "address_type";

    std::vector<CdpActionRecord> records;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const auto f = detail::split_csv_line(line);
        if (f.size() < expected.size())
            throw std::invalid_argument(path + ":" + std::to_string(line_no) +
                                        ": expected at least 7 fields");
        try {
            CdpActionRecord rec;
            rec.timestamp = static_cast<std::int64_t>(detail::parse_double(f[0], "timestamp"));
            rec.cdp_id = f[1];
            rec.address = f[2];
            rec.action = parse_action(f[3]);
            rec.collateral_delta = detail::parse_double(f[4], "collateral_delta");
            rec.debt_delta = detail::parse_double(f[5], "debt_delta");
            rec.eth_usd = detail::parse_double(f[6], "eth_usd");
            if (has_type && f.size() > 7) rec.is_contract = f[7] == "contract";
            records.push_back(std::move(rec));
        } catch (const std::invalid_argument& e) {
            throw std::invalid_argument(path + ":" + std::to_string(line_no) + ": " + e.what());
        }
    }
    std::stable_sort(records.begin(), records.end(),
                     [](const CdpActionRecord& a, const CdpActionRecord& b) {
                         return a.timestamp < b.timestamp;
                     });
    return records;
}

/// Sample-selection filters: drops CDPs whose peak collateral value never
/// exceeds min_collateral_usd, rows after the cutoff timestamp, and
/// contract-address rows when eoa_only is set. Filters are total.
inline std::vector<CdpActionRecord> clean_filter(const std::vector<CdpActionRecord>& records,
                                                 double min_collateral_usd, std::int64_t cutoff,
                                                 bool eoa_only) {
    // Peak running collateral value per CDP, over pre-cutoff rows.
    std::map<std::string, double> running_eth, peak_usd;
    for (const auto& r : records) {
        if (r.timestamp > cutoff) continue;
        double& eth = running_eth[r.cdp_id];
        eth += r.collateral_delta;
        double& peak = peak_usd[r.cdp_id];
        peak = std::max(peak, eth * r.eth_usd);
    }
    std::vector<CdpActionRecord> out;
    for (const auto& r : records) {
        if (r.timestamp > cutoff) continue;
        if (eoa_only && r.is_contract) continue;
        const auto it = peak_usd.find(r.cdp_id);
        if (it == peak_usd.end() || it->second <= min_collateral_usd) continue;
        out.push_back(r);
    }
    return out;
}

/// One per-action snapshot of a position.
struct PositionSnapshot {
    std::int64_t timestamp = 0;
    double collateral_eth = 0.0; ///< ETH locked as collateral
    double purchased_eth = 0.0;  ///< ETH bought with drawn stablecoin
    double debt_usd = 0.0;
    double eth_usd = 0.0;
    double wealth_usd = 0.0; ///< total ETH value less debt
    double alpha = 0.0;      ///< (collateral + purchased) / collateral
};

struct PositionSeries {
    std::string cdp_id;
    std::string address;
    std::vector<PositionSnapshot> snapshots;
};

/// Builds the wealth / leverage series for one CDP under the reinvestment
/// assumption: every draw buys ETH at the action-time price, wipes unwind
/// the purchased ETH proportionally to the debt repaid (a full wipe
/// returns alpha to 1), and bite/shut close the position.
inline PositionSeries position_series(const std::vector<CdpActionRecord>& records,
                                      bool assume_reinvest = true) {
    if (records.empty()) throw std::invalid_argument("position_series: no records");
    PositionSeries series;
    series.cdp_id = records.front().cdp_id;
    series.address = records.front().address;

    double collateral = 0.0; // ETH
    double purchased = 0.0;  // ETH
    double debt = 0.0;       // USD
    double cash = 0.0;       // USD, drawn stablecoin kept as cash when not reinvesting
    bool opened = false;

    for (const auto& r : records) {
        if (r.cdp_id != series.cdp_id)
            throw std::invalid_argument("position_series: records span multiple CDPs");
        switch (r.action) {
        case Action::open:
            opened = true;
            collateral += r.collateral_delta;
            break;
        case Action::lock:
            collateral += r.collateral_delta;
            break;
        case Action::free_:
            collateral -= std::abs(r.collateral_delta);
            break;
        case Action::draw:
            if (!opened && collateral <= 0.0)
                throw std::invalid_argument("position_series: draw before open");
            debt += r.debt_delta;
            if (assume_reinvest && r.eth_usd > 0.0)
                purchased += r.debt_delta / r.eth_usd;
            else
                cash += r.debt_delta;
            break;
        case Action::wipe: {
            const double repaid = std::min(std::abs(r.debt_delta), debt);
            if (debt > 0.0) {
                const double frac = repaid / debt;
                purchased *= 1.0 - frac;
                cash *= 1.0 - frac;
            }
            debt -= repaid;
            break;
        }
        case Action::shut:
        case Action::bite:
            debt = 0.0;
            purchased = 0.0;
            cash = 0.0;
            collateral = 0.0;
            break;
        }
        if (collateral < -1e-12)
            throw std::invalid_argument("position_series: negative running collateral");

        PositionSnapshot s;
        s.timestamp = r.timestamp;
        s.collateral_eth = collateral;
        s.purchased_eth = purchased;
        s.debt_usd = debt;
        s.eth_usd = r.eth_usd;
        s.wealth_usd = (collateral + purchased) * r.eth_usd + cash - debt;
        s.alpha = collateral > 0.0 ? (collateral + purchased) / collateral : 0.0;
        series.snapshots.push_back(s);
    }
    return series;
}

/// Cumulative (expanding-window) mean and variance of daily returns from
/// a close-price series; day t carries the moments of all returns up to
/// and including t. Variance uses the n-1 divisor.
struct DailyMoments {
    std::vector<std::int64_t> day;
    std::vector<double> mean;
    std::vector<double> variance;
};

inline DailyMoments rolling_moments(const std::vector<std::int64_t>& days,
                                    const std::vector<double>& closes) {
    if (days.size() != closes.size())
        throw std::invalid_argument("rolling_moments: day/close length mismatch");
    if (closes.size() < 2)
        throw std::invalid_argument("rolling_moments: need at least 2 prices");
    std::vector<double> returns(closes.size() - 1);
    for (std::size_t i = 1; i < closes.size(); ++i) returns[i - 1] = closes[i] / closes[i - 1] - 1.0;

    DailyMoments m;
    for (std::size_t t = 0; t < returns.size(); ++t) {
        const std::size_t n = t + 1;
        double sum = 0.0;
        for (std::size_t i = 0; i < n; ++i) sum += returns[i];
        const double mean = sum / static_cast<double>(n);
        double ss = 0.0;
        for (std::size_t i = 0; i < n; ++i) ss += (returns[i] - mean) * (returns[i] - mean);
        const double var = n > 1 ? ss / static_cast<double>(n - 1) : 0.0;
        m.day.push_back(days[t + 1]);
        m.mean.push_back(mean);
        m.variance.push_back(var);
    }
    return m;
}

/// Loads a (date, close) price CSV and returns expanding-window moments.
inline DailyMoments load_price_moments(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);
    std::string line;
    if (!std::getline(in, line)) throw std::invalid_argument(path + ": missing header");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const auto header = detail::split_csv_line(line);
    if (header.size() < 2 || header[0] != "date" || header[1] != "close")
        throw std::invalid_argument(path + ": header must be date,close");
    std::vector<std::int64_t> days;
    std::vector<double> closes;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const auto f = detail::split_csv_line(line);
        if (f.size() < 2)
            throw std::invalid_argument(path + ":" + std::to_string(line_no) + ": want 2 fields");
        try {
            days.push_back(detail::parse_date_days(f[0]));
            closes.push_back(detail::parse_double(f[1], "close"));
        } catch (const std::invalid_argument& e) {
            throw std::invalid_argument(path + ":" + std::to_string(line_no) + ": " + e.what());
        }
    }
    return rolling_moments(days, closes);
}

struct RhoRow {
    std::string cdp_id;
    std::string address;
    std::size_t snapshots_used = 0;
    std::size_t snapshots_skipped = 0;
    double rho_mean = 0.0;
};

struct AddressRhoRow {
    std::string address;
    std::size_t cdp_count = 0;
    std::size_t action_count = 0;
    bool active = false;
    double rho_mean = 0.0;
};

/// Echo of one contributing snapshot: the exact Method 1 inputs and the
/// estimate they produced.
struct RhoSnapshotRow {
    std::string cdp_id;
    std::int64_t timestamp = 0;
    double wealth_usd = 0.0;
    double alpha = 0.0;
    double mean_return = 0.0;
    double variance = 0.0;
    double rho = 0.0;
};

/// Which snapshots of a CDP feed its estimate: the mean over every action
/// snapshot (default) or the final state only.
enum class RhoSnapshotMode { per_action_mean, final_snapshot };

struct RhoReport {
    std::vector<RhoRow> per_cdp;
    std::vector<AddressRhoRow> per_address;
    std::vector<RhoSnapshotRow> snapshots;
    std::size_t total_snapshots_skipped = 0;
    double r_free_daily = 0.0;
};

/// Per-CDP and per-address risk-aversion tables. Every snapshot with valid
/// inputs (alpha != 0, wealth > 0, positive return variance on that day)
/// contributes a Method 1 estimate; the per-CDP value is the snapshot
/// mean and the per-address value the unweighted mean over its CDPs.
/// Addresses with more than active_threshold actions are marked active.
/// The annual risk-free rate is prorated to daily by simple division.
inline RhoReport rho_report(const std::vector<CdpActionRecord>& records,
                            const DailyMoments& moments, double r_free_annual,
                            std::size_t active_threshold,
                            RhoSnapshotMode mode = RhoSnapshotMode::per_action_mean,
                            bool assume_reinvest = true) {
    RhoReport report;
    report.r_free_daily = r_free_annual / 365.0;

    std::map<std::int64_t, std::size_t> day_index;
    for (std::size_t i = 0; i < moments.day.size(); ++i) day_index[moments.day[i]] = i;

    std::map<std::string, std::vector<CdpActionRecord>> by_cdp;
    for (const auto& r : records) by_cdp[r.cdp_id].push_back(r);

    std::map<std::string, std::vector<double>> address_rhos;
    std::map<std::string, std::size_t> address_actions, address_cdps;

    for (const auto& [cdp_id, recs] : by_cdp) {
        const auto series = position_series(recs, assume_reinvest);
        RhoRow row;
        row.cdp_id = cdp_id;
        row.address = series.address;
        double sum = 0.0;
        const std::size_t begin_at =
            mode == RhoSnapshotMode::final_snapshot && !series.snapshots.empty()
                ? series.snapshots.size() - 1
                : 0;
        for (std::size_t si = begin_at; si < series.snapshots.size(); ++si) {
            const auto& snap = series.snapshots[si];
            const std::int64_t day = snap.timestamp / 86400;
            const auto it = day_index.find(day);
            const bool valid = it != day_index.end() && moments.variance[it->second] > 0.0 &&
                               snap.alpha != 0.0 && snap.wealth_usd > 0.0;
            if (!valid) {
                ++row.snapshots_skipped;
                continue;
            }
            const std::size_t idx = it->second;
            const auto est = estimate_rho_m1(snap.wealth_usd, snap.alpha, moments.mean[idx],
                                             moments.variance[idx], report.r_free_daily);
            sum += est.rho;
            ++row.snapshots_used;
            report.snapshots.push_back({cdp_id, snap.timestamp, snap.wealth_usd, snap.alpha,
                                        moments.mean[idx], moments.variance[idx], est.rho});
        }
        report.total_snapshots_skipped += row.snapshots_skipped;
        address_actions[series.address] += recs.size();
        address_cdps[series.address] += 1;
        if (row.snapshots_used > 0) {
            row.rho_mean = sum / static_cast<double>(row.snapshots_used);
            address_rhos[series.address].push_back(row.rho_mean);
        }
        report.per_cdp.push_back(row);
    }

    for (const auto& [address, rhos] : address_rhos) {
        AddressRhoRow row;
        row.address = address;
        row.cdp_count = address_cdps[address];
        row.action_count = address_actions[address];
        row.active = row.action_count > active_threshold;
        double sum = 0.0;
        for (double r : rhos) sum += r;
        row.rho_mean = sum / static_cast<double>(rhos.size());
        report.per_address.push_back(row);
    }
    return report;
}

} // namespace stablecap::cdp
