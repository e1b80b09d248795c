#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <filesystem>
#include <limits>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "mstates/csvio.hpp"
#include "mstates/error.hpp"

namespace mstates {

// =============================================================================
// Price panel: N stocks observed on a single exchange calendar of T days.
// Input format: CSV with a `date` column (ISO-8601) followed by one column per
// ticker holding the adjusted close. An optional sidecar CSV `ticker,sector`
// attaches sector labels.
// =============================================================================

struct PricePanel {
    std::vector<std::string> tickers;
    std::vector<std::string> sectors;   // empty, or one label per ticker
    std::vector<std::string> dates;     // strictly increasing, length T
    Eigen::MatrixXd prices;             // N x T, strictly positive

    Eigen::Index n_stocks() const { return prices.rows(); }
    Eigen::Index n_days() const { return prices.cols(); }
};

struct ReturnPanel {
    std::vector<std::string> tickers;
    std::vector<std::string> dates;     // length T-1, later day of each pair
    Eigen::MatrixXd returns;            // N x (T-1) log returns

    Eigen::Index n_stocks() const { return returns.rows(); }
    Eigen::Index n_days() const { return returns.cols(); }
};

// One epoch of M consecutive return days; indices are into return days,
// inclusive on both ends (a window of M returns spans M+1 prices).
struct EpochWindow {
    std::size_t start_index = 0;
    std::size_t end_index = 0;
    std::string end_date;

    std::size_t length() const { return end_index - start_index + 1; }
};

inline void validate_panel(const PricePanel& panel) {
    const Eigen::Index n = panel.prices.rows();
    const Eigen::Index t = panel.prices.cols();
    if (n < 2 || t < 2)
        throw ValidationError("price panel needs at least 2 stocks and 2 days, got N=" +
                              std::to_string(n) + " T=" + std::to_string(t));
    if (static_cast<Eigen::Index>(panel.tickers.size()) != n)
        throw ValidationError("ticker count does not match price rows");
    if (static_cast<Eigen::Index>(panel.dates.size()) != t)
        throw ValidationError("date count does not match price columns");
    if (!panel.sectors.empty() && panel.sectors.size() != panel.tickers.size())
        throw ValidationError("sector labels must be empty or one per ticker");

    std::unordered_set<std::string> seen;
    for (const auto& ticker : panel.tickers)
        if (!seen.insert(ticker).second)
            throw ValidationError("duplicate ticker: " + ticker);

    for (std::size_t i = 1; i < panel.dates.size(); ++i)
        if (!(panel.dates[i - 1] < panel.dates[i]))
            throw ValidationError("dates not strictly increasing at row " + std::to_string(i) +
                                  " (" + panel.dates[i - 1] + " then " + panel.dates[i] + ")");

    std::vector<std::string> report;
    for (Eigen::Index k = 0; k < n; ++k) {
        for (Eigen::Index j = 0; j < t; ++j) {
            const double p = panel.prices(k, j);
            if (!(p > 0.0) || !std::isfinite(p)) {
                report.push_back(panel.tickers[static_cast<std::size_t>(k)] + " @ " +
                                 panel.dates[static_cast<std::size_t>(j)] + " (price " +
                                 fmt_double(p) + ")");
                break;  // one entry per ticker is enough for the report
            }
        }
    }
    if (!report.empty()) {
        std::string msg = "non-positive or non-finite prices for " +
                          std::to_string(report.size()) + " ticker(s):";
        const std::size_t shown = std::min<std::size_t>(report.size(), 20);
        for (std::size_t i = 0; i < shown; ++i) msg += "\n  " + report[i];
        if (report.size() > shown)
            msg += "\n  ... and " + std::to_string(report.size() - shown) + " more";
        throw ValidationError(msg);
    }
}

// Loads and validates the price panel. Tickers with missing cells are treated
// as validation failures (complete panels only, no imputation).
inline PricePanel load_price_panel(const std::filesystem::path& csv_path,
                                   const std::filesystem::path& sectors_path = {}) {
    const std::vector<std::string> lines = read_lines(csv_path);
    if (lines.empty()) throw ParseError("empty input file: " + csv_path.string());

    const std::vector<std::string> header = split_csv_line(lines[0]);
    if (header.size() < 2 || trim(header[0]) != "date")
        throw ParseError("header must be `date,<ticker>,...`, got: " + lines[0]);

    PricePanel panel;
    for (std::size_t c = 1; c < header.size(); ++c) {
        const std::string ticker = trim(header[c]);
        if (ticker.empty())
            throw ParseError("empty ticker name in header column " + std::to_string(c));
        panel.tickers.push_back(ticker);
    }

    const std::size_t n = panel.tickers.size();
    std::vector<std::vector<double>> rows;  // one row per date
    std::vector<std::string> missing_report;
    for (std::size_t r = 1; r < lines.size(); ++r) {
        if (trim(lines[r]).empty()) continue;
        const std::vector<std::string> fields = split_csv_line(lines[r]);
        if (fields.size() != n + 1)
            throw ParseError("row " + std::to_string(r + 1) + " has " +
                             std::to_string(fields.size()) + " fields, expected " +
                             std::to_string(n + 1));
        const std::string date = trim(fields[0]);
        if (date.empty()) throw ParseError("empty date at row " + std::to_string(r + 1));
        std::vector<double> row(n);
        for (std::size_t c = 0; c < n; ++c) {
            const auto v = parse_double_strict(fields[c + 1]);
            if (!v) {
                missing_report.push_back(panel.tickers[c] + " @ " + date + " (cell `" +
                                         trim(fields[c + 1]) + "`)");
                row[c] = std::numeric_limits<double>::quiet_NaN();
            } else {
                row[c] = *v;
            }
        }
        panel.dates.push_back(date);
        rows.push_back(std::move(row));
    }
    if (!missing_report.empty()) {
        std::string msg = "missing or unparsable prices (" +
                          std::to_string(missing_report.size()) + " cell(s)):";
        const std::size_t shown = std::min<std::size_t>(missing_report.size(), 20);
        for (std::size_t i = 0; i < shown; ++i) msg += "\n  " + missing_report[i];
        if (missing_report.size() > shown)
            msg += "\n  ... and " + std::to_string(missing_report.size() - shown) + " more";
        throw ValidationError(msg);
    }

    panel.prices.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(rows.size()));
    for (std::size_t j = 0; j < rows.size(); ++j)
        for (std::size_t k = 0; k < n; ++k)
            panel.prices(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(j)) = rows[j][k];

    if (!sectors_path.empty()) {
        std::unordered_map<std::string, std::string> sector_of;
        const std::vector<std::string> slines = read_lines(sectors_path);
        for (std::size_t r = 0; r < slines.size(); ++r) {
            if (trim(slines[r]).empty()) continue;
            const std::vector<std::string> fields = split_csv_line(slines[r]);
            if (fields.size() != 2)
                throw ParseError("sector file row " + std::to_string(r + 1) +
                                 " must be `ticker,sector`");
            if (r == 0 && trim(fields[0]) == "ticker") continue;  // optional header
            sector_of[trim(fields[0])] = trim(fields[1]);
        }
        panel.sectors.reserve(n);
        for (const auto& ticker : panel.tickers) {
            const auto it = sector_of.find(ticker);
            panel.sectors.push_back(it == sector_of.end() ? std::string() : it->second);
        }
    }

    validate_panel(panel);
    return panel;
}

// r_k(t) = ln P_k(t) - ln P_k(t-1); output column t-1 is aligned to date t.
inline ReturnPanel log_returns(const PricePanel& panel) {
    validate_panel(panel);
    ReturnPanel out;
    out.tickers = panel.tickers;
    out.dates.assign(panel.dates.begin() + 1, panel.dates.end());
    const Eigen::Index n = panel.prices.rows();
    const Eigen::Index t = panel.prices.cols();
    out.returns.resize(n, t - 1);
    for (Eigen::Index k = 0; k < n; ++k)
        for (Eigen::Index j = 1; j < t; ++j)
            out.returns(k, j - 1) = std::log(panel.prices(k, j)) - std::log(panel.prices(k, j - 1));
    return out;
}

// Rolling windows over return days: offsets 0, shift, 2*shift, ...
// Count is floor((t_ret - m) / shift) + 1.
inline std::vector<EpochWindow> epoch_windows(std::size_t t_ret, std::size_t m,
                                              std::size_t shift) {
    if (m < 1) throw ValidationError("epoch length must be at least 1");
    if (shift < 1) throw ValidationError("epoch shift must be at least 1");
    if (m > t_ret)
        throw ValidationError("epoch length " + std::to_string(m) +
                              " exceeds available return days " + std::to_string(t_ret));
    const std::size_t count = (t_ret - m) / shift + 1;
    std::vector<EpochWindow> windows;
    windows.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
        EpochWindow w;
        w.start_index = i * shift;
        w.end_index = w.start_index + m - 1;
        windows.push_back(w);
    }
    return windows;
}

inline std::vector<EpochWindow> epoch_windows(const ReturnPanel& returns, std::size_t m,
                                              std::size_t shift) {
    auto windows = epoch_windows(static_cast<std::size_t>(returns.n_days()), m, shift);
    for (auto& w : windows) w.end_date = returns.dates[w.end_index];
    return windows;
}

} // namespace mstates
