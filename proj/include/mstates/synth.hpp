#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <string>
#include <vector>

#include "mstates/csvio.hpp"
#include "mstates/error.hpp"
#include "mstates/panel.hpp"
#include "mstates/rng.hpp"

namespace mstates {

// =============================================================================
// Block-correlated geometric random walk with scheduled regime switches.
// Within a regime, every stock pair shares the same correlation level c via a
// one-factor model: r = drift + vol * (sqrt(c) g + sqrt(1-c) eta).
// =============================================================================

struct SynthConfig {
    Eigen::Index n_stocks = 50;
    Eigen::Index n_days = 1641;              // price days; returns = n_days - 1
    std::vector<double> levels = {0.05, 0.25, 0.50, 0.80};
    std::vector<std::size_t> switch_returns = {410, 820, 1230};  // 0-based return-day switches
    double daily_vol = 0.02;
    double daily_drift = 0.0;
    double start_price = 100.0;
    std::string start_date = "1985-01-02";
    std::uint64_t seed = 1;
};

namespace detail {

// Days-from-civil round trip (Gregorian, proleptic); enough calendar to emit
// strictly increasing ISO-8601 dates.
inline std::int64_t days_from_civil(int y, int m, int d) {
    y -= m <= 2;
    const std::int64_t era = (y >= 0 ? y : y - 399) / 400;
    const auto yoe = static_cast<unsigned>(y - era * 400);
    const unsigned doy = (153u * static_cast<unsigned>(m + (m > 2 ? -3 : 9)) + 2u) / 5u +
                         static_cast<unsigned>(d) - 1u;
    const unsigned doe = yoe * 365u + yoe / 4u - yoe / 100u + doy;
    return era * 146097 + static_cast<std::int64_t>(doe) - 719468;
}

inline void civil_from_days(std::int64_t z, int& y, int& m, int& d) {
    z += 719468;
    const std::int64_t era = (z >= 0 ? z : z - 146096) / 146097;
    const auto doe = static_cast<unsigned>(z - era * 146097);
    const unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
    const std::int64_t yy = static_cast<std::int64_t>(yoe) + era * 400;
    const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
    const unsigned mp = (5 * doy + 2) / 153;
    d = static_cast<int>(doy - (153 * mp + 2) / 5 + 1);
    m = static_cast<int>(mp + (mp < 10 ? 3 : -9));
    y = static_cast<int>(yy + (m <= 2));
}

inline std::string iso_date_offset(const std::string& start, std::int64_t offset) {
    int y = 0, m = 0, d = 0;
    if (std::sscanf(start.c_str(), "%d-%d-%d", &y, &m, &d) != 3)
        throw ConfigError("start date must be ISO-8601 (YYYY-MM-DD): " + start);
    civil_from_days(days_from_civil(y, m, d) + offset, y, m, d);
    char buf[16];
    std::snprintf(buf, sizeof(buf), "%04d-%02d-%02d", y, m, d);
    return std::string(buf);
}

} // namespace detail

inline void validate_synth_config(const SynthConfig& cfg) {
    if (cfg.n_stocks < 2) throw ConfigError("synth: need at least 2 stocks");
    if (cfg.n_days < 2) throw ConfigError("synth: need at least 2 price days");
    if (cfg.levels.empty()) throw ConfigError("synth: need at least one correlation level");
    for (const double c : cfg.levels)
        if (c < 0.0 || c >= 1.0)
            throw ConfigError("synth: correlation levels must lie in [0, 1), got " +
                              fmt_double(c));
    if (cfg.switch_returns.size() + 1 != cfg.levels.size())
        throw ConfigError("synth: need exactly one switch per regime boundary (" +
                          std::to_string(cfg.levels.size()) + " levels, " +
                          std::to_string(cfg.switch_returns.size()) + " switches)");
    const auto t_ret = static_cast<std::size_t>(cfg.n_days - 1);
    std::size_t prev = 0;
    bool first = true;
    for (const std::size_t s : cfg.switch_returns) {
        if (s == 0) throw ConfigError("synth: a switch at return day 0 leaves an empty regime");
        if (!first && s <= prev)
            throw ConfigError("synth: switch days must be strictly increasing");
        if (s >= t_ret) throw ConfigError("synth: switch day beyond the return series");
        prev = s;
        first = false;
    }
    if (!(cfg.daily_vol > 0.0)) throw ConfigError("synth: daily volatility must be positive");
    if (!(cfg.start_price > 0.0)) throw ConfigError("synth: start price must be positive");
}

inline PricePanel synth_panel(const SynthConfig& cfg) {
    validate_synth_config(cfg);
    const Eigen::Index n = cfg.n_stocks;
    const Eigen::Index t = cfg.n_days;
    const auto t_ret = static_cast<std::size_t>(t - 1);

    std::vector<double> level_of_day(t_ret);
    {
        std::size_t regime = 0;
        for (std::size_t day = 0; day < t_ret; ++day) {
            while (regime < cfg.switch_returns.size() && day >= cfg.switch_returns[regime])
                ++regime;
            level_of_day[day] = cfg.levels[regime];
        }
    }

    PricePanel panel;
    panel.tickers.reserve(static_cast<std::size_t>(n));
    for (Eigen::Index k = 0; k < n; ++k)
        panel.tickers.push_back("SYN" + std::to_string(k + 1));
    panel.dates.reserve(static_cast<std::size_t>(t));
    for (Eigen::Index j = 0; j < t; ++j)
        panel.dates.push_back(detail::iso_date_offset(cfg.start_date, j));

    panel.prices.resize(n, t);
    panel.prices.col(0).setConstant(cfg.start_price);
    Rng rng(cfg.seed);
    for (std::size_t day = 0; day < t_ret; ++day) {
        const double c = level_of_day[day];
        const double w_common = std::sqrt(c);
        const double w_idio = std::sqrt(1.0 - c);
        const double g = rng.next_gaussian();
        for (Eigen::Index k = 0; k < n; ++k) {
            const double r =
                cfg.daily_drift + cfg.daily_vol * (w_common * g + w_idio * rng.next_gaussian());
            panel.prices(k, static_cast<Eigen::Index>(day) + 1) =
                panel.prices(k, static_cast<Eigen::Index>(day)) * std::exp(r);
        }
    }
    validate_panel(panel);
    return panel;
}

inline void write_price_csv(const std::filesystem::path& path, const PricePanel& panel) {
    std::string out = "date";
    for (const auto& ticker : panel.tickers) out += "," + ticker;
    out += "\n";
    for (Eigen::Index j = 0; j < panel.n_days(); ++j) {
        out += panel.dates[static_cast<std::size_t>(j)];
        for (Eigen::Index k = 0; k < panel.n_stocks(); ++k)
            out += "," + fmt_double_exact(panel.prices(k, j));
        out += "\n";
    }
    write_text_file(path, out);
}

} // namespace mstates
