#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "madl/backtest.hpp"

namespace madl {

// One row of the report table. Ratios are nullopt when a denominator is
// zero (undefined-metric marker, rendered as "-").
struct MetricsReport {
    std::string label;
    double arc = 0.0;  // annualized compounded return, fraction
    double asd = 0.0;  // annualized standard deviation, fraction
    double md = 0.0;   // max drawdown, fraction of peak
    double mld = 0.0;  // max loss duration, years
    std::optional<double> ir1;
    std::optional<double> ir2;
    std::optional<double> ir3;
    std::size_t n_obs = 0;
    std::size_t n_trades = 0;
    int scale = 252;  // periods per year
};

// prod(1 + r_i)^(scale/n) - 1.
double annualized_return_compounded(std::span<const double> returns, int scale);

// sqrt(scale) * sample standard deviation.
double annualized_std_dev(std::span<const double> returns, int scale);

// sup over x <= y of (P_x - P_y) / P_x; 0 for a non-decreasing line.
double max_drawdown(std::span<const double> equity);

// Longest span, in years, from a running equity maximum to the first value
// strictly above it. Immediate new highs contribute nothing; an unrecovered
// trailing drawdown counts through the final observation.
double max_loss_duration(std::span<const double> equity, int scale);

struct InformationRatios {
    std::optional<double> ir1;  // aRC / aSD
    std::optional<double> ir2;  // aRC^2 * sign(aRC) / (aSD * MD)
    std::optional<double> ir3;  // aRC^3 / (aSD * MD * MLD)
};

InformationRatios information_ratios(double arc, double asd, double md, double mld);

MetricsReport compute_report(const std::string& label, const EquityLine& line, int scale);

// Tables 2-3 column order: Model, aRC, aSD, MD, MLD, IR*, IR**, IR***,
// nObs, nTrades. aRC/aSD/MD in percent.
std::string report_csv_header();
std::string report_csv_row(const MetricsReport& r);
std::string report_table(const std::vector<MetricsReport>& rows);

}  // namespace madl
