#include "madl/metrics.hpp"

#include <cmath>
#include <iomanip>
#include <sstream>

namespace madl {

double annualized_return_compounded(std::span<const double> returns, int scale) {
    if (returns.empty()) throw UsageError("aRC: empty return series");
    double log_growth = 0.0;
    for (double r : returns) {
        if (r <= -1.0) {
            throw std::domain_error("aRC: return <= -100% (" + std::to_string(r) + ")");
        }
        log_growth += std::log1p(r);
    }
    const double exponent = static_cast<double>(scale) / static_cast<double>(returns.size());
    return std::expm1(log_growth * exponent);
}

double annualized_std_dev(std::span<const double> returns, int scale) {
    const std::size_t n = returns.size();
    if (n < 2) throw UsageError("aSD: need at least 2 returns");
    double mean = 0.0;
    for (double r : returns) mean += r;
    mean /= static_cast<double>(n);
    double ss = 0.0;
    for (double r : returns) ss += (r - mean) * (r - mean);
    return std::sqrt(static_cast<double>(scale)) *
           std::sqrt(ss / static_cast<double>(n - 1));
}

double max_drawdown(std::span<const double> equity) {
    if (equity.empty()) throw UsageError("max_drawdown: empty equity line");
    double peak = equity[0];
    double worst = 0.0;
    for (double p : equity) {
        peak = std::max(peak, p);
        worst = std::max(worst, (peak - p) / peak);
    }
    return worst;
}

double max_loss_duration(std::span<const double> equity, int scale) {
    if (equity.empty()) throw UsageError("max_loss_duration: empty equity line");
    std::size_t peak_index = 0;
    std::size_t longest = 0;
    for (std::size_t t = 1; t < equity.size(); ++t) {
        if (equity[t] > equity[peak_index]) {
            const std::size_t span = t - peak_index;
            if (span >= 2) longest = std::max(longest, span);  // skip immediate new highs
            peak_index = t;
        }
    }
    // Trailing drawdown never recovered: count through the final observation.
    longest = std::max(longest, equity.size() - 1 - peak_index);
    return static_cast<double>(longest) / static_cast<double>(scale);
}

InformationRatios information_ratios(double arc, double asd, double md, double mld) {
    InformationRatios ir;
    if (asd > 0.0) {
        ir.ir1 = arc / asd;
        if (md > 0.0) {
            ir.ir2 = arc * arc * (arc < 0.0 ? -1.0 : (arc > 0.0 ? 1.0 : 0.0)) / (asd * md);
            if (mld > 0.0) ir.ir3 = arc * arc * arc / (asd * md * mld);
        }
    }
    return ir;
}

MetricsReport compute_report(const std::string& label, const EquityLine& line, int scale) {
    MetricsReport r;
    r.label = label;
    r.scale = scale;
    r.arc = annualized_return_compounded(line.strategy_returns, scale);
    r.asd = annualized_std_dev(line.strategy_returns, scale);
    r.md = max_drawdown(line.equity);
    r.mld = max_loss_duration(line.equity, scale);
    const InformationRatios ir = information_ratios(r.arc, r.asd, r.md, r.mld);
    r.ir1 = ir.ir1;
    r.ir2 = ir.ir2;
    r.ir3 = ir.ir3;
    r.n_obs = line.strategy_returns.size();
    r.n_trades = line.n_trades;
    return r;
}

namespace {

std::string fmt(double v, int prec) {
    std::ostringstream os;
    os << std::fixed << std::setprecision(prec) << v;
    return os.str();
}

std::string fmt_opt(const std::optional<double>& v, int prec) {
    return v ? fmt(*v, prec) : std::string("-");
}

}  // namespace

std::string report_csv_header() {
    return "Model,aRC,aSD,MD,MLD,IR*,IR**,IR***,nObs,nTrades";
}

std::string report_csv_row(const MetricsReport& r) {
    std::ostringstream os;
    os << r.label << ',' << fmt(r.arc * 100.0, 2) << ',' << fmt(r.asd * 100.0, 2) << ','
       << fmt(r.md * 100.0, 2) << ',' << fmt(r.mld, 2) << ',' << fmt_opt(r.ir1, 2) << ','
       << fmt_opt(r.ir2, 3) << ',' << fmt_opt(r.ir3, 3) << ',' << r.n_obs << ','
       << r.n_trades;
    return os.str();
}

std::string report_table(const std::vector<MetricsReport>& rows) {
    std::ostringstream os;
    os << std::left << std::setw(18) << "Model" << std::right << std::setw(9) << "aRC"
       << std::setw(9) << "aSD" << std::setw(9) << "MD" << std::setw(7) << "MLD"
       << std::setw(7) << "IR*" << std::setw(8) << "IR**" << std::setw(8) << "IR***"
       << std::setw(7) << "nObs" << std::setw(9) << "nTrades" << '\n';
    for (const auto& r : rows) {
        os << std::left << std::setw(18) << r.label << std::right << std::setw(9)
           << fmt(r.arc * 100.0, 2) << std::setw(9) << fmt(r.asd * 100.0, 2)
           << std::setw(9) << fmt(r.md * 100.0, 2) << std::setw(7) << fmt(r.mld, 2)
           << std::setw(7) << fmt_opt(r.ir1, 2) << std::setw(8) << fmt_opt(r.ir2, 3)
           << std::setw(8) << fmt_opt(r.ir3, 3) << std::setw(7) << r.n_obs
           << std::setw(9) << r.n_trades << '\n';
    }
    return os.str();
}

}  // namespace madl
