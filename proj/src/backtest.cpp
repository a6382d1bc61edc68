#include "madl/backtest.hpp"

#include <cmath>

namespace madl {

SignalSeries signals_from_predictions(std::span<const double> predictions,
                                      StrategyMode mode) {
    SignalSeries out;
    out.mode = mode;
    out.positions.reserve(predictions.size());
    for (double p : predictions) {
        int sig = p > 0.0 ? 1 : (p < 0.0 ? -1 : 0);
        if (mode == StrategyMode::long_only && sig < 0) sig = 0;
        out.positions.push_back(sig);
    }
    return out;
}

EquityLine run_backtest(std::span<const int> positions, std::span<const double> returns,
                        double cost_bps) {
    if (positions.size() != returns.size()) {
        throw UsageError("run_backtest: " + std::to_string(positions.size()) +
                         " positions vs " + std::to_string(returns.size()) + " returns");
    }
    EquityLine line;
    line.equity.reserve(returns.size());
    line.strategy_returns.reserve(returns.size());
    line.positions.assign(positions.begin(), positions.end());
    double equity = 1.0;
    int prev = 0;  // flat before the first signal
    for (std::size_t i = 0; i < returns.size(); ++i) {
        double cost = 0.0;
        if (positions[i] != prev) {
            cost = cost_bps * 1e-4 * std::abs(positions[i] - prev);
            line.trades.push_back({i, prev, positions[i]});
            prev = positions[i];
        }
        const double r = positions[i] * returns[i] - cost;
        equity *= 1.0 + r;
        line.strategy_returns.push_back(r);
        line.equity.push_back(equity);
    }
    line.n_trades = line.trades.size();
    return line;
}

EquityLine buy_and_hold(std::span<const double> returns) {
    std::vector<int> ones(returns.size(), 1);
    EquityLine line = run_backtest(ones, returns, 0.0);
    // Entry at start plus exit at end.
    line.n_trades = returns.empty() ? 0 : 2;
    return line;
}

}  // namespace madl
