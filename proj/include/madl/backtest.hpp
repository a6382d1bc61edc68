#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "madl/errors.hpp"

namespace madl {

enum class StrategyMode { long_short, long_only };

// Daily positions in {-1, 0, +1}; long_only clamps to {0, +1}.
struct SignalSeries {
    std::vector<int> positions;
    StrategyMode mode = StrategyMode::long_short;
};

SignalSeries signals_from_predictions(std::span<const double> predictions,
                                      StrategyMode mode);

struct TradeEvent {
    std::size_t day;
    int old_position;
    int new_position;
};

// Cumulative strategy value starting at 1.0 before day 0:
//   P_t = P_{t-1} * (1 + position_t * r_t - cost_t).
struct EquityLine {
    std::vector<double> equity;            // P_t after each day
    std::vector<double> strategy_returns;  // position_t * r_t - cost_t
    std::vector<int> positions;
    std::vector<TradeEvent> trades;
    std::size_t n_trades = 0;
};

// positions[i] applies to returns[i]; the position was decided from data
// before day i. Costs: cost_bps * 1e-4 per unit of position change, charged
// on the day the position changes. Initial position is flat.
EquityLine run_backtest(std::span<const int> positions, std::span<const double> returns,
                        double cost_bps = 0.0);

// Constant +1 benchmark; nTrades = 2 by the enter-at-start/exit-at-end
// reporting convention.
EquityLine buy_and_hold(std::span<const double> returns);

}  // namespace madl
