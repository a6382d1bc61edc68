#pragma once

#include <string>
#include <vector>

#include "madl/errors.hpp"

namespace madl {

enum class AssetClass { equity, crypto };

// Periods per year: 252 trading days for equities, 365 calendar days for
// crypto.
inline int periods_per_year(AssetClass c) {
    return c == AssetClass::equity ? 252 : 365;
}

struct CsvSchema {
    std::string date_column = "date";
    std::string close_column = "close";
};

// Immutable after construction; dates strictly increasing ISO-8601.
struct PriceSeries {
    std::string symbol;
    AssetClass asset_class = AssetClass::equity;
    std::vector<std::string> dates;
    std::vector<double> closes;

    std::size_t size() const { return dates.size(); }
};

struct ReturnSeries {
    std::vector<std::string> dates;   // stamped with the later date
    std::vector<double> returns;      // simple returns P_t / P_{t-1} - 1

    std::size_t size() const { return dates.size(); }
};

// Parses the configured date/close columns, rejects bad rows with line
// numbers, sorts ascending, and verifies strict date monotonicity.
// Extra columns (OHLCV etc.) are ignored.
PriceSeries load_csv(const std::string& path, const CsvSchema& schema,
                     const std::string& symbol, AssetClass asset_class);

ReturnSeries to_returns(const PriceSeries& prices);

}  // namespace madl
