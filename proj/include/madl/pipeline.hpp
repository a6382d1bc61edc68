#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "madl/backtest.hpp"
#include "madl/market_data.hpp"
#include "madl/metrics.hpp"
#include "madl/model.hpp"
#include "madl/walkforward.hpp"

namespace madl {

struct AssetSpec {
    std::string name;
    std::string path;
    AssetClass asset_class = AssetClass::equity;
    CsvSchema schema;
};

// Parsed run configuration (JSON document, schema version 1). The seed is
// mandatory: no run draws silent entropy.
struct RunConfig {
    int version = 1;
    std::uint64_t seed = 0;
    std::string output_dir = "out";
    std::vector<ModelFamily> families;  // expanded from "transformer"|"lstm"|"both"
    StrategyMode strategy_mode = StrategyMode::long_short;
    double cost_bps = 0.0;
    int jobs = 1;
    std::vector<AssetSpec> assets;
    ModelConfig transformer;
    ModelConfig lstm;
    TrainRunConfig train;  // window days of 0 mean "derive from asset class"
    int epochs_transformer = 50;
    int epochs_lstm = 300;

    void validate() const;  // ConfigError on bad fields, DataError on missing files
};

RunConfig load_run_config(const std::string& path);

// One asset x family result, everything needed for the artifacts.
struct JobResult {
    std::size_t asset_index = 0;
    ModelFamily family = ModelFamily::transformer;
    WalkForwardResult walk;
    EquityLine strategy;
    EquityLine benchmark;
    MetricsReport report;
    std::vector<std::string> oos_dates;  // out-of-sample dates, aligned with equity
};

struct RunOutput {
    std::vector<MetricsReport> report_rows;
    std::vector<std::string> artifact_paths;
};

// Full pipeline: data -> folds -> training -> backtest -> reports. Jobs run
// on a bounded worker pool; artifact assembly is single-threaded and ordered,
// so output is a pure function of (config, input files, seed).
RunOutput run_pipeline(const RunConfig& cfg);

// Long-format plot CSV (date, series_name, equity) for one asset.
std::string plot_data_csv(const std::vector<std::string>& dates,
                          const std::vector<std::pair<std::string, const EquityLine*>>& series);

std::string family_name(ModelFamily f);

}  // namespace madl
