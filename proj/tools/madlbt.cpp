#include <cstdint>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "madl/pipeline.hpp"

namespace {

// Exit codes: 0 ok, 2 config error, 3 data error, 4 numeric divergence.
constexpr int kExitConfig = 2;
constexpr int kExitData = 3;
constexpr int kExitNumeric = 4;

struct CliOverrides {
    std::optional<std::uint64_t> seed;
    std::optional<int> jobs;
    std::optional<std::string> output_dir;
};

madl::RunConfig load_with_overrides(const std::string& path, const CliOverrides& ov) {
    madl::RunConfig cfg = madl::load_run_config(path);
    if (ov.seed) cfg.seed = *ov.seed;
    if (ov.jobs) cfg.jobs = *ov.jobs;
    if (ov.output_dir) cfg.output_dir = *ov.output_dir;
    return cfg;
}

int cmd_run(const std::string& config_path, const CliOverrides& ov) {
    madl::RunConfig cfg = load_with_overrides(config_path, ov);
    madl::RunOutput out = madl::run_pipeline(cfg);
    std::cout << madl::report_table(out.report_rows);
    std::cout << "artifacts: " << out.artifact_paths.size() << " files under "
              << cfg.output_dir << "\n";
    return 0;
}

int cmd_plan(const std::string& config_path, const CliOverrides& ov) {
    madl::RunConfig cfg = load_with_overrides(config_path, ov);
    cfg.validate();
    for (const auto& asset : cfg.assets) {
        madl::PriceSeries prices =
            madl::load_csv(asset.path, asset.schema, asset.name, asset.asset_class);
        madl::ReturnSeries rets = madl::to_returns(prices);
        madl::TrainRunConfig train = cfg.train;
        const auto year =
            static_cast<std::size_t>(madl::periods_per_year(asset.asset_class));
        if (train.initial_window_days == 0) train.initial_window_days = year;
        if (train.test_window_days == 0) train.test_window_days = year;
        auto folds = madl::plan_folds(rets.size(), train);
        std::cout << asset.name << ": " << rets.size() << " return days, "
                  << folds.size() << " folds\n";
        for (const auto& f : folds) {
            std::cout << "  fold " << f.fold_index << ": train [" << f.train_begin << ","
                      << f.train_end << ") val [" << f.validation_begin << ","
                      << f.train_end << ") test [" << f.test_begin << "," << f.test_end
                      << ")\n";
        }
    }
    return 0;
}

int cmd_validate(const std::string& config_path, const CliOverrides& ov) {
    madl::RunConfig cfg = load_with_overrides(config_path, ov);
    cfg.validate();
    std::cout << "config ok: " << cfg.assets.size() << " asset(s), "
              << cfg.families.size() << " model family(ies), seed " << cfg.seed << "\n";
    return 0;
}

// Recomputes the metric row from an equity.csv produced by `run`.
int cmd_metrics(const std::string& equity_path, int scale) {
    std::ifstream in(equity_path);
    if (!in) throw madl::DataError("cannot open " + equity_path);
    std::string line;
    if (!std::getline(in, line)) throw madl::DataError(equity_path + ": empty file");
    madl::EquityLine strategy;
    int prev_pos = 0;
    std::size_t day = 0;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::istringstream is(line);
        std::string date, pos_s, ret_s, eq_s;
        if (!std::getline(is, date, ',') || !std::getline(is, pos_s, ',') ||
            !std::getline(is, ret_s, ',') || !std::getline(is, eq_s, ',')) {
            throw madl::DataError(equity_path + ": malformed row '" + line + "'");
        }
        const int pos = std::stoi(pos_s);
        strategy.positions.push_back(pos);
        strategy.strategy_returns.push_back(std::stod(ret_s));
        strategy.equity.push_back(std::stod(eq_s));
        if (pos != prev_pos) {
            strategy.trades.push_back({day, prev_pos, pos});
            prev_pos = pos;
        }
        ++day;
    }
    strategy.n_trades = strategy.trades.size();
    if (strategy.equity.empty()) throw madl::DataError(equity_path + ": no rows");
    madl::MetricsReport report = madl::compute_report(equity_path, strategy, scale);
    std::cout << madl::report_csv_header() << '\n' << madl::report_csv_row(report) << '\n';
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"MADL-trained return forecasters with walk-forward backtesting"};
    app.require_subcommand(1);

    CliOverrides ov;
    std::string config_path;
    std::string equity_path;
    int metrics_scale = 252;

    auto add_common = [&](CLI::App* sub) {
        sub->add_option("config", config_path, "run config JSON")->required();
        sub->add_option("--seed", ov.seed, "override config seed");
        sub->add_option("--jobs", ov.jobs, "override worker count");
        sub->add_option("--output-dir", ov.output_dir, "override output directory");
    };

    CLI::App* run = app.add_subcommand("run", "full pipeline: train, backtest, report");
    add_common(run);
    CLI::App* plan = app.add_subcommand("plan", "print the walk-forward fold plan");
    add_common(plan);
    CLI::App* validate = app.add_subcommand("validate", "check a config without running");
    add_common(validate);
    CLI::App* metrics = app.add_subcommand("metrics", "recompute metrics from an equity CSV");
    metrics->add_option("equity", equity_path, "equity.csv produced by run")->required();
    metrics->add_option("--scale", metrics_scale, "periods per year (252 or 365)");

    CLI11_PARSE(app, argc, argv);

    try {
        if (run->parsed()) return cmd_run(config_path, ov);
        if (plan->parsed()) return cmd_plan(config_path, ov);
        if (validate->parsed()) return cmd_validate(config_path, ov);
        if (metrics->parsed()) return cmd_metrics(equity_path, metrics_scale);
    } catch (const madl::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const madl::DataError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return kExitData;
    } catch (const madl::NumericError& e) {
        std::cerr << "numeric divergence: " << e.what() << "\n";
        return kExitNumeric;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
