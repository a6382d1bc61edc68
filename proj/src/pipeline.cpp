#include "madl/pipeline.hpp"

#include <atomic>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <mutex>
#include <sstream>
#include <thread>

#include <json.hpp>

namespace madl {

namespace fs = std::filesystem;
using nlohmann::json;

std::string family_name(ModelFamily f) {
    return f == ModelFamily::transformer ? "transformer" : "lstm";
}

void RunConfig::validate() const {
    if (version != 1) throw ConfigError("unsupported config version");
    if (assets.empty()) throw ConfigError("config needs at least one asset");
    if (families.empty()) throw ConfigError("config needs a model family");
    if (cost_bps < 0.0) throw ConfigError("cost_bps must be >= 0");
    if (jobs < 1) throw ConfigError("jobs must be >= 1");
    if (epochs_transformer < 1 || epochs_lstm < 1) throw ConfigError("epochs must be >= 1");
    if (train.validation_fraction <= 0.0 || train.validation_fraction >= 1.0) {
        throw ConfigError("validation_fraction must be in (0,1)");
    }
    transformer.validate();
    lstm.validate();
    for (const auto& a : assets) {
        if (a.name.empty()) throw ConfigError("asset name must not be empty");
        if (!fs::exists(a.path)) throw DataError("asset file not found: " + a.path);
    }
}

namespace {

ModelFamily parse_family_tag(const std::string& s) {
    if (s == "transformer") return ModelFamily::transformer;
    if (s == "lstm") return ModelFamily::lstm;
    throw ConfigError("unknown model family '" + s + "'");
}

void apply_model_overrides(ModelConfig& cfg, const json& j) {
    if (j.contains("sequence_length")) cfg.sequence_length = j["sequence_length"].get<std::size_t>();
    if (j.contains("num_heads")) cfg.num_heads = j["num_heads"].get<std::size_t>();
    if (j.contains("key_dim")) cfg.key_dim = j["key_dim"].get<std::size_t>();
    if (j.contains("value_dim")) cfg.value_dim = j["value_dim"].get<std::size_t>();
    if (j.contains("model_dim")) cfg.model_dim = j["model_dim"].get<std::size_t>();
    if (j.contains("num_attention_layers")) {
        cfg.num_attention_layers = j["num_attention_layers"].get<std::size_t>();
    }
    if (j.contains("lstm_layer_sizes")) {
        cfg.lstm_layer_sizes = j["lstm_layer_sizes"].get<std::vector<std::size_t>>();
    }
    if (j.contains("dropout_rate")) cfg.dropout_rate = j["dropout_rate"].get<double>();
    if (j.contains("l2_coefficient")) cfg.l2_coefficient = j["l2_coefficient"].get<double>();
    if (j.contains("learning_rate")) cfg.learning_rate = j["learning_rate"].get<double>();
    if (j.contains("output_activation")) {
        const auto s = j["output_activation"].get<std::string>();
        if (s == "relu") cfg.output_activation = OutputActivation::relu;
        else if (s == "linear") cfg.output_activation = OutputActivation::linear;
        else throw ConfigError("unknown output_activation '" + s + "'");
    }
    if (j.contains("positional_encoding")) {
        const auto s = j["positional_encoding"].get<std::string>();
        if (s == "sinusoidal") cfg.positional_encoding = PositionalEncoding::sinusoidal;
        else if (s == "none") cfg.positional_encoding = PositionalEncoding::none;
        else throw ConfigError("unknown positional_encoding '" + s + "'");
    }
}

}  // namespace

RunConfig load_run_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path);
    json j;
    try {
        in >> j;
    } catch (const json::parse_error& e) {
        throw ConfigError(path + ": " + e.what());
    }
    RunConfig cfg;
    cfg.transformer = ModelConfig::transformer_defaults();
    cfg.lstm = ModelConfig::lstm_defaults();
    try {
        cfg.version = j.value("version", 1);
        if (!j.contains("seed")) throw ConfigError("config must set a seed");
        cfg.seed = j["seed"].get<std::uint64_t>();
        cfg.output_dir = j.value("output_dir", std::string("out"));
        const auto fam = j.value("family", std::string("both"));
        if (fam == "both") {
            cfg.families = {ModelFamily::lstm, ModelFamily::transformer};
        } else {
            cfg.families = {parse_family_tag(fam)};
        }
        const auto mode = j.value("strategy_mode", std::string("long_short"));
        if (mode == "long_short") cfg.strategy_mode = StrategyMode::long_short;
        else if (mode == "long_only") cfg.strategy_mode = StrategyMode::long_only;
        else throw ConfigError("unknown strategy_mode '" + mode + "'");
        cfg.cost_bps = j.value("cost_bps", 0.0);
        cfg.jobs = j.value("jobs", 1);
        if (!j.contains("assets") || !j["assets"].is_array()) {
            throw ConfigError("config must list assets");
        }
        for (const auto& a : j["assets"]) {
            AssetSpec spec;
            spec.name = a.at("name").get<std::string>();
            spec.path = a.at("path").get<std::string>();
            const auto cls = a.value("asset_class", std::string("equity"));
            if (cls == "equity") spec.asset_class = AssetClass::equity;
            else if (cls == "crypto") spec.asset_class = AssetClass::crypto;
            else throw ConfigError("unknown asset_class '" + cls + "'");
            spec.schema.date_column = a.value("date_column", std::string("date"));
            spec.schema.close_column = a.value("close_column", std::string("close"));
            cfg.assets.push_back(std::move(spec));
        }
        if (j.contains("model")) {
            apply_model_overrides(cfg.transformer, j["model"]);
            apply_model_overrides(cfg.lstm, j["model"]);
        }
        if (j.contains("transformer")) apply_model_overrides(cfg.transformer, j["transformer"]);
        if (j.contains("lstm")) apply_model_overrides(cfg.lstm, j["lstm"]);
        cfg.transformer.family = ModelFamily::transformer;
        cfg.lstm.family = ModelFamily::lstm;
        if (j.contains("train")) {
            const json& t = j["train"];
            if (t.contains("initial_window_days")) {
                cfg.train.initial_window_days = t["initial_window_days"].get<std::size_t>();
            } else {
                cfg.train.initial_window_days = 0;  // derive from asset class
            }
            if (t.contains("test_window_days")) {
                cfg.train.test_window_days = t["test_window_days"].get<std::size_t>();
            } else {
                cfg.train.test_window_days = 0;
            }
            cfg.train.max_train_window_years = t.value("max_train_window_years", 4);
            const auto wm = t.value("window_mode", std::string("slide"));
            if (wm == "slide") cfg.train.window_mode = WindowMode::slide;
            else if (wm == "anchor") cfg.train.window_mode = WindowMode::anchor;
            else throw ConfigError("unknown window_mode '" + wm + "'");
            cfg.train.validation_fraction = t.value("validation_fraction", 0.33);
            cfg.train.surrogate.sharpness = t.value("surrogate_sharpness", 100.0);
            cfg.epochs_transformer = t.value("epochs_transformer", 50);
            cfg.epochs_lstm = t.value("epochs_lstm", 300);
        } else {
            cfg.train.initial_window_days = 0;
            cfg.train.test_window_days = 0;
        }
    } catch (const json::exception& e) {
        throw ConfigError(path + ": " + e.what());
    }
    return cfg;
}

namespace {

struct Job {
    std::size_t asset_index;
    ModelFamily family;
};

void write_file(const fs::path& path, const std::string& content,
                std::vector<std::string>& artifact_paths) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write " + path.string());
    out << content;
    artifact_paths.push_back(path.string());
}

std::string fold_plan_json(const std::vector<FoldPlan>& folds) {
    json arr = json::array();
    for (const auto& f : folds) {
        arr.push_back({{"fold", f.fold_index},
                       {"train_begin", f.train_begin},
                       {"train_end", f.train_end},
                       {"validation_begin", f.validation_begin},
                       {"test_begin", f.test_begin},
                       {"test_end", f.test_end}});
    }
    return arr.dump(2) + "\n";
}

std::string train_log_jsonl(const std::vector<TrainFoldResult>& folds) {
    std::ostringstream os;
    for (const auto& fr : folds) {
        for (const auto& log : fr.logs) {
            // Wall-clock timing is deliberately left out so reruns of the same
            // config produce byte-identical logs.
            json rec = {{"fold", log.fold},
                        {"epoch", log.epoch},
                        {"train_surrogate", log.train_surrogate},
                        {"validation_exact", log.validation_exact}};
            os << rec.dump() << '\n';
        }
    }
    return os.str();
}

std::string csv_double(double v) {
    std::ostringstream os;
    os << std::setprecision(17) << v;
    return os.str();
}

}  // namespace

std::string plot_data_csv(const std::vector<std::string>& dates,
                          const std::vector<std::pair<std::string, const EquityLine*>>& series) {
    std::ostringstream os;
    os << "date,series_name,equity\n";
    for (const auto& [name, line] : series) {
        for (std::size_t i = 0; i < line->equity.size(); ++i) {
            os << dates[i] << ',' << name << ',' << csv_double(line->equity[i]) << '\n';
        }
    }
    return os.str();
}

RunOutput run_pipeline(const RunConfig& cfg) {
    cfg.validate();

    // Load all series up front; immutable and shared across workers.
    std::vector<ReturnSeries> returns;
    returns.reserve(cfg.assets.size());
    for (const auto& asset : cfg.assets) {
        PriceSeries prices = load_csv(asset.path, asset.schema, asset.name, asset.asset_class);
        returns.push_back(to_returns(prices));
    }

    std::vector<Job> jobs;
    for (std::size_t a = 0; a < cfg.assets.size(); ++a) {
        for (ModelFamily f : cfg.families) jobs.push_back({a, f});
    }

    std::vector<JobResult> results(jobs.size());
    std::atomic<std::size_t> next{0};
    std::mutex error_mutex;
    std::exception_ptr first_error;

    auto worker = [&] {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= jobs.size()) return;
            try {
                const Job& job = jobs[i];
                const AssetSpec& asset = cfg.assets[job.asset_index];
                const ReturnSeries& series = returns[job.asset_index];

                TrainRunConfig train = cfg.train;
                const auto year = static_cast<std::size_t>(periods_per_year(asset.asset_class));
                if (train.initial_window_days == 0) train.initial_window_days = year;
                if (train.test_window_days == 0) train.test_window_days = year;
                train.epochs = job.family == ModelFamily::transformer ? cfg.epochs_transformer
                                                                      : cfg.epochs_lstm;
                train.seed = derive_seed(cfg.seed, asset.name + "/" + family_name(job.family));

                const ModelConfig& model_cfg =
                    job.family == ModelFamily::transformer ? cfg.transformer : cfg.lstm;

                JobResult r;
                r.asset_index = job.asset_index;
                r.family = job.family;
                r.walk = run_walk_forward(model_cfg, train, series.returns);

                // Out-of-sample range: [W, n). Position for day t comes from
                // the prediction made with data before t.
                const std::size_t oos_begin = train.initial_window_days;
                std::vector<double> preds;
                preds.reserve(r.walk.predictions.size());
                for (const auto& p : r.walk.predictions) preds.push_back(p.predicted_return);
                std::vector<double> oos_returns(series.returns.begin() +
                                                    static_cast<std::ptrdiff_t>(oos_begin),
                                                series.returns.end());
                if (preds.size() != oos_returns.size()) {
                    throw UsageError("prediction/out-of-sample length mismatch");
                }
                SignalSeries signals = signals_from_predictions(preds, cfg.strategy_mode);
                r.strategy = run_backtest(signals.positions, oos_returns, cfg.cost_bps);
                r.benchmark = buy_and_hold(oos_returns);
                r.report = compute_report(asset.name + " " + family_name(job.family),
                                          r.strategy, periods_per_year(asset.asset_class));
                r.oos_dates.assign(series.dates.begin() +
                                       static_cast<std::ptrdiff_t>(oos_begin),
                                   series.dates.end());
                results[i] = std::move(r);
            } catch (...) {
                std::lock_guard lock(error_mutex);
                if (!first_error) first_error = std::current_exception();
                return;
            }
        }
    };

    const std::size_t n_workers =
        std::min<std::size_t>(static_cast<std::size_t>(cfg.jobs), jobs.size());
    if (n_workers <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        pool.reserve(n_workers);
        for (std::size_t w = 0; w < n_workers; ++w) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }
    if (first_error) std::rethrow_exception(first_error);

    // Single-threaded, ordered artifact assembly.
    RunOutput output;
    fs::create_directories(cfg.output_dir);
    std::vector<MetricsReport> rows;
    for (std::size_t a = 0; a < cfg.assets.size(); ++a) {
        const AssetSpec& asset = cfg.assets[a];
        const fs::path asset_dir = fs::path(cfg.output_dir) / asset.name;
        fs::create_directories(asset_dir);

        bool benchmark_written = false;
        std::vector<std::pair<std::string, const EquityLine*>> plot_series;
        for (std::size_t i = 0; i < jobs.size(); ++i) {
            if (jobs[i].asset_index != a) continue;
            const JobResult& r = results[i];
            const fs::path model_dir = asset_dir / family_name(r.family);
            fs::create_directories(model_dir);

            write_file(model_dir / "fold_plan.json", fold_plan_json(r.walk.folds),
                       output.artifact_paths);
            write_file(model_dir / "train_log.jsonl", train_log_jsonl(r.walk.fold_results),
                       output.artifact_paths);
            for (std::size_t f = 0; f < r.walk.fold_results.size(); ++f) {
                const auto& blob = r.walk.fold_results[f].best_checkpoint;
                const fs::path ckpt = model_dir / ("fold_" + std::to_string(f) + ".ckpt");
                std::ofstream out(ckpt, std::ios::binary);
                if (!out) throw DataError("cannot write " + ckpt.string());
                out.write(reinterpret_cast<const char*>(blob.data()),
                          static_cast<std::streamsize>(blob.size()));
                output.artifact_paths.push_back(ckpt.string());
            }

            std::ostringstream pred_csv;
            pred_csv << "day_index,date,predicted_return\n";
            for (const auto& p : r.walk.predictions) {
                pred_csv << p.day_index << ','
                         << returns[a].dates[p.day_index] << ','
                         << csv_double(p.predicted_return) << '\n';
            }
            write_file(model_dir / "predictions.csv", pred_csv.str(), output.artifact_paths);

            std::ostringstream eq_csv;
            eq_csv << "date,position,strategy_return,equity,benchmark_equity\n";
            for (std::size_t t = 0; t < r.strategy.equity.size(); ++t) {
                eq_csv << r.oos_dates[t] << ',' << r.strategy.positions[t] << ','
                       << csv_double(r.strategy.strategy_returns[t]) << ','
                       << csv_double(r.strategy.equity[t]) << ','
                       << csv_double(r.benchmark.equity[t]) << '\n';
            }
            write_file(model_dir / "equity.csv", eq_csv.str(), output.artifact_paths);

            std::ostringstream metrics_csv;
            metrics_csv << report_csv_header() << '\n' << report_csv_row(r.report) << '\n';
            write_file(model_dir / "metrics.csv", metrics_csv.str(), output.artifact_paths);

            if (!benchmark_written) {
                rows.push_back(compute_report(asset.name + " B&H", r.benchmark,
                                              periods_per_year(asset.asset_class)));
                plot_series.emplace_back("B&H", &r.benchmark);
                benchmark_written = true;
            }
            rows.push_back(r.report);
            plot_series.emplace_back(family_name(r.family), &r.strategy);
        }

        // All jobs of one asset share the same out-of-sample dates.
        for (std::size_t i = 0; i < jobs.size(); ++i) {
            if (jobs[i].asset_index == a) {
                write_file(asset_dir / "plot_data.csv",
                           plot_data_csv(results[i].oos_dates, plot_series),
                           output.artifact_paths);
                break;
            }
        }
    }

    std::ostringstream report_csv;
    report_csv << report_csv_header() << '\n';
    for (const auto& r : rows) report_csv << report_csv_row(r) << '\n';
    write_file(fs::path(cfg.output_dir) / "report.csv", report_csv.str(),
               output.artifact_paths);
    write_file(fs::path(cfg.output_dir) / "report.txt", report_table(rows),
               output.artifact_paths);
    output.report_rows = std::move(rows);
    return output;
}

}  // namespace madl
