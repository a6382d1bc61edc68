#include "madl/walkforward.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>

#include "madl/adam.hpp"

namespace madl {

std::vector<FoldPlan> plan_folds(std::size_t n_days, const TrainRunConfig& cfg) {
    const std::size_t w = cfg.initial_window_days;
    const std::size_t t = cfg.test_window_days;
    if (w == 0 || t == 0) throw ConfigError("window sizes must be positive");
    if (cfg.max_train_window_years < 1) {
        throw ConfigError("max_train_window_years must be >= 1");
    }
    if (n_days <= w) {
        throw UsageError("plan_folds: need more than " + std::to_string(w) +
                         " days, got " + std::to_string(n_days));
    }
    const std::size_t cap = static_cast<std::size_t>(cfg.max_train_window_years) * w;
    std::vector<FoldPlan> folds;
    for (std::size_t test_begin = w; test_begin < n_days; test_begin += t) {
        FoldPlan fold;
        fold.fold_index = static_cast<int>(folds.size());
        fold.train_end = test_begin;
        fold.train_begin = (cfg.window_mode == WindowMode::anchor || fold.train_end <= cap)
                               ? 0
                               : fold.train_end - cap;
        const auto val_len = static_cast<std::size_t>(std::lround(
            cfg.validation_fraction * static_cast<double>(fold.train_length())));
        fold.validation_begin = fold.train_end - std::max<std::size_t>(1, val_len);
        fold.test_begin = test_begin;
        fold.test_end = std::min(test_begin + t, n_days);
        folds.push_back(fold);
    }
    return folds;
}

WindowDataset WindowDataset::build(std::span<const double> returns,
                                   std::size_t range_begin, std::size_t range_end,
                                   std::size_t seq_len, std::size_t history_floor) {
    WindowDataset ds;
    const std::size_t first = std::max(range_begin, history_floor + seq_len);
    for (std::size_t day = first; day < std::min(range_end, returns.size()); ++day) {
        std::vector<double> window(returns.begin() + static_cast<std::ptrdiff_t>(day - seq_len),
                                   returns.begin() + static_cast<std::ptrdiff_t>(day));
        ds.samples.emplace_back(std::move(window), returns[day]);
        ds.target_days.push_back(day);
    }
    return ds;
}

namespace {

double validation_exact_madl(ForecastModel& model, const WindowDataset& val) {
    std::vector<double> observed, predicted;
    observed.reserve(val.samples.size());
    predicted.reserve(val.samples.size());
    for (const auto& [window, target] : val.samples) {
        observed.push_back(target);
        predicted.push_back(model.predict(window));
    }
    return madl_exact(observed, predicted);
}

}  // namespace

TrainFoldResult train_fold(ForecastModel& model, const FoldPlan& fold,
                           std::span<const double> returns, const TrainRunConfig& cfg) {
    const std::size_t seq_len = model.config().sequence_length;
    // Gradient samples exclude the validation suffix; validation windows may
    // reach back into the training prefix (same side of the boundary).
    WindowDataset train = WindowDataset::build(returns, fold.train_begin,
                                               fold.validation_begin, seq_len,
                                               fold.train_begin);
    WindowDataset val = WindowDataset::build(returns, fold.validation_begin,
                                             fold.train_end, seq_len, fold.train_begin);
    if (train.samples.empty() || val.samples.empty()) {
        throw UsageError("train_fold: fold " + std::to_string(fold.fold_index) +
                         " has no training or validation samples");
    }
    std::vector<double> train_targets;
    train_targets.reserve(train.samples.size());
    for (const auto& [window, target] : train.samples) train_targets.push_back(target);

    AdamConfig adam_cfg;
    adam_cfg.learning_rate = model.config().learning_rate;
    adam_cfg.l2_coefficient = model.config().l2_coefficient;
    auto params = model.parameter_tensors();
    AdamState adam(adam_cfg, params);

    TrainFoldResult result;
    result.best_validation_loss = std::numeric_limits<double>::infinity();
    for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
        const auto start = std::chrono::steady_clock::now();
        model.set_train_mode(true);
        model.zero_grads();
        GradTape tape;
        TensorPtr loss;
        // Non-finite values may surface mid-graph (e.g. in an attention
        // softmax) before the loss is even formed; tag those with the epoch.
        try {
            std::vector<TensorPtr> predictions;
            predictions.reserve(train.samples.size());
            for (const auto& [window, target] : train.samples) {
                predictions.push_back(model.forward(tape, window));
            }
            loss = madl_surrogate(tape, train_targets, predictions, cfg.surrogate);
        } catch (const FoldDivergenceError&) {
            throw;
        } catch (const NumericError& e) {
            throw FoldDivergenceError(fold.fold_index, epoch, e.what());
        }
        if (!std::isfinite(loss->values()[0])) {
            throw FoldDivergenceError(fold.fold_index, epoch, "non-finite training loss");
        }
        tape.backward(loss);
        adam.step(params);
        if (!model.parameters_finite()) {
            throw FoldDivergenceError(fold.fold_index, epoch,
                                      "non-finite parameters after update");
        }
        model.set_train_mode(false);
        const double val_loss = validation_exact_madl(model, val);
        if (!std::isfinite(val_loss)) {
            throw FoldDivergenceError(fold.fold_index, epoch,
                                      "non-finite validation loss");
        }
        if (val_loss < result.best_validation_loss) {
            result.best_validation_loss = val_loss;
            result.best_epoch = epoch;
            result.best_checkpoint = model.save_checkpoint();
        }
        const auto end = std::chrono::steady_clock::now();
        result.logs.push_back(
            {fold.fold_index, epoch, loss->values()[0], val_loss,
             std::chrono::duration<double, std::milli>(end - start).count()});
    }
    return result;
}

std::vector<Prediction> predict_fold(ForecastModel& model, const FoldPlan& fold,
                                     std::span<const double> returns) {
    const std::size_t seq_len = model.config().sequence_length;
    model.set_train_mode(false);
    std::vector<Prediction> preds;
    // Test windows may consume the trailing train days as inputs.
    for (std::size_t day = std::max(fold.test_begin, seq_len);
         day < std::min(fold.test_end, returns.size()); ++day) {
        std::span<const double> window = returns.subspan(day - seq_len, seq_len);
        preds.push_back({day, model.predict(window)});
    }
    return preds;
}

WalkForwardResult run_walk_forward(const ModelConfig& model_cfg,
                                   const TrainRunConfig& cfg,
                                   std::span<const double> returns) {
    WalkForwardResult result;
    result.folds = plan_folds(returns.size(), cfg);
    for (const FoldPlan& fold : result.folds) {
        ModelConfig fold_cfg = model_cfg;
        fold_cfg.seed = derive_seed(cfg.seed, "fold", static_cast<std::uint64_t>(fold.fold_index));
        ForecastModel model(fold_cfg);
        TrainFoldResult trained = train_fold(model, fold, returns, cfg);
        ForecastModel best = ForecastModel::load_checkpoint(trained.best_checkpoint);
        auto preds = predict_fold(best, fold, returns);
        result.predictions.insert(result.predictions.end(), preds.begin(), preds.end());
        result.fold_results.push_back(std::move(trained));
    }
    return result;
}

}  // namespace madl
