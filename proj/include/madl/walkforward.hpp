#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "madl/madl_loss.hpp"
#include "madl/model.hpp"

namespace madl {

// Post-cap behavior of the expanding window: slide at constant width
// (default) or keep the origin anchored at day 0.
enum class WindowMode { slide, anchor };

struct TrainRunConfig {
    std::size_t initial_window_days = 252;  // 252 equities / 365 crypto
    std::size_t test_window_days = 252;
    int max_train_window_years = 4;
    WindowMode window_mode = WindowMode::slide;
    int epochs = 50;  // 300 LSTM / 50 transformer
    double validation_fraction = 0.33;
    SurrogateConfig surrogate;
    std::uint64_t seed = 0;
};

// One walk-forward fold over return-series day indices. The validation
// range [validation_begin, train_end) is the contiguous suffix of the
// training range.
struct FoldPlan {
    int fold_index = 0;
    std::size_t train_begin = 0;
    std::size_t train_end = 0;
    std::size_t validation_begin = 0;
    std::size_t test_begin = 0;
    std::size_t test_end = 0;

    std::size_t train_length() const { return train_end - train_begin; }
    std::size_t test_length() const { return test_end - test_begin; }
};

// Expanding-window plan: fold 0 trains on [0, W), tests on [W, min(2W, n)).
// Each later fold grows the train window by one test window up to
// max_train_window_years * W. Test ranges tile [W, n_days).
std::vector<FoldPlan> plan_folds(std::size_t n_days, const TrainRunConfig& cfg);

// Sliding-window samples: (window of the L returns before t, return at t).
struct WindowDataset {
    std::vector<std::pair<std::vector<double>, double>> samples;
    std::vector<std::size_t> target_days;

    // Targets in [range_begin, range_end); windows may reach back to
    // history_floor but never before it.
    static WindowDataset build(std::span<const double> returns, std::size_t range_begin,
                               std::size_t range_end, std::size_t seq_len,
                               std::size_t history_floor);
};

struct EpochLog {
    int fold = 0;
    int epoch = 0;
    double train_surrogate = 0.0;
    double validation_exact = 0.0;
    double wall_ms = 0.0;
};

struct TrainFoldResult {
    std::vector<std::uint8_t> best_checkpoint;
    int best_epoch = 0;
    double best_validation_loss = 0.0;
    std::vector<EpochLog> logs;
};

// Full-batch surrogate-MADL training with best-weights selection on exact
// MADL over the validation suffix (ties keep the earliest epoch). Throws
// FoldDivergenceError when the loss or any parameter goes non-finite.
TrainFoldResult train_fold(ForecastModel& model, const FoldPlan& fold,
                           std::span<const double> returns, const TrainRunConfig& cfg);

struct Prediction {
    std::size_t day_index;
    double predicted_return;
};

// Eval-mode predictions for every test-range day, chronological. Each
// prediction depends only on the L returns before its day.
std::vector<Prediction> predict_fold(ForecastModel& model, const FoldPlan& fold,
                                     std::span<const double> returns);

// Convenience: plan, train, and predict every fold; returns predictions for
// the full out-of-sample range [W, n_days) plus per-fold logs/checkpoints.
struct WalkForwardResult {
    std::vector<FoldPlan> folds;
    std::vector<Prediction> predictions;
    std::vector<TrainFoldResult> fold_results;
};

WalkForwardResult run_walk_forward(const ModelConfig& model_cfg,
                                   const TrainRunConfig& cfg,
                                   std::span<const double> returns);

}  // namespace madl
