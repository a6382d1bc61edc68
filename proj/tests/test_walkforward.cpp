#include <doctest.h>

#include <cmath>
#include <limits>

#include "madl/walkforward.hpp"
#include "support.hpp"

using namespace madl;

namespace {

ModelConfig small_transformer(std::uint64_t seed = 1) {
    ModelConfig cfg = ModelConfig::transformer_defaults();
    cfg.sequence_length = 3;
    cfg.num_heads = 2;
    cfg.key_dim = 4;
    cfg.value_dim = 4;
    cfg.model_dim = 8;
    cfg.num_attention_layers = 1;
    cfg.dropout_rate = 0.0;
    cfg.learning_rate = 0.01;
    cfg.l2_coefficient = 0.0;
    cfg.seed = seed;
    return cfg;
}

TrainRunConfig small_run(std::size_t window = 40, int epochs = 2) {
    TrainRunConfig cfg;
    cfg.initial_window_days = window;
    cfg.test_window_days = window;
    cfg.epochs = epochs;
    cfg.seed = 7;
    return cfg;
}

}  // namespace

TEST_CASE("plan_folds expanding window with 4-year cap") {
    TrainRunConfig cfg;
    cfg.initial_window_days = 252;
    cfg.test_window_days = 252;
    cfg.max_train_window_years = 4;
    auto folds = plan_folds(5 * 252, cfg);
    REQUIRE(folds.size() == 4);
    const std::size_t expected_train[] = {252, 504, 756, 1008};
    std::size_t total_test = 0;
    for (std::size_t i = 0; i < folds.size(); ++i) {
        CHECK(folds[i].train_length() == expected_train[i]);
        CHECK(folds[i].train_end == folds[i].test_begin);  // no lookahead
        CHECK(folds[i].test_begin == 252 * (i + 1));
        CHECK(folds[i].test_end == 252 * (i + 2));
        total_test += folds[i].test_length();
    }
    CHECK(total_test == 4 * 252);
}

TEST_CASE("plan_folds slides at constant width after the cap") {
    TrainRunConfig cfg;
    cfg.initial_window_days = 100;
    cfg.test_window_days = 100;
    cfg.max_train_window_years = 2;
    auto folds = plan_folds(600, cfg);
    REQUIRE(folds.size() == 5);
    CHECK(folds[0].train_length() == 100);
    CHECK(folds[1].train_length() == 200);
    CHECK(folds[2].train_length() == 200);
    CHECK(folds[2].train_begin == 100);

    cfg.window_mode = WindowMode::anchor;
    auto anchored = plan_folds(600, cfg);
    CHECK(anchored[2].train_begin == 0);
    CHECK(anchored[4].train_length() == 500);
}

TEST_CASE("plan_folds minimum and tiling cases") {
    TrainRunConfig cfg;
    cfg.initial_window_days = 252;
    cfg.test_window_days = 252;
    auto folds = plan_folds(2 * 252, cfg);
    CHECK(folds.size() == 1);

    Rng rng(77);
    for (int trial = 0; trial < 20; ++trial) {
        const std::size_t n = 253 + rng.next_u64() % 2000;
        auto plan = plan_folds(n, cfg);
        std::size_t total = 0;
        for (std::size_t i = 0; i < plan.size(); ++i) {
            total += plan[i].test_length();
            CHECK(plan[i].validation_begin > plan[i].train_begin);
            CHECK(plan[i].validation_begin < plan[i].train_end);
            if (i > 0) CHECK(plan[i].test_begin == plan[i - 1].test_end);
        }
        CHECK(total == n - 252);
    }
    CHECK_THROWS_AS(plan_folds(252, cfg), UsageError);
}

TEST_CASE("window dataset respects range boundaries") {
    std::vector<double> returns(20);
    for (std::size_t i = 0; i < returns.size(); ++i) returns[i] = static_cast<double>(i);

    SUBCASE("train-side windows stay inside the range") {
        auto ds = WindowDataset::build(returns, 5, 12, 3, 5);
        REQUIRE(ds.target_days.size() == 4);  // first L days produce no sample
        CHECK(ds.target_days.front() == 8);
        CHECK(ds.samples.front().first == std::vector<double>{5, 6, 7});
        CHECK(ds.samples.front().second == 8.0);
    }
    SUBCASE("test-side windows may consume trailing train days") {
        auto ds = WindowDataset::build(returns, 10, 14, 3, 0);
        REQUIRE(ds.target_days.size() == 4);
        CHECK(ds.target_days.front() == 10);
        CHECK(ds.samples.front().first == std::vector<double>{7, 8, 9});
    }
}

TEST_CASE("train_fold keeps the checkpoint with the lowest validation loss") {
    Rng rng(15);
    auto returns = madl::testing::random_returns(rng, 80);
    TrainRunConfig cfg = small_run(40, 6);
    auto folds = plan_folds(returns.size(), cfg);
    ForecastModel model(small_transformer(2));
    auto result = train_fold(model, folds[0], returns, cfg);
    REQUIRE(result.logs.size() == 6);
    double best = std::numeric_limits<double>::infinity();
    int best_epoch = 0;
    for (const auto& log : result.logs) {
        if (log.validation_exact < best) {
            best = log.validation_exact;
            best_epoch = log.epoch;
        }
    }
    CHECK(result.best_epoch == best_epoch);  // ties keep the earliest epoch
    CHECK(result.best_validation_loss == best);
    CHECK_FALSE(result.best_checkpoint.empty());

    // Replay: the retained checkpoint really attains the best validation loss.
    ForecastModel best_model = ForecastModel::load_checkpoint(result.best_checkpoint);
    WindowDataset val = WindowDataset::build(returns, folds[0].validation_begin,
                                             folds[0].train_end, 3, folds[0].train_begin);
    std::vector<double> obs, pred;
    for (const auto& [w, t] : val.samples) {
        obs.push_back(t);
        pred.push_back(best_model.predict(w));
    }
    CHECK(madl_exact(obs, pred) == doctest::Approx(best).epsilon(1e-12));
}

TEST_CASE("single epoch run retains the post-epoch-1 state") {
    Rng rng(16);
    auto returns = madl::testing::random_returns(rng, 80);
    TrainRunConfig cfg = small_run(40, 1);
    auto folds = plan_folds(returns.size(), cfg);
    ForecastModel model(small_transformer(3));
    auto result = train_fold(model, folds[0], returns, cfg);
    CHECK(result.best_epoch == 1);
    CHECK(result.best_checkpoint == model.save_checkpoint());
}

TEST_CASE("injected NaN aborts the fold with the epoch index") {
    Rng rng(17);
    auto returns = madl::testing::random_returns(rng, 80);
    returns[10] = std::numeric_limits<double>::quiet_NaN();
    TrainRunConfig cfg = small_run(40, 3);
    auto folds = plan_folds(returns.size(), cfg);
    ForecastModel model(small_transformer(4));
    try {
        train_fold(model, folds[0], returns, cfg);
        FAIL("expected FoldDivergenceError");
    } catch (const FoldDivergenceError& e) {
        CHECK(e.fold_index == 0);
        CHECK(e.epoch_index == 1);
    }
}

TEST_CASE("predict_fold emits one prediction per test day, chronologically") {
    Rng rng(18);
    auto returns = madl::testing::random_returns(rng, 120);
    TrainRunConfig cfg = small_run(40, 1);
    auto folds = plan_folds(returns.size(), cfg);
    ForecastModel model(small_transformer(5));
    auto preds = predict_fold(model, folds[1], returns);
    REQUIRE(preds.size() == folds[1].test_length());
    for (std::size_t i = 0; i < preds.size(); ++i) {
        CHECK(preds[i].day_index == folds[1].test_begin + i);
    }
}

TEST_CASE("no lookahead: predictions ignore data at or after the test day") {
    Rng rng(19);
    auto returns = madl::testing::random_returns(rng, 130);
    TrainRunConfig cfg = small_run(40, 2);
    auto base = run_walk_forward(small_transformer(6), cfg, returns);

    for (std::size_t probe : {45u, 90u, 128u}) {
        auto perturbed = returns;
        for (std::size_t i = probe; i < perturbed.size(); ++i) perturbed[i] += 0.5;
        auto walk = run_walk_forward(small_transformer(6), cfg, perturbed);
        for (std::size_t i = 0; i < base.predictions.size(); ++i) {
            if (base.predictions[i].day_index < probe) {
                CHECK(base.predictions[i].predicted_return ==
                      walk.predictions[i].predicted_return);
            }
        }
    }
}

TEST_CASE("identical config and seed give bit-identical results") {
    Rng rng(20);
    auto returns = madl::testing::random_returns(rng, 120);
    TrainRunConfig cfg = small_run(40, 2);
    ModelConfig mc = small_transformer(8);
    mc.dropout_rate = 0.2;  // exercise the seeded dropout path
    auto a = run_walk_forward(mc, cfg, returns);
    auto b = run_walk_forward(mc, cfg, returns);
    REQUIRE(a.predictions.size() == b.predictions.size());
    for (std::size_t i = 0; i < a.predictions.size(); ++i) {
        CHECK(a.predictions[i].predicted_return == b.predictions[i].predicted_return);
    }
    for (std::size_t f = 0; f < a.fold_results.size(); ++f) {
        CHECK(a.fold_results[f].best_checkpoint == b.fold_results[f].best_checkpoint);
    }
}
