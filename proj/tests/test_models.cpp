#include <doctest.h>

#include <cmath>

#include "madl/madl_loss.hpp"
#include "madl/model.hpp"
#include "support.hpp"

using namespace madl;

namespace {

ModelConfig tiny_transformer(std::uint64_t seed = 1) {
    ModelConfig cfg = ModelConfig::transformer_defaults();
    cfg.sequence_length = 3;
    cfg.num_heads = 2;
    cfg.key_dim = 4;
    cfg.value_dim = 4;
    cfg.model_dim = 8;
    cfg.num_attention_layers = 2;
    cfg.dropout_rate = 0.0;
    cfg.seed = seed;
    return cfg;
}

ModelConfig tiny_lstm(std::uint64_t seed = 1) {
    ModelConfig cfg = ModelConfig::lstm_defaults();
    cfg.sequence_length = 3;
    cfg.lstm_layer_sizes = {4, 3, 2};
    cfg.seed = seed;
    return cfg;
}

}  // namespace

TEST_CASE("scaled dot product attention basics") {
    GradTape tape;
    SUBCASE("single key has weight 1") {
        auto q = Tensor::create(1, 1, {1.0});
        auto out = scaled_dot_product_attention(tape, q, q, q);
        CHECK(out.output->values()[0] == doctest::Approx(1.0));
        CHECK(out.weights->values()[0] == doctest::Approx(1.0));
    }
    SUBCASE("identical keys average the values") {
        auto q = Tensor::create(1, 2, {0.3, -0.7});
        auto k = Tensor::create(2, 2, {1.0, 2.0, 1.0, 2.0});
        auto v = Tensor::create(2, 1, {3.0, 9.0});
        auto out = scaled_dot_product_attention(tape, q, k, v);
        CHECK(out.output->values()[0] == doctest::Approx(6.0));
    }
    SUBCASE("equal logits give unweighted mean of V rows") {
        // d_k=4, scores row all equal => uniform weights.
        auto q = Tensor::create(1, 4, {1, 1, 1, 1});
        auto k = Tensor::create(4, 4, {0.5, 0.5, 0.5, 0.5, 0.5, 0.5, 0.5, 0.5, 0.5, 0.5,
                                       0.5, 0.5, 0.5, 0.5, 0.5, 0.5});
        auto v = Tensor::create(4, 1, {1.0, 2.0, 3.0, 6.0});
        auto out = scaled_dot_product_attention(tape, q, k, v);
        CHECK(out.output->values()[0] == doctest::Approx(3.0));
        for (double w : out.weights->values()) CHECK(w == doctest::Approx(0.25));
    }
    SUBCASE("q/k width mismatch") {
        auto q = Tensor::create(1, 2, {1, 1});
        auto k = Tensor::create(2, 3, {1, 1, 1, 1, 1, 1});
        CHECK_THROWS_AS(scaled_dot_product_attention(tape, q, k, k), DimensionError);
    }
}

TEST_CASE("multi head attention zero projections give zero output") {
    GradTape tape;
    MultiHeadParams params;
    for (int h = 0; h < 2; ++h) {
        params.heads.push_back({Tensor::zeros(4, 2), Tensor::zeros(4, 2), Tensor::zeros(4, 3)});
    }
    params.wo = Tensor::zeros(6, 4);
    auto x = Tensor::create(3, 4, std::vector<double>(12, 1.5));
    auto out = multi_head_attention(tape, x, params);
    CHECK(out.output->rows() == 3);
    CHECK(out.output->cols() == 4);
    for (double v : out.output->values()) CHECK(v == 0.0);
}

TEST_CASE("single head reduces to attention composed with projections") {
    Rng rng(3);
    GradTape tape;
    MultiHeadParams params;
    AttentionHeadParams head{Tensor::zeros(4, 3), Tensor::zeros(4, 3), Tensor::zeros(4, 5)};
    for (auto t : {head.wq, head.wk, head.wv}) {
        for (auto& v : t->values()) v = rng.uniform(-1, 1);
    }
    params.heads.push_back(head);
    params.wo = Tensor::zeros(5, 4);
    for (auto& v : params.wo->values()) v = rng.uniform(-1, 1);
    auto x = Tensor::zeros(3, 4);
    for (auto& v : x->values()) v = rng.uniform(-1, 1);

    auto mh = multi_head_attention(tape, x, params);
    auto att = scaled_dot_product_attention(tape, tape.matmul(x, head.wq),
                                            tape.matmul(x, head.wk),
                                            tape.matmul(x, head.wv));
    auto direct = tape.matmul(att.output, params.wo);
    for (std::size_t i = 0; i < direct->size(); ++i) {
        CHECK(mh.output->values()[i] == doctest::Approx(direct->values()[i]));
    }
}

TEST_CASE("multi head attention output shape equals input shape") {
    Rng rng(9);
    for (int trial = 0; trial < 30; ++trial) {
        GradTape tape;
        const std::size_t h = 1 + rng.next_u64() % 4;
        const std::size_t dk = 1 + rng.next_u64() % 8;
        const std::size_t dv = 1 + rng.next_u64() % 8;
        const std::size_t dm = 1 + rng.next_u64() % 8;
        const std::size_t L = 1 + rng.next_u64() % 8;
        MultiHeadParams params;
        for (std::size_t i = 0; i < h; ++i) {
            AttentionHeadParams head{Tensor::zeros(dm, dk), Tensor::zeros(dm, dk),
                                     Tensor::zeros(dm, dv)};
            for (auto t : {head.wq, head.wk, head.wv}) {
                for (auto& v : t->values()) v = rng.uniform(-1, 1);
            }
            params.heads.push_back(head);
        }
        params.wo = Tensor::zeros(h * dv, dm);
        for (auto& v : params.wo->values()) v = rng.uniform(-1, 1);
        auto x = Tensor::zeros(L, dm);
        for (auto& v : x->values()) v = rng.uniform(-1, 1);
        auto out = multi_head_attention(tape, x, params);
        CHECK(out.output->rows() == L);
        CHECK(out.output->cols() == dm);
        // Attention weight rows sum to 1 for every head.
        for (const auto& w : out.weights) {
            for (std::size_t i = 0; i < w->rows(); ++i) {
                double sum = 0.0;
                for (std::size_t j = 0; j < w->cols(); ++j) sum += w->at(i, j);
                CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
            }
        }
    }
}

TEST_CASE("table-1 dimensions: h=4 d_v=64 d_model=256") {
    ModelConfig cfg = ModelConfig::transformer_defaults();
    ForecastModel model(cfg);
    CHECK(model.parameter("layer0.Wo")->rows() == 256);  // h * d_v
    CHECK(model.parameter("layer0.Wo")->cols() == 256);
    GradTape tape;
    std::vector<double> window(cfg.sequence_length, 0.01);
    model.set_train_mode(false);
    auto out = model.forward(tape, window);
    CHECK(out->is_scalar());
}

TEST_CASE("relu output activation never predicts negative") {
    for (ModelFamily family : {ModelFamily::transformer, ModelFamily::lstm}) {
        ModelConfig cfg = family == ModelFamily::transformer ? tiny_transformer(7)
                                                             : tiny_lstm(7);
        cfg.output_activation = OutputActivation::relu;
        ForecastModel model(cfg);
        Rng rng(21);
        for (int trial = 0; trial < 50; ++trial) {
            auto window = madl::testing::random_returns(rng, cfg.sequence_length, 0.05);
            CHECK(model.predict(window) >= 0.0);
        }
    }
}

TEST_CASE("eval mode is deterministic even with dropout configured") {
    ModelConfig cfg = tiny_transformer(11);
    cfg.dropout_rate = 0.4;
    ForecastModel model(cfg);
    std::vector<double> window = {0.01, -0.02, 0.005};
    CHECK(model.predict(window) == model.predict(window));
}

TEST_CASE("transformer wrong window length is a usage error") {
    ForecastModel model(tiny_transformer());
    GradTape tape;
    std::vector<double> bad = {0.01, 0.02};
    CHECK_THROWS_AS(model.forward(tape, bad), UsageError);
}

TEST_CASE("lstm with zero weights predicts the output bias") {
    ModelConfig cfg = tiny_lstm(1);
    cfg.output_activation = OutputActivation::relu;
    ForecastModel model(cfg);
    for (const auto& [name, t] : model.parameters()) {
        std::fill(t->values().begin(), t->values().end(), 0.0);
    }
    model.parameter("out.b")->values()[0] = -0.5;  // relu clamps to 0
    std::vector<double> window = {0.01, -0.02, 0.005};
    CHECK(model.predict(window) == 0.0);
    model.parameter("out.b")->values()[0] = 0.25;
    CHECK(model.predict(window) == doctest::Approx(0.25));
}

TEST_CASE("table-1 lstm sizes produce one scalar") {
    ModelConfig cfg = ModelConfig::lstm_defaults();
    cfg.sequence_length = 4;
    cfg.seed = 3;
    ForecastModel model(cfg);
    std::vector<double> window = {0.01, -0.02, 0.005, 0.003};
    const double p = model.predict(window);
    CHECK(std::isfinite(p));
}

TEST_CASE("single-step 2-unit lstm matches hand-evaluated gates") {
    ModelConfig cfg;
    cfg.family = ModelFamily::lstm;
    cfg.sequence_length = 1;
    cfg.lstm_layer_sizes = {2};
    cfg.dropout_rate = 0.0;
    cfg.l2_coefficient = 0.0;
    cfg.output_activation = OutputActivation::linear;
    cfg.seed = 17;
    ForecastModel model(cfg);

    const double x = 0.3;
    // Hand evaluation of the gate equations from the stored weights; h=c=0
    // at the first step so the recurrent term drops out.
    const auto& wx = model.parameter("lstm0.Wx")->values();  // [1 x 8], gates i,f,g,o
    const auto& wout = model.parameter("out.W")->values();
    auto sigmoid = [](double v) { return 1.0 / (1.0 + std::exp(-v)); };
    double expected = 0.0;
    for (int unit = 0; unit < 2; ++unit) {
        const double gi = sigmoid(x * wx[0 + unit]);
        const double gg = std::tanh(x * wx[4 + unit]);
        const double go = sigmoid(x * wx[6 + unit]);
        const double c = gi * gg;
        expected += go * std::tanh(c) * wout[unit];
    }
    std::vector<double> window = {x};
    CHECK(model.predict(window) == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("permutation sensitivity follows positional encoding") {
    std::vector<double> window = {0.02, -0.01, 0.03};
    std::vector<double> swapped = {0.03, -0.01, 0.02};  // last element moved

    SUBCASE("with positional encoding the output changes") {
        ModelConfig cfg = tiny_transformer(5);
        cfg.positional_encoding = PositionalEncoding::sinusoidal;
        ForecastModel model(cfg);
        CHECK(model.predict(window) != model.predict(swapped));
    }
    SUBCASE("without positional encoding the final-step readout still changes "
            "when the last element moves") {
        // Attention itself is permutation-equivariant, but the readout takes
        // the final time step, so moving the last element changes the query.
        ModelConfig cfg = tiny_transformer(5);
        cfg.positional_encoding = PositionalEncoding::none;
        ForecastModel model(cfg);
        CHECK(model.predict(window) != model.predict(swapped));
    }
    SUBCASE("without positional encoding, permuting only the prefix leaves the "
            "output unchanged") {
        ModelConfig cfg = tiny_transformer(5);
        cfg.positional_encoding = PositionalEncoding::none;
        ForecastModel model(cfg);
        std::vector<double> prefix_swapped = {-0.01, 0.02, 0.03};
        CHECK(model.predict(window) ==
              doctest::Approx(model.predict(prefix_swapped)).epsilon(1e-12));
    }
}

TEST_CASE("checkpoint round trip") {
    for (ModelFamily family : {ModelFamily::transformer, ModelFamily::lstm}) {
        ModelConfig cfg = family == ModelFamily::transformer ? tiny_transformer(23)
                                                             : tiny_lstm(23);
        ForecastModel model(cfg);
        const auto bytes = model.save_checkpoint();

        SUBCASE("save/load/save is byte identical") {
            ForecastModel loaded = ForecastModel::load_checkpoint(bytes);
            CHECK(loaded.save_checkpoint() == bytes);
        }
        SUBCASE("truncated blob is a format error") {
            std::span<const std::uint8_t> cut(bytes.data(), bytes.size() - 7);
            CHECK_THROWS_AS(ForecastModel::load_checkpoint(cut), FormatError);
        }
        SUBCASE("corrupt magic is a format error") {
            auto bad = bytes;
            bad[0] = 'X';
            CHECK_THROWS_AS(ForecastModel::load_checkpoint(bad), FormatError);
        }
        SUBCASE("loaded model predicts identically on random windows") {
            ForecastModel loaded = ForecastModel::load_checkpoint(bytes);
            Rng rng(99);
            for (int trial = 0; trial < 100; ++trial) {
                auto window = madl::testing::random_returns(rng, cfg.sequence_length);
                CHECK(model.predict(window) == loaded.predict(window));
            }
        }
    }
}

TEST_CASE("end-to-end gradients match finite differences at tiny dims") {
    Rng rng(31);
    for (ModelFamily family : {ModelFamily::transformer, ModelFamily::lstm}) {
        ModelConfig cfg = family == ModelFamily::transformer ? tiny_transformer(41)
                                                             : tiny_lstm(41);
        cfg.num_attention_layers = 1;
        ForecastModel model(cfg);
        model.set_train_mode(true);

        std::vector<std::vector<double>> windows;
        std::vector<double> targets;
        for (int s = 0; s < 4; ++s) {
            windows.push_back(madl::testing::random_returns(rng, cfg.sequence_length));
            targets.push_back(rng.normal(0, 0.02));
        }
        auto loss_value = [&] {
            GradTape t;
            std::vector<TensorPtr> preds;
            for (const auto& w : windows) preds.push_back(model.forward(t, w));
            return madl_surrogate(t, targets, preds)->values()[0];
        };
        auto run_backward = [&] {
            GradTape t;
            std::vector<TensorPtr> preds;
            for (const auto& w : windows) preds.push_back(model.forward(t, w));
            t.backward(madl_surrogate(t, targets, preds));
        };
        const double err = madl::testing::max_relative_gradient_error(
            model.parameter_tensors(), loss_value, run_backward);
        CHECK(err < 1e-4);
    }
}
