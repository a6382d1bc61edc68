#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "madl/tensor.hpp"

namespace madl {

enum class ModelFamily { transformer, lstm };
enum class OutputActivation { relu, linear };
enum class PositionalEncoding { sinusoidal, none };

struct ModelConfig {
    ModelFamily family = ModelFamily::transformer;
    std::size_t sequence_length = 4;  // L, days

    // Transformer stack.
    std::size_t num_heads = 4;
    std::size_t key_dim = 64;    // d_k
    std::size_t value_dim = 64;  // d_v
    std::size_t model_dim = 256; // d_model
    std::size_t num_attention_layers = 2;
    PositionalEncoding positional_encoding = PositionalEncoding::sinusoidal;

    // LSTM stack; hidden sizes per layer, first layer consumes the scalar
    // return sequence.
    std::vector<std::size_t> lstm_layer_sizes = {512, 256, 128};

    double dropout_rate = 0.3;
    double l2_coefficient = 0.02;
    double learning_rate = 0.01;
    OutputActivation output_activation = OutputActivation::linear;
    std::uint64_t seed = 0;

    void validate() const;  // throws ConfigError

    static ModelConfig transformer_defaults();  // Table-1 transformer profile
    static ModelConfig lstm_defaults();         // Table-1 LSTM profile
};

struct AttentionResult {
    TensorPtr output;
    TensorPtr weights;  // softmax(QK^T / sqrt(d_k)); rows sum to 1
};

// Attention(Q,K,V) = softmax(QK^T / sqrt(d_k)) V.
AttentionResult scaled_dot_product_attention(GradTape& tape, const TensorPtr& q,
                                             const TensorPtr& k, const TensorPtr& v);

struct AttentionHeadParams {
    TensorPtr wq;  // [d_model x d_k]
    TensorPtr wk;  // [d_model x d_k]
    TensorPtr wv;  // [d_model x d_v]
};

struct MultiHeadParams {
    std::vector<AttentionHeadParams> heads;
    TensorPtr wo;  // [h*d_v x d_model]
};

struct MultiHeadResult {
    TensorPtr output;                  // same shape as input
    std::vector<TensorPtr> weights;    // per head
};

// Self-attention: Q = K = V = x, independently projected per head,
// concatenated and projected back to d_model.
MultiHeadResult multi_head_attention(GradTape& tape, const TensorPtr& x,
                                     const MultiHeadParams& params);

// One forecaster instance: named parameters plus a train/eval switch.
// Confined to one worker at a time.
class ForecastModel {
public:
    explicit ForecastModel(const ModelConfig& cfg);

    const ModelConfig& config() const { return cfg_; }

    bool train_mode() const { return train_mode_; }
    void set_train_mode(bool m) { train_mode_ = m; }

    // Forward pass recorded on the tape; returns a scalar tensor. Dropout
    // fires only in train mode, drawing from the model's seeded generator.
    TensorPtr forward(GradTape& tape, std::span<const double> window);

    // Eval-mode convenience: deterministic, leaves no tape behind.
    double predict(std::span<const double> window);

    const std::vector<std::pair<std::string, TensorPtr>>& parameters() const {
        return params_;
    }
    std::vector<TensorPtr> parameter_tensors() const;
    const TensorPtr& parameter(const std::string& name) const;
    void zero_grads();
    bool parameters_finite() const;

    // Attention weights of the most recent forward, [layer][head].
    const std::vector<std::vector<TensorPtr>>& last_attention_weights() const {
        return attention_weights_;
    }

    std::vector<std::uint8_t> save_checkpoint() const;
    static ForecastModel load_checkpoint(std::span<const std::uint8_t> blob);

private:
    ForecastModel(const ModelConfig& cfg, bool defer_init);

    void build_parameters();
    void initialize_parameters();
    TensorPtr add_parameter(const std::string& name, std::size_t rows, std::size_t cols);

    TensorPtr forward_transformer(GradTape& tape, std::span<const double> window);
    TensorPtr forward_lstm(GradTape& tape, std::span<const double> window);
    TensorPtr output_head(GradTape& tape, const TensorPtr& features);

    ModelConfig cfg_;
    std::vector<std::pair<std::string, TensorPtr>> params_;
    bool train_mode_ = true;
    Rng dropout_rng_;
    std::vector<std::vector<TensorPtr>> attention_weights_;
};

}  // namespace madl
