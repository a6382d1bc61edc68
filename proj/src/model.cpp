#include "madl/model.hpp"

#include <cmath>
#include <cstring>
#include <sstream>

namespace madl {

void ModelConfig::validate() const {
    if (sequence_length == 0) throw ConfigError("sequence_length must be positive");
    if (dropout_rate < 0.0 || dropout_rate >= 1.0) {
        throw ConfigError("dropout_rate must be in [0,1)");
    }
    if (l2_coefficient < 0.0) throw ConfigError("l2_coefficient must be >= 0");
    if (learning_rate <= 0.0) throw ConfigError("learning_rate must be > 0");
    if (family == ModelFamily::transformer) {
        if (num_heads == 0 || key_dim == 0 || value_dim == 0 || model_dim == 0 ||
            num_attention_layers == 0) {
            throw ConfigError("transformer dimensions must be positive");
        }
    } else {
        if (lstm_layer_sizes.empty()) {
            throw ConfigError("lstm needs at least one layer size");
        }
        for (std::size_t s : lstm_layer_sizes) {
            if (s == 0) throw ConfigError("lstm layer sizes must be positive");
        }
    }
}

ModelConfig ModelConfig::transformer_defaults() {
    ModelConfig cfg;
    cfg.family = ModelFamily::transformer;
    cfg.sequence_length = 4;
    cfg.num_heads = 4;
    cfg.key_dim = 64;
    cfg.value_dim = 64;
    cfg.model_dim = 256;
    cfg.num_attention_layers = 2;
    cfg.dropout_rate = 0.3;
    cfg.l2_coefficient = 0.02;
    cfg.learning_rate = 0.01;
    return cfg;
}

ModelConfig ModelConfig::lstm_defaults() {
    ModelConfig cfg;
    cfg.family = ModelFamily::lstm;
    cfg.sequence_length = 4;
    cfg.lstm_layer_sizes = {512, 256, 128};
    cfg.dropout_rate = 0.0;
    cfg.l2_coefficient = 1e-6;
    cfg.learning_rate = 0.5;
    return cfg;
}

AttentionResult scaled_dot_product_attention(GradTape& tape, const TensorPtr& q,
                                             const TensorPtr& k, const TensorPtr& v) {
    if (q->cols() != k->cols()) {
        throw DimensionError("attention: Q cols " + q->shape_str() + " vs K cols " +
                             k->shape_str());
    }
    if (k->rows() != v->rows()) {
        throw DimensionError("attention: K rows " + k->shape_str() + " vs V rows " +
                             v->shape_str());
    }
    const double dk = static_cast<double>(q->cols());
    TensorPtr scores = tape.scale(tape.matmul(q, tape.transpose(k)), 1.0 / std::sqrt(dk));
    TensorPtr weights = tape.softmax_rows(scores);
    return {tape.matmul(weights, v), weights};
}

MultiHeadResult multi_head_attention(GradTape& tape, const TensorPtr& x,
                                     const MultiHeadParams& params) {
    if (params.heads.empty()) throw ConfigError("multi_head_attention: no heads");
    MultiHeadResult result;
    std::vector<TensorPtr> head_outputs;
    head_outputs.reserve(params.heads.size());
    for (const auto& head : params.heads) {
        TensorPtr q = tape.matmul(x, head.wq);
        TensorPtr k = tape.matmul(x, head.wk);
        TensorPtr v = tape.matmul(x, head.wv);
        AttentionResult att = scaled_dot_product_attention(tape, q, k, v);
        head_outputs.push_back(att.output);
        result.weights.push_back(att.weights);
    }
    TensorPtr concat =
        head_outputs.size() == 1 ? head_outputs[0] : tape.concat_cols(head_outputs);
    if (concat->cols() != params.wo->rows()) {
        throw DimensionError("multi_head_attention: concat width " +
                             std::to_string(concat->cols()) + " vs W_O " +
                             params.wo->shape_str());
    }
    result.output = tape.matmul(concat, params.wo);
    return result;
}

ForecastModel::ForecastModel(const ModelConfig& cfg) : ForecastModel(cfg, false) {}

ForecastModel::ForecastModel(const ModelConfig& cfg, bool defer_init)
    : cfg_(cfg), dropout_rng_(derive_seed(cfg.seed, "dropout")) {
    cfg_.validate();
    build_parameters();
    if (!defer_init) initialize_parameters();
}

TensorPtr ForecastModel::add_parameter(const std::string& name, std::size_t rows,
                                       std::size_t cols) {
    TensorPtr t = Tensor::zeros(rows, cols, /*requires_grad=*/true);
    params_.emplace_back(name, t);
    return t;
}

void ForecastModel::build_parameters() {
    if (cfg_.family == ModelFamily::transformer) {
        add_parameter("embed.W", 1, cfg_.model_dim);
        add_parameter("embed.b", 1, cfg_.model_dim);
        for (std::size_t l = 0; l < cfg_.num_attention_layers; ++l) {
            const std::string prefix = "layer" + std::to_string(l) + ".";
            for (std::size_t h = 0; h < cfg_.num_heads; ++h) {
                const std::string hp = prefix + "head" + std::to_string(h) + ".";
                add_parameter(hp + "Wq", cfg_.model_dim, cfg_.key_dim);
                add_parameter(hp + "Wk", cfg_.model_dim, cfg_.key_dim);
                add_parameter(hp + "Wv", cfg_.model_dim, cfg_.value_dim);
            }
            add_parameter(prefix + "Wo", cfg_.num_heads * cfg_.value_dim, cfg_.model_dim);
            add_parameter(prefix + "ln.gain", 1, cfg_.model_dim);
            add_parameter(prefix + "ln.bias", 1, cfg_.model_dim);
        }
        add_parameter("out.W", cfg_.model_dim, 1);
        add_parameter("out.b", 1, 1);
    } else {
        std::size_t input_size = 1;
        for (std::size_t l = 0; l < cfg_.lstm_layer_sizes.size(); ++l) {
            const std::size_t hidden = cfg_.lstm_layer_sizes[l];
            const std::string prefix = "lstm" + std::to_string(l) + ".";
            add_parameter(prefix + "Wx", input_size, 4 * hidden);
            add_parameter(prefix + "Wh", hidden, 4 * hidden);
            add_parameter(prefix + "b", 1, 4 * hidden);
            input_size = hidden;
        }
        add_parameter("out.W", cfg_.lstm_layer_sizes.back(), 1);
        add_parameter("out.b", 1, 1);
    }
}

void ForecastModel::initialize_parameters() {
    Rng rng(derive_seed(cfg_.seed, "init"));
    for (auto& [name, t] : params_) {
        const bool is_bias = name.ends_with(".b") || name.ends_with(".bias");
        const bool is_gain = name.ends_with(".gain");
        if (is_gain) {
            std::fill(t->values().begin(), t->values().end(), 1.0);
        } else if (is_bias) {
            std::fill(t->values().begin(), t->values().end(), 0.0);
        } else {
            // Glorot uniform: +-sqrt(6 / (fan_in + fan_out)).
            const double bound =
                std::sqrt(6.0 / static_cast<double>(t->rows() + t->cols()));
            for (double& v : t->values()) v = rng.uniform(-bound, bound);
        }
    }
}

std::vector<TensorPtr> ForecastModel::parameter_tensors() const {
    std::vector<TensorPtr> out;
    out.reserve(params_.size());
    for (const auto& [name, t] : params_) out.push_back(t);
    return out;
}

const TensorPtr& ForecastModel::parameter(const std::string& name) const {
    for (const auto& [n, t] : params_) {
        if (n == name) return t;
    }
    throw UsageError("unknown parameter: " + name);
}

void ForecastModel::zero_grads() {
    for (auto& [name, t] : params_) t->zero_grad();
}

bool ForecastModel::parameters_finite() const {
    for (const auto& [name, t] : params_) {
        if (!t->all_finite()) return false;
    }
    return true;
}

TensorPtr ForecastModel::forward(GradTape& tape, std::span<const double> window) {
    if (window.size() != cfg_.sequence_length) {
        throw UsageError("window length " + std::to_string(window.size()) +
                         " != sequence_length " + std::to_string(cfg_.sequence_length));
    }
    attention_weights_.clear();
    return cfg_.family == ModelFamily::transformer ? forward_transformer(tape, window)
                                                   : forward_lstm(tape, window);
}

double ForecastModel::predict(std::span<const double> window) {
    const bool was_training = train_mode_;
    train_mode_ = false;
    GradTape tape;
    double out = forward(tape, window)->values()[0];
    train_mode_ = was_training;
    return out;
}

TensorPtr ForecastModel::output_head(GradTape& tape, const TensorPtr& features) {
    TensorPtr y = tape.add(tape.matmul(features, parameter("out.W")), parameter("out.b"));
    if (cfg_.output_activation == OutputActivation::relu) y = tape.relu(y);
    return y;
}

TensorPtr ForecastModel::forward_transformer(GradTape& tape,
                                             std::span<const double> window) {
    const std::size_t L = cfg_.sequence_length;
    // Learned linear lift of the scalar sequence into d_model.
    TensorPtr seq = Tensor::create(L, 1, {window.begin(), window.end()});
    TensorPtr x = tape.add_rowvec(tape.matmul(seq, parameter("embed.W")),
                                  parameter("embed.b"));
    if (cfg_.positional_encoding == PositionalEncoding::sinusoidal) {
        TensorPtr pe = Tensor::zeros(L, cfg_.model_dim);
        for (std::size_t pos = 0; pos < L; ++pos) {
            for (std::size_t j = 0; j < cfg_.model_dim; ++j) {
                const double angle =
                    static_cast<double>(pos) /
                    std::pow(10000.0, 2.0 * std::floor(static_cast<double>(j) / 2.0) /
                                          static_cast<double>(cfg_.model_dim));
                pe->values()[pos * cfg_.model_dim + j] =
                    (j % 2 == 0) ? std::sin(angle) : std::cos(angle);
            }
        }
        x = tape.add(x, pe);
    }
    for (std::size_t l = 0; l < cfg_.num_attention_layers; ++l) {
        const std::string prefix = "layer" + std::to_string(l) + ".";
        MultiHeadParams mha;
        for (std::size_t h = 0; h < cfg_.num_heads; ++h) {
            const std::string hp = prefix + "head" + std::to_string(h) + ".";
            mha.heads.push_back({parameter(hp + "Wq"), parameter(hp + "Wk"),
                                 parameter(hp + "Wv")});
        }
        mha.wo = parameter(prefix + "Wo");
        MultiHeadResult att = multi_head_attention(tape, x, mha);
        attention_weights_.push_back(att.weights);
        TensorPtr sub = att.output;
        if (train_mode_ && cfg_.dropout_rate > 0.0) {
            sub = tape.dropout(sub, cfg_.dropout_rate, dropout_rng_);
        }
        // Residual add then layer normalization.
        x = tape.layer_norm(tape.add(x, sub), parameter(prefix + "ln.gain"),
                            parameter(prefix + "ln.bias"));
    }
    return output_head(tape, tape.row(x, L - 1));
}

TensorPtr ForecastModel::forward_lstm(GradTape& tape, std::span<const double> window) {
    const std::size_t L = cfg_.sequence_length;
    // Inputs per step; layer 0 sees the raw scalar returns.
    std::vector<TensorPtr> inputs;
    inputs.reserve(L);
    for (double r : window) inputs.push_back(Tensor::create(1, 1, {r}));

    for (std::size_t l = 0; l < cfg_.lstm_layer_sizes.size(); ++l) {
        const std::size_t hidden = cfg_.lstm_layer_sizes[l];
        const std::string prefix = "lstm" + std::to_string(l) + ".";
        const TensorPtr& wx = parameter(prefix + "Wx");
        const TensorPtr& wh = parameter(prefix + "Wh");
        const TensorPtr& b = parameter(prefix + "b");
        TensorPtr h = Tensor::zeros(1, hidden);
        TensorPtr c = Tensor::zeros(1, hidden);
        std::vector<TensorPtr> outputs;
        outputs.reserve(L);
        for (std::size_t t = 0; t < L; ++t) {
            TensorPtr z = tape.add(tape.add(tape.matmul(inputs[t], wx),
                                            tape.matmul(h, wh)),
                                   b);
            // Gate order: input, forget, candidate, output.
            TensorPtr gi = tape.sigmoid(tape.slice_cols(z, 0, hidden));
            TensorPtr gf = tape.sigmoid(tape.slice_cols(z, hidden, 2 * hidden));
            TensorPtr gc = tape.tanh(tape.slice_cols(z, 2 * hidden, 3 * hidden));
            TensorPtr go = tape.sigmoid(tape.slice_cols(z, 3 * hidden, 4 * hidden));
            c = tape.add(tape.mul(gf, c), tape.mul(gi, gc));
            h = tape.mul(go, tape.tanh(c));
            outputs.push_back(h);
        }
        const bool last_layer = (l + 1 == cfg_.lstm_layer_sizes.size());
        if (last_layer) {
            // The last layer returns only its final hidden state.
            inputs.assign(1, outputs.back());
        } else {
            if (train_mode_ && cfg_.dropout_rate > 0.0) {
                for (auto& o : outputs) o = tape.dropout(o, cfg_.dropout_rate, dropout_rng_);
            }
            inputs = std::move(outputs);
        }
    }
    return output_head(tape, inputs[0]);
}

// ---------------------------------------------------------------------------
// Checkpoint format: little-endian throughout.
//   magic "MADLCKPT" | u32 version | u8 family | config block |
//   u32 param count | per param: u32 name_len, name, u32 rank, u64 dims,
//   f64 values.

namespace {

constexpr char kMagic[8] = {'M', 'A', 'D', 'L', 'C', 'K', 'P', 'T'};
constexpr std::uint32_t kVersion = 1;

class Writer {
public:
    template <typename T>
    void put(T v) {
        static_assert(std::is_trivially_copyable_v<T>);
        const auto* p = reinterpret_cast<const std::uint8_t*>(&v);
        buf_.insert(buf_.end(), p, p + sizeof(T));
    }
    void put_bytes(const void* p, std::size_t n) {
        const auto* b = static_cast<const std::uint8_t*>(p);
        buf_.insert(buf_.end(), b, b + n);
    }
    std::vector<std::uint8_t> take() { return std::move(buf_); }

private:
    std::vector<std::uint8_t> buf_;
};

class Reader {
public:
    explicit Reader(std::span<const std::uint8_t> blob) : blob_(blob) {}

    template <typename T>
    T get(const char* what) {
        static_assert(std::is_trivially_copyable_v<T>);
        if (pos_ + sizeof(T) > blob_.size()) {
            throw FormatError(pos_, std::string("truncated reading ") + what);
        }
        T v;
        std::memcpy(&v, blob_.data() + pos_, sizeof(T));
        pos_ += sizeof(T);
        return v;
    }
    std::string get_string(std::size_t n, const char* what) {
        if (pos_ + n > blob_.size()) {
            throw FormatError(pos_, std::string("truncated reading ") + what);
        }
        std::string s(reinterpret_cast<const char*>(blob_.data() + pos_), n);
        pos_ += n;
        return s;
    }
    std::size_t pos() const { return pos_; }
    bool at_end() const { return pos_ == blob_.size(); }

private:
    std::span<const std::uint8_t> blob_;
    std::size_t pos_ = 0;
};

}  // namespace

std::vector<std::uint8_t> ForecastModel::save_checkpoint() const {
    Writer w;
    w.put_bytes(kMagic, sizeof(kMagic));
    w.put<std::uint32_t>(kVersion);
    w.put<std::uint8_t>(cfg_.family == ModelFamily::transformer ? 0 : 1);
    w.put<std::uint32_t>(static_cast<std::uint32_t>(cfg_.sequence_length));
    w.put<std::uint32_t>(static_cast<std::uint32_t>(cfg_.num_heads));
    w.put<std::uint32_t>(static_cast<std::uint32_t>(cfg_.key_dim));
    w.put<std::uint32_t>(static_cast<std::uint32_t>(cfg_.value_dim));
    w.put<std::uint32_t>(static_cast<std::uint32_t>(cfg_.model_dim));
    w.put<std::uint32_t>(static_cast<std::uint32_t>(cfg_.num_attention_layers));
    w.put<std::uint32_t>(static_cast<std::uint32_t>(cfg_.lstm_layer_sizes.size()));
    for (std::size_t s : cfg_.lstm_layer_sizes) {
        w.put<std::uint32_t>(static_cast<std::uint32_t>(s));
    }
    w.put<double>(cfg_.dropout_rate);
    w.put<double>(cfg_.l2_coefficient);
    w.put<double>(cfg_.learning_rate);
    w.put<std::uint8_t>(cfg_.output_activation == OutputActivation::relu ? 1 : 0);
    w.put<std::uint8_t>(cfg_.positional_encoding == PositionalEncoding::sinusoidal ? 1 : 0);
    w.put<std::uint64_t>(cfg_.seed);
    w.put<std::uint32_t>(static_cast<std::uint32_t>(params_.size()));
    for (const auto& [name, t] : params_) {
        w.put<std::uint32_t>(static_cast<std::uint32_t>(name.size()));
        w.put_bytes(name.data(), name.size());
        w.put<std::uint32_t>(2);
        w.put<std::uint64_t>(t->rows());
        w.put<std::uint64_t>(t->cols());
        for (double v : t->values()) w.put<double>(v);
    }
    return w.take();
}

ForecastModel ForecastModel::load_checkpoint(std::span<const std::uint8_t> blob) {
    Reader r(blob);
    const std::string magic = r.get_string(sizeof(kMagic), "magic");
    if (std::memcmp(magic.data(), kMagic, sizeof(kMagic)) != 0) {
        throw FormatError(0, "bad magic");
    }
    const auto version = r.get<std::uint32_t>("version");
    if (version != kVersion) {
        throw FormatError(sizeof(kMagic), "unsupported version " + std::to_string(version));
    }
    ModelConfig cfg;
    const auto family = r.get<std::uint8_t>("family");
    if (family > 1) throw FormatError(r.pos() - 1, "bad family tag");
    cfg.family = family == 0 ? ModelFamily::transformer : ModelFamily::lstm;
    cfg.sequence_length = r.get<std::uint32_t>("sequence_length");
    cfg.num_heads = r.get<std::uint32_t>("num_heads");
    cfg.key_dim = r.get<std::uint32_t>("key_dim");
    cfg.value_dim = r.get<std::uint32_t>("value_dim");
    cfg.model_dim = r.get<std::uint32_t>("model_dim");
    cfg.num_attention_layers = r.get<std::uint32_t>("num_attention_layers");
    const auto n_lstm = r.get<std::uint32_t>("lstm layer count");
    cfg.lstm_layer_sizes.clear();
    for (std::uint32_t i = 0; i < n_lstm; ++i) {
        cfg.lstm_layer_sizes.push_back(r.get<std::uint32_t>("lstm layer size"));
    }
    cfg.dropout_rate = r.get<double>("dropout_rate");
    cfg.l2_coefficient = r.get<double>("l2_coefficient");
    cfg.learning_rate = r.get<double>("learning_rate");
    cfg.output_activation =
        r.get<std::uint8_t>("output_activation") ? OutputActivation::relu
                                                 : OutputActivation::linear;
    cfg.positional_encoding =
        r.get<std::uint8_t>("positional_encoding") ? PositionalEncoding::sinusoidal
                                                   : PositionalEncoding::none;
    cfg.seed = r.get<std::uint64_t>("seed");

    ForecastModel model(cfg, /*defer_init=*/true);
    const auto n_params = r.get<std::uint32_t>("param count");
    if (n_params != model.params_.size()) {
        throw FormatError(r.pos() - 4, "parameter count " + std::to_string(n_params) +
                                           " does not match config (expected " +
                                           std::to_string(model.params_.size()) + ")");
    }
    for (auto& [name, t] : model.params_) {
        const auto name_len = r.get<std::uint32_t>("param name length");
        const std::string stored = r.get_string(name_len, "param name");
        if (stored != name) {
            throw FormatError(r.pos() - name_len,
                              "parameter name mismatch: got '" + stored + "', expected '" +
                                  name + "'");
        }
        const auto rank = r.get<std::uint32_t>("param rank");
        if (rank != 2) throw FormatError(r.pos() - 4, "unsupported rank");
        const auto rows = r.get<std::uint64_t>("param rows");
        const auto cols = r.get<std::uint64_t>("param cols");
        if (rows != t->rows() || cols != t->cols()) {
            throw FormatError(r.pos() - 16, "parameter shape mismatch for '" + name + "'");
        }
        for (double& v : t->values()) v = r.get<double>("param value");
    }
    if (!r.at_end()) {
        throw FormatError(r.pos(), "trailing bytes after last parameter");
    }
    return model;
}

}  // namespace madl
