#include "madl/madl_loss.hpp"

#include <cmath>

namespace madl {

namespace {

double sign(double x) {
    if (x > 0.0) return 1.0;
    if (x < 0.0) return -1.0;
    return 0.0;
}

}  // namespace

double madl_exact(std::span<const double> observed, std::span<const double> predicted) {
    if (observed.empty()) throw UsageError("madl_exact: empty return list");
    if (observed.size() != predicted.size()) {
        throw UsageError("madl_exact: observed/predicted length mismatch");
    }
    double acc = 0.0;
    for (std::size_t i = 0; i < observed.size(); ++i) {
        if (!std::isfinite(observed[i]) || !std::isfinite(predicted[i])) {
            throw NumericError("madl_exact: non-finite return pair");
        }
        acc += -sign(observed[i] * predicted[i]) * std::abs(observed[i]);
    }
    return acc / static_cast<double>(observed.size());
}

TensorPtr madl_surrogate(GradTape& tape, std::span<const double> observed,
                         const std::vector<TensorPtr>& predicted,
                         const SurrogateConfig& cfg) {
    if (cfg.sharpness <= 0.0 || !std::isfinite(cfg.sharpness)) {
        throw ConfigError("madl_surrogate: sharpness must be finite and > 0");
    }
    if (observed.empty()) throw UsageError("madl_surrogate: empty return list");
    if (observed.size() != predicted.size()) {
        throw UsageError("madl_surrogate: observed/predicted length mismatch");
    }
    TensorPtr acc;
    for (std::size_t i = 0; i < observed.size(); ++i) {
        // term_i = -|R_i| * tanh(beta * R_i * Rhat_i)
        TensorPtr t = tape.scale(predicted[i], cfg.sharpness * observed[i]);
        TensorPtr term = tape.scale(tape.tanh(t), -std::abs(observed[i]));
        acc = acc ? tape.add(acc, term) : term;
    }
    return tape.scale(acc, 1.0 / static_cast<double>(observed.size()));
}

}  // namespace madl
