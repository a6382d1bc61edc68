#pragma once

#include <cstdint>
#include <vector>

#include "madl/tensor.hpp"

namespace madl {

struct AdamConfig {
    double learning_rate = 0.001;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    double l2_coefficient = 0.0;  // added to gradients as l2 * theta
};

// Bias-corrected Adam over a fixed parameter list. Moment buffers are laid
// out per parameter in the list order given at construction.
class AdamState {
public:
    AdamState(AdamConfig cfg, const std::vector<TensorPtr>& params);

    // Consumes params[i]->grad(); throws UsageError when a grad is missing.
    void step(const std::vector<TensorPtr>& params);

    std::int64_t step_count() const { return step_count_; }
    const AdamConfig& config() const { return cfg_; }

private:
    AdamConfig cfg_;
    std::vector<std::vector<double>> m_;
    std::vector<std::vector<double>> v_;
    std::int64_t step_count_ = 0;
};

}  // namespace madl
