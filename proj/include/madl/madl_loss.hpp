#pragma once

#include <span>
#include <vector>

#include "madl/tensor.hpp"

namespace madl {

struct SurrogateConfig {
    double sharpness = 100.0;  // beta; units of inverse squared-return scale
};

// Exact mean absolute directional loss:
//   (1/N) * sum_i -sign(R_i * Rhat_i) * |R_i|,  sign(0) = 0.
// Negative values mean the direction calls were profitable.
double madl_exact(std::span<const double> observed, std::span<const double> predicted);

// Smooth surrogate used for training: sign(R*Rhat) is replaced by
// tanh(beta * R * Rhat). Converges pointwise to madl_exact as beta grows,
// wherever R*Rhat != 0. Predictions are scalar tensors on the tape so the
// loss is differentiable end to end.
TensorPtr madl_surrogate(GradTape& tape, std::span<const double> observed,
                         const std::vector<TensorPtr>& predicted,
                         const SurrogateConfig& cfg = {});

}  // namespace madl
