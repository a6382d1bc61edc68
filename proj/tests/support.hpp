#pragma once

#include <cmath>
#include <functional>
#include <vector>

#include "madl/tensor.hpp"

namespace madl::testing {

// Central finite differences over every entry of every parameter tensor.
// `loss_fn` must rebuild the graph from the parameters' current values.
inline double max_relative_gradient_error(
    const std::vector<TensorPtr>& params, const std::function<double()>& loss_fn,
    const std::function<void()>& run_backward, double h = 1e-5) {
    for (const auto& p : params) p->zero_grad();
    run_backward();
    double worst = 0.0;
    for (const auto& p : params) {
        for (std::size_t i = 0; i < p->size(); ++i) {
            const double orig = p->values()[i];
            p->values()[i] = orig + h;
            const double up = loss_fn();
            p->values()[i] = orig - h;
            const double down = loss_fn();
            p->values()[i] = orig;
            const double numeric = (up - down) / (2.0 * h);
            const double analytic = p->has_grad() ? p->grad()[i] : 0.0;
            // The floor keeps central-difference roundoff noise on near-zero
            // gradients from registering as a large relative error.
            const double denom = std::max({std::abs(numeric), std::abs(analytic), 1e-4});
            worst = std::max(worst, std::abs(numeric - analytic) / denom);
        }
    }
    return worst;
}

inline std::vector<double> random_returns(Rng& rng, std::size_t n, double vol = 0.02) {
    std::vector<double> r(n);
    for (auto& v : r) v = rng.normal(0.0, vol);
    return r;
}

}  // namespace madl::testing
