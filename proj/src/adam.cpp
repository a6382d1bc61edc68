#include "madl/adam.hpp"

#include <cmath>

namespace madl {

AdamState::AdamState(AdamConfig cfg, const std::vector<TensorPtr>& params) : cfg_(cfg) {
    if (cfg_.learning_rate <= 0.0) throw ConfigError("adam: learning rate must be > 0");
    if (cfg_.l2_coefficient < 0.0) throw ConfigError("adam: l2 coefficient must be >= 0");
    m_.reserve(params.size());
    v_.reserve(params.size());
    for (const auto& p : params) {
        m_.emplace_back(p->size(), 0.0);
        v_.emplace_back(p->size(), 0.0);
    }
}

void AdamState::step(const std::vector<TensorPtr>& params) {
    if (params.size() != m_.size()) {
        throw UsageError("adam: parameter list size changed");
    }
    ++step_count_;
    const double t = static_cast<double>(step_count_);
    const double bc1 = 1.0 - std::pow(cfg_.beta1, t);
    const double bc2 = 1.0 - std::pow(cfg_.beta2, t);
    for (std::size_t p = 0; p < params.size(); ++p) {
        auto& theta = params[p]->values();
        if (!params[p]->has_grad()) {
            throw UsageError("adam: missing gradient for parameter " + std::to_string(p));
        }
        const auto& grad = params[p]->grad();
        auto& m = m_[p];
        auto& v = v_[p];
        for (std::size_t i = 0; i < theta.size(); ++i) {
            const double g = grad[i] + cfg_.l2_coefficient * theta[i];
            m[i] = cfg_.beta1 * m[i] + (1.0 - cfg_.beta1) * g;
            v[i] = cfg_.beta2 * v[i] + (1.0 - cfg_.beta2) * g * g;
            const double mhat = m[i] / bc1;
            const double vhat = v[i] / bc2;
            theta[i] -= cfg_.learning_rate * mhat / (std::sqrt(vhat) + cfg_.epsilon);
        }
    }
}

}  // namespace madl
