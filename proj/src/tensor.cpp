#include "madl/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <utility>

namespace madl {

Tensor::Tensor(std::size_t rows, std::size_t cols, bool requires_grad)
    : rows_(rows), cols_(cols), values_(rows * cols, 0.0), requires_grad_(requires_grad) {
    if (rows == 0 || cols == 0) {
        throw DimensionError("tensor dimensions must be positive");
    }
}

Tensor::Tensor(std::size_t rows, std::size_t cols, std::vector<double> values,
               bool requires_grad)
    : rows_(rows), cols_(cols), values_(std::move(values)), requires_grad_(requires_grad) {
    if (rows == 0 || cols == 0) {
        throw DimensionError("tensor dimensions must be positive");
    }
    if (values_.size() != rows * cols) {
        throw DimensionError("value count " + std::to_string(values_.size()) +
                             " does not match shape " + shape_str());
    }
}

TensorPtr Tensor::create(std::size_t rows, std::size_t cols, std::vector<double> values,
                         bool requires_grad) {
    return std::make_shared<Tensor>(rows, cols, std::move(values), requires_grad);
}

TensorPtr Tensor::zeros(std::size_t rows, std::size_t cols, bool requires_grad) {
    return std::make_shared<Tensor>(rows, cols, requires_grad);
}

TensorPtr Tensor::scalar(double v, bool requires_grad) {
    return create(1, 1, {v}, requires_grad);
}

std::string Tensor::shape_str() const {
    return std::to_string(rows_) + "x" + std::to_string(cols_);
}

std::vector<double>& Tensor::grad() {
    if (grad_.size() != values_.size()) grad_.assign(values_.size(), 0.0);
    return grad_;
}

void Tensor::zero_grad() {
    std::fill(grad_.begin(), grad_.end(), 0.0);
}

bool Tensor::all_finite() const {
    for (double v : values_) {
        if (!std::isfinite(v)) return false;
    }
    return true;
}

TensorPtr GradTape::make_output(std::size_t rows, std::size_t cols,
                                const std::vector<TensorPtr>& inputs) {
    bool needs = false;
    for (const auto& t : inputs) needs = needs || t->requires_grad();
    return Tensor::zeros(rows, cols, needs);
}

void GradTape::push(TensorPtr out, std::function<void()> pull) {
    if (out->requires_grad()) {
        records_.push_back({std::move(out), std::move(pull)});
    }
}

TensorPtr GradTape::matmul(const TensorPtr& a, const TensorPtr& b) {
    if (a->cols() != b->rows()) {
        throw DimensionError("matmul shape mismatch: " + a->shape_str() + " x " +
                             b->shape_str());
    }
    const std::size_t m = a->rows(), k = a->cols(), n = b->cols();
    TensorPtr out = make_output(m, n, {a, b});
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t p = 0; p < k; ++p) {
            const double av = a->at(i, p);
            if (av == 0.0) continue;
            for (std::size_t j = 0; j < n; ++j) {
                out->at(i, j) += av * b->at(p, j);
            }
        }
    }
    push(out, [a, b, out, m, k, n] {
        const auto& g = out->grad();
        if (a->requires_grad()) {
            auto& ga = a->grad();
            for (std::size_t i = 0; i < m; ++i)
                for (std::size_t p = 0; p < k; ++p) {
                    double acc = 0.0;
                    for (std::size_t j = 0; j < n; ++j)
                        acc += g[i * n + j] * b->at(p, j);
                    ga[i * k + p] += acc;
                }
        }
        if (b->requires_grad()) {
            auto& gb = b->grad();
            for (std::size_t p = 0; p < k; ++p)
                for (std::size_t j = 0; j < n; ++j) {
                    double acc = 0.0;
                    for (std::size_t i = 0; i < m; ++i)
                        acc += a->at(i, p) * g[i * n + j];
                    gb[p * n + j] += acc;
                }
        }
    });
    return out;
}

TensorPtr GradTape::transpose(const TensorPtr& a) {
    const std::size_t m = a->rows(), n = a->cols();
    TensorPtr out = make_output(n, m, {a});
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) out->at(j, i) = a->at(i, j);
    push(out, [a, out, m, n] {
        if (!a->requires_grad()) return;
        auto& ga = a->grad();
        const auto& g = out->grad();
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < n; ++j) ga[i * n + j] += g[j * m + i];
    });
    return out;
}

TensorPtr GradTape::softmax_rows(const TensorPtr& x) {
    if (!x->all_finite()) {
        throw NumericError("softmax_rows: non-finite input");
    }
    const std::size_t m = x->rows(), n = x->cols();
    TensorPtr out = make_output(m, n, {x});
    for (std::size_t i = 0; i < m; ++i) {
        double mx = x->at(i, 0);
        for (std::size_t j = 1; j < n; ++j) mx = std::max(mx, x->at(i, j));
        double denom = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            out->at(i, j) = std::exp(x->at(i, j) - mx);
            denom += out->at(i, j);
        }
        for (std::size_t j = 0; j < n; ++j) out->at(i, j) /= denom;
    }
    push(out, [x, out, m, n] {
        if (!x->requires_grad()) return;
        auto& gx = x->grad();
        const auto& g = out->grad();
        for (std::size_t i = 0; i < m; ++i) {
            double dot = 0.0;
            for (std::size_t j = 0; j < n; ++j) dot += g[i * n + j] * out->at(i, j);
            for (std::size_t j = 0; j < n; ++j)
                gx[i * n + j] += out->at(i, j) * (g[i * n + j] - dot);
        }
    });
    return out;
}

TensorPtr GradTape::tanh(const TensorPtr& x) {
    TensorPtr out = make_output(x->rows(), x->cols(), {x});
    for (std::size_t i = 0; i < x->size(); ++i)
        out->values()[i] = std::tanh(x->values()[i]);
    push(out, [x, out] {
        if (!x->requires_grad()) return;
        auto& gx = x->grad();
        const auto& g = out->grad();
        for (std::size_t i = 0; i < x->size(); ++i) {
            const double y = out->values()[i];
            gx[i] += g[i] * (1.0 - y * y);
        }
    });
    return out;
}

TensorPtr GradTape::relu(const TensorPtr& x) {
    TensorPtr out = make_output(x->rows(), x->cols(), {x});
    for (std::size_t i = 0; i < x->size(); ++i)
        out->values()[i] = x->values()[i] > 0.0 ? x->values()[i] : 0.0;
    push(out, [x, out] {
        if (!x->requires_grad()) return;
        auto& gx = x->grad();
        const auto& g = out->grad();
        for (std::size_t i = 0; i < x->size(); ++i)
            if (x->values()[i] > 0.0) gx[i] += g[i];
    });
    return out;
}

TensorPtr GradTape::sigmoid(const TensorPtr& x) {
    TensorPtr out = make_output(x->rows(), x->cols(), {x});
    for (std::size_t i = 0; i < x->size(); ++i)
        out->values()[i] = 1.0 / (1.0 + std::exp(-x->values()[i]));
    push(out, [x, out] {
        if (!x->requires_grad()) return;
        auto& gx = x->grad();
        const auto& g = out->grad();
        for (std::size_t i = 0; i < x->size(); ++i) {
            const double y = out->values()[i];
            gx[i] += g[i] * y * (1.0 - y);
        }
    });
    return out;
}

TensorPtr GradTape::square(const TensorPtr& x) {
    TensorPtr out = make_output(x->rows(), x->cols(), {x});
    for (std::size_t i = 0; i < x->size(); ++i)
        out->values()[i] = x->values()[i] * x->values()[i];
    push(out, [x, out] {
        if (!x->requires_grad()) return;
        auto& gx = x->grad();
        const auto& g = out->grad();
        for (std::size_t i = 0; i < x->size(); ++i)
            gx[i] += g[i] * 2.0 * x->values()[i];
    });
    return out;
}

TensorPtr GradTape::add(const TensorPtr& a, const TensorPtr& b) {
    // Broadcasting is limited to scalar-with-tensor.
    if (a->is_scalar() && !b->is_scalar()) return add(b, a);
    const bool bcast = b->is_scalar() && !a->is_scalar();
    if (!bcast && (a->rows() != b->rows() || a->cols() != b->cols())) {
        throw DimensionError("add shape mismatch: " + a->shape_str() + " vs " +
                             b->shape_str());
    }
    TensorPtr out = make_output(a->rows(), a->cols(), {a, b});
    for (std::size_t i = 0; i < a->size(); ++i)
        out->values()[i] = a->values()[i] + (bcast ? b->values()[0] : b->values()[i]);
    push(out, [a, b, out, bcast] {
        const auto& g = out->grad();
        if (a->requires_grad()) {
            auto& ga = a->grad();
            for (std::size_t i = 0; i < a->size(); ++i) ga[i] += g[i];
        }
        if (b->requires_grad()) {
            auto& gb = b->grad();
            if (bcast) {
                for (std::size_t i = 0; i < a->size(); ++i) gb[0] += g[i];
            } else {
                for (std::size_t i = 0; i < a->size(); ++i) gb[i] += g[i];
            }
        }
    });
    return out;
}

TensorPtr GradTape::mul(const TensorPtr& a, const TensorPtr& b) {
    if (a->is_scalar() && !b->is_scalar()) return mul(b, a);
    const bool bcast = b->is_scalar() && !a->is_scalar();
    if (!bcast && (a->rows() != b->rows() || a->cols() != b->cols())) {
        throw DimensionError("mul shape mismatch: " + a->shape_str() + " vs " +
                             b->shape_str());
    }
    TensorPtr out = make_output(a->rows(), a->cols(), {a, b});
    for (std::size_t i = 0; i < a->size(); ++i)
        out->values()[i] = a->values()[i] * (bcast ? b->values()[0] : b->values()[i]);
    push(out, [a, b, out, bcast] {
        const auto& g = out->grad();
        if (a->requires_grad()) {
            auto& ga = a->grad();
            for (std::size_t i = 0; i < a->size(); ++i)
                ga[i] += g[i] * (bcast ? b->values()[0] : b->values()[i]);
        }
        if (b->requires_grad()) {
            auto& gb = b->grad();
            if (bcast) {
                for (std::size_t i = 0; i < a->size(); ++i) gb[0] += g[i] * a->values()[i];
            } else {
                for (std::size_t i = 0; i < a->size(); ++i) gb[i] += g[i] * a->values()[i];
            }
        }
    });
    return out;
}

TensorPtr GradTape::scale(const TensorPtr& a, double c) {
    TensorPtr out = make_output(a->rows(), a->cols(), {a});
    for (std::size_t i = 0; i < a->size(); ++i) out->values()[i] = a->values()[i] * c;
    push(out, [a, out, c] {
        if (!a->requires_grad()) return;
        auto& ga = a->grad();
        const auto& g = out->grad();
        for (std::size_t i = 0; i < a->size(); ++i) ga[i] += g[i] * c;
    });
    return out;
}

TensorPtr GradTape::add_rowvec(const TensorPtr& a, const TensorPtr& bias) {
    if (bias->rows() != 1 || bias->cols() != a->cols()) {
        throw DimensionError("add_rowvec shape mismatch: " + a->shape_str() + " + " +
                             bias->shape_str());
    }
    const std::size_t m = a->rows(), n = a->cols();
    TensorPtr out = make_output(m, n, {a, bias});
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j)
            out->at(i, j) = a->at(i, j) + bias->values()[j];
    push(out, [a, bias, out, m, n] {
        const auto& g = out->grad();
        if (a->requires_grad()) {
            auto& ga = a->grad();
            for (std::size_t i = 0; i < m * n; ++i) ga[i] += g[i];
        }
        if (bias->requires_grad()) {
            auto& gb = bias->grad();
            for (std::size_t i = 0; i < m; ++i)
                for (std::size_t j = 0; j < n; ++j) gb[j] += g[i * n + j];
        }
    });
    return out;
}

TensorPtr GradTape::dropout(const TensorPtr& x, double rate, Rng& rng) {
    if (rate < 0.0 || rate >= 1.0) {
        throw ConfigError("dropout rate must be in [0,1)");
    }
    if (rate == 0.0) return x;
    const double keep_scale = 1.0 / (1.0 - rate);
    auto mask = std::make_shared<std::vector<double>>(x->size());
    TensorPtr out = make_output(x->rows(), x->cols(), {x});
    for (std::size_t i = 0; i < x->size(); ++i) {
        (*mask)[i] = rng.bernoulli(rate) ? 0.0 : keep_scale;
        out->values()[i] = x->values()[i] * (*mask)[i];
    }
    push(out, [x, out, mask] {
        if (!x->requires_grad()) return;
        auto& gx = x->grad();
        const auto& g = out->grad();
        for (std::size_t i = 0; i < x->size(); ++i) gx[i] += g[i] * (*mask)[i];
    });
    return out;
}

TensorPtr GradTape::concat_cols(const std::vector<TensorPtr>& parts) {
    if (parts.empty()) throw UsageError("concat_cols: no inputs");
    const std::size_t m = parts[0]->rows();
    std::size_t total = 0;
    for (const auto& p : parts) {
        if (p->rows() != m) {
            throw DimensionError("concat_cols row mismatch: " + p->shape_str());
        }
        total += p->cols();
    }
    TensorPtr out = make_output(m, total, parts);
    std::size_t off = 0;
    for (const auto& p : parts) {
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < p->cols(); ++j)
                out->at(i, off + j) = p->at(i, j);
        off += p->cols();
    }
    push(out, [parts, out, m, total] {
        const auto& g = out->grad();
        std::size_t off = 0;
        for (const auto& p : parts) {
            if (p->requires_grad()) {
                auto& gp = p->grad();
                for (std::size_t i = 0; i < m; ++i)
                    for (std::size_t j = 0; j < p->cols(); ++j)
                        gp[i * p->cols() + j] += g[i * total + off + j];
            }
            off += p->cols();
        }
    });
    return out;
}

TensorPtr GradTape::slice_cols(const TensorPtr& a, std::size_t begin, std::size_t end) {
    if (begin >= end || end > a->cols()) {
        throw DimensionError("slice_cols [" + std::to_string(begin) + "," +
                             std::to_string(end) + ") out of range for " + a->shape_str());
    }
    const std::size_t m = a->rows(), w = end - begin;
    TensorPtr out = make_output(m, w, {a});
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < w; ++j) out->at(i, j) = a->at(i, begin + j);
    push(out, [a, out, begin, m, w] {
        if (!a->requires_grad()) return;
        auto& ga = a->grad();
        const auto& g = out->grad();
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < w; ++j)
                ga[i * a->cols() + begin + j] += g[i * w + j];
    });
    return out;
}

TensorPtr GradTape::row(const TensorPtr& a, std::size_t index) {
    if (index >= a->rows()) {
        throw DimensionError("row " + std::to_string(index) + " out of range for " +
                             a->shape_str());
    }
    const std::size_t n = a->cols();
    TensorPtr out = make_output(1, n, {a});
    for (std::size_t j = 0; j < n; ++j) out->values()[j] = a->at(index, j);
    push(out, [a, out, index, n] {
        if (!a->requires_grad()) return;
        auto& ga = a->grad();
        const auto& g = out->grad();
        for (std::size_t j = 0; j < n; ++j) ga[index * n + j] += g[j];
    });
    return out;
}

TensorPtr GradTape::sum(const TensorPtr& a) {
    TensorPtr out = make_output(1, 1, {a});
    double acc = 0.0;
    for (double v : a->values()) acc += v;
    out->values()[0] = acc;
    push(out, [a, out] {
        if (!a->requires_grad()) return;
        auto& ga = a->grad();
        const double g = out->grad()[0];
        for (std::size_t i = 0; i < a->size(); ++i) ga[i] += g;
    });
    return out;
}

TensorPtr GradTape::mean(const TensorPtr& a) {
    return scale(sum(a), 1.0 / static_cast<double>(a->size()));
}

TensorPtr GradTape::layer_norm(const TensorPtr& x, const TensorPtr& gain,
                               const TensorPtr& bias, double eps) {
    const std::size_t m = x->rows(), n = x->cols();
    if (gain->rows() != 1 || gain->cols() != n || bias->rows() != 1 || bias->cols() != n) {
        throw DimensionError("layer_norm gain/bias must be 1x" + std::to_string(n));
    }
    TensorPtr out = make_output(m, n, {x, gain, bias});
    auto xhat = std::make_shared<std::vector<double>>(m * n);
    auto inv_sigma = std::make_shared<std::vector<double>>(m);
    for (std::size_t i = 0; i < m; ++i) {
        double mu = 0.0;
        for (std::size_t j = 0; j < n; ++j) mu += x->at(i, j);
        mu /= static_cast<double>(n);
        double var = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            const double d = x->at(i, j) - mu;
            var += d * d;
        }
        var /= static_cast<double>(n);
        const double is = 1.0 / std::sqrt(var + eps);
        (*inv_sigma)[i] = is;
        for (std::size_t j = 0; j < n; ++j) {
            const double xh = (x->at(i, j) - mu) * is;
            (*xhat)[i * n + j] = xh;
            out->at(i, j) = xh * gain->values()[j] + bias->values()[j];
        }
    }
    push(out, [x, gain, bias, out, xhat, inv_sigma, m, n] {
        const auto& g = out->grad();
        if (gain->requires_grad()) {
            auto& gg = gain->grad();
            for (std::size_t i = 0; i < m; ++i)
                for (std::size_t j = 0; j < n; ++j)
                    gg[j] += g[i * n + j] * (*xhat)[i * n + j];
        }
        if (bias->requires_grad()) {
            auto& gb = bias->grad();
            for (std::size_t i = 0; i < m; ++i)
                for (std::size_t j = 0; j < n; ++j) gb[j] += g[i * n + j];
        }
        if (x->requires_grad()) {
            auto& gx = x->grad();
            for (std::size_t i = 0; i < m; ++i) {
                double mean_dxhat = 0.0, mean_dxhat_xhat = 0.0;
                for (std::size_t j = 0; j < n; ++j) {
                    const double dxh = g[i * n + j] * gain->values()[j];
                    mean_dxhat += dxh;
                    mean_dxhat_xhat += dxh * (*xhat)[i * n + j];
                }
                mean_dxhat /= static_cast<double>(n);
                mean_dxhat_xhat /= static_cast<double>(n);
                for (std::size_t j = 0; j < n; ++j) {
                    const double dxh = g[i * n + j] * gain->values()[j];
                    gx[i * n + j] += (*inv_sigma)[i] *
                                     (dxh - mean_dxhat - (*xhat)[i * n + j] * mean_dxhat_xhat);
                }
            }
        }
    });
    return out;
}

void GradTape::backward(const TensorPtr& loss) {
    if (!loss->is_scalar()) {
        throw UsageError("backward: loss must be scalar, got " + loss->shape_str());
    }
    // Interior (op output) grads are scratch space for the replay; zero them so
    // a repeated backward accumulates into leaves only.
    for (const auto& rec : records_) {
        if (rec.out->has_grad()) rec.out->zero_grad();
    }
    loss->grad()[0] += 1.0;
    for (auto it = records_.rbegin(); it != records_.rend(); ++it) {
        if (it->out->has_grad()) it->pull();
    }
}

void GradTape::clear() {
    records_.clear();
}

}  // namespace madl
