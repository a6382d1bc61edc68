#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "madl/errors.hpp"
#include "madl/rng.hpp"

namespace madl {

class Tensor;
using TensorPtr = std::shared_ptr<Tensor>;

// Dense row-major matrix of doubles. Scalars are 1x1, row vectors 1xn.
// Gradient buffers are allocated lazily on first accumulation.
class Tensor {
public:
    Tensor(std::size_t rows, std::size_t cols, bool requires_grad = false);
    Tensor(std::size_t rows, std::size_t cols, std::vector<double> values,
           bool requires_grad = false);

    static TensorPtr create(std::size_t rows, std::size_t cols,
                            std::vector<double> values, bool requires_grad = false);
    static TensorPtr zeros(std::size_t rows, std::size_t cols,
                           bool requires_grad = false);
    static TensorPtr scalar(double v, bool requires_grad = false);

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    std::size_t size() const { return values_.size(); }
    bool is_scalar() const { return rows_ == 1 && cols_ == 1; }
    std::vector<std::size_t> shape() const { return {rows_, cols_}; }
    std::string shape_str() const;

    double& at(std::size_t r, std::size_t c) { return values_[r * cols_ + c]; }
    double at(std::size_t r, std::size_t c) const { return values_[r * cols_ + c]; }

    std::vector<double>& values() { return values_; }
    const std::vector<double>& values() const { return values_; }

    bool requires_grad() const { return requires_grad_; }
    void set_requires_grad(bool b) { requires_grad_ = b; }

    // Grows (zero-filled) to match values on first use.
    std::vector<double>& grad();
    const std::vector<double>& grad() const { return grad_; }
    bool has_grad() const { return !grad_.empty(); }
    void zero_grad();

    bool all_finite() const;

private:
    std::size_t rows_;
    std::size_t cols_;
    std::vector<double> values_;
    bool requires_grad_;
    std::vector<double> grad_;
};

// Records every differentiable op in execution order; backward() replays
// the records in reverse, so inputs are always visited after the ops that
// consumed them. A tape is confined to one worker at a time.
class GradTape {
public:
    TensorPtr matmul(const TensorPtr& a, const TensorPtr& b);
    TensorPtr transpose(const TensorPtr& a);
    TensorPtr softmax_rows(const TensorPtr& x);

    TensorPtr tanh(const TensorPtr& x);
    TensorPtr relu(const TensorPtr& x);
    TensorPtr sigmoid(const TensorPtr& x);
    TensorPtr square(const TensorPtr& x);

    // add/mul accept same-shape operands or a scalar on either side.
    TensorPtr add(const TensorPtr& a, const TensorPtr& b);
    TensorPtr mul(const TensorPtr& a, const TensorPtr& b);
    TensorPtr scale(const TensorPtr& a, double c);

    // [m x n] + [1 x n], the bias-add pattern.
    TensorPtr add_rowvec(const TensorPtr& a, const TensorPtr& bias);

    // Inverted dropout: keep-mask drawn from rng, kept entries scaled by
    // 1/(1-rate). Identity when rate == 0.
    TensorPtr dropout(const TensorPtr& x, double rate, Rng& rng);

    TensorPtr concat_cols(const std::vector<TensorPtr>& parts);
    TensorPtr slice_cols(const TensorPtr& a, std::size_t begin, std::size_t end);
    TensorPtr row(const TensorPtr& a, std::size_t index);

    TensorPtr sum(const TensorPtr& a);
    TensorPtr mean(const TensorPtr& a);

    // Row-wise layer normalization with learned gain/bias [1 x n].
    TensorPtr layer_norm(const TensorPtr& x, const TensorPtr& gain,
                         const TensorPtr& bias, double eps = 1e-5);

    // loss must be a scalar recorded on this tape. Accumulates into the
    // grad buffers of every requires_grad tensor reachable from loss.
    void backward(const TensorPtr& loss);

    void clear();
    std::size_t num_records() const { return records_.size(); }

private:
    struct Record {
        TensorPtr out;
        std::function<void()> pull;  // propagates out->grad into inputs
    };

    std::vector<Record> records_;

    TensorPtr make_output(std::size_t rows, std::size_t cols,
                          const std::vector<TensorPtr>& inputs);
    void push(TensorPtr out, std::function<void()> pull);
};

}  // namespace madl
