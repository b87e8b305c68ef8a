#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "btseq/errors.hpp"
#include "btseq/rng.hpp"

namespace btseq {

// Dense row-major 2-D tensor of doubles. Two dimensions cover everything
// this library computes: batches are rows, features are columns, scalars
// are 1x1 and vectors are 1xN.
class Tensor {
  public:
    Tensor() = default;
    Tensor(int rows, int cols) : rows_(rows), cols_(cols), data_(check_dims(rows, cols), 0.0) {}
    Tensor(int rows, int cols, std::vector<double> data)
        : rows_(rows), cols_(cols), data_(std::move(data)) {
        if (data_.size() != check_dims(rows, cols))
            throw InputError("tensor: data length does not match shape");
    }

    static Tensor zeros(int rows, int cols) { return Tensor(rows, cols); }

    static Tensor full(int rows, int cols, double v) {
        Tensor t(rows, cols);
        for (double& x : t.data_) x = v;
        return t;
    }

    static Tensor scalar(double v) { return Tensor(1, 1, {v}); }

    static Tensor uniform(int rows, int cols, double lo, double hi, Rng& rng) {
        Tensor t(rows, cols);
        for (double& x : t.data_) x = rng.uniform(lo, hi);
        return t;
    }

    int rows() const { return rows_; }
    int cols() const { return cols_; }
    std::array<int, 2> shape() const { return {rows_, cols_}; }
    std::size_t size() const { return data_.size(); }

    double& at(int r, int c) { return data_[static_cast<std::size_t>(r) * cols_ + c]; }
    double at(int r, int c) const { return data_[static_cast<std::size_t>(r) * cols_ + c]; }

    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }
    std::vector<double>& vec() { return data_; }
    const std::vector<double>& vec() const { return data_; }

    double item() const {
        if (size() != 1) throw InputError("tensor: item() requires a 1x1 tensor");
        return data_[0];
    }

    bool same_shape(const Tensor& o) const { return rows_ == o.rows_ && cols_ == o.cols_; }

    bool all_finite() const {
        for (double x : data_)
            if (!std::isfinite(x)) return false;
        return true;
    }

    void fill(double v) {
        for (double& x : data_) x = v;
    }

    void add_inplace(const Tensor& o) {
        for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += o.data_[i];
    }

  private:
    static std::size_t check_dims(int rows, int cols) {
        if (rows < 0 || cols < 0) throw InputError("tensor: negative dimension");
        return static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols);
    }

    int rows_ = 0;
    int cols_ = 0;
    std::vector<double> data_;
};

inline void require_finite(const Tensor& t, const char* where) {
    if (!t.all_finite()) throw NumericError(std::string(where) + ": non-finite values");
}

// A trainable tensor together with its gradient accumulator and Adam
// moment estimates. Gradients accumulate additively across backward
// passes and are zeroed by the optimizer step that consumes them.
struct Parameter {
    std::string name;
    Tensor value;
    Tensor grad;
    Tensor adam_m;
    Tensor adam_v;
    std::int64_t step_count = 0;

    Parameter() = default;
    Parameter(std::string n, Tensor init)
        : name(std::move(n)),
          value(std::move(init)),
          grad(value.rows(), value.cols()),
          adam_m(value.rows(), value.cols()),
          adam_v(value.rows(), value.cols()) {}

    void zero_grad() { grad.fill(0.0); }

    void reset_optimizer_state() {
        adam_m.fill(0.0);
        adam_v.fill(0.0);
        step_count = 0;
    }
};

}  // namespace btseq
