#pragma once

#include <array>
#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace texim::nn {

// Dense row-major array of doubles with rank <= 4. Most kernels work on
// rank-2 tensors; a rank-1 tensor of n values is treated as a 1 x n row.
class Tensor {
public:
    static constexpr std::size_t kMaxRank = 4;

    Tensor() = default;
    Tensor(std::initializer_list<std::size_t> shape, double fill = 0.0);
    Tensor(std::span<const std::size_t> shape, double fill = 0.0);
    Tensor(std::span<const std::size_t> shape, std::vector<double> values);

    static Tensor matrix(std::size_t rows, std::size_t cols, double fill = 0.0) {
        return Tensor({rows, cols}, fill);
    }
    static Tensor matrix(std::size_t rows, std::size_t cols, std::vector<double> values);
    static Tensor row(std::vector<double> values);
    static Tensor scalar(double v) { return matrix(1, 1, v); }

    std::size_t rank() const noexcept { return rank_; }
    std::span<const std::size_t> shape() const noexcept { return {dims_.data(), rank_}; }
    std::size_t dim(std::size_t axis) const { return dims_.at(axis); }
    std::size_t size() const noexcept { return values_.size(); }
    bool empty() const noexcept { return values_.empty(); }

    std::size_t rows() const noexcept;
    std::size_t cols() const noexcept;

    double& operator()(std::size_t r, std::size_t c) { return values_[r * cols_ + c]; }
    double operator()(std::size_t r, std::size_t c) const { return values_[r * cols_ + c]; }
    double& operator[](std::size_t i) { return values_[i]; }
    double operator[](std::size_t i) const { return values_[i]; }

    std::span<double> values() noexcept { return values_; }
    std::span<const double> values() const noexcept { return values_; }
    double* data() noexcept { return values_.data(); }
    const double* data() const noexcept { return values_.data(); }

    // Row r as a contiguous span (rank-2 view).
    std::span<double> row_span(std::size_t r) { return {values_.data() + r * cols_, cols_}; }
    std::span<const double> row_span(std::size_t r) const { return {values_.data() + r * cols_, cols_}; }

    bool same_shape(const Tensor& other) const noexcept;
    bool all_finite() const noexcept;
    void fill(double v);
    std::string shape_string() const;

    // Same values, new shape with equal element count.
    Tensor reshaped(std::span<const std::size_t> shape) const;

    friend bool operator==(const Tensor& a, const Tensor& b) {
        return a.same_shape(b) && a.values_ == b.values_;
    }

private:
    void init_shape(std::span<const std::size_t> shape);

    std::array<std::size_t, kMaxRank> dims_{};
    std::size_t rank_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> values_;
};

// Trainable tensor with its accumulated gradient.
struct Parameter {
    Parameter() = default;
    Parameter(std::string n, Tensor t)
        : name(std::move(n)), value(std::move(t)), grad(value.shape(), 0.0) {}

    std::string name;
    Tensor value;
    // Accumulation buffer written by Graph::backward, also through const
    // references held by inference-capable models.
    mutable Tensor grad;
    bool trainable = true;

    void zero_grad() const { grad.fill(0.0); }
};

using ParameterRefs = std::vector<Parameter*>;

}  // namespace texim::nn
