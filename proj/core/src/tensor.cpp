#include "texim/tensor.hpp"

#include <cmath>
#include <numeric>
#include <sstream>

#include "texim/error.hpp"

namespace texim::nn {

Tensor::Tensor(std::initializer_list<std::size_t> shape, double fill)
    : Tensor(std::span<const std::size_t>(shape.begin(), shape.size()), fill) {}

Tensor::Tensor(std::span<const std::size_t> shape, double fill) {
    init_shape(shape);
    std::size_t n = 1;
    for (std::size_t d : shape) n *= d;
    values_.assign(n, fill);
}

Tensor::Tensor(std::span<const std::size_t> shape, std::vector<double> values) {
    init_shape(shape);
    std::size_t n = 1;
    for (std::size_t d : shape) n *= d;
    require(n == values.size(), ErrorCode::kShapeMismatch,
            "tensor: " + std::to_string(values.size()) + " values for shape with " +
                std::to_string(n) + " elements");
    values_ = std::move(values);
}

Tensor Tensor::matrix(std::size_t rows, std::size_t cols, std::vector<double> values) {
    const std::array<std::size_t, 2> shape{rows, cols};
    return Tensor(shape, std::move(values));
}

Tensor Tensor::row(std::vector<double> values) {
    const std::size_t n = values.size();
    return matrix(1, n, std::move(values));
}

void Tensor::init_shape(std::span<const std::size_t> shape) {
    require(shape.size() <= kMaxRank, ErrorCode::kShapeMismatch, "tensor: rank exceeds 4");
    rank_ = shape.size();
    for (std::size_t i = 0; i < rank_; ++i) dims_[i] = shape[i];
    cols_ = rank_ == 0 ? 1 : dims_[rank_ - 1];
}

std::size_t Tensor::rows() const noexcept {
    if (rank_ <= 1) return 1;
    return values_.size() / (cols_ == 0 ? 1 : cols_);
}

std::size_t Tensor::cols() const noexcept { return cols_; }

bool Tensor::same_shape(const Tensor& other) const noexcept {
    if (rank_ != other.rank_) return false;
    for (std::size_t i = 0; i < rank_; ++i) {
        if (dims_[i] != other.dims_[i]) return false;
    }
    return true;
}

bool Tensor::all_finite() const noexcept {
    for (double v : values_) {
        if (!std::isfinite(v)) return false;
    }
    return true;
}

void Tensor::fill(double v) { std::fill(values_.begin(), values_.end(), v); }

std::string Tensor::shape_string() const {
    std::ostringstream out;
    out << '[';
    for (std::size_t i = 0; i < rank_; ++i) {
        if (i) out << 'x';
        out << dims_[i];
    }
    out << ']';
    return out.str();
}

Tensor Tensor::reshaped(std::span<const std::size_t> shape) const {
    return Tensor(shape, values_);
}

}  // namespace texim::nn
