#include "isfm/tensor.hpp"

#include <cmath>
#include <functional>
#include <numeric>

namespace isfm {

namespace {

std::size_t element_count(const Shape& shape) {
    if (shape.empty() || shape.size() > 4) {
        throw DimensionError("tensor rank must be 1..4, got " + std::to_string(shape.size()));
    }
    for (std::size_t e : shape) {
        if (e == 0) {
            throw DimensionError("tensor extents must be >= 1, got " + to_string(shape));
        }
    }
    return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

}  // namespace

std::string to_string(const Shape& shape) {
    std::string s = "[";
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) s += ",";
        s += std::to_string(shape[i]);
    }
    return s + "]";
}

Tensor::Tensor(Shape shape, float fill) : shape_(std::move(shape)) {
    data_.assign(element_count(shape_), fill);
}

Tensor::Tensor(Shape shape, std::vector<float> data) : shape_(std::move(shape)), data_(std::move(data)) {
    const std::size_t n = element_count(shape_);
    if (data_.size() != n) {
        throw DimensionError("tensor data length " + std::to_string(data_.size()) +
                             " does not match shape " + to_string(shape_));
    }
}

std::size_t Tensor::extent(std::size_t axis) const {
    if (axis >= shape_.size()) {
        throw DimensionError("axis " + std::to_string(axis) + " out of range for shape " + to_string(shape_));
    }
    return shape_[axis];
}

std::size_t Tensor::chw_extent(std::size_t axis) const {
    if (shape_.size() != 3) {
        throw DimensionError("expected a [C,H,W] tensor, got " + to_string(shape_));
    }
    return shape_[axis];
}

std::span<float> Tensor::channel(std::size_t c) {
    const std::size_t n = plane_size();
    return std::span<float>(data_).subspan(c * n, n);
}

std::span<const float> Tensor::channel(std::size_t c) const {
    const std::size_t n = plane_size();
    return std::span<const float>(data_).subspan(c * n, n);
}

Tensor Tensor::reshaped(Shape shape) const {
    return Tensor(std::move(shape), data_);
}

bool Tensor::all_finite() const noexcept {
    for (float v : data_) {
        if (!std::isfinite(v)) return false;
    }
    return true;
}

void require_chw(const Tensor& t, const char* what) {
    if (t.rank() != 3) {
        throw DimensionError(std::string(what) + ": expected [C,H,W], got " + to_string(t.shape()));
    }
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* what) {
    if (a.shape() != b.shape()) {
        throw DimensionError(std::string(what) + ": shape mismatch " + to_string(a.shape()) + " vs " +
                             to_string(b.shape()));
    }
}

}  // namespace isfm
