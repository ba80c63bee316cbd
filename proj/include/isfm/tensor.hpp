#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace isfm {

/// Thrown when tensor extents do not line up with what an operation needs.
class DimensionError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Thrown for invalid layer or block configuration (even pooling window, non-square kernel...).
class ConfigError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

using Shape = std::vector<std::size_t>;

std::string to_string(const Shape& shape);

/// Dense row-major float tensor of rank 1..4. Feature maps are [C,H,W].
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(Shape shape, float fill = 0.0f);
    Tensor(Shape shape, std::vector<float> data);

    static Tensor zeros(Shape shape) { return Tensor(std::move(shape), 0.0f); }
    static Tensor full(Shape shape, float value) { return Tensor(std::move(shape), value); }

    const Shape& shape() const noexcept { return shape_; }
    std::size_t rank() const noexcept { return shape_.size(); }
    std::size_t extent(std::size_t axis) const;
    std::size_t size() const noexcept { return data_.size(); }
    bool empty() const noexcept { return data_.empty(); }

    std::span<float> data() noexcept { return data_; }
    std::span<const float> data() const noexcept { return data_; }
    const std::vector<float>& values() const noexcept { return data_; }

    float& operator[](std::size_t i) noexcept { return data_[i]; }
    float operator[](std::size_t i) const noexcept { return data_[i]; }

    // [C,H,W] views. Calling these on a tensor of another rank throws.
    std::size_t channels() const { return chw_extent(0); }
    std::size_t height() const { return chw_extent(1); }
    std::size_t width() const { return chw_extent(2); }
    std::size_t plane_size() const { return height() * width(); }

    float& at(std::size_t c, std::size_t y, std::size_t x) noexcept {
        return data_[(c * shape_[1] + y) * shape_[2] + x];
    }
    float at(std::size_t c, std::size_t y, std::size_t x) const noexcept {
        return data_[(c * shape_[1] + y) * shape_[2] + x];
    }

    std::span<float> channel(std::size_t c);
    std::span<const float> channel(std::size_t c) const;

    /// Same data, new shape with identical element count.
    Tensor reshaped(Shape shape) const;

    bool all_finite() const noexcept;

    friend bool operator==(const Tensor& a, const Tensor& b) {
        return a.shape_ == b.shape_ && a.data_ == b.data_;
    }

private:
    std::size_t chw_extent(std::size_t axis) const;

    Shape shape_;
    std::vector<float> data_;
};

/// Throws DimensionError unless `t` is rank 3.
void require_chw(const Tensor& t, const char* what);
/// Throws DimensionError unless both tensors share a shape.
void require_same_shape(const Tensor& a, const Tensor& b, const char* what);

}  // namespace isfm
