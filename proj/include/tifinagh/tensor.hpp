#pragma once

#include <algorithm>
#include <cstddef>
#include <functional>
#include <initializer_list>
#include <numeric>
#include <span>
#include <sstream>
#include <string>
#include <type_traits>
#include <utility>
#include <vector>

#include "tifinagh/errors.hpp"

namespace tifinagh {

using Shape = std::vector<std::size_t>;

inline std::string shape_string(const Shape& shape) {
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) os << 'x';
        os << shape[i];
    }
    os << ']';
    return os.str();
}

/// Dense row-major n-dimensional array of floating-point values.
///
/// Every dimension is at least 1, so the element count is always the
/// product of the shape.
template <typename T>
class Tensor {
    static_assert(std::is_floating_point_v<T>, "Tensor holds IEEE floating point values");

public:
    using value_type = T;

    Tensor() = default;

    explicit Tensor(Shape shape, T fill = T(0)) : shape_(std::move(shape)) {
        data_.assign(checked_count(shape_), fill);
    }

    Tensor(Shape shape, std::vector<T> data) : shape_(std::move(shape)), data_(std::move(data)) {
        if (data_.size() != checked_count(shape_)) {
            throw DimensionError("tensor data has " + std::to_string(data_.size()) +
                                 " elements but shape " + shape_string(shape_) + " needs " +
                                 std::to_string(checked_count(shape_)));
        }
    }

    Tensor(std::initializer_list<std::size_t> shape, std::initializer_list<T> values)
        : Tensor(Shape(shape), std::vector<T>(values)) {}

    const Shape& shape() const noexcept { return shape_; }
    std::size_t rank() const noexcept { return shape_.size(); }
    std::size_t dim(std::size_t axis) const { return shape_.at(axis); }
    std::size_t size() const noexcept { return data_.size(); }
    bool empty() const noexcept { return data_.empty(); }

    std::span<T> data() noexcept { return data_; }
    std::span<const T> data() const noexcept { return data_; }
    T* raw() noexcept { return data_.data(); }
    const T* raw() const noexcept { return data_.data(); }

    T& operator[](std::size_t i) noexcept { return data_[i]; }
    const T& operator[](std::size_t i) const noexcept { return data_[i]; }

    template <typename... Idx>
    T& at(Idx... idx) {
        return data_[offset({static_cast<std::size_t>(idx)...})];
    }
    template <typename... Idx>
    const T& at(Idx... idx) const {
        return data_[offset({static_cast<std::size_t>(idx)...})];
    }

    void fill(T v) { std::fill(data_.begin(), data_.end(), v); }

    /// Same data viewed under a different shape with equal element count.
    Tensor reshaped(Shape shape) const& { return Tensor(std::move(shape), data_); }
    Tensor reshaped(Shape shape) && { return Tensor(std::move(shape), std::move(data_)); }

    template <typename U>
    Tensor<U> cast() const {
        std::vector<U> out(data_.begin(), data_.end());
        return Tensor<U>(shape_, std::move(out));
    }

    friend bool operator==(const Tensor& a, const Tensor& b) {
        return a.shape_ == b.shape_ && a.data_ == b.data_;
    }

private:
    static std::size_t checked_count(const Shape& shape) {
        if (shape.empty()) throw DimensionError("tensor shape must have at least one axis");
        std::size_t n = 1;
        for (std::size_t i = 0; i < shape.size(); ++i) {
            if (shape[i] == 0) {
                throw DimensionError("tensor axis " + std::to_string(i) + " has size 0");
            }
            n *= shape[i];
        }
        return n;
    }

    std::size_t offset(std::initializer_list<std::size_t> idx) const {
        if (idx.size() != shape_.size()) {
            throw DimensionError("index rank " + std::to_string(idx.size()) +
                                 " does not match tensor rank " + std::to_string(shape_.size()));
        }
        std::size_t off = 0;
        std::size_t axis = 0;
        for (std::size_t i : idx) {
            if (i >= shape_[axis]) {
                throw DimensionError("index " + std::to_string(i) + " out of range on axis " +
                                     std::to_string(axis));
            }
            off = off * shape_[axis] + i;
            ++axis;
        }
        return off;
    }

    Shape shape_;
    std::vector<T> data_;
};

/// A value and the gradient accumulated for it. Parameters of a model are
/// stored this way so the optimizer can walk them uniformly.
template <typename T>
struct GradPair {
    std::string name;
    Tensor<T> value;
    Tensor<T> grad;

    GradPair() = default;
    GradPair(std::string n, Tensor<T> v) : name(std::move(n)), value(std::move(v)), grad(value.shape()) {}
};

}  // namespace tifinagh
