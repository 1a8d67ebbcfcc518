// Copyright 2026 The ddlab Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "ddlab/common.hpp"

#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace ddlab {

using Shape = std::vector<std::size_t>;

std::size_t shape_size(const Shape& shape);
std::string shape_to_string(const Shape& shape);

// Dense row-major tensor. Activations are NCHW; dense layers use (N, features).
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(Shape shape, Real fill = Real{0});
    Tensor(Shape shape, std::vector<Real> values);

    static Tensor zeros_like(const Tensor& other) { return Tensor(other.shape_); }

    const Shape& shape() const noexcept { return shape_; }
    std::size_t rank() const noexcept { return shape_.size(); }
    std::size_t dim(std::size_t i) const { return shape_.at(i); }
    std::size_t size() const noexcept { return values_.size(); }
    bool empty() const noexcept { return values_.empty(); }

    Real* data() noexcept { return values_.data(); }
    const Real* data() const noexcept { return values_.data(); }
    std::span<Real> values() noexcept { return values_; }
    std::span<const Real> values() const noexcept { return values_; }

    Real& operator[](std::size_t i) noexcept { return values_[i]; }
    Real operator[](std::size_t i) const noexcept { return values_[i]; }

    // Same values, new shape of equal size.
    Tensor reshaped(Shape shape) const;
    void reshape(Shape shape);

    void fill(Real v);
    bool all_finite() const noexcept;

    // Row block [begin, end) along the leading dimension.
    Tensor slice_rows(std::size_t begin, std::size_t end) const;
    // Rows gathered along the leading dimension.
    Tensor gather_rows(std::span<const std::size_t> rows) const;
    std::size_t row_size() const noexcept;

    friend bool operator==(const Tensor& a, const Tensor& b) {
        return a.shape_ == b.shape_ && a.values_ == b.values_;
    }

private:
    Shape shape_;
    std::vector<Real> values_;
};

void require_shape(const Tensor& t, const Shape& expected, const char* what);

} // namespace ddlab
