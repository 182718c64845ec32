#pragma once

#include <array>
#include <cstddef>
#include <initializer_list>
#include <span>
#include <stdexcept>
#include <vector>

namespace vsal {

// Dense row-major multi-dimensional array of doubles.
class Tensor {
public:
    Tensor() = default;

    // Zero-filled tensor of the given extents. Throws on non-positive extents.
    static Tensor zeros(const std::vector<int>& shape);

    const std::vector<int>& shape() const { return shape_; }
    int rank() const { return static_cast<int>(shape_.size()); }
    std::size_t size() const { return data_.size(); }

    std::vector<double>& data() { return data_; }
    const std::vector<double>& data() const { return data_; }

    // Flat offset of a multi-index, bounds-checked.
    std::size_t offset(std::span<const int> idx) const;

    double& at(std::initializer_list<int> idx) {
        return data_[offset(std::span<const int>(idx.begin(), idx.size()))];
    }
    double at(std::initializer_list<int> idx) const {
        return data_[offset(std::span<const int>(idx.begin(), idx.size()))];
    }

    double& operator[](std::size_t flat) { return data_[flat]; }
    double operator[](std::size_t flat) const { return data_[flat]; }

    // Copy of a sub-block. Ranges are half-open [begin, end) per axis.
    Tensor slice_crop(const std::vector<std::array<int, 2>>& ranges) const;

private:
    std::vector<int> shape_;
    std::vector<double> data_;
};

// Product of extents; throws std::invalid_argument on non-positive extents.
std::size_t shape_product(const std::vector<int>& shape);

}  // namespace vsal
