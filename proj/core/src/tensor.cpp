#include "vsal/tensor.hpp"

namespace vsal {

std::size_t shape_product(const std::vector<int>& shape) {
    if (shape.empty())
        throw std::invalid_argument("tensor shape must have at least one extent");
    std::size_t n = 1;
    for (int e : shape) {
        if (e < 1)
            throw std::invalid_argument("tensor extents must be positive");
        n *= static_cast<std::size_t>(e);
    }
    return n;
}

Tensor Tensor::zeros(const std::vector<int>& shape) {
    Tensor t;
    t.data_.assign(shape_product(shape), 0.0);
    t.shape_ = shape;
    return t;
}

std::size_t Tensor::offset(std::span<const int> idx) const {
    if (idx.size() != shape_.size())
        throw std::out_of_range("index rank does not match tensor rank");
    std::size_t flat = 0;
    for (std::size_t a = 0; a < shape_.size(); ++a) {
        if (idx[a] < 0 || idx[a] >= shape_[a])
            throw std::out_of_range("tensor index out of range");
        flat = flat * static_cast<std::size_t>(shape_[a]) + static_cast<std::size_t>(idx[a]);
    }
    return flat;
}

Tensor Tensor::slice_crop(const std::vector<std::array<int, 2>>& ranges) const {
    if (ranges.size() != shape_.size())
        throw std::out_of_range("range rank does not match tensor rank");
    std::vector<int> out_shape(ranges.size());
    for (std::size_t a = 0; a < ranges.size(); ++a) {
        auto [b, e] = ranges[a];
        if (b < 0 || e > shape_[a] || b >= e)
            throw std::out_of_range("slice range out of bounds or empty");
        out_shape[a] = e - b;
    }
    Tensor out = Tensor::zeros(out_shape);
    std::vector<int> idx(ranges.size(), 0);
    for (std::size_t flat = 0; flat < out.size(); ++flat) {
        std::size_t src = 0;
        for (std::size_t a = 0; a < ranges.size(); ++a)
            src = src * static_cast<std::size_t>(shape_[a]) +
                  static_cast<std::size_t>(ranges[a][0] + idx[a]);
        out.data_[flat] = data_[src];
        for (int a = static_cast<int>(idx.size()) - 1; a >= 0; --a) {
            if (++idx[a] < out_shape[a]) break;
            idx[a] = 0;
        }
    }
    return out;
}

}  // namespace vsal
