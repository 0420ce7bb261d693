#pragma once

#include <cmath>
#include <cstddef>
#include <numeric>
#include <string>
#include <vector>

#include "advkit/errors.hpp"

namespace advkit {

// Dense n-dimensional array, row-major. Rank 1 for vectors, rank 2 for
// matrices; scalars are represented as shape {1}.
template <typename S>
struct Tensor {
    std::vector<std::size_t> shape;
    std::vector<S> data;

    Tensor() = default;

    explicit Tensor(std::vector<std::size_t> shp)
        : shape(std::move(shp)), data(count(shape), S(0)) {}

    Tensor(std::vector<std::size_t> shp, std::vector<S> values)
        : shape(std::move(shp)), data(std::move(values)) {
        if (count(shape) != data.size())
            throw ShapeError("tensor data length " + std::to_string(data.size()) +
                             " does not match shape product " + std::to_string(count(shape)));
    }

    static Tensor scalar(S v) { return Tensor({1}, {v}); }

    static std::size_t count(const std::vector<std::size_t>& shp) {
        std::size_t n = 1;
        for (std::size_t d : shp) n *= d;
        return n;
    }

    std::size_t numel() const { return data.size(); }
    bool is_scalar() const { return data.size() == 1; }

    S& operator[](std::size_t i) { return data[i]; }
    const S& operator[](std::size_t i) const { return data[i]; }

    // Matrix accessors (rank 2 contract checked by callers).
    std::size_t rows() const { return shape[0]; }
    std::size_t cols() const { return shape.size() > 1 ? shape[1] : 1; }

    bool same_shape(const Tensor& other) const { return shape == other.shape; }

    bool all_finite() const {
        for (const S& v : data)
            if (!std::isfinite(static_cast<double>(v))) return false;
        return true;
    }
};

template <typename S>
std::string shape_string(const Tensor<S>& t) {
    std::string s = "(";
    for (std::size_t i = 0; i < t.shape.size(); ++i) {
        if (i) s += "x";
        s += std::to_string(t.shape[i]);
    }
    return s + ")";
}

} // namespace advkit
