#pragma once

#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <numeric>
#include <string>
#include <vector>

#include "pcc/common.hpp"

namespace pcc {

// Dense row-major tensor. Production paths instantiate T = float; the
// gradient-check suite instantiates T = double.
template <typename T>
struct tensor {
    std::vector<std::size_t> shape;
    std::vector<T> data;

    tensor() = default;

    explicit tensor(std::vector<std::size_t> s, T fill = T(0)) : shape(std::move(s)) {
        data.assign(numel_of(shape), fill);
    }

    tensor(std::initializer_list<std::size_t> s, T fill = T(0))
        : tensor(std::vector<std::size_t>(s), fill) {}

    static std::size_t numel_of(const std::vector<std::size_t>& s) {
        std::size_t n = 1;
        for (std::size_t d : s) n *= d;
        return n;
    }

    std::size_t numel() const { return data.size(); }
    std::size_t dim(std::size_t i) const { return shape.at(i); }

    // 2D accessors, the common case (channels x points)
    std::size_t rows() const { return shape.at(0); }
    std::size_t cols() const { return shape.at(1); }
    T& at(std::size_t r, std::size_t c) { return data[r * cols() + c]; }
    const T& at(std::size_t r, std::size_t c) const { return data[r * cols() + c]; }

    T& operator[](std::size_t i) { return data[i]; }
    const T& operator[](std::size_t i) const { return data[i]; }

    bool same_shape(const tensor& o) const { return shape == o.shape; }

    void fill(T v) { std::fill(data.begin(), data.end(), v); }

    bool all_finite() const {
        for (T v : data)
            if (!std::isfinite(static_cast<double>(v))) return false;
        return true;
    }

    template <typename U>
    tensor<U> cast() const {
        tensor<U> out;
        out.shape = shape;
        out.data.reserve(data.size());
        for (T v : data) out.data.push_back(static_cast<U>(v));
        return out;
    }
};

template <typename T>
std::string shape_str(const tensor<T>& t) {
    std::string s = "[";
    for (std::size_t i = 0; i < t.shape.size(); ++i) {
        if (i) s += "x";
        s += std::to_string(t.shape[i]);
    }
    return s + "]";
}

}  // namespace pcc
