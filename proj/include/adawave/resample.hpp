#pragma once

#include <adawave/tensor.hpp>

#include <string>
#include <vector>

namespace adawave {

/// Every r-th sample along the last axis starting at index 0, without filtering.
inline Tensor downsample(const Tensor& x, std::size_t r) {
    if (r == 0) throw ShapeError("downsample ratio must be positive");
    std::size_t len = x.dim(-1);
    if (len % r != 0) {
        throw ShapeError("downsample: length " + std::to_string(len) + " not divisible by " + std::to_string(r));
    }
    std::size_t rows = x.size() / len, out_len = len / r;
    Shape shape = x.shape();
    shape.back() = out_len;
    std::vector<double> y(rows * out_len);
    auto v = x.data();
    for (std::size_t i = 0; i < rows; ++i) {
        for (std::size_t t = 0; t < out_len; ++t) y[i * out_len + t] = v[i * len + t * r];
    }
    return Tensor(std::move(shape), std::move(y));
}

/// Zero-order hold: every sample repeated r times along the last axis.
inline Tensor zoh_upsample(const Tensor& x, std::size_t r) {
    if (r == 0) throw ShapeError("upsample ratio must be positive");
    std::size_t len = x.dim(-1);
    std::size_t rows = x.size() / len, out_len = len * r;
    Shape shape = x.shape();
    shape.back() = out_len;
    std::vector<double> y(rows * out_len);
    auto v = x.data();
    for (std::size_t i = 0; i < rows; ++i) {
        for (std::size_t t = 0; t < out_len; ++t) y[i * out_len + t] = v[i * len + t / r];
    }
    return Tensor(std::move(shape), std::move(y));
}

} // namespace adawave
