#pragma once

#include <adawave/ops.hpp>

namespace adawave {

/// Additive seasonal/trend split of a window: input == seasonal + trend.
struct DecomposedSeries {
    Tensor seasonal;
    Tensor trend;
    std::size_t ma_window = 25;
};

/// Trend is the centered moving average (edges replicated) over the last axis;
/// seasonal is the remainder.
inline DecomposedSeries decompose(const Tensor& x, std::size_t ma_window) {
    Tensor trend = moving_average(x, ma_window);
    return {x - trend, trend, ma_window};
}

inline Tensor recompose(const DecomposedSeries& d) {
    if (d.seasonal.shape() != d.trend.shape()) {
        throw ShapeError("recompose: seasonal " + shape_str(d.seasonal.shape()) + " vs trend " +
                         shape_str(d.trend.shape()));
    }
    return d.seasonal + d.trend;
}

} // namespace adawave
