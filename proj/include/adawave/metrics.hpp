#pragma once

#include <adawave/tensor.hpp>

#include <cmath>
#include <optional>

namespace adawave {

struct Metrics {
    double mse = 0.0;
    double mae = 0.0;
    /// Number of positions averaged.
    double count = 0.0;
};

/// Running sums for metrics accumulated over many batches.
class MetricAccumulator {
public:
    void add(const Tensor& pred, const Tensor& target, const std::optional<Tensor>& mask = std::nullopt) {
        if (pred.shape() != target.shape()) {
            throw ShapeError("metrics: prediction " + shape_str(pred.shape()) + " vs target " + shape_str(target.shape()));
        }
        if (mask && mask->shape() != pred.shape()) throw ShapeError("metrics: mask shape " + shape_str(mask->shape()));
        auto p = pred.data();
        auto t = target.data();
        for (std::size_t i = 0; i < p.size(); ++i) {
            double d = p[i] - t[i];
            all_sq_ += d * d;
            all_abs_ += std::abs(d);
            all_n_ += 1.0;
            if (mask && (*mask)[i] != 0.0) {
                sq_ += d * d;
                abs_ += std::abs(d);
                n_ += 1.0;
            }
        }
        masked_ = masked_ || mask.has_value();
    }

    /// Means over masked positions when masks were supplied and selected
    /// anything, otherwise over all positions.
    Metrics result() const {
        if (masked_ && n_ > 0.0) return {sq_ / n_, abs_ / n_, n_};
        if (all_n_ == 0.0) return {};
        return {all_sq_ / all_n_, all_abs_ / all_n_, all_n_};
    }

private:
    double sq_ = 0.0, abs_ = 0.0, n_ = 0.0;
    double all_sq_ = 0.0, all_abs_ = 0.0, all_n_ = 0.0;
    bool masked_ = false;
};

/// MSE and MAE, over positions where mask == 1 when a mask is given.
inline Metrics metrics(const Tensor& pred, const Tensor& target, const std::optional<Tensor>& mask = std::nullopt) {
    MetricAccumulator acc;
    acc.add(pred, target, mask);
    return acc.result();
}

} // namespace adawave
