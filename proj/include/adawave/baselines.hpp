#pragma once

// Reference predictors for sanity comparisons.

#include <adawave/ops.hpp>
#include <adawave/parameters.hpp>
#include <adawave/random.hpp>

#include <cmath>
#include <string>

namespace adawave {

/// Repeats the last observed value of every channel over the horizon.
class PersistenceBaseline {
public:
    explicit PersistenceBaseline(std::size_t pred_len) : pred_len_(pred_len) {}

    const ParameterSet& parameters() const { return params_; }

    Tensor forward(const Tensor& x) const {
        std::size_t L = x.dim(-1);
        std::size_t rows = x.size() / L;
        Shape shape = x.shape();
        shape.back() = pred_len_;
        std::vector<double> y(rows * pred_len_);
        auto v = x.data();
        for (std::size_t r = 0; r < rows; ++r) std::fill_n(y.data() + r * pred_len_, pred_len_, v[r * L + L - 1]);
        return Tensor(std::move(shape), std::move(y));
    }

private:
    std::size_t pred_len_;
    ParameterSet params_;
};

/// One linear map from the input window to the horizon, shared by all channels.
class LinearBaseline {
public:
    LinearBaseline(std::size_t input_len, std::size_t pred_len, std::uint64_t seed, bool identity_init = false) {
        if (identity_init) {
            if (input_len != pred_len) throw ShapeError("identity linear baseline needs equal lengths");
            Tensor w = Tensor::zeros({input_len, pred_len});
            auto d = w.mutable_data();
            for (std::size_t i = 0; i < input_len; ++i) d[i * pred_len + i] = 1.0;
            weight_ = params_.add("linear.weight", w);
            bias_ = params_.add("linear.bias", Tensor::zeros({pred_len}));
        } else {
            Rng rng = make_rng(seed, {0x6c696e656172ULL});
            double bound = 1.0 / std::sqrt(static_cast<double>(input_len));
            weight_ = params_.add("linear.weight", uniform({input_len, pred_len}, -bound, bound, rng));
            bias_ = params_.add("linear.bias", uniform({pred_len}, -bound, bound, rng));
        }
    }

    const ParameterSet& parameters() const { return params_; }

    Tensor forward(const Tensor& x) const { return linear(x, weight_, bias_); }

private:
    ParameterSet params_;
    Tensor weight_, bias_;
};

} // namespace adawave
