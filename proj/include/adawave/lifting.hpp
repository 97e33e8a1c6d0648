#pragma once

// Adaptive lifting wavelet blocks. One level splits a signal into its even and
// odd polyphase samples, predicts the odd half from the even half (the residual
// is the detail), and updates the even half with the detail (the result is the
// approximation). Both steps use learnable depthwise convolutions followed by
// tanh, so zero kernels and biases give an exact polyphase pass-through.

#include <adawave/ops.hpp>
#include <adawave/parameters.hpp>

#include <string>
#include <utility>
#include <vector>

namespace adawave {

enum class InverseMode {
    /// Exact algebraic inverse of the forward step using the forward kernels.
    tied,
    /// Independently trained transposed-convolution inverse.
    learned,
};

struct LiftingLevel {
    // Forward kernels, depthwise: [C, 1, K]; biases [C].
    Tensor predict_kernel, predict_bias;
    Tensor update_kernel, update_bias;
    // Learned-inverse kernels in transposed layout [C, 1, K]; undefined in tied mode.
    Tensor inv_update_kernel, inv_update_bias;
    Tensor inv_predict_kernel, inv_predict_bias;

    std::size_t channels() const { return predict_kernel.dim(0); }
    std::size_t kernel_size() const { return predict_kernel.dim(2); }
    bool has_inverse() const { return inv_update_kernel.defined(); }

    /// Zero kernels and biases registered in `params` under `prefix`.
    static LiftingLevel zeros(ParameterSet& params, const std::string& prefix, std::size_t channels,
                              std::size_t kernel, bool with_inverse) {
        LiftingLevel l;
        l.predict_kernel = params.add(prefix + ".predict.weight", Tensor::zeros({channels, 1, kernel}));
        l.predict_bias = params.add(prefix + ".predict.bias", Tensor::zeros({channels}));
        l.update_kernel = params.add(prefix + ".update.weight", Tensor::zeros({channels, 1, kernel}));
        l.update_bias = params.add(prefix + ".update.bias", Tensor::zeros({channels}));
        if (with_inverse) {
            l.inv_update_kernel = params.add(prefix + ".inv_update.weight", Tensor::zeros({channels, 1, kernel}));
            l.inv_update_bias = params.add(prefix + ".inv_update.bias", Tensor::zeros({channels}));
            l.inv_predict_kernel = params.add(prefix + ".inv_predict.weight", Tensor::zeros({channels, 1, kernel}));
            l.inv_predict_bias = params.add(prefix + ".inv_predict.bias", Tensor::zeros({channels}));
        }
        return l;
    }

    /// Unregistered level, for tests and one-off transforms.
    static LiftingLevel zeros(std::size_t channels, std::size_t kernel, bool with_inverse) {
        ParameterSet scratch;
        return zeros(scratch, "level", channels, kernel, with_inverse);
    }
};

namespace detail {

inline Tensor depthwise(const Tensor& x, const Tensor& kernel, const Tensor& bias) {
    return conv1d(x, kernel, bias, Padding::same_asymmetric, kernel.dim(0));
}

inline Tensor depthwise_transposed(const Tensor& x, const Tensor& kernel, const Tensor& bias) {
    return conv_transpose1d(x, kernel, bias, Padding::same_asymmetric, kernel.dim(0));
}

inline void check_level(const Tensor& x, const LiftingLevel& level) {
    if (x.rank() < 2 || x.dim(-2) != level.channels()) {
        throw ShapeError("lifting: input " + shape_str(x.shape()) + " vs level with " +
                         std::to_string(level.channels()) + " channels");
    }
}

} // namespace detail

/// Even and odd polyphase components along the last axis; the length must be even.
inline std::pair<Tensor, Tensor> split(const Tensor& x) {
    std::size_t len = x.dim(-1);
    if (len % 2 != 0) throw ShapeError("split requires an even length, got " + std::to_string(len));
    return {strided_slice(x, 0, 2, len / 2), strided_slice(x, 1, 2, len / 2)};
}

struct LiftingStep {
    Tensor approx;
    Tensor detail;
    /// True when the input had odd length and was right-padded by one replicated sample.
    bool padded = false;
};

/// One forward lifting level:
///   detail = odd  - tanh(W_p * even   + b_p)
///   approx = even + tanh(W_u * detail + b_u)
inline LiftingStep lift_forward(const Tensor& x, const LiftingLevel& level) {
    detail::check_level(x, level);
    bool padded = x.dim(-1) % 2 != 0;
    auto [even, odd] = split(padded ? pad_edge(x, 1) : x);
    Tensor d = odd - tanh(detail::depthwise(even, level.predict_kernel, level.predict_bias));
    Tensor a = even + tanh(detail::depthwise(d, level.update_kernel, level.update_bias));
    return {a, d, padded};
}

namespace detail {
inline Tensor merge(const Tensor& even, const Tensor& odd, bool padded) {
    Tensor x = interleave(even, odd);
    return padded ? narrow(x, 0, x.dim(-1) - 1) : x;
}
} // namespace detail

/// Exact inverse of lift_forward with the same kernels.
inline Tensor lift_inverse_tied(const Tensor& approx, const Tensor& coeffs, bool padded, const LiftingLevel& level) {
    detail::check_level(approx, level);
    if (approx.shape() != coeffs.shape()) throw ShapeError("lift_inverse_tied: approx/detail shape mismatch");
    Tensor even = approx - tanh(detail::depthwise(coeffs, level.update_kernel, level.update_bias));
    Tensor odd = coeffs + tanh(detail::depthwise(even, level.predict_kernel, level.predict_bias));
    return detail::merge(even, odd, padded);
}

/// Learned inverse with transposed-convolution kernels:
///   even = approx_hat - tanh(W_u' (*) detail + b_u')
///   odd  = detail     + tanh(W_p' (*) even   + b_p')
/// With `subtract_detail`, approx_hat - detail is used in place of approx_hat
/// (the literal reading of the inverse combining step).
inline Tensor lift_inverse_learned(const Tensor& approx_hat, const Tensor& coeffs, bool padded,
                                   const LiftingLevel& level, bool subtract_detail = false) {
    if (!level.has_inverse()) throw ShapeError("lift_inverse_learned: level has no inverse parameters");
    detail::check_level(approx_hat, level);
    if (approx_hat.shape() != coeffs.shape()) throw ShapeError("lift_inverse_learned: approx/detail shape mismatch");
    Tensor base = subtract_detail ? approx_hat - coeffs : approx_hat;
    Tensor even = base - tanh(detail::depthwise_transposed(coeffs, level.inv_update_kernel, level.inv_update_bias));
    Tensor odd = coeffs + tanh(detail::depthwise_transposed(even, level.inv_predict_kernel, level.inv_predict_bias));
    return detail::merge(even, odd, padded);
}

/// Multi-level decomposition: final approximation plus per-level details.
struct WaveletPyramid {
    Tensor approximation;
    /// details[l] is the detail of level l+1 (finest first).
    std::vector<Tensor> details;
    std::vector<bool> padded;
    /// approximations[l] is the approximation after level l+1; the last equals `approximation`.
    std::vector<Tensor> approximations;

    std::size_t levels() const { return details.size(); }
};

/// Length of the final approximation after `levels` halvings (odd lengths round up).
inline std::size_t approximation_length(std::size_t length, std::size_t levels) {
    for (std::size_t l = 0; l < levels; ++l) length = (length + 1) / 2;
    return length;
}

/// Smallest input length accepted for `levels` levels: 4 * 2^levels.
inline std::size_t min_analysis_length(std::size_t levels) { return std::size_t{4} << levels; }

inline WaveletPyramid analyze(const Tensor& x, const std::vector<LiftingLevel>& levels) {
    if (levels.empty()) throw ShapeError("analyze requires at least one level");
    if (x.dim(-1) < min_analysis_length(levels.size())) {
        throw ShapeError("analyze: length " + std::to_string(x.dim(-1)) + " too short for " +
                         std::to_string(levels.size()) + " levels (need >= " +
                         std::to_string(min_analysis_length(levels.size())) + ")");
    }
    WaveletPyramid p;
    Tensor cur = x;
    for (const auto& level : levels) {
        LiftingStep s = lift_forward(cur, level);
        p.details.push_back(s.detail);
        p.padded.push_back(s.padded);
        p.approximations.push_back(s.approx);
        cur = s.approx;
    }
    p.approximation = cur;
    return p;
}

/// Reconstruction from the coarsest level down, using `pyramid.approximation`
/// (possibly replaced by a predicted one) and the stored details unchanged.
inline Tensor synthesize(const WaveletPyramid& pyramid, const std::vector<LiftingLevel>& levels, InverseMode mode,
                         bool subtract_detail = false) {
    if (pyramid.levels() != levels.size() || pyramid.padded.size() != levels.size()) {
        throw ShapeError("synthesize: pyramid has " + std::to_string(pyramid.levels()) + " levels, model has " +
                         std::to_string(levels.size()));
    }
    Tensor cur = pyramid.approximation;
    for (std::size_t l = levels.size(); l-- > 0;) {
        cur = mode == InverseMode::tied
                  ? lift_inverse_tied(cur, pyramid.details[l], pyramid.padded[l], levels[l])
                  : lift_inverse_learned(cur, pyramid.details[l], pyramid.padded[l], levels[l], subtract_detail);
    }
    return cur;
}

} // namespace adawave
