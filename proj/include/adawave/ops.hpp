#pragma once

// Differentiable operations over adawave::Tensor. Every operation computes its
// forward value eagerly and, when a tape is active and an input requires a
// gradient, records a closure that pushes the output gradient to its inputs.

#include <adawave/tensor.hpp>

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

namespace adawave {

// ---------------------------------------------------------------------------
// Broadcasting helpers

inline Shape broadcast_shape(const Shape& a, const Shape& b) {
    std::size_t r = std::max(a.size(), b.size());
    Shape out(r, 1);
    for (std::size_t i = 0; i < r; ++i) {
        std::size_t da = i < r - a.size() ? 1 : a[i - (r - a.size())];
        std::size_t db = i < r - b.size() ? 1 : b[i - (r - b.size())];
        if (da != db && da != 1 && db != 1) {
            throw ShapeError("cannot broadcast " + shape_str(a) + " with " + shape_str(b));
        }
        out[i] = std::max(da, db);
    }
    return out;
}

/// For each flat index of `out`, the flat index of the broadcast source `in`.
inline std::vector<std::size_t> broadcast_map(const Shape& in, const Shape& out) {
    std::size_t r = out.size();
    std::vector<std::size_t> stride(r, 0);
    std::size_t s = 1;
    for (std::size_t i = in.size(); i-- > 0;) {
        std::size_t o = i + (r - in.size());
        stride[o] = in[i] == 1 ? 0 : s;
        s *= in[i];
    }
    std::size_t n = shape_size(out);
    std::vector<std::size_t> map(n);
    std::vector<std::size_t> idx(r, 0);
    std::size_t cur = 0;
    for (std::size_t f = 0; f < n; ++f) {
        map[f] = cur;
        for (std::size_t d = r; d-- > 0;) {
            ++idx[d];
            cur += stride[d];
            if (idx[d] < out[d]) break;
            cur -= stride[d] * idx[d];
            idx[d] = 0;
        }
    }
    return map;
}

namespace detail {

template <class F, class DA, class DB>
Tensor binary_op(const Tensor& a, const Tensor& b, const char* name, F f, DA dfa, DB dfb) {
    Shape out_shape = broadcast_shape(a.shape(), b.shape());
    const bool same = a.shape() == out_shape && b.shape() == out_shape;
    std::vector<std::size_t> ma, mb;
    if (!same) {
        ma = broadcast_map(a.shape(), out_shape);
        mb = broadcast_map(b.shape(), out_shape);
    }
    std::size_t n = shape_size(out_shape);
    std::vector<double> y(n);
    auto xa = a.data();
    auto xb = b.data();
    for (std::size_t i = 0; i < n; ++i) {
        std::size_t ia = same ? i : ma[i];
        std::size_t ib = same ? i : mb[i];
        y[i] = f(xa[ia], xb[ib]);
    }
    Tensor out = make_result(std::move(out_shape), std::move(y), name);
    if (Tape* tape = recording(a, b)) {
        out.set_requires_grad(true);
        tape->record(out, [a, b, out, ma = std::move(ma), mb = std::move(mb), same, dfa, dfb] {
            auto g = out.grad();
            auto xa = a.data();
            auto xb = b.data();
            auto yv = out.data();
            double* ga = grad_ptr(a);
            double* gb = grad_ptr(b);
            for (std::size_t i = 0; i < g.size(); ++i) {
                std::size_t ia = same ? i : ma[i];
                std::size_t ib = same ? i : mb[i];
                if (ga) ga[ia] += g[i] * dfa(xa[ia], xb[ib], yv[i]);
                if (gb) gb[ib] += g[i] * dfb(xa[ia], xb[ib], yv[i]);
            }
        });
    }
    return out;
}

template <class F, class DF>
Tensor unary_op(const Tensor& x, const char* name, F f, DF df) {
    auto xv = x.data();
    std::vector<double> y(xv.size());
    for (std::size_t i = 0; i < y.size(); ++i) y[i] = f(xv[i]);
    Tensor out = make_result(x.shape(), std::move(y), name);
    if (Tape* tape = recording(x)) {
        out.set_requires_grad(true);
        tape->record(out, [x, out, df] {
            auto g = out.grad();
            auto xv = x.data();
            auto yv = out.data();
            double* gx = grad_ptr(x);
            for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * df(xv[i], yv[i]);
        });
    }
    return out;
}

inline std::size_t normalize_axis(int axis, std::size_t rank) {
    int r = static_cast<int>(rank);
    int a = axis < 0 ? axis + r : axis;
    if (a < 0 || a >= r) throw ShapeError("axis " + std::to_string(axis) + " out of range");
    return static_cast<std::size_t>(a);
}

/// Product of all dimensions except the last `keep`.
inline std::size_t leading(const Shape& s, std::size_t keep) {
    std::size_t n = 1;
    for (std::size_t i = 0; i + keep < s.size(); ++i) n *= s[i];
    return n;
}

} // namespace detail

// ---------------------------------------------------------------------------
// Elementwise

inline Tensor add(const Tensor& a, const Tensor& b) {
    return detail::binary_op(
        a, b, "add", [](double x, double y) { return x + y; }, [](double, double, double) { return 1.0; },
        [](double, double, double) { return 1.0; });
}

inline Tensor sub(const Tensor& a, const Tensor& b) {
    return detail::binary_op(
        a, b, "sub", [](double x, double y) { return x - y; }, [](double, double, double) { return 1.0; },
        [](double, double, double) { return -1.0; });
}

inline Tensor mul(const Tensor& a, const Tensor& b) {
    return detail::binary_op(
        a, b, "mul", [](double x, double y) { return x * y; }, [](double, double y, double) { return y; },
        [](double x, double, double) { return x; });
}

inline Tensor div(const Tensor& a, const Tensor& b) {
    return detail::binary_op(
        a, b, "div", [](double x, double y) { return x / y; }, [](double, double y, double) { return 1.0 / y; },
        [](double x, double y, double) { return -x / (y * y); });
}

inline Tensor scale(const Tensor& x, double s) {
    return detail::unary_op(
        x, "scale", [s](double v) { return v * s; }, [s](double, double) { return s; });
}

inline Tensor add_scalar(const Tensor& x, double c) {
    return detail::unary_op(
        x, "add_scalar", [c](double v) { return v + c; }, [](double, double) { return 1.0; });
}

inline Tensor tanh(const Tensor& x) {
    return detail::unary_op(
        x, "tanh", [](double v) { return std::tanh(v); }, [](double, double y) { return 1.0 - y * y; });
}

inline Tensor relu(const Tensor& x) {
    return detail::unary_op(
        x, "relu", [](double v) { return v > 0.0 ? v : 0.0; }, [](double v, double) { return v > 0.0 ? 1.0 : 0.0; });
}

inline Tensor operator+(const Tensor& a, const Tensor& b) { return add(a, b); }
inline Tensor operator-(const Tensor& a, const Tensor& b) { return sub(a, b); }
inline Tensor operator*(const Tensor& a, const Tensor& b) { return mul(a, b); }
inline Tensor operator/(const Tensor& a, const Tensor& b) { return div(a, b); }

// ---------------------------------------------------------------------------
// Reductions

inline Tensor sum(const Tensor& x) {
    double s = 0.0;
    for (double v : x.data()) s += v;
    Tensor out = detail::make_result({1}, {s}, "sum");
    if (Tape* tape = detail::recording(x)) {
        out.set_requires_grad(true);
        tape->record(out, [x, out] {
            double g = out.grad()[0];
            double* gx = detail::grad_ptr(x);
            for (std::size_t i = 0; i < x.size(); ++i) gx[i] += g;
        });
    }
    return out;
}

inline Tensor mean(const Tensor& x) { return scale(sum(x), 1.0 / static_cast<double>(x.size())); }

/// Softmax along `axis`.
inline Tensor softmax(const Tensor& x, int axis = -1) {
    std::size_t a = detail::normalize_axis(axis, x.rank());
    const Shape& s = x.shape();
    std::size_t n = s[a];
    std::size_t inner = 1;
    for (std::size_t i = a + 1; i < s.size(); ++i) inner *= s[i];
    std::size_t outer = x.size() / (n * inner);
    auto xv = x.data();
    std::vector<double> y(x.size());
    for (std::size_t o = 0; o < outer; ++o) {
        for (std::size_t in = 0; in < inner; ++in) {
            std::size_t base = o * n * inner + in;
            double mx = xv[base];
            for (std::size_t j = 1; j < n; ++j) mx = std::max(mx, xv[base + j * inner]);
            double z = 0.0;
            for (std::size_t j = 0; j < n; ++j) {
                double e = std::exp(xv[base + j * inner] - mx);
                y[base + j * inner] = e;
                z += e;
            }
            for (std::size_t j = 0; j < n; ++j) y[base + j * inner] /= z;
        }
    }
    Tensor out = detail::make_result(s, std::move(y), "softmax");
    if (Tape* tape = detail::recording(x)) {
        out.set_requires_grad(true);
        tape->record(out, [x, out, outer, n, inner] {
            auto g = out.grad();
            auto yv = out.data();
            double* gx = detail::grad_ptr(x);
            for (std::size_t o = 0; o < outer; ++o) {
                for (std::size_t in = 0; in < inner; ++in) {
                    std::size_t base = o * n * inner + in;
                    double dot = 0.0;
                    for (std::size_t j = 0; j < n; ++j) dot += g[base + j * inner] * yv[base + j * inner];
                    for (std::size_t j = 0; j < n; ++j) {
                        std::size_t k = base + j * inner;
                        gx[k] += yv[k] * (g[k] - dot);
                    }
                }
            }
        });
    }
    return out;
}

/// Mean squared error. With a mask, the average runs over positions where the
/// mask is 1; a mask with no selected position falls back to the full mean.
inline Tensor mse(const Tensor& pred, const Tensor& target, const std::optional<Tensor>& mask = std::nullopt) {
    if (pred.shape() != target.shape()) {
        throw ShapeError("mse: prediction " + shape_str(pred.shape()) + " vs target " + shape_str(target.shape()));
    }
    std::vector<double> w(pred.size(), 1.0);
    if (mask) {
        if (mask->shape() != pred.shape()) throw ShapeError("mse: mask shape " + shape_str(mask->shape()));
        double count = 0.0;
        for (double m : mask->data()) count += m;
        if (count > 0.0) w.assign(mask->data().begin(), mask->data().end());
    }
    double denom = 0.0;
    for (double v : w) denom += v;
    auto p = pred.data();
    auto t = target.data();
    double acc = 0.0;
    for (std::size_t i = 0; i < w.size(); ++i) {
        if (w[i] != 0.0) {
            double d = p[i] - t[i];
            acc += w[i] * d * d;
        }
    }
    Tensor out = detail::make_result({1}, {acc / denom}, "mse");
    if (Tape* tape = detail::recording(pred, target)) {
        out.set_requires_grad(true);
        tape->record(out, [pred, target, out, w = std::move(w), denom] {
            double g = out.grad()[0];
            auto p = pred.data();
            auto t = target.data();
            double* gp = detail::grad_ptr(pred);
            double* gt = detail::grad_ptr(target);
            for (std::size_t i = 0; i < w.size(); ++i) {
                if (w[i] == 0.0) continue;
                double d = 2.0 * w[i] * (p[i] - t[i]) / denom * g;
                if (gp) gp[i] += d;
                if (gt) gt[i] -= d;
            }
        });
    }
    return out;
}

// ---------------------------------------------------------------------------
// Shape manipulation

inline Tensor reshape(const Tensor& x, Shape shape) {
    if (shape_size(shape) != x.size()) {
        throw ShapeError("reshape " + shape_str(x.shape()) + " -> " + shape_str(shape));
    }
    Tensor out = detail::make_result(std::move(shape), x.values(), "reshape");
    if (Tape* tape = detail::recording(x)) {
        out.set_requires_grad(true);
        tape->record(out, [x, out] {
            auto g = out.grad();
            double* gx = detail::grad_ptr(x);
            for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i];
        });
    }
    return out;
}

inline Tensor permute(const Tensor& x, const std::vector<std::size_t>& axes) {
    const Shape& s = x.shape();
    std::size_t r = s.size();
    if (axes.size() != r) throw ShapeError("permute: axis count mismatch");
    std::vector<bool> seen(r, false);
    Shape out_shape(r);
    for (std::size_t i = 0; i < r; ++i) {
        if (axes[i] >= r || seen[axes[i]]) throw ShapeError("permute: invalid axes");
        seen[axes[i]] = true;
        out_shape[i] = s[axes[i]];
    }
    std::vector<std::size_t> in_stride(r, 1);
    for (std::size_t i = r - 1; i-- > 0;) in_stride[i] = in_stride[i + 1] * s[i + 1];
    // source index of each output element
    std::vector<std::size_t> src(x.size());
    {
        std::vector<std::size_t> idx(r, 0);
        std::size_t cur = 0;
        for (std::size_t f = 0; f < src.size(); ++f) {
            src[f] = cur;
            for (std::size_t d = r; d-- > 0;) {
                ++idx[d];
                cur += in_stride[axes[d]];
                if (idx[d] < out_shape[d]) break;
                cur -= in_stride[axes[d]] * idx[d];
                idx[d] = 0;
            }
        }
    }
    auto xv = x.data();
    std::vector<double> y(x.size());
    for (std::size_t f = 0; f < y.size(); ++f) y[f] = xv[src[f]];
    Tensor out = detail::make_result(std::move(out_shape), std::move(y), "permute");
    if (Tape* tape = detail::recording(x)) {
        out.set_requires_grad(true);
        tape->record(out, [x, out, src = std::move(src)] {
            auto g = out.grad();
            double* gx = detail::grad_ptr(x);
            for (std::size_t f = 0; f < g.size(); ++f) gx[src[f]] += g[f];
        });
    }
    return out;
}

/// Elements start, start+step, ... (count of them) along the last axis.
inline Tensor strided_slice(const Tensor& x, std::size_t start, std::size_t step, std::size_t count) {
    std::size_t len = x.dim(-1);
    if (count == 0 || step == 0 || start + (count - 1) * step >= len) {
        throw ShapeError("strided_slice out of range for length " + std::to_string(len));
    }
    std::size_t rows = x.size() / len;
    Shape out_shape = x.shape();
    out_shape.back() = count;
    auto xv = x.data();
    std::vector<double> y(rows * count);
    for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t n = 0; n < count; ++n) y[r * count + n] = xv[r * len + start + n * step];
    }
    Tensor out = detail::make_result(std::move(out_shape), std::move(y), "strided_slice");
    if (Tape* tape = detail::recording(x)) {
        out.set_requires_grad(true);
        tape->record(out, [x, out, rows, len, start, step, count] {
            auto g = out.grad();
            double* gx = detail::grad_ptr(x);
            for (std::size_t r = 0; r < rows; ++r) {
                for (std::size_t n = 0; n < count; ++n) gx[r * len + start + n * step] += g[r * count + n];
            }
        });
    }
    return out;
}

/// Contiguous range [start, start+len) along the last axis.
inline Tensor narrow(const Tensor& x, std::size_t start, std::size_t len) { return strided_slice(x, start, 1, len); }

/// Merges two equal-shape tensors along the last axis: out[2n] = even[n], out[2n+1] = odd[n].
inline Tensor interleave(const Tensor& even, const Tensor& odd) {
    if (even.shape() != odd.shape()) {
        throw ShapeError("interleave: " + shape_str(even.shape()) + " vs " + shape_str(odd.shape()));
    }
    std::size_t half = even.dim(-1);
    std::size_t rows = even.size() / half;
    Shape out_shape = even.shape();
    out_shape.back() = 2 * half;
    auto ev = even.data();
    auto ov = odd.data();
    std::vector<double> y(2 * even.size());
    for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t n = 0; n < half; ++n) {
            y[r * 2 * half + 2 * n] = ev[r * half + n];
            y[r * 2 * half + 2 * n + 1] = ov[r * half + n];
        }
    }
    Tensor out = detail::make_result(std::move(out_shape), std::move(y), "interleave");
    if (Tape* tape = detail::recording(even, odd)) {
        out.set_requires_grad(true);
        tape->record(out, [even, odd, out, rows, half] {
            auto g = out.grad();
            double* ge = detail::grad_ptr(even);
            double* go = detail::grad_ptr(odd);
            for (std::size_t r = 0; r < rows; ++r) {
                for (std::size_t n = 0; n < half; ++n) {
                    if (ge) ge[r * half + n] += g[r * 2 * half + 2 * n];
                    if (go) go[r * half + n] += g[r * 2 * half + 2 * n + 1];
                }
            }
        });
    }
    return out;
}

/// Appends `count` copies of the last sample along the last axis.
inline Tensor pad_edge(const Tensor& x, std::size_t count) {
    if (count == 0) return x;
    std::size_t len = x.dim(-1);
    std::size_t rows = x.size() / len;
    std::size_t out_len = len + count;
    Shape out_shape = x.shape();
    out_shape.back() = out_len;
    auto xv = x.data();
    std::vector<double> y(rows * out_len);
    for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t t = 0; t < out_len; ++t) y[r * out_len + t] = xv[r * len + std::min(t, len - 1)];
    }
    Tensor out = detail::make_result(std::move(out_shape), std::move(y), "pad_edge");
    if (Tape* tape = detail::recording(x)) {
        out.set_requires_grad(true);
        tape->record(out, [x, out, rows, len, out_len] {
            auto g = out.grad();
            double* gx = detail::grad_ptr(x);
            for (std::size_t r = 0; r < rows; ++r) {
                for (std::size_t t = 0; t < out_len; ++t) gx[r * len + std::min(t, len - 1)] += g[r * out_len + t];
            }
        });
    }
    return out;
}

// ---------------------------------------------------------------------------
// Linear algebra

/// Batched matrix product. a: [..., M, K]; b: [..., K, N] with identical batch
/// dimensions, or a plain [K, N] matrix shared across the batch.
inline Tensor matmul(const Tensor& a, const Tensor& b) {
    if (a.rank() < 2 || b.rank() < 2) throw ShapeError("matmul needs rank >= 2 operands");
    std::size_t m = a.dim(-2), k = a.dim(-1), n = b.dim(-1);
    if (b.dim(-2) != k) throw ShapeError("matmul: " + shape_str(a.shape()) + " x " + shape_str(b.shape()));
    std::size_t batch = a.size() / (m * k);
    bool shared_b = b.rank() == 2;
    if (!shared_b) {
        Shape ab(a.shape().begin(), a.shape().end() - 2);
        Shape bb(b.shape().begin(), b.shape().end() - 2);
        if (ab != bb) throw ShapeError("matmul batch dims: " + shape_str(a.shape()) + " x " + shape_str(b.shape()));
    }
    Shape out_shape(a.shape().begin(), a.shape().end() - 1);
    out_shape.push_back(n);
    auto av = a.data();
    auto bv = b.data();
    std::vector<double> y(batch * m * n, 0.0);
    for (std::size_t p = 0; p < batch; ++p) {
        const double* A = av.data() + p * m * k;
        const double* B = bv.data() + (shared_b ? 0 : p * k * n);
        double* Y = y.data() + p * m * n;
        for (std::size_t i = 0; i < m; ++i) {
            for (std::size_t q = 0; q < k; ++q) {
                double aiq = A[i * k + q];
                if (aiq == 0.0) continue;
                for (std::size_t j = 0; j < n; ++j) Y[i * n + j] += aiq * B[q * n + j];
            }
        }
    }
    Tensor out = detail::make_result(std::move(out_shape), std::move(y), "matmul");
    if (Tape* tape = detail::recording(a, b)) {
        out.set_requires_grad(true);
        tape->record(out, [a, b, out, batch, m, k, n, shared_b] {
            auto g = out.grad();
            auto av = a.data();
            auto bv = b.data();
            double* ga = detail::grad_ptr(a);
            double* gb = detail::grad_ptr(b);
            for (std::size_t p = 0; p < batch; ++p) {
                const double* A = av.data() + p * m * k;
                const double* B = bv.data() + (shared_b ? 0 : p * k * n);
                const double* G = g.data() + p * m * n;
                for (std::size_t i = 0; i < m; ++i) {
                    for (std::size_t q = 0; q < k; ++q) {
                        double acc = 0.0;
                        for (std::size_t j = 0; j < n; ++j) {
                            acc += G[i * n + j] * B[q * n + j];
                            if (gb) gb[(shared_b ? 0 : p * k * n) + q * n + j] += A[i * k + q] * G[i * n + j];
                        }
                        if (ga) ga[p * m * k + i * k + q] += acc;
                    }
                }
            }
        });
    }
    return out;
}

/// Affine map over the trailing dimension: x[..., D_in] * W[D_in, D_out] + b[D_out].
inline Tensor linear(const Tensor& x, const Tensor& weight, const Tensor& bias = {}) {
    if (weight.rank() != 2 || x.dim(-1) != weight.dim(0)) {
        throw ShapeError("linear: input " + shape_str(x.shape()) + " vs weight " + shape_str(weight.shape()));
    }
    if (bias.defined() && (bias.rank() != 1 || bias.dim(0) != weight.dim(1))) {
        throw ShapeError("linear: bias " + shape_str(bias.shape()) + " vs weight " + shape_str(weight.shape()));
    }
    std::size_t din = weight.dim(0), dout = weight.dim(1);
    std::size_t rows = x.size() / din;
    Shape out_shape = x.shape();
    out_shape.back() = dout;
    auto xv = x.data();
    auto wv = weight.data();
    std::vector<double> y(rows * dout, 0.0);
    for (std::size_t r = 0; r < rows; ++r) {
        double* Y = y.data() + r * dout;
        if (bias.defined()) {
            auto bv = bias.data();
            std::copy(bv.begin(), bv.end(), Y);
        }
        for (std::size_t i = 0; i < din; ++i) {
            double xi = xv[r * din + i];
            if (xi == 0.0) continue;
            const double* W = wv.data() + i * dout;
            for (std::size_t j = 0; j < dout; ++j) Y[j] += xi * W[j];
        }
    }
    Tensor out = detail::make_result(std::move(out_shape), std::move(y), "linear");
    if (Tape* tape = detail::recording(x, weight, bias)) {
        out.set_requires_grad(true);
        tape->record(out, [x, weight, bias, out, rows, din, dout] {
            auto g = out.grad();
            auto xv = x.data();
            auto wv = weight.data();
            double* gx = detail::grad_ptr(x);
            double* gw = detail::grad_ptr(weight);
            double* gb = detail::grad_ptr(bias);
            for (std::size_t r = 0; r < rows; ++r) {
                const double* G = g.data() + r * dout;
                if (gb) {
                    for (std::size_t j = 0; j < dout; ++j) gb[j] += G[j];
                }
                for (std::size_t i = 0; i < din; ++i) {
                    const double* W = wv.data() + i * dout;
                    double xi = xv[r * din + i];
                    double acc = 0.0;
                    for (std::size_t j = 0; j < dout; ++j) {
                        acc += G[j] * W[j];
                        if (gw) gw[i * dout + j] += xi * G[j];
                    }
                    if (gx) gx[r * din + i] += acc;
                }
            }
        });
    }
    return out;
}

/// Normalizes the trailing dimension to zero mean and unit variance, then
/// applies the per-feature scale and shift.
inline Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps = 1e-5) {
    std::size_t d = x.dim(-1);
    if (gamma.shape() != Shape{d} || beta.shape() != Shape{d}) throw ShapeError("layer_norm: parameter shape");
    std::size_t rows = x.size() / d;
    auto xv = x.data();
    auto gv = gamma.data();
    auto bv = beta.data();
    std::vector<double> y(x.size()), xhat(x.size()), rstd(rows);
    for (std::size_t r = 0; r < rows; ++r) {
        const double* X = xv.data() + r * d;
        double mu = 0.0;
        for (std::size_t i = 0; i < d; ++i) mu += X[i];
        mu /= static_cast<double>(d);
        double var = 0.0;
        for (std::size_t i = 0; i < d; ++i) var += (X[i] - mu) * (X[i] - mu);
        var /= static_cast<double>(d);
        rstd[r] = 1.0 / std::sqrt(var + eps);
        for (std::size_t i = 0; i < d; ++i) {
            xhat[r * d + i] = (X[i] - mu) * rstd[r];
            y[r * d + i] = xhat[r * d + i] * gv[i] + bv[i];
        }
    }
    Tensor out = detail::make_result(x.shape(), std::move(y), "layer_norm");
    if (Tape* tape = detail::recording(x, gamma, beta)) {
        out.set_requires_grad(true);
        tape->record(out, [x, gamma, beta, out, xhat = std::move(xhat), rstd = std::move(rstd), rows, d] {
            auto g = out.grad();
            auto gv = gamma.data();
            double* gx = detail::grad_ptr(x);
            double* gg = detail::grad_ptr(gamma);
            double* gb = detail::grad_ptr(beta);
            const double dd = static_cast<double>(d);
            for (std::size_t r = 0; r < rows; ++r) {
                const double* G = g.data() + r * d;
                const double* H = xhat.data() + r * d;
                double s1 = 0.0, s2 = 0.0;
                for (std::size_t i = 0; i < d; ++i) {
                    double dh = G[i] * gv[i];
                    s1 += dh;
                    s2 += dh * H[i];
                    if (gg) gg[i] += G[i] * H[i];
                    if (gb) gb[i] += G[i];
                }
                if (gx) {
                    for (std::size_t i = 0; i < d; ++i) {
                        double dh = G[i] * gv[i];
                        gx[r * d + i] += rstd[r] / dd * (dd * dh - s1 - H[i] * s2);
                    }
                }
            }
        });
    }
    return out;
}

// ---------------------------------------------------------------------------
// Convolution

enum class Padding {
    /// (K-1)/2 zeros on both ends; K must be odd.
    same,
    /// (K-1)/2 zeros on the left and K/2 on the right; any K keeps the length.
    same_asymmetric,
};

namespace detail {

inline std::size_t left_pad(std::size_t k, Padding padding) {
    if (padding == Padding::same && k % 2 == 0) {
        throw ShapeError("same padding requires an odd kernel size, got " + std::to_string(k));
    }
    return (k - 1) / 2;
}

struct ConvDims {
    std::size_t batch, cin, cout, len, k, groups, cin_g, cout_g, pad;
};

} // namespace detail

/// Stride-1 cross-correlation with zero padding that preserves the length.
/// input: [..., C_in, L]; kernels: [C_out, C_in/groups, K]; bias: [C_out] or undefined.
inline Tensor conv1d(const Tensor& input, const Tensor& kernels, const Tensor& bias = {},
                     Padding padding = Padding::same, std::size_t groups = 1) {
    if (input.rank() < 2 || kernels.rank() != 3) throw ShapeError("conv1d: bad operand ranks");
    detail::ConvDims c{};
    c.cin = input.dim(-2);
    c.len = input.dim(-1);
    c.batch = input.size() / (c.cin * c.len);
    c.cout = kernels.dim(0);
    c.k = kernels.dim(2);
    c.groups = groups;
    if (groups == 0 || c.cin % groups != 0 || c.cout % groups != 0 || kernels.dim(1) != c.cin / groups) {
        throw ShapeError("conv1d: input " + shape_str(input.shape()) + " vs kernels " + shape_str(kernels.shape()) +
                         " with groups " + std::to_string(groups));
    }
    if (bias.defined() && bias.shape() != Shape{c.cout}) throw ShapeError("conv1d: bias shape " + shape_str(bias.shape()));
    c.cin_g = c.cin / groups;
    c.cout_g = c.cout / groups;
    c.pad = detail::left_pad(c.k, padding);

    Shape out_shape = input.shape();
    out_shape[out_shape.size() - 2] = c.cout;
    auto xv = input.data();
    auto wv = kernels.data();
    std::vector<double> y(c.batch * c.cout * c.len, 0.0);
    for (std::size_t b = 0; b < c.batch; ++b) {
        for (std::size_t co = 0; co < c.cout; ++co) {
            double* Y = y.data() + (b * c.cout + co) * c.len;
            if (bias.defined()) std::fill(Y, Y + c.len, bias.data()[co]);
            std::size_t g = co / c.cout_g;
            for (std::size_t cl = 0; cl < c.cin_g; ++cl) {
                std::size_t ci = g * c.cin_g + cl;
                const double* X = xv.data() + (b * c.cin + ci) * c.len;
                const double* W = wv.data() + (co * c.cin_g + cl) * c.k;
                for (std::size_t kk = 0; kk < c.k; ++kk) {
                    // y[t] += W[kk] * x[t + kk - pad]
                    std::ptrdiff_t off = static_cast<std::ptrdiff_t>(kk) - static_cast<std::ptrdiff_t>(c.pad);
                    std::size_t t0 = off < 0 ? static_cast<std::size_t>(-off) : 0;
                    std::size_t t1 = off > 0 ? c.len - std::min(c.len, static_cast<std::size_t>(off)) : c.len;
                    double w = W[kk];
                    for (std::size_t t = t0; t < t1; ++t) Y[t] += w * X[static_cast<std::ptrdiff_t>(t) + off];
                }
            }
        }
    }
    Tensor out = detail::make_result(std::move(out_shape), std::move(y), "conv1d");
    if (Tape* tape = detail::recording(input, kernels, bias)) {
        out.set_requires_grad(true);
        tape->record(out, [input, kernels, bias, out, c] {
            auto g = out.grad();
            auto xv = input.data();
            auto wv = kernels.data();
            double* gx = detail::grad_ptr(input);
            double* gw = detail::grad_ptr(kernels);
            double* gb = detail::grad_ptr(bias);
            for (std::size_t b = 0; b < c.batch; ++b) {
                for (std::size_t co = 0; co < c.cout; ++co) {
                    const double* G = g.data() + (b * c.cout + co) * c.len;
                    if (gb) {
                        for (std::size_t t = 0; t < c.len; ++t) gb[co] += G[t];
                    }
                    std::size_t grp = co / c.cout_g;
                    for (std::size_t cl = 0; cl < c.cin_g; ++cl) {
                        std::size_t ci = grp * c.cin_g + cl;
                        std::size_t xoff = (b * c.cin + ci) * c.len;
                        std::size_t woff = (co * c.cin_g + cl) * c.k;
                        for (std::size_t kk = 0; kk < c.k; ++kk) {
                            std::ptrdiff_t off = static_cast<std::ptrdiff_t>(kk) - static_cast<std::ptrdiff_t>(c.pad);
                            std::size_t t0 = off < 0 ? static_cast<std::size_t>(-off) : 0;
                            std::size_t t1 = off > 0 ? c.len - std::min(c.len, static_cast<std::size_t>(off)) : c.len;
                            double w = wv[woff + kk];
                            double acc = 0.0;
                            for (std::size_t t = t0; t < t1; ++t) {
                                std::size_t s = static_cast<std::size_t>(static_cast<std::ptrdiff_t>(t) + off);
                                acc += G[t] * xv[xoff + s];
                                if (gx) gx[xoff + s] += w * G[t];
                            }
                            if (gw) gw[woff + kk] += acc;
                        }
                    }
                }
            }
        });
    }
    return out;
}

/// Stride-1 transposed convolution: the adjoint of conv1d (with respect to its
/// input) under the same padding, plus a bias.
/// input: [..., C_in, L]; kernels: [C_in, C_out/groups, K]; bias: [C_out] or undefined.
inline Tensor conv_transpose1d(const Tensor& input, const Tensor& kernels, const Tensor& bias = {},
                               Padding padding = Padding::same, std::size_t groups = 1) {
    if (input.rank() < 2 || kernels.rank() != 3) throw ShapeError("conv_transpose1d: bad operand ranks");
    detail::ConvDims c{};
    c.cin = input.dim(-2);
    c.len = input.dim(-1);
    c.batch = input.size() / (c.cin * c.len);
    c.k = kernels.dim(2);
    c.groups = groups;
    if (groups == 0 || kernels.dim(0) != c.cin || c.cin % groups != 0) {
        throw ShapeError("conv_transpose1d: input " + shape_str(input.shape()) + " vs kernels " +
                         shape_str(kernels.shape()));
    }
    c.cout_g = kernels.dim(1);
    c.cout = c.cout_g * groups;
    c.cin_g = c.cin / groups;
    if (bias.defined() && bias.shape() != Shape{c.cout}) {
        throw ShapeError("conv_transpose1d: bias shape " + shape_str(bias.shape()));
    }
    c.pad = detail::left_pad(c.k, padding);

    Shape out_shape = input.shape();
    out_shape[out_shape.size() - 2] = c.cout;
    auto xv = input.data();
    auto wv = kernels.data();
    std::vector<double> y(c.batch * c.cout * c.len, 0.0);
    for (std::size_t b = 0; b < c.batch; ++b) {
        if (bias.defined()) {
            for (std::size_t co = 0; co < c.cout; ++co) {
                std::fill_n(y.data() + (b * c.cout + co) * c.len, c.len, bias.data()[co]);
            }
        }
        for (std::size_t ci = 0; ci < c.cin; ++ci) {
            std::size_t grp = ci / c.cin_g;
            const double* X = xv.data() + (b * c.cin + ci) * c.len;
            for (std::size_t ol = 0; ol < c.cout_g; ++ol) {
                std::size_t co = grp * c.cout_g + ol;
                double* Y = y.data() + (b * c.cout + co) * c.len;
                const double* W = wv.data() + (ci * c.cout_g + ol) * c.k;
                for (std::size_t kk = 0; kk < c.k; ++kk) {
                    // y[t + kk - pad] += W[kk] * x[t]
                    std::ptrdiff_t off = static_cast<std::ptrdiff_t>(kk) - static_cast<std::ptrdiff_t>(c.pad);
                    std::size_t t0 = off < 0 ? static_cast<std::size_t>(-off) : 0;
                    std::size_t t1 = off > 0 ? c.len - std::min(c.len, static_cast<std::size_t>(off)) : c.len;
                    double w = W[kk];
                    for (std::size_t t = t0; t < t1; ++t) Y[static_cast<std::ptrdiff_t>(t) + off] += w * X[t];
                }
            }
        }
    }
    Tensor out = detail::make_result(std::move(out_shape), std::move(y), "conv_transpose1d");
    if (Tape* tape = detail::recording(input, kernels, bias)) {
        out.set_requires_grad(true);
        tape->record(out, [input, kernels, bias, out, c] {
            auto g = out.grad();
            auto xv = input.data();
            auto wv = kernels.data();
            double* gx = detail::grad_ptr(input);
            double* gw = detail::grad_ptr(kernels);
            double* gb = detail::grad_ptr(bias);
            for (std::size_t b = 0; b < c.batch; ++b) {
                if (gb) {
                    for (std::size_t co = 0; co < c.cout; ++co) {
                        const double* G = g.data() + (b * c.cout + co) * c.len;
                        for (std::size_t t = 0; t < c.len; ++t) gb[co] += G[t];
                    }
                }
                for (std::size_t ci = 0; ci < c.cin; ++ci) {
                    std::size_t grp = ci / c.cin_g;
                    std::size_t xoff = (b * c.cin + ci) * c.len;
                    for (std::size_t ol = 0; ol < c.cout_g; ++ol) {
                        std::size_t co = grp * c.cout_g + ol;
                        const double* G = g.data() + (b * c.cout + co) * c.len;
                        std::size_t woff = (ci * c.cout_g + ol) * c.k;
                        for (std::size_t kk = 0; kk < c.k; ++kk) {
                            std::ptrdiff_t off = static_cast<std::ptrdiff_t>(kk) - static_cast<std::ptrdiff_t>(c.pad);
                            std::size_t t0 = off < 0 ? static_cast<std::size_t>(-off) : 0;
                            std::size_t t1 = off > 0 ? c.len - std::min(c.len, static_cast<std::size_t>(off)) : c.len;
                            double w = wv[woff + kk];
                            double acc = 0.0;
                            for (std::size_t t = t0; t < t1; ++t) {
                                double gy = G[static_cast<std::ptrdiff_t>(t) + off];
                                acc += gy * xv[xoff + t];
                                if (gx) gx[xoff + t] += w * gy;
                            }
                            if (gw) gw[woff + kk] += acc;
                        }
                    }
                }
            }
        });
    }
    return out;
}

// ---------------------------------------------------------------------------
// Series-specific

/// Centered moving average along the last axis; indices outside the series are
/// clamped to the first/last sample.
inline Tensor moving_average(const Tensor& x, std::size_t window) {
    if (window == 0 || window % 2 == 0) {
        throw ShapeError("moving average window must be a positive odd integer, got " + std::to_string(window));
    }
    std::size_t len = x.dim(-1);
    std::size_t rows = x.size() / len;
    auto half = static_cast<std::ptrdiff_t>((window - 1) / 2);
    auto L = static_cast<std::ptrdiff_t>(len);
    auto clamp = [L](std::ptrdiff_t i) { return static_cast<std::size_t>(std::clamp<std::ptrdiff_t>(i, 0, L - 1)); };
    const double inv = 1.0 / static_cast<double>(window);
    auto xv = x.data();
    std::vector<double> y(x.size());
    for (std::size_t r = 0; r < rows; ++r) {
        const double* X = xv.data() + r * len;
        for (std::ptrdiff_t t = 0; t < L; ++t) {
            double acc = 0.0;
            for (std::ptrdiff_t j = -half; j <= half; ++j) acc += X[clamp(t + j)];
            y[r * len + static_cast<std::size_t>(t)] = acc * inv;
        }
    }
    Tensor out = detail::make_result(x.shape(), std::move(y), "moving_average");
    if (Tape* tape = detail::recording(x)) {
        out.set_requires_grad(true);
        tape->record(out, [x, out, rows, len, half, L, inv, clamp] {
            auto g = out.grad();
            double* gx = detail::grad_ptr(x);
            for (std::size_t r = 0; r < rows; ++r) {
                for (std::ptrdiff_t t = 0; t < L; ++t) {
                    double gt = g[r * len + static_cast<std::size_t>(t)] * inv;
                    for (std::ptrdiff_t j = -half; j <= half; ++j) gx[r * len + clamp(t + j)] += gt;
                }
            }
        });
    }
    return out;
}

/// Per-channel affine map selected by a group table.
/// x: [..., C, L]; weights: [k, L, L_out]; biases: [k, L_out]; group_of[c] in [0, k).
inline Tensor grouped_linear(const Tensor& x, const Tensor& weights, const Tensor& biases,
                             const std::vector<std::size_t>& group_of) {
    if (x.rank() < 2 || weights.rank() != 3 || biases.rank() != 2) throw ShapeError("grouped_linear: operand ranks");
    std::size_t C = x.dim(-2), L = x.dim(-1);
    std::size_t k = weights.dim(0), lout = weights.dim(2);
    if (weights.dim(1) != L || biases.dim(0) != k || biases.dim(1) != lout || group_of.size() != C) {
        throw ShapeError("grouped_linear: input " + shape_str(x.shape()) + " vs weights " + shape_str(weights.shape()));
    }
    for (auto g : group_of) {
        if (g >= k) throw ShapeError("grouped_linear: group id out of range");
    }
    std::size_t batch = x.size() / (C * L);
    Shape out_shape = x.shape();
    out_shape.back() = lout;
    auto xv = x.data();
    auto wv = weights.data();
    auto bv = biases.data();
    std::vector<double> y(batch * C * lout, 0.0);
    for (std::size_t b = 0; b < batch; ++b) {
        for (std::size_t c = 0; c < C; ++c) {
            std::size_t grp = group_of[c];
            const double* X = xv.data() + (b * C + c) * L;
            const double* W = wv.data() + grp * L * lout;
            double* Y = y.data() + (b * C + c) * lout;
            std::copy_n(bv.data() + grp * lout, lout, Y);
            for (std::size_t i = 0; i < L; ++i) {
                double xi = X[i];
                for (std::size_t j = 0; j < lout; ++j) Y[j] += xi * W[i * lout + j];
            }
        }
    }
    Tensor out = detail::make_result(std::move(out_shape), std::move(y), "grouped_linear");
    if (Tape* tape = detail::recording(x, weights, biases)) {
        out.set_requires_grad(true);
        tape->record(out, [x, weights, biases, out, group_of, batch, C, L, lout] {
            auto g = out.grad();
            auto xv = x.data();
            auto wv = weights.data();
            double* gx = detail::grad_ptr(x);
            double* gw = detail::grad_ptr(weights);
            double* gb = detail::grad_ptr(biases);
            for (std::size_t b = 0; b < batch; ++b) {
                for (std::size_t c = 0; c < C; ++c) {
                    std::size_t grp = group_of[c];
                    const double* G = g.data() + (b * C + c) * lout;
                    const double* X = xv.data() + (b * C + c) * L;
                    if (gb) {
                        for (std::size_t j = 0; j < lout; ++j) gb[grp * lout + j] += G[j];
                    }
                    for (std::size_t i = 0; i < L; ++i) {
                        const double* W = wv.data() + grp * L * lout + i * lout;
                        double acc = 0.0;
                        for (std::size_t j = 0; j < lout; ++j) {
                            acc += G[j] * W[j];
                            if (gw) gw[grp * L * lout + i * lout + j] += X[i] * G[j];
                        }
                        if (gx) gx[(b * C + c) * L + i] += acc;
                    }
                }
            }
        });
    }
    return out;
}

} // namespace adawave
