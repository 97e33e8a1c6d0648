#pragma once

#include <adawave/error.hpp>

#include <cmath>
#include <cstddef>
#include <functional>
#include <initializer_list>
#include <memory>
#include <numeric>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

namespace adawave {

using Shape = std::vector<std::size_t>;

inline std::size_t shape_size(const Shape& shape) {
    return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

inline std::string shape_str(const Shape& shape) {
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < shape.size(); ++i) {
        os << (i ? "," : "") << shape[i];
    }
    os << ']';
    return os.str();
}

namespace detail {

inline bool& debug_checks_flag() {
#ifdef NDEBUG
    static bool enabled = false;
#else
    static bool enabled = true;
#endif
    return enabled;
}

struct Storage {
    Shape shape;
    std::vector<double> data;
    std::vector<double> grad;
    bool requires_grad = false;

    void ensure_grad() {
        if (grad.size() != data.size()) grad.assign(data.size(), 0.0);
    }
};

} // namespace detail

/// Enables the finite-value check run on every tensor an operation produces.
/// On by default in builds without NDEBUG.
inline void set_debug_checks(bool enabled) { detail::debug_checks_flag() = enabled; }
inline bool debug_checks() { return detail::debug_checks_flag(); }

/// Dense row-major array of 64-bit reals.
///
/// Copies are shallow: two Tensor handles may refer to the same storage. Values
/// produced by operations are never modified afterwards; only leaves (parameters)
/// are updated in place by the optimizer through mutable_data().
class Tensor {
public:
    Tensor() = default;

    Tensor(Shape shape, std::vector<double> values, bool requires_grad = false)
        : s_(std::make_shared<detail::Storage>()) {
        for (auto d : shape) {
            if (d == 0) throw ShapeError("tensor dimensions must be positive, got " + shape_str(shape));
        }
        if (shape_size(shape) != values.size()) {
            throw ShapeError("shape " + shape_str(shape) + " does not match " + std::to_string(values.size()) +
                             " values");
        }
        s_->shape = std::move(shape);
        s_->data = std::move(values);
        s_->requires_grad = requires_grad;
        if (debug_checks()) check_finite("constructor");
    }

    static Tensor zeros(Shape shape, bool requires_grad = false) {
        auto n = shape_size(shape);
        return Tensor(std::move(shape), std::vector<double>(n, 0.0), requires_grad);
    }
    static Tensor full(Shape shape, double value, bool requires_grad = false) {
        auto n = shape_size(shape);
        return Tensor(std::move(shape), std::vector<double>(n, value), requires_grad);
    }
    static Tensor scalar(double value, bool requires_grad = false) { return Tensor({1}, {value}, requires_grad); }
    static Tensor vector(std::initializer_list<double> values, bool requires_grad = false) {
        return Tensor({values.size()}, std::vector<double>(values), requires_grad);
    }

    bool defined() const { return static_cast<bool>(s_); }
    const Shape& shape() const { return s_->shape; }
    std::size_t rank() const { return s_->shape.size(); }
    std::size_t size() const { return s_->data.size(); }
    std::size_t dim(int axis) const {
        int r = static_cast<int>(rank());
        int a = axis < 0 ? axis + r : axis;
        if (a < 0 || a >= r) throw ShapeError("axis " + std::to_string(axis) + " out of range for " + shape_str(shape()));
        return s_->shape[static_cast<std::size_t>(a)];
    }

    std::span<const double> data() const { return s_->data; }
    std::span<double> mutable_data() { return s_->data; }
    const std::vector<double>& values() const { return s_->data; }

    double item() const {
        if (size() != 1) throw ShapeError("item() requires a single-element tensor, got " + shape_str(shape()));
        return s_->data[0];
    }
    double operator[](std::size_t flat) const { return s_->data[flat]; }

    bool requires_grad() const { return s_->requires_grad; }
    void set_requires_grad(bool on) { s_->requires_grad = on; }

    bool has_grad() const { return s_->grad.size() == s_->data.size(); }
    std::span<const double> grad() const { return s_->grad; }
    std::span<double> mutable_grad() {
        s_->ensure_grad();
        return s_->grad;
    }
    void zero_grad() { s_->grad.clear(); }

    /// Same values in fresh storage, outside any gradient graph.
    Tensor detach() const { return Tensor(shape(), s_->data, false); }

    bool same_storage(const Tensor& other) const { return s_ == other.s_; }

    void check_finite(const char* where) const {
        for (double v : s_->data) {
            if (!std::isfinite(v)) {
                throw NumericalError(std::string("non-finite value produced by ") + where);
            }
        }
    }

    detail::Storage& storage() const { return *s_; }

private:
    std::shared_ptr<detail::Storage> s_;
};

/// Ordered record of differentiable operations.
///
/// Nodes are appended in execution order, so every node's inputs were produced
/// by earlier nodes (or are leaves). backward() walks the list once in reverse
/// and then releases it; a consumed tape rejects a second backward().
class Tape {
public:
    using BackwardFn = std::function<void()>;

    Tape() = default;
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    void record(const Tensor& output, BackwardFn fn) {
        if (consumed_) throw TapeError("cannot record on a consumed tape");
        nodes_.push_back({output, std::move(fn)});
    }

    std::size_t size() const { return nodes_.size(); }
    bool consumed() const { return consumed_; }

    void backward(const Tensor& loss) {
        if (consumed_) throw TapeError("backward called twice on the same tape");
        if (!loss.defined() || loss.size() != 1) {
            throw TapeError("backward requires a scalar loss");
        }
        if (!loss.requires_grad()) throw TapeError("loss does not depend on any parameter");
        consumed_ = true;
        auto& ls = loss.storage();
        ls.ensure_grad();
        ls.grad[0] += 1.0;
        for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
            if (it->output.has_grad()) it->fn();
        }
        nodes_.clear();
        nodes_.shrink_to_fit();
    }

private:
    struct Node {
        Tensor output;
        BackwardFn fn;
    };
    std::vector<Node> nodes_;
    bool consumed_ = false;
};

namespace detail {
inline Tape*& active_tape_slot() {
    thread_local Tape* tape = nullptr;
    return tape;
}
} // namespace detail

inline Tape* active_tape() { return detail::active_tape_slot(); }

/// Makes `tape` the recording target for operations on this thread until the
/// scope ends. Without an active tape, operations build no graph.
class TapeScope {
public:
    explicit TapeScope(Tape& tape) : previous_(detail::active_tape_slot()) { detail::active_tape_slot() = &tape; }
    ~TapeScope() { detail::active_tape_slot() = previous_; }
    TapeScope(const TapeScope&) = delete;
    TapeScope& operator=(const TapeScope&) = delete;

private:
    Tape* previous_;
};

/// Suspends recording (evaluation passes inside a training step).
class NoGradScope {
public:
    NoGradScope() : previous_(detail::active_tape_slot()) { detail::active_tape_slot() = nullptr; }
    ~NoGradScope() { detail::active_tape_slot() = previous_; }
    NoGradScope(const NoGradScope&) = delete;
    NoGradScope& operator=(const NoGradScope&) = delete;

private:
    Tape* previous_;
};

namespace detail {

/// Tape to record on, or nullptr when no input needs a gradient.
template <class... Ts>
Tape* recording(const Ts&... inputs) {
    Tape* tape = active_tape();
    if (!tape) return nullptr;
    bool any = ((inputs.defined() && inputs.requires_grad()) || ...);
    return any ? tape : nullptr;
}

inline Tensor make_result(Shape shape, std::vector<double> values, const char* op) {
    Tensor out(std::move(shape), std::move(values));
    if (debug_checks()) out.check_finite(op);
    return out;
}

/// Gradient buffer of an input, or nullptr when it does not take part.
inline double* grad_ptr(const Tensor& t) {
    if (!t.defined() || !t.requires_grad()) return nullptr;
    auto& s = t.storage();
    s.ensure_grad();
    return s.grad.data();
}

} // namespace detail

} // namespace adawave
