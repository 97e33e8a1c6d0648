#pragma once

#include <adawave/parameters.hpp>

#include <cmath>
#include <string>
#include <vector>

namespace adawave {

/// Bias-corrected Adam over a ParameterSet.
class Adam {
public:
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;

    explicit Adam(const ParameterSet& params) : params_(&params) {
        for (const auto& p : params) {
            m_.emplace_back(p.value.size(), 0.0);
            v_.emplace_back(p.value.size(), 0.0);
        }
    }

    std::size_t steps() const { return step_; }
    const std::vector<std::vector<double>>& first_moments() const { return m_; }
    const std::vector<std::vector<double>>& second_moments() const { return v_; }

    /// Applies one update from the gradients currently stored on the parameters.
    /// Parameters without a gradient are treated as having a zero gradient.
    void step(double lr) {
        if (params_->size() != m_.size()) throw ShapeError("adam: parameter set changed since construction");
        ++step_;
        const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(step_));
        const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(step_));
        std::size_t i = 0;
        for (const auto& p : *params_) {
            Tensor t = p.value;
            auto& m = m_[i];
            auto& v = v_[i];
            ++i;
            if (m.size() != t.size()) throw ShapeError("adam: moment/parameter size mismatch for " + p.name);
            if (!t.has_grad()) {
                for (std::size_t j = 0; j < m.size(); ++j) {
                    m[j] *= beta1;
                    v[j] *= beta2;
                }
            } else {
                auto g = t.grad();
                for (std::size_t j = 0; j < m.size(); ++j) {
                    m[j] = beta1 * m[j] + (1.0 - beta1) * g[j];
                    v[j] = beta2 * v[j] + (1.0 - beta2) * g[j] * g[j];
                }
            }
            if (lr == 0.0) continue;
            auto w = t.mutable_data();
            for (std::size_t j = 0; j < m.size(); ++j) {
                double mhat = m[j] / bc1;
                double vhat = v[j] / bc2;
                w[j] -= lr * mhat / (std::sqrt(vhat) + eps);
            }
        }
    }

private:
    const ParameterSet* params_;
    std::vector<std::vector<double>> m_, v_;
    std::size_t step_ = 0;
};

/// Global L2 norm of all parameter gradients.
inline double grad_norm(const ParameterSet& params) {
    double s = 0.0;
    for (const auto& p : params) {
        if (!p.value.has_grad()) continue;
        for (double g : p.value.grad()) s += g * g;
    }
    return std::sqrt(s);
}

/// Rescales gradients so their global norm is at most `max_norm`; returns the norm before clipping.
inline double clip_grad_norm(const ParameterSet& params, double max_norm) {
    double norm = grad_norm(params);
    if (norm > max_norm && norm > 0.0) {
        double f = max_norm / norm;
        for (const auto& p : params) {
            if (!p.value.has_grad()) continue;
            Tensor t = p.value;
            for (double& g : t.mutable_grad()) g *= f;
        }
    }
    return norm;
}

/// Name of the first parameter whose gradient holds a non-finite value, or empty.
inline std::string first_nonfinite_grad(const ParameterSet& params) {
    for (const auto& p : params) {
        if (!p.value.has_grad()) continue;
        for (double g : p.value.grad()) {
            if (!std::isfinite(g)) return p.name;
        }
    }
    return {};
}

} // namespace adawave
