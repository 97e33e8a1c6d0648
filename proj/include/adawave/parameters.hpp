#pragma once

#include <adawave/tensor.hpp>

#include <algorithm>
#include <string>
#include <vector>

namespace adawave {

struct NamedTensor {
    std::string name;
    Tensor value;
};

/// Ordered, named collection of trainable leaves. Order is registration order
/// and is what checkpoints and the optimizer iterate over.
class ParameterSet {
public:
    Tensor add(std::string name, Tensor value) {
        if (find(name)) throw ShapeError("duplicate parameter name: " + name);
        value.set_requires_grad(true);
        items_.push_back({std::move(name), value});
        return value;
    }

    const Tensor* find(const std::string& name) const {
        auto it = std::find_if(items_.begin(), items_.end(), [&](const NamedTensor& p) { return p.name == name; });
        return it == items_.end() ? nullptr : &it->value;
    }

    const Tensor& at(const std::string& name) const {
        const Tensor* t = find(name);
        if (!t) throw ShapeError("unknown parameter: " + name);
        return *t;
    }

    auto begin() const { return items_.begin(); }
    auto end() const { return items_.end(); }
    std::size_t size() const { return items_.size(); }
    bool empty() const { return items_.empty(); }

    std::size_t scalar_count() const {
        std::size_t n = 0;
        for (const auto& p : items_) n += p.value.size();
        return n;
    }

    void zero_grad() const {
        for (const auto& p : items_) {
            Tensor t = p.value;
            t.zero_grad();
        }
    }

    std::vector<std::vector<double>> snapshot() const {
        std::vector<std::vector<double>> out;
        out.reserve(items_.size());
        for (const auto& p : items_) out.push_back(p.value.values());
        return out;
    }

    void restore(const std::vector<std::vector<double>>& values) const {
        if (values.size() != items_.size()) throw ShapeError("restore: parameter count mismatch");
        for (std::size_t i = 0; i < items_.size(); ++i) {
            Tensor t = items_[i].value;
            auto dst = t.mutable_data();
            if (values[i].size() != dst.size()) throw ShapeError("restore: size mismatch for " + items_[i].name);
            std::copy(values[i].begin(), values[i].end(), dst.begin());
        }
    }

private:
    std::vector<NamedTensor> items_;
};

} // namespace adawave
