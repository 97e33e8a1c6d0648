#pragma once

// Randomized finite-difference cases for every differentiable operation and
// for the composed model. Shared by the unit tests and the acceptance runner.

#include "gradcheck.hpp"

#include <adawave/adawave.hpp>

#include <functional>
#include <string>
#include <vector>

namespace adawave::testing {

struct GradientCase {
    std::string name;
    std::function<GradCheckResult(std::uint64_t instance)> run;
};

namespace cases {

inline std::size_t pick(Rng& rng, std::size_t lo, std::size_t hi) {
    return std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
}

inline Tensor rnd(Shape s, Rng& rng, double lo = -1.0, double hi = 1.0) { return uniform(std::move(s), lo, hi, rng); }

/// Values bounded away from zero (relu kink, division).
inline Tensor away_from_zero(Shape s, Rng& rng, double lo = 0.1, double hi = 1.0) {
    Tensor t = uniform(std::move(s), lo, hi, rng);
    std::bernoulli_distribution flip(0.5);
    for (double& v : t.mutable_data()) {
        if (flip(rng)) v = -v;
    }
    return t;
}

inline GradCheckResult unary(std::uint64_t inst, std::uint64_t tag, const std::function<Tensor(const Tensor&)>& f,
                             bool avoid_zero = false) {
    Rng rng = make_rng(inst, {tag});
    Shape s{pick(rng, 1, 3), pick(rng, 2, 6)};
    Tensor x = avoid_zero ? away_from_zero(s, rng) : rnd(s, rng, -2.0, 2.0);
    Tensor w = rnd(f(x).shape(), rng);
    return gradcheck({x}, [&] { return project(f(x), w); });
}

inline GradCheckResult binary(std::uint64_t inst, std::uint64_t tag,
                              const std::function<Tensor(const Tensor&, const Tensor&)>& f, bool positive_b = false) {
    Rng rng = make_rng(inst, {tag});
    std::size_t r = pick(rng, 1, 3), c = pick(rng, 2, 5);
    Shape sa{r, c}, sb{r, c};
    switch (inst % 3) {
    case 1: sb = {1, c}; break;
    case 2: sb = {c}; break;
    default: break;
    }
    if (inst % 5 == 4) std::swap(sa, sb);
    Tensor a = rnd(sa, rng);
    Tensor b = positive_b ? rnd(sb, rng, 0.5, 2.0) : rnd(sb, rng);
    Tensor w = rnd(f(a, b).shape(), rng);
    return gradcheck({a, b}, [&] { return project(f(a, b), w); });
}

inline LiftingLevel random_level(std::size_t C, std::size_t K, bool inverse, Rng& rng, double scale = 0.5) {
    LiftingLevel l = LiftingLevel::zeros(C, K, inverse);
    for (Tensor* t : {&l.predict_kernel, &l.predict_bias, &l.update_kernel, &l.update_bias, &l.inv_update_kernel,
                      &l.inv_update_bias, &l.inv_predict_kernel, &l.inv_predict_bias}) {
        if (!t->defined()) continue;
        for (double& v : t->mutable_data()) v = std::uniform_real_distribution<double>(-scale, scale)(rng);
    }
    return l;
}

inline std::vector<Tensor> level_leaves(const LiftingLevel& l) {
    std::vector<Tensor> out{l.predict_kernel, l.predict_bias, l.update_kernel, l.update_bias};
    if (l.has_inverse()) {
        for (const Tensor& t : {l.inv_update_kernel, l.inv_update_bias, l.inv_predict_kernel, l.inv_predict_bias}) {
            out.push_back(t);
        }
    }
    return out;
}

/// Small model with every parameter randomized so no path sits at a saddle.
inline AdaWaveNet random_model(std::uint64_t inst, InverseMode mode, bool subtract_detail = false) {
    ModelConfig c;
    c.channels = 3;
    c.input_len = c.pred_len = 16;
    c.levels = 2;
    c.kernel_size = inst % 2 ? 3 : 4;
    c.n_clusters = 2;
    c.ma_window = 5;
    c.d_model = 8;
    c.heads = 2;
    c.inverse = mode;
    c.subtract_detail = subtract_detail;
    c.seed = inst;
    AdaWaveNet m(c);
    Rng rng = make_rng(inst, {0x6d6f64656cULL});
    for (const auto& p : m.parameters()) {
        Tensor t = p.value;
        bool revin_weight = p.name == "revin.weight";
        for (double& v : t.mutable_data()) {
            v = revin_weight ? std::uniform_real_distribution<double>(0.5, 1.5)(rng)
                             : std::uniform_real_distribution<double>(-0.4, 0.4)(rng);
        }
    }
    ChannelClustering cl;
    cl.k = 2;
    cl.assignments = {0, 1, 0};
    m.set_clustering(cl);
    return m;
}

inline GradCheckResult model_case(std::uint64_t inst, InverseMode mode, bool subtract_detail = false) {
    AdaWaveNet m = random_model(inst, mode, subtract_detail);
    Rng rng = make_rng(inst, {0x696e707574ULL});
    Tensor x = rnd({2, 3, 16}, rng, -2.0, 2.0);
    Tensor y = rnd({2, 3, 16}, rng, -2.0, 2.0);
    std::vector<Tensor> leaves;
    for (const auto& p : m.parameters()) leaves.push_back(p.value);
    return gradcheck(leaves, [&] { return mse(m.forward(x), y); });
}

} // namespace cases

inline std::vector<GradientCase> gradient_cases() {
    using namespace cases;
    std::vector<GradientCase> v;
    v.push_back({"add", [](std::uint64_t i) { return binary(i, 1, [](auto& a, auto& b) { return a + b; }); }});
    v.push_back({"sub", [](std::uint64_t i) { return binary(i, 2, [](auto& a, auto& b) { return a - b; }); }});
    v.push_back({"mul", [](std::uint64_t i) { return binary(i, 3, [](auto& a, auto& b) { return a * b; }); }});
    v.push_back({"div", [](std::uint64_t i) { return binary(i, 4, [](auto& a, auto& b) { return a / b; }, true); }});
    v.push_back({"scale", [](std::uint64_t i) { return unary(i, 5, [](auto& x) { return scale(x, -1.7); }); }});
    v.push_back({"add_scalar", [](std::uint64_t i) { return unary(i, 6, [](auto& x) { return add_scalar(x, 0.3); }); }});
    v.push_back({"tanh", [](std::uint64_t i) { return unary(i, 7, [](auto& x) { return tanh(x); }); }});
    v.push_back({"relu", [](std::uint64_t i) { return unary(i, 8, [](auto& x) { return relu(x); }, true); }});
    v.push_back({"sum", [](std::uint64_t i) { return unary(i, 9, [](auto& x) { return sum(x); }); }});
    v.push_back({"mean", [](std::uint64_t i) { return unary(i, 10, [](auto& x) { return mean(x); }); }});
    v.push_back({"softmax", [](std::uint64_t i) {
                     Rng rng = make_rng(i, {11});
                     Tensor x = rnd({pick(rng, 1, 3), pick(rng, 2, 4), pick(rng, 2, 5)}, rng, -2.0, 2.0);
                     int axis = static_cast<int>(i % 3);
                     Tensor w = rnd(x.shape(), rng);
                     return gradcheck({x}, [&] { return project(softmax(x, axis), w); });
                 }});
    v.push_back({"mse", [](std::uint64_t i) {
                     Rng rng = make_rng(i, {12});
                     Shape s{pick(rng, 1, 3), pick(rng, 2, 6)};
                     Tensor p = rnd(s, rng), t = rnd(s, rng);
                     return gradcheck({p, t}, [&] { return mse(p, t); });
                 }});
    v.push_back({"mse_masked", [](std::uint64_t i) {
                     Rng rng = make_rng(i, {13});
                     Shape s{2, pick(rng, 3, 6)};
                     Tensor p = rnd(s, rng), t = rnd(s, rng);
                     Tensor m = Tensor::zeros(s);
                     auto md = m.mutable_data();
                     for (std::size_t k = 0; k < md.size(); ++k) md[k] = (k + i) % 3 == 0 ? 0.0 : 1.0;
                     return gradcheck({p, t}, [&] { return mse(p, t, m); });
                 }});
    v.push_back({"reshape", [](std::uint64_t i) {
                     return unary(i, 14, [](auto& x) { return reshape(x, {x.size()}); });
                 }});
    v.push_back({"permute", [](std::uint64_t i) {
                     Rng rng = make_rng(i, {15});
                     Tensor x = rnd({pick(rng, 1, 3), pick(rng, 2, 3), pick(rng, 2, 4)}, rng);
                     std::vector<std::vector<std::size_t>> perms{{0, 2, 1}, {2, 0, 1}, {1, 0, 2}, {2, 1, 0}};
                     auto axes = perms[i % perms.size()];
                     Tensor w = rnd(permute(x, axes).shape(), rng);
                     return gradcheck({x}, [&] { return project(permute(x, axes), w); });
                 }});
    v.push_back({"strided_slice", [](std::uint64_t i) {
                     return unary(i, 16, [](auto& x) {
                         std::size_t len = x.dim(-1);
                         return strided_slice(x, len > 2 ? 1 : 0, 2, (len - (len > 2 ? 1 : 0) + 1) / 2);
                     });
                 }});
    v.push_back({"narrow", [](std::uint64_t i) {
                     return unary(i, 17, [](auto& x) { return narrow(x, 1, x.dim(-1) - 1); });
                 }});
    v.push_back({"interleave", [](std::uint64_t i) {
                     Rng rng = make_rng(i, {18});
                     Shape s{pick(rng, 1, 3), pick(rng, 1, 5)};
                     Tensor e = rnd(s, rng), o = rnd(s, rng);
                     Tensor w = rnd(interleave(e, o).shape(), rng);
                     return gradcheck({e, o}, [&] { return project(interleave(e, o), w); });
                 }});
    v.push_back({"pad_edge", [](std::uint64_t i) {
                     return unary(i, 19, [i](auto& x) { return pad_edge(x, 1 + i % 3); });
                 }});
    v.push_back({"matmul", [](std::uint64_t i) {
                     Rng rng = make_rng(i, {20});
                     std::size_t B = pick(rng, 1, 3), M = pick(rng, 1, 4), K = pick(rng, 1, 4), N = pick(rng, 1, 4);
                     Tensor a = rnd({B, M, K}, rng);
                     Tensor b = i % 2 ? rnd({K, N}, rng) : rnd({B, K, N}, rng);
                     Tensor w = rnd({B, M, N}, rng);
                     return gradcheck({a, b}, [&] { return project(matmul(a, b), w); });
                 }});
    v.push_back({"linear", [](std::uint64_t i) {
                     Rng rng = make_rng(i, {21});
                     std::size_t din = pick(rng, 1, 5), dout = pick(rng, 1, 5);
                     Tensor x = rnd({pick(rng, 1, 3), pick(rng, 1, 3), din}, rng);
                     Tensor W = rnd({din, dout}, rng), b = rnd({dout}, rng);
                     Tensor w = rnd(linear(x, W, b).shape(), rng);
                     return gradcheck({x, W, b}, [&] { return project(linear(x, W, b), w); });
                 }});
    v.push_back({"layer_norm", [](std::uint64_t i) {
                     Rng rng = make_rng(i, {22});
                     std::size_t d = pick(rng, 2, 6);
                     Tensor x = rnd({pick(rng, 1, 4), d}, rng, -2.0, 2.0);
                     Tensor g = rnd({d}, rng, 0.5, 1.5), b = rnd({d}, rng);
                     Tensor w = rnd(x.shape(), rng);
                     return gradcheck({x, g, b}, [&] { return project(layer_norm(x, g, b), w); });
                 }});
    v.push_back({"conv1d", [](std::uint64_t i) {
                     Rng rng = make_rng(i, {23});
                     std::size_t groups = i % 2 ? 1 : 2;
                     std::size_t cin = groups * pick(rng, 1, 2), cout = groups * pick(rng, 1, 2);
                     std::size_t K = i % 4 < 2 ? 2 * pick(rng, 0, 2) + 1 : pick(rng, 1, 5);
                     Padding pad = i % 4 < 2 ? Padding::same : Padding::same_asymmetric;
                     Tensor x = rnd({pick(rng, 1, 2), cin, pick(rng, 3, 8)}, rng);
                     Tensor k = rnd({cout, cin / groups, K}, rng), b = rnd({cout}, rng);
                     Tensor w = rnd(conv1d(x, k, b, pad, groups).shape(), rng);
                     return gradcheck({x, k, b}, [&] { return project(conv1d(x, k, b, pad, groups), w); });
                 }});
    v.push_back({"conv_transpose1d", [](std::uint64_t i) {
                     Rng rng = make_rng(i, {24});
                     std::size_t groups = i % 2 ? 1 : 2;
                     std::size_t cin = groups * pick(rng, 1, 2), cout_g = pick(rng, 1, 2);
                     std::size_t K = i % 4 < 2 ? 2 * pick(rng, 0, 2) + 1 : pick(rng, 1, 5);
                     Padding pad = i % 4 < 2 ? Padding::same : Padding::same_asymmetric;
                     Tensor x = rnd({pick(rng, 1, 2), cin, pick(rng, 3, 8)}, rng);
                     Tensor k = rnd({cin, cout_g, K}, rng), b = rnd({cout_g * groups}, rng);
                     Tensor w = rnd(conv_transpose1d(x, k, b, pad, groups).shape(), rng);
                     return gradcheck({x, k, b}, [&] { return project(conv_transpose1d(x, k, b, pad, groups), w); });
                 }});
    v.push_back({"moving_average", [](std::uint64_t i) {
                     return unary(i, 25, [i](auto& x) { return moving_average(x, 2 * (i % 3) + 1); });
                 }});
    v.push_back({"grouped_linear", [](std::uint64_t i) {
                     Rng rng = make_rng(i, {26});
                     std::size_t C = pick(rng, 1, 4), k = pick(rng, 1, C), L = pick(rng, 2, 5), Lo = pick(rng, 1, 5);
                     std::vector<std::size_t> g(C);
                     for (auto& a : g) a = pick(rng, 0, k - 1);
                     Tensor x = rnd({pick(rng, 1, 2), C, L}, rng);
                     Tensor W = rnd({k, L, Lo}, rng), b = rnd({k, Lo}, rng);
                     Tensor w = rnd({x.dim(0), C, Lo}, rng);
                     return gradcheck({x, W, b}, [&] { return project(grouped_linear(x, W, b, g), w); });
                 }});
    v.push_back({"decompose", [](std::uint64_t i) {
                     return unary(i, 27, [](auto& x) {
                         auto d = decompose(x, 3);
                         return d.seasonal * d.seasonal + d.trend;
                     });
                 }});
    v.push_back({"lift_forward", [](std::uint64_t i) {
                     Rng rng = make_rng(i, {28});
                     std::size_t C = pick(rng, 1, 3), K = pick(rng, 1, 5);
                     LiftingLevel l = random_level(C, K, false, rng);
                     Tensor x = rnd({pick(rng, 1, 2), C, pick(rng, 4, 11)}, rng);
                     auto s = lift_forward(x, l);
                     Tensor wa = rnd(s.approx.shape(), rng), wd = rnd(s.detail.shape(), rng);
                     auto leaves = level_leaves(l);
                     leaves.push_back(x);
                     return gradcheck(leaves, [&] {
                         auto st = lift_forward(x, l);
                         return project(st.approx, wa) + project(st.detail, wd);
                     });
                 }});
    v.push_back({"lift_inverse_tied", [](std::uint64_t i) {
                     Rng rng = make_rng(i, {29});
                     std::size_t C = pick(rng, 1, 3), K = pick(rng, 1, 5), n = pick(rng, 2, 6);
                     LiftingLevel l = random_level(C, K, false, rng);
                     Tensor a = rnd({C, n}, rng), d = rnd({C, n}, rng);
                     bool padded = i % 2;
                     Tensor w = rnd(lift_inverse_tied(a, d, padded, l).shape(), rng);
                     auto leaves = level_leaves(l);
                     leaves.push_back(a);
                     leaves.push_back(d);
                     return gradcheck(leaves, [&] { return project(lift_inverse_tied(a, d, padded, l), w); });
                 }});
    v.push_back({"lift_inverse_learned", [](std::uint64_t i) {
                     Rng rng = make_rng(i, {30});
                     std::size_t C = pick(rng, 1, 3), K = pick(rng, 1, 5), n = pick(rng, 2, 6);
                     LiftingLevel l = random_level(C, K, true, rng);
                     Tensor a = rnd({C, n}, rng), d = rnd({C, n}, rng);
                     bool padded = i % 2, literal = i % 4 >= 2;
                     Tensor w = rnd(lift_inverse_learned(a, d, padded, l, literal).shape(), rng);
                     auto leaves = level_leaves(l);
                     leaves.push_back(a);
                     leaves.push_back(d);
                     return gradcheck(leaves, [&] { return project(lift_inverse_learned(a, d, padded, l, literal), w); });
                 }});
    v.push_back({"attention", [](std::uint64_t i) {
                     Rng rng = make_rng(i, {31});
                     std::size_t C = pick(rng, 1, 4), Lin = pick(rng, 2, 5), Lout = pick(rng, 2, 5);
                     std::size_t heads = pick(rng, 1, 2), d = heads * pick(rng, 2, 3);
                     ParameterSet ps;
                     AttentionHead h(ps, "att", Lin, Lout, d, heads, rng);
                     Tensor x = rnd({pick(rng, 1, 2), C, Lin}, rng, -2.0, 2.0);
                     Tensor w = rnd(h.forward(x).shape(), rng);
                     std::vector<Tensor> leaves{x};
                     for (const auto& p : ps) {
                         Tensor t = p.value;
                         if (p.name.find("norm") != std::string::npos) {
                             for (double& val : t.mutable_data()) val += std::uniform_real_distribution<double>(-0.3, 0.3)(rng);
                         }
                         leaves.push_back(t);
                     }
                     return gradcheck(leaves, [&] { return project(h.forward(x), w); });
                 }});
    v.push_back({"revin", [](std::uint64_t i) {
                     Rng rng = make_rng(i, {32});
                     std::size_t C = pick(rng, 1, 3);
                     ParameterSet ps;
                     Revin rv(ps, "revin", C);
                     for (const auto& p : ps) {
                         Tensor t = p.value;
                         for (double& val : t.mutable_data()) val += std::uniform_real_distribution<double>(-0.3, 0.3)(rng);
                     }
                     Tensor x = rnd({2, C, pick(rng, 3, 8)}, rng, -2.0, 2.0);
                     Tensor y = rnd(x.shape(), rng);
                     Tensor w = rnd(x.shape(), rng);
                     std::vector<Tensor> leaves{y};
                     for (const auto& p : ps) leaves.push_back(p.value);
                     return gradcheck(leaves, [&] {
                         RevinState st;
                         Tensor n = rv.normalize(x, st);
                         return project(rv.denormalize(n * y, st), w);
                     });
                 }});
    v.push_back({"model_learned", [](std::uint64_t i) { return model_case(i, InverseMode::learned); }});
    v.push_back({"model_tied", [](std::uint64_t i) { return model_case(i, InverseMode::tied); }});
    v.push_back({"model_subtract_detail", [](std::uint64_t i) { return model_case(i, InverseMode::learned, true); }});
    return v;
}

} // namespace adawave::testing
