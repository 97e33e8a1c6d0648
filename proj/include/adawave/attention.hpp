#pragma once

// Channel-wise attention over the coarsest approximation. Each channel's
// approximation sequence becomes one token; a single pre-norm multi-head
// self-attention layer mixes information across channels, and a final affine
// map projects every token onto the target approximation length. No positional
// encoding is applied, so the head is equivariant to channel permutations.

#include <adawave/ops.hpp>
#include <adawave/parameters.hpp>
#include <adawave/random.hpp>

#include <cmath>
#include <string>

namespace adawave {

enum class HeadInit {
    /// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) weights and biases, unit layer norm.
    random,
    /// Embed and projection compose to the identity; Q/K/V/output maps are zero.
    pass_through,
};

struct AttentionTrace {
    /// Softmax weights [B, H, C, C]; every row sums to one.
    Tensor weights;
};

class AttentionHead {
public:
    AttentionHead() = default;

    AttentionHead(ParameterSet& params, const std::string& prefix, std::size_t in_len, std::size_t out_len,
                  std::size_t d_model, std::size_t heads, Rng& rng, HeadInit init = HeadInit::random,
                  bool mixing = true)
        : in_len_(in_len), out_len_(out_len), d_model_(d_model), heads_(heads), mixing_(mixing) {
        if (heads == 0 || d_model % heads != 0) {
            throw ShapeError("attention: d_model " + std::to_string(d_model) + " not divisible by " +
                             std::to_string(heads) + " heads");
        }
        auto affine = [&](const std::string& name, std::size_t fan_in, std::size_t fan_out, Tensor& w, Tensor& b) {
            if (init == HeadInit::random) {
                double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
                w = params.add(prefix + "." + name + ".weight", uniform({fan_in, fan_out}, -bound, bound, rng));
                b = params.add(prefix + "." + name + ".bias", uniform({fan_out}, -bound, bound, rng));
            } else {
                w = params.add(prefix + "." + name + ".weight", Tensor::zeros({fan_in, fan_out}));
                b = params.add(prefix + "." + name + ".bias", Tensor::zeros({fan_out}));
            }
        };
        affine("embed", in_len, d_model, embed_w_, embed_b_);
        norm_g_ = params.add(prefix + ".norm.weight", Tensor::full({d_model}, 1.0));
        norm_b_ = params.add(prefix + ".norm.bias", Tensor::zeros({d_model}));
        if (mixing_) {
            affine("query", d_model, d_model, wq_, bq_);
            affine("key", d_model, d_model, wk_, bk_);
            affine("value", d_model, d_model, wv_, bv_);
            affine("out", d_model, d_model, wo_, bo_);
        }
        affine("project", d_model, out_len, proj_w_, proj_b_);
        if (init == HeadInit::pass_through) {
            if (d_model < in_len || out_len != in_len) {
                throw ShapeError("pass-through head needs d_model >= input length and equal lengths");
            }
            auto ew = embed_w_.mutable_data();
            auto pw = proj_w_.mutable_data();
            for (std::size_t i = 0; i < in_len; ++i) {
                ew[i * d_model + i] = 1.0;
                pw[i * out_len + i] = 1.0;
            }
        }
    }

    std::size_t input_length() const { return in_len_; }
    std::size_t output_length() const { return out_len_; }

    /// x: [C, L_in] or [B, C, L_in] -> same leading shape with L_out.
    Tensor forward(const Tensor& x, AttentionTrace* trace = nullptr) const {
        if (x.rank() < 2 || x.rank() > 3 || x.dim(-1) != in_len_) {
            throw ShapeError("attention: input " + shape_str(x.shape()) + " does not match configured length " +
                             std::to_string(in_len_));
        }
        const bool unbatched = x.rank() == 2;
        Tensor xb = unbatched ? reshape(x, {1, x.dim(0), x.dim(1)}) : x;
        std::size_t B = xb.dim(0), C = xb.dim(1);

        Tensor tokens = linear(xb, embed_w_, embed_b_);
        if (mixing_) {
            const std::size_t dh = d_model_ / heads_;
            Tensor h = layer_norm(tokens, norm_g_, norm_b_);
            auto split_heads = [&](const Tensor& t) {
                return permute(reshape(t, {B, C, heads_, dh}), {0, 2, 1, 3});
            };
            Tensor q = split_heads(linear(h, wq_, bq_));
            Tensor k = split_heads(linear(h, wk_, bk_));
            Tensor v = split_heads(linear(h, wv_, bv_));
            Tensor scores = scale(matmul(q, permute(k, {0, 1, 3, 2})), 1.0 / std::sqrt(static_cast<double>(dh)));
            Tensor attn = softmax(scores, -1);
            if (trace) trace->weights = attn;
            Tensor ctx = reshape(permute(matmul(attn, v), {0, 2, 1, 3}), {B, C, d_model_});
            tokens = tokens + linear(ctx, wo_, bo_);
        }
        Tensor y = linear(tokens, proj_w_, proj_b_);
        return unbatched ? reshape(y, {C, out_len_}) : y;
    }

private:
    std::size_t in_len_ = 0, out_len_ = 0, d_model_ = 0, heads_ = 1;
    bool mixing_ = true;
    Tensor embed_w_, embed_b_, norm_g_, norm_b_;
    Tensor wq_, bq_, wk_, bk_, wv_, bv_, wo_, bo_;
    Tensor proj_w_, proj_b_;
};

} // namespace adawave
