#pragma once

// AdaWaveNet: seasonal/trend decomposition, adaptive lifting analysis of the
// seasonal part, channel attention on the coarsest approximation, inverse
// lifting back to the seasonal prediction, and a clustered linear trend head.

#include <adawave/attention.hpp>
#include <adawave/config.hpp>
#include <adawave/decomposition.hpp>
#include <adawave/grouped_linear.hpp>
#include <adawave/lifting.hpp>
#include <adawave/resample.hpp>
#include <adawave/task.hpp>

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace adawave {

struct ModelConfig {
    std::size_t channels = 1;
    std::size_t levels = 4;
    std::size_t kernel_size = 7;
    std::size_t n_clusters = 1;
    std::size_t ma_window = 25;
    std::size_t d_model = 128;
    std::size_t heads = 4;
    bool revin = true;
    InverseMode inverse = InverseMode::learned;
    Task task = Task::forecast;
    std::size_t input_len = 96;
    std::size_t pred_len = 96;
    std::size_t sr_ratio = 1;
    std::uint64_t seed = 0;
    /// Subtract the detail from the predicted approximation before the inverse update.
    bool subtract_detail = false;
    /// Ablation switch: false drops the self-attention sublayer (embed -> project only).
    bool channel_attention = true;
    HeadInit head_init = HeadInit::random;
    LinearInit trend_init = LinearInit::random;

    std::size_t approx_length() const { return approximation_length(input_len, levels); }

    /// Sets the task and its RevIN default: on for forecasting, off for imputation
    /// (zero-filled gaps distort instance statistics) and super-resolution.
    void set_task(Task t) {
        task = t;
        revin = t == Task::forecast;
    }

    void validate() const {
        auto fail = [](const std::string& m) { throw ShapeError("model config: " + m); };
        if (channels < 1) fail("channels must be >= 1");
        if (levels < 1) fail("levels must be >= 1");
        if (kernel_size < 1) fail("kernel_size must be >= 1");
        if (ma_window < 1 || ma_window % 2 == 0) fail("ma_window must be a positive odd integer");
        if (n_clusters < 1 || n_clusters > channels) fail("n_clusters must lie in [1, channels]");
        if (heads < 1 || d_model % heads != 0) fail("d_model must be divisible by heads");
        if (input_len < min_analysis_length(levels)) {
            fail("input_len " + std::to_string(input_len) + " too short for " + std::to_string(levels) +
                 " levels (need >= " + std::to_string(min_analysis_length(levels)) + ")");
        }
        if (pred_len != input_len) {
            fail("pred_len must equal input_len (" + std::to_string(input_len) + "), got " + std::to_string(pred_len));
        }
        if (task == Task::superres && (sr_ratio < 1 || input_len % sr_ratio != 0)) {
            fail("input_len must be divisible by sr_ratio");
        }
    }

    KeyValues to_key_values() const {
        KeyValues kv;
        kv["channels"] = std::to_string(channels);
        kv["levels"] = std::to_string(levels);
        kv["kernel_size"] = std::to_string(kernel_size);
        kv["n_clusters"] = std::to_string(n_clusters);
        kv["ma_window"] = std::to_string(ma_window);
        kv["d_model"] = std::to_string(d_model);
        kv["heads"] = std::to_string(heads);
        kv["revin"] = revin ? "true" : "false";
        kv["inverse"] = inverse == InverseMode::tied ? "tied" : "learned";
        kv["task"] = to_string(task);
        kv["input_len"] = std::to_string(input_len);
        kv["pred_len"] = std::to_string(pred_len);
        kv["sr_ratio"] = std::to_string(sr_ratio);
        kv["seed"] = std::to_string(seed);
        kv["subtract_detail"] = subtract_detail ? "true" : "false";
        kv["channel_attention"] = channel_attention ? "true" : "false";
        kv["head_init"] = head_init == HeadInit::random ? "random" : "pass_through";
        kv["trend_init"] = trend_init == LinearInit::random ? "random" : "identity";
        return kv;
    }

    /// Applies the recognised keys of `kv`; unknown keys are left for other consumers.
    static ModelConfig from_key_values(const KeyValues& kv) { return from_key_values(kv, ModelConfig{}); }
    static ModelConfig from_key_values(const KeyValues& kv, ModelConfig c) {
        auto u = [&](const char* key, std::size_t& dst) {
            if (auto it = kv.find(key); it != kv.end()) dst = parse_u64(it->second, key);
        };
        auto b = [&](const char* key, bool& dst) {
            if (auto it = kv.find(key); it != kv.end()) dst = parse_bool(it->second, key);
        };
        if (auto it = kv.find("task"); it != kv.end()) c.set_task(parse_task(it->second));
        u("channels", c.channels);
        u("levels", c.levels);
        u("kernel_size", c.kernel_size);
        u("n_clusters", c.n_clusters);
        u("ma_window", c.ma_window);
        u("d_model", c.d_model);
        u("heads", c.heads);
        u("input_len", c.input_len);
        u("pred_len", c.pred_len);
        u("sr_ratio", c.sr_ratio);
        b("revin", c.revin);
        b("subtract_detail", c.subtract_detail);
        b("channel_attention", c.channel_attention);
        if (auto it = kv.find("seed"); it != kv.end()) c.seed = parse_u64(it->second, "seed");
        if (auto it = kv.find("inverse"); it != kv.end()) {
            if (it->second == "tied") c.inverse = InverseMode::tied;
            else if (it->second == "learned") c.inverse = InverseMode::learned;
            else throw DataError("inverse: expected tied|learned, got '" + it->second + "'");
        }
        if (auto it = kv.find("head_init"); it != kv.end()) {
            if (it->second == "random") c.head_init = HeadInit::random;
            else if (it->second == "pass_through") c.head_init = HeadInit::pass_through;
            else throw DataError("head_init: expected random|pass_through");
        }
        if (auto it = kv.find("trend_init"); it != kv.end()) {
            if (it->second == "random") c.trend_init = LinearInit::random;
            else if (it->second == "identity") c.trend_init = LinearInit::identity;
            else throw DataError("trend_init: expected random|identity");
        }
        return c;
    }
};

/// Per-instance, per-channel statistics removed by RevIN. Held as constants:
/// gradients flow through the affine parameters, not through the statistics.
struct RevinState {
    Tensor mean;  // [B, C, 1]
    Tensor stdev; // [B, C, 1]
};

class Revin {
public:
    static constexpr double eps = 1e-5;

    Revin() = default;
    Revin(ParameterSet& params, const std::string& prefix, std::size_t channels) {
        weight_ = params.add(prefix + ".weight", Tensor::full({channels, 1}, 1.0));
        bias_ = params.add(prefix + ".bias", Tensor::zeros({channels, 1}));
    }

    /// x: [B, C, L]
    Tensor normalize(const Tensor& x, RevinState& state) const {
        std::size_t B = x.dim(0), C = x.dim(1), L = x.dim(2);
        std::vector<double> mu(B * C), sd(B * C);
        auto v = x.data();
        for (std::size_t i = 0; i < B * C; ++i) {
            double m = 0.0;
            for (std::size_t t = 0; t < L; ++t) m += v[i * L + t];
            m /= static_cast<double>(L);
            double var = 0.0;
            for (std::size_t t = 0; t < L; ++t) var += (v[i * L + t] - m) * (v[i * L + t] - m);
            mu[i] = m;
            sd[i] = std::sqrt(var / static_cast<double>(L) + eps);
        }
        state.mean = Tensor({B, C, 1}, std::move(mu));
        state.stdev = Tensor({B, C, 1}, std::move(sd));
        return (x - state.mean) / state.stdev * weight_ + bias_;
    }

    Tensor denormalize(const Tensor& y, const RevinState& state) const {
        return (y - bias_) / weight_ * state.stdev + state.mean;
    }

private:
    Tensor weight_, bias_;
};

/// Intermediate values of one forward pass, for inspection and plotting.
struct ForwardTrace {
    Tensor normalized_input;
    DecomposedSeries decomposition;
    WaveletPyramid pyramid;
    Tensor predicted_approximation;
    Tensor seasonal_prediction;
    Tensor trend_prediction;
    AttentionTrace attention;
};

class AdaWaveNet {
public:
    explicit AdaWaveNet(ModelConfig config) : config_(std::move(config)) {
        config_.validate();
        Rng rng = make_rng(config_.seed, {0x696e6974ULL});
        const bool learned = config_.inverse == InverseMode::learned;
        for (std::size_t l = 0; l < config_.levels; ++l) {
            levels_.push_back(LiftingLevel::zeros(params_, "lifting." + std::to_string(l), config_.channels,
                                                  config_.kernel_size, learned));
        }
        head_ = AttentionHead(params_, "attention", config_.approx_length(),
                              approximation_length(config_.pred_len, config_.levels), config_.d_model, config_.heads,
                              rng, config_.head_init, config_.channel_attention);
        trend_ = GroupedLinear(params_, "trend", config_.channels, config_.n_clusters, config_.input_len,
                               config_.pred_len, rng, config_.trend_init);
        if (config_.revin) revin_ = Revin(params_, "revin", config_.channels);
        if (config_.n_clusters == 1) {
            ChannelClustering single;
            single.k = 1;
            single.assignments.assign(config_.channels, 0);
            trend_.set_clustering(std::move(single));
        }
    }

    const ModelConfig& config() const { return config_; }
    const ParameterSet& parameters() const { return params_; }
    const std::vector<LiftingLevel>& lifting_levels() const { return levels_; }
    const AttentionHead& attention() const { return head_; }
    const GroupedLinear& trend_head() const { return trend_; }

    /// Fits the channel clustering from sampled model inputs [S, C, L] (before RevIN).
    void fit_clustering(const Tensor& inputs) {
        if (inputs.rank() != 3 || inputs.dim(1) != config_.channels || inputs.dim(2) != config_.input_len) {
            throw ShapeError("fit_clustering: inputs " + shape_str(inputs.shape()));
        }
        NoGradScope no_grad;
        Tensor trend = moving_average(inputs, config_.ma_window);
        trend_.set_clustering(adawave::fit_clustering(trend, config_.n_clusters, config_.seed));
    }

    void set_clustering(ChannelClustering c) { trend_.set_clustering(std::move(c)); }
    bool clustering_fitted() const { return trend_.fitted(); }

    /// x: [B, C, L] (or [C, L]) -> [B, C, L_p] (or [C, L_p]).
    Tensor forward(const Tensor& x, ForwardTrace* trace = nullptr) const {
        const bool unbatched = x.rank() == 2;
        if ((x.rank() != 2 && x.rank() != 3) || x.dim(-2) != config_.channels || x.dim(-1) != config_.input_len) {
            throw ShapeError("forward: input " + shape_str(x.shape()) + " does not match config [B, " +
                             std::to_string(config_.channels) + ", " + std::to_string(config_.input_len) + "]");
        }
        Tensor xb = unbatched ? reshape(x, {1, x.dim(0), x.dim(1)}) : x;

        RevinState stats;
        Tensor xn = config_.revin ? revin_.normalize(xb, stats) : xb;
        DecomposedSeries parts = decompose(xn, config_.ma_window);
        WaveletPyramid pyramid = analyze(parts.seasonal, levels_);
        AttentionTrace* att = trace ? &trace->attention : nullptr;
        Tensor approx_hat = head_.forward(pyramid.approximation, att);

        WaveletPyramid target = pyramid;
        target.approximation = approx_hat;
        Tensor seasonal_hat = synthesize(target, levels_, config_.inverse, config_.subtract_detail);
        Tensor trend_hat = trend_.forward(parts.trend);
        Tensor y = seasonal_hat + trend_hat;
        if (config_.revin) y = revin_.denormalize(y, stats);

        if (trace) {
            trace->normalized_input = xn;
            trace->decomposition = parts;
            trace->pyramid = pyramid;
            trace->predicted_approximation = approx_hat;
            trace->seasonal_prediction = seasonal_hat;
            trace->trend_prediction = trend_hat;
        }
        return unbatched ? reshape(y, {config_.channels, config_.pred_len}) : y;
    }

private:
    ModelConfig config_;
    ParameterSet params_;
    std::vector<LiftingLevel> levels_;
    AttentionHead head_;
    GroupedLinear trend_;
    Revin revin_;
};

/// Imputation input: observed values with masked positions zero-filled.
/// mask is binary with 1 = observed.
inline Tensor adapt_imputation(const Tensor& x_observed, const Tensor& mask) {
    if (x_observed.shape() != mask.shape()) throw ShapeError("adapt_imputation: mask shape mismatch");
    std::vector<double> v(x_observed.size());
    auto x = x_observed.data();
    auto m = mask.data();
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (m[i] != 0.0 && m[i] != 1.0) throw DataError("imputation mask must be binary");
        v[i] = m[i] == 1.0 ? x[i] : 0.0;
    }
    return Tensor(x_observed.shape(), std::move(v));
}

/// Loss mask for imputation: the masked (unobserved) positions.
inline Tensor imputation_loss_mask(const Tensor& mask) {
    std::vector<double> v(mask.size());
    auto m = mask.data();
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = 1.0 - m[i];
    return Tensor(mask.shape(), std::move(v));
}

/// Super-resolution input: the low-rate series held for r samples each.
inline Tensor adapt_superres(const Tensor& x_low, std::size_t r) { return zoh_upsample(x_low, r); }

} // namespace adawave
