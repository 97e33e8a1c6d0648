#pragma once

// One train/evaluate run described by a flat key=value configuration.

#include <adawave/baselines.hpp>
#include <adawave/synth.hpp>
#include <adawave/train.hpp>

#include <chrono>
#include <optional>
#include <string>

namespace adawave {

struct RunConfig {
    ModelConfig model;
    TrainConfig train;
    TaskSpec task;
    std::string split = "0.7,0.1,0.2";
    SynthSpec synth;

    /// Copies the shared fields (task, lengths, seed) from the model section.
    void sync() {
        task.task = model.task;
        task.input_len = model.input_len;
        task.pred_len = model.pred_len;
        task.sr_ratio = model.sr_ratio;
        train.seed = model.seed;
        task.mask.seed = model.seed;
        synth.seed = model.seed;
    }

    void set_seed(std::uint64_t seed) {
        model.seed = seed;
        sync();
    }

    /// Model keys plus: lr, batch_size, epochs, patience, clip_norm, max_batches,
    /// mask_mode, mask_ratio, segment_length, borrow_lookback, split, synth_family, noise_sigma,
    /// variance_shift, step_change, n_points.
    static RunConfig from_key_values(const KeyValues& kv) { return from_key_values(kv, RunConfig{}); }
    static RunConfig from_key_values(const KeyValues& kv, RunConfig c) {
        c.model = ModelConfig::from_key_values(kv, c.model);
        auto d = [&](const char* key, double& dst) {
            if (auto it = kv.find(key); it != kv.end()) dst = parse_double(it->second, key);
        };
        auto u = [&](const char* key, std::size_t& dst) {
            if (auto it = kv.find(key); it != kv.end()) dst = parse_u64(it->second, key);
        };
        d("lr", c.train.lr);
        u("batch_size", c.train.batch_size);
        u("epochs", c.train.max_epochs);
        u("patience", c.train.patience);
        d("clip_norm", c.train.clip_norm);
        u("max_batches", c.train.max_batches_per_epoch);
        if (auto it = kv.find("mask_mode"); it != kv.end()) c.task.mask.mode = parse_mask_mode(it->second);
        d("mask_ratio", c.task.mask.ratio);
        u("segment_length", c.task.mask.segment_length);
        if (auto it = kv.find("borrow_lookback"); it != kv.end()) {
            c.task.borrow_lookback = parse_bool(it->second, "borrow_lookback");
        }
        if (auto it = kv.find("split"); it != kv.end()) c.split = it->second;
        if (auto it = kv.find("synth_family"); it != kv.end()) c.synth.family = parse_synth_family(it->second);
        d("noise_sigma", c.synth.noise_sigma);
        d("variance_shift", c.synth.variance_shift);
        d("step_change", c.synth.step_change);
        u("n_points", c.synth.n_points);
        c.sync();
        return c;
    }

    KeyValues to_key_values() const {
        KeyValues kv = model.to_key_values();
        kv["lr"] = format_double(train.lr);
        kv["batch_size"] = std::to_string(train.batch_size);
        kv["epochs"] = std::to_string(train.max_epochs);
        kv["patience"] = std::to_string(train.patience);
        kv["clip_norm"] = format_double(train.clip_norm);
        kv["max_batches"] = std::to_string(train.max_batches_per_epoch);
        kv["mask_mode"] = task.mask.mode == MaskMode::random ? "random" : "extended";
        kv["mask_ratio"] = format_double(task.mask.ratio);
        kv["segment_length"] = std::to_string(task.mask.segment_length);
        kv["borrow_lookback"] = task.borrow_lookback ? "true" : "false";
        kv["split"] = split;
        kv["synth_family"] = to_string(synth.family);
        kv["noise_sigma"] = format_double(synth.noise_sigma);
        kv["variance_shift"] = format_double(synth.variance_shift);
        kv["step_change"] = format_double(synth.step_change);
        kv["n_points"] = std::to_string(synth.n_points);
        return kv;
    }

    std::uint64_t hash() const { return fnv1a(format_key_values(to_key_values())); }
};

/// The defaults used for the synthetic case study: lookback and horizon 96,
/// first half of a 1024-point signal for training, test windows drawn entirely
/// from the second half. One lifting level keeps the high-frequency transient in
/// the forecast approximation instead of the reused detail bands.
inline RunConfig synthetic_run_config(SynthFamily family = SynthFamily::simple, std::uint64_t seed = 0) {
    RunConfig c;
    c.model.channels = 1;
    c.model.levels = 1;
    c.model.kernel_size = 7;
    c.model.d_model = 64;
    c.model.heads = 4;
    c.train.lr = 1e-3;
    c.train.max_epochs = 30;
    c.train.patience = 3;
    c.task.borrow_lookback = false;
    c.synth.family = family;
    c.split = "512,0,512";
    c.set_seed(seed);
    return c;
}

/// Train, validation and test windows of a dataset.
struct TaskSplits {
    TaskData train, val, test;
};

inline TaskSplits make_task_splits(const Dataset& ds, const TaskSpec& spec,
                                   const std::optional<Tensor>& clean_targets = std::nullopt) {
    return {make_task_data(ds, SplitId::train, spec), make_task_data(ds, SplitId::val, spec),
            make_task_data(ds, SplitId::test, spec, clean_targets)};
}

struct ExperimentResult {
    TrainResult training;
    Metrics test;
    double seconds = 0.0;
};

/// Trains `model` on the train windows (validation monitors early stopping)
/// and evaluates the restored best parameters on the test windows.
template <Predictor M>
ExperimentResult run_experiment(const M& model, const TaskSplits& splits, const TrainConfig& cfg) {
    auto t0 = std::chrono::steady_clock::now();
    ExperimentResult r;
    r.training = train(model, splits.train, &splits.val, cfg);
    if (splits.test.empty()) throw DataError("no test windows");
    r.test = evaluate(model, splits.test);
    r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return r;
}

/// Fits the trend clustering from training windows when more than one cluster is configured.
inline void prepare_model(AdaWaveNet& model, const TaskData& train_data) {
    if (model.config().n_clusters > 1) model.fit_clustering(train_data.sample_inputs());
}

/// A synthetic dataset plus its denoised reference (test targets).
struct SyntheticSetup {
    Dataset dataset;
    Tensor denoised;
};

inline SyntheticSetup synthetic_setup(const RunConfig& cfg) {
    Dataset ds = make_dataset({"s"}, generate(cfg.synth), SplitSpec::parse(cfg.split));
    return {std::move(ds), denoised_target(cfg.synth)};
}

} // namespace adawave
