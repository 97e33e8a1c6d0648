#pragma once

// Supervised training loop shared by AdaWaveNet and the baselines: Adam with
// global-norm clipping, per-epoch validation, early stopping and restoration of
// the best-validation parameters.

#include <adawave/data.hpp>
#include <adawave/metrics.hpp>
#include <adawave/model.hpp>
#include <adawave/optim.hpp>

#include <chrono>
#include <concepts>
#include <functional>
#include <limits>
#include <numeric>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

namespace adawave {

template <class M>
concept Predictor = requires(const M& m, const Tensor& x) {
    { m.forward(x) } -> std::same_as<Tensor>;
    { m.parameters() } -> std::convertible_to<const ParameterSet&>;
};

struct TaskSpec {
    Task task = Task::forecast;
    std::size_t input_len = 96;
    std::size_t pred_len = 96;
    std::size_t sr_ratio = 1;
    MaskSpec mask;
    /// Validation/test forecasting inputs may reach back before their split.
    bool borrow_lookback = true;
};

struct Batch {
    Tensor input;  // [B, C, L]
    Tensor target; // [B, C, L_p]
    /// Positions that count towards loss and metrics (imputation only).
    std::optional<Tensor> loss_mask;
};

/// Windows of one split together with the series they are cut from. Inputs and
/// targets may come from different series (e.g. noisy inputs, clean targets).
class TaskData {
public:
    TaskData(Tensor inputs, Tensor targets, std::vector<WindowRef> refs, TaskSpec spec, std::uint64_t stream)
        : inputs_(std::move(inputs)), targets_(std::move(targets)), refs_(std::move(refs)), spec_(spec),
          stream_(stream) {
        if (inputs_.shape() != targets_.shape()) throw ShapeError("task data: input/target series shape mismatch");
        if (spec_.task == Task::superres && (spec_.sr_ratio == 0 || spec_.input_len % spec_.sr_ratio != 0)) {
            throw ShapeError("task data: input_len must be divisible by sr_ratio");
        }
    }

    std::size_t size() const { return refs_.size(); }
    bool empty() const { return refs_.empty(); }
    const TaskSpec& spec() const { return spec_; }
    std::size_t channels() const { return inputs_.dim(0); }
    const std::vector<WindowRef>& refs() const { return refs_; }

    /// Observation mask of window `i` in the given epoch (imputation).
    Tensor observation_mask(std::size_t i, std::uint64_t epoch) const {
        return make_mask(spec_.mask, channels(), spec_.input_len, (stream_ << 40) ^ (epoch << 24) ^ i);
    }

    Batch batch(std::span<const std::size_t> indices, std::uint64_t epoch = 0) const {
        const std::size_t B = indices.size(), C = channels(), L = spec_.input_len, Lp = spec_.pred_len;
        std::vector<double> in(B * C * L), tg(B * C * Lp), lm;
        if (spec_.task == Task::impute) lm.resize(B * C * Lp);
        for (std::size_t b = 0; b < B; ++b) {
            const WindowRef& w = refs_.at(indices[b]);
            Tensor x = slice_time(inputs_, w.input_begin, L);
            Tensor y = slice_time(targets_, w.target_begin, Lp);
            if (spec_.task == Task::impute) {
                Tensor m = observation_mask(indices[b], epoch);
                x = adapt_imputation(x, m);
                Tensor loss = imputation_loss_mask(m);
                std::copy(loss.data().begin(), loss.data().end(), lm.begin() + static_cast<std::ptrdiff_t>(b * C * Lp));
            } else if (spec_.task == Task::superres) {
                x = adapt_superres(downsample(x, spec_.sr_ratio), spec_.sr_ratio);
            }
            std::copy(x.data().begin(), x.data().end(), in.begin() + static_cast<std::ptrdiff_t>(b * C * L));
            std::copy(y.data().begin(), y.data().end(), tg.begin() + static_cast<std::ptrdiff_t>(b * C * Lp));
        }
        Batch out{Tensor({B, C, L}, std::move(in)), Tensor({B, C, Lp}, std::move(tg)), std::nullopt};
        if (!lm.empty()) out.loss_mask = Tensor({B, C, Lp}, std::move(lm));
        return out;
    }

    /// Model inputs of up to `max_samples` windows spread evenly over the split: [S, C, L].
    Tensor sample_inputs(std::size_t max_samples = 512) const {
        std::size_t S = std::min(max_samples, size());
        std::vector<std::size_t> idx(S);
        for (std::size_t i = 0; i < S; ++i) idx[i] = S == size() ? i : i * size() / S;
        return batch(idx, 0).input;
    }

private:
    Tensor inputs_, targets_;
    std::vector<WindowRef> refs_;
    TaskSpec spec_;
    std::uint64_t stream_;
};

/// Task windows of one split on the normalized scale. `clean_targets` (raw
/// scale, same shape as the dataset) replaces the dataset values as targets.
inline TaskData make_task_data(const Dataset& ds, SplitId split, const TaskSpec& spec,
                               const std::optional<Tensor>& clean_targets = std::nullopt) {
    Tensor inputs = ds.normalized();
    Tensor targets = clean_targets ? ds.normalize(*clean_targets) : inputs;
    const Range& r = ds.split(split);
    const bool borrow = spec.borrow_lookback && split != SplitId::train && spec.task == Task::forecast;
    std::vector<WindowRef> refs;
    std::size_t first = borrow ? (r.begin >= spec.input_len ? r.begin - spec.input_len : 0) : r.begin;
    std::size_t span = spec.task == Task::forecast ? spec.input_len + spec.pred_len : spec.input_len;
    if (r.size() > 0 && r.end - first >= span) refs = windows(r, spec.input_len, spec.pred_len, spec.task, borrow);
    return TaskData(std::move(inputs), std::move(targets), std::move(refs), spec, static_cast<std::uint64_t>(split) + 1);
}

struct TrainConfig {
    double lr = 5e-4;
    std::size_t batch_size = 16;
    std::size_t max_epochs = 30;
    std::size_t patience = 3;
    std::uint64_t seed = 0;
    double clip_norm = 5.0;
    /// 0 = every window once per epoch; otherwise a cap on batches per epoch.
    std::size_t max_batches_per_epoch = 0;
    std::ostream* log = nullptr;

    void validate() const {
        if (!(lr >= 0.0)) throw ShapeError("train config: learning rate must be non-negative");
        if (patience < 1) throw ShapeError("train config: patience must be >= 1");
        if (batch_size < 1 || max_epochs < 1) throw ShapeError("train config: batch size and epochs must be >= 1");
    }
};

struct EpochLog {
    std::size_t epoch;
    double train_loss;
    double val_loss;
    double lr;
    double seconds;
};

struct TrainResult {
    std::vector<EpochLog> history;
    std::size_t best_epoch = 0;
    double best_val_loss = std::numeric_limits<double>::infinity();
    bool early_stopped = false;
    /// True when the monitored loss was the training loss (no validation windows).
    bool monitored_train = false;
};

inline void write_training_log(std::ostream& out, const TrainResult& r) {
    out << "epoch,train_loss,val_loss,lr,seconds\n";
    for (const auto& e : r.history) {
        out << e.epoch << ',' << format_double(e.train_loss) << ',' << format_double(e.val_loss) << ','
            << format_double(e.lr) << ',' << format_double(e.seconds) << '\n';
    }
}

/// Batched forward passes without a tape; metrics on the loss positions.
template <Predictor M>
Metrics evaluate(const M& model, const TaskData& data, std::size_t batch_size = 64) {
    NoGradScope no_grad;
    MetricAccumulator acc;
    std::vector<std::size_t> idx;
    for (std::size_t start = 0; start < data.size(); start += batch_size) {
        idx.clear();
        for (std::size_t i = start; i < std::min(data.size(), start + batch_size); ++i) idx.push_back(i);
        Batch b = data.batch(idx, 0);
        acc.add(model.forward(b.input), b.target, b.loss_mask);
    }
    return acc.result();
}

/// One gradient step on a batch; returns the loss before the update.
template <Predictor M>
double train_step(const M& model, Adam& opt, const Batch& b, double lr, double clip_norm) {
    const ParameterSet& params = model.parameters();
    params.zero_grad();
    Tape tape;
    double loss_value;
    {
        TapeScope scope(tape);
        Tensor loss = mse(model.forward(b.input), b.target, b.loss_mask);
        loss_value = loss.item();
        if (!std::isfinite(loss_value)) throw NumericalError("training loss is not finite");
        tape.backward(loss);
    }
    if (auto bad = first_nonfinite_grad(params); !bad.empty()) {
        throw NumericalError("non-finite gradient in parameter group '" + bad + "'");
    }
    if (clip_norm > 0.0) clip_grad_norm(params, clip_norm);
    opt.step(lr);
    params.zero_grad();
    return loss_value;
}

template <Predictor M>
TrainResult train(const M& model, const TaskData& train_data, const TaskData* val_data, const TrainConfig& cfg) {
    cfg.validate();
    if (train_data.empty()) throw DataError("no training windows");
    const ParameterSet& params = model.parameters();
    TrainResult result;
    result.monitored_train = val_data == nullptr || val_data->empty();
    if (params.empty()) return result;

    Adam opt(params);
    auto best = params.snapshot();
    std::size_t bad_epochs = 0;
    std::vector<std::size_t> order(train_data.size());

    for (std::size_t epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
        auto t0 = std::chrono::steady_clock::now();
        std::iota(order.begin(), order.end(), 0);
        Rng rng = make_rng(cfg.seed, {0x65706f6368ULL, epoch});
        std::shuffle(order.begin(), order.end(), rng);
        std::size_t nbatches = (order.size() + cfg.batch_size - 1) / cfg.batch_size;
        if (cfg.max_batches_per_epoch) nbatches = std::min(nbatches, cfg.max_batches_per_epoch);

        double loss_sum = 0.0;
        std::size_t seen = 0;
        for (std::size_t bi = 0; bi < nbatches; ++bi) {
            std::size_t s = bi * cfg.batch_size, e = std::min(order.size(), s + cfg.batch_size);
            std::span<const std::size_t> ids(order.data() + s, e - s);
            Batch b = train_data.batch(ids, epoch);
            loss_sum += train_step(model, opt, b, cfg.lr, cfg.clip_norm) * static_cast<double>(ids.size());
            seen += ids.size();
        }
        double train_loss = loss_sum / static_cast<double>(seen);
        double monitored = result.monitored_train ? evaluate(model, train_data).mse : evaluate(model, *val_data).mse;
        double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        result.history.push_back({epoch, train_loss, monitored, cfg.lr, secs});
        if (cfg.log) {
            *cfg.log << "epoch " << epoch << " train " << train_loss << " val " << monitored << " (" << secs << "s)\n";
        }
        if (monitored < result.best_val_loss) {
            result.best_val_loss = monitored;
            result.best_epoch = epoch;
            best = params.snapshot();
            bad_epochs = 0;
        } else if (++bad_epochs >= cfg.patience) {
            result.early_stopped = true;
            break;
        }
    }
    params.restore(best);
    return result;
}

} // namespace adawave
