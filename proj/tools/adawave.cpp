// adawave command-line tool.
//
//   adawave train     --data <csv|synthetic:FAMILY> [--config f] [--set k=v]... [--seed n] [--out dir]
//   adawave eval      --checkpoint <file> --data <csv|synthetic:FAMILY> [--out dir]
//   adawave forecast  --checkpoint <file> --data <csv> [--start t] [--out dir]
//   adawave impute    --checkpoint <file> --data <csv> [--start t] [--out dir]
//   adawave superres  --checkpoint <file> --data <csv> [--start t] [--out dir]
//   adawave synth     [--family simple|traffic|electricity] [--variance-shift v] [--step-change s] [--out dir]
//   adawave decompose --data <csv> [--wavelet] [--levels n] [--kernel-size k] [--checkpoint f] [--out dir]
//   adawave bench     --manifest <file> [--config f] [--out dir]
//
// Exit codes: 0 success, 1 usage, 2 data error (also: benchmark skipped cells), 3 numerical failure.

#include <adawave/adawave.hpp>

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using namespace adawave;

namespace {

struct Common {
    std::string config;
    std::vector<std::string> sets;
    std::string data;
    std::string checkpoint;
    std::optional<std::uint64_t> seed;
    std::string out = ".";
    bool subtract_detail = false;
};

void add_common(CLI::App* app, Common& c, bool data_required) {
    app->add_option("--config", c.config, "key=value configuration file")->check(CLI::ExistingFile);
    app->add_option("--set", c.sets, "configuration override key=value (repeatable)");
    auto* d = app->add_option("--data", c.data, "CSV file or synthetic:<family>");
    if (data_required) d->required();
    app->add_option("--checkpoint", c.checkpoint, "model checkpoint path");
    app->add_option("--seed", c.seed, "seed for every random choice");
    app->add_option("--out", c.out, "output directory");
    app->add_flag("--subtract-detail", c.subtract_detail, "subtract the detail before the inverse update");
}

bool is_synthetic(const std::string& data) { return data.rfind("synthetic:", 0) == 0; }

KeyValues overrides(const Common& c) {
    KeyValues kv;
    if (!c.config.empty()) kv = read_key_values(c.config);
    for (const auto& s : c.sets) {
        for (const auto& [k, v] : parse_key_values(s)) kv[k] = v;
    }
    if (c.subtract_detail) kv["subtract_detail"] = "true";
    return kv;
}

RunConfig resolve_config(const Common& c, const KeyValues* stored = nullptr) {
    RunConfig base;
    if (stored) base = RunConfig::from_key_values(*stored);
    else if (is_synthetic(c.data)) base = synthetic_run_config(parse_synth_family(c.data.substr(10)));
    if (is_synthetic(c.data)) base.synth.family = parse_synth_family(c.data.substr(10));
    RunConfig cfg = RunConfig::from_key_values(overrides(c), base);
    if (c.seed) cfg.set_seed(*c.seed);
    return cfg;
}

struct LoadedData {
    Dataset dataset;
    std::optional<Tensor> clean;
};

LoadedData load_data(const Common& c, RunConfig& cfg) {
    LoadedData d;
    if (is_synthetic(c.data)) {
        SyntheticSetup s = synthetic_setup(cfg);
        d.dataset = std::move(s.dataset);
        d.clean = std::move(s.denoised);
    } else {
        d.dataset = load_csv(c.data, SplitSpec::parse(cfg.split));
    }
    for (const auto& w : d.dataset.warnings) std::cerr << "warning: " << w << '\n';
    cfg.model.channels = d.dataset.channels();
    return d;
}

fs::path out_dir(const Common& c) {
    fs::path p(c.out);
    fs::create_directories(p);
    return p;
}

void print_metrics(const std::string& what, const Metrics& m) {
    std::cout << what << ": mse " << format_double(m.mse) << " mae " << format_double(m.mae) << " over "
              << static_cast<std::size_t>(m.count) << " positions\n";
}

void write_metrics(const fs::path& path, const Metrics& m) {
    std::ofstream out(path);
    out << "mse=" << format_double(m.mse) << "\nmae=" << format_double(m.mae) << "\n";
}

void write_assignments(const fs::path& path, const AdaWaveNet& model, const std::vector<std::string>& names) {
    if (!model.clustering_fitted()) return;
    std::ofstream out(path);
    out << "channel,cluster\n";
    const auto& a = model.trend_head().clustering().assignments;
    for (std::size_t i = 0; i < a.size(); ++i) out << (i < names.size() ? names[i] : std::to_string(i)) << ',' << a[i] << '\n';
}

int cmd_train(const Common& c) {
    RunConfig cfg = resolve_config(c);
    LoadedData d = load_data(c, cfg);
    cfg.train.log = &std::cerr;
    TaskSplits splits = make_task_splits(d.dataset, cfg.task, d.clean);
    AdaWaveNet model(cfg.model);
    prepare_model(model, splits.train);
    ExperimentResult r = run_experiment(model, splits, cfg.train);

    fs::path dir = out_dir(c);
    fs::path ck = c.checkpoint.empty() ? dir / "model.awn" : fs::path(c.checkpoint);
    save_model(ck.string(), model, NormalizationStats::of(d.dataset), cfg.to_key_values());
    {
        std::ofstream log(dir / "training_log.csv");
        write_training_log(log, r.training);
    }
    write_metrics(dir / "metrics.txt", r.test);
    write_assignments(dir / "assignments.csv", model, d.dataset.channel_names);
    std::cout << "best epoch " << r.training.best_epoch << " (monitored " << (r.training.monitored_train ? "train" : "val")
              << " loss " << format_double(r.training.best_val_loss) << ")\n";
    print_metrics("test", r.test);
    std::cout << "checkpoint " << ck.string() << "\n";
    return 0;
}

LoadedModel require_checkpoint(const Common& c) {
    if (c.checkpoint.empty()) throw CLI::RequiredError("--checkpoint");
    return load_model(c.checkpoint);
}

int cmd_eval(const Common& c) {
    LoadedModel lm = require_checkpoint(c);
    RunConfig cfg = resolve_config(c, &lm.config);
    LoadedData d = load_data(c, cfg);
    if (cfg.model.channels != lm.model.config().channels) throw DataError("data channel count does not match checkpoint");
    TaskSpec spec = cfg.task;
    TaskSplits splits = make_task_splits(d.dataset, spec, d.clean);
    Metrics m = evaluate(lm.model, splits.test);
    print_metrics("test", m);
    if (!splits.val.empty()) print_metrics("val", evaluate(lm.model, splits.val));
    write_metrics(out_dir(c) / "eval_metrics.txt", m);
    return 0;
}

/// Raw [C, T] values of the data file, normalized with the checkpoint statistics
/// when present, else with the file's own training split.
struct Series {
    Dataset ds;
    Tensor normalized;
    std::vector<double> mean, stdev;
};

Series load_series(const Common& c, const LoadedModel& lm, RunConfig& cfg) {
    Series s{load_data(c, cfg).dataset, {}, {}, {}};
    if (s.ds.channels() != lm.model.config().channels) throw DataError("data channel count does not match checkpoint");
    if (lm.stats && lm.stats->mean.size() == s.ds.channels()) {
        s.ds.mean = lm.stats->mean;
        s.ds.stdev = lm.stats->stdev;
    }
    s.normalized = s.ds.normalized();
    return s;
}

std::size_t window_start(std::optional<std::size_t> start, std::size_t span, std::size_t total) {
    if (span > total) throw DataError("series of length " + std::to_string(total) + " shorter than window " + std::to_string(span));
    std::size_t s = start.value_or(total - span);
    if (s + span > total) throw DataError("--start " + std::to_string(s) + " leaves no room for a window of " + std::to_string(span));
    return s;
}

std::vector<double> row(const Tensor& x, std::size_t c) {
    std::size_t L = x.dim(-1);
    auto d = x.data();
    return {d.begin() + static_cast<std::ptrdiff_t>(c * L), d.begin() + static_cast<std::ptrdiff_t>((c + 1) * L)};
}

int cmd_forecast(const Common& c, std::optional<std::size_t> start, std::size_t channel) {
    LoadedModel lm = require_checkpoint(c);
    RunConfig cfg = resolve_config(c, &lm.config);
    Series s = load_series(c, lm, cfg);
    const auto& mc = lm.model.config();
    std::size_t T = s.ds.length();
    // Without --start the last input_len rows are the input and the forecast runs past the data.
    std::size_t begin = start ? window_start(start, mc.input_len + mc.pred_len, T) : window_start(std::nullopt, mc.input_len, T);
    Tensor x = slice_time(s.normalized, begin, mc.input_len);
    Tensor y;
    {
        NoGradScope ng;
        y = lm.model.forward(x);
    }
    fs::path dir = out_dir(c);
    write_csv((dir / "forecast.csv").string(), s.ds.channel_names, s.ds.denormalize(y));
    if (channel >= mc.channels) channel = 0;
    Chart chart{"forecast: " + s.ds.channel_names[channel]};
    chart.series.push_back({"input", iota_axis(mc.input_len, static_cast<double>(begin)), row(x, channel), "#444"});
    if (start) {
        Tensor truth = slice_time(s.normalized, begin + mc.input_len, mc.pred_len);
        print_metrics("forecast", metrics(y, truth));
        chart.series.push_back({"ground truth", iota_axis(mc.pred_len, static_cast<double>(begin + mc.input_len)),
                                row(truth, channel), "#2ca02c"});
    }
    chart.series.push_back({"prediction", iota_axis(mc.pred_len, static_cast<double>(begin + mc.input_len)),
                            row(y, channel), "#d62728", true});
    write_svg((dir / "forecast.svg").string(), {chart});
    std::cout << "wrote " << (dir / "forecast.csv").string() << " and forecast.svg\n";
    return 0;
}

int cmd_impute(const Common& c, std::optional<std::size_t> start, std::size_t channel) {
    LoadedModel lm = require_checkpoint(c);
    RunConfig cfg = resolve_config(c, &lm.config);
    Series s = load_series(c, lm, cfg);
    const auto& mc = lm.model.config();
    std::size_t begin = window_start(start, mc.input_len, s.ds.length());
    Tensor truth = slice_time(s.normalized, begin, mc.input_len);
    Tensor mask = make_mask(cfg.task.mask, mc.channels, mc.input_len, begin);
    Tensor y;
    {
        NoGradScope ng;
        y = lm.model.forward(adapt_imputation(truth, mask));
    }
    // Observed positions keep their values; masked ones take the prediction.
    std::vector<double> filled(y.size());
    for (std::size_t i = 0; i < filled.size(); ++i) filled[i] = mask[i] == 1.0 ? truth[i] : y[i];
    Tensor imputed(y.shape(), std::move(filled));
    print_metrics("imputation (masked positions)", metrics(y, truth, imputation_loss_mask(mask)));

    fs::path dir = out_dir(c);
    write_csv((dir / "imputed.csv").string(), s.ds.channel_names, s.ds.denormalize(imputed));
    write_csv((dir / "mask.csv").string(), s.ds.channel_names, mask);
    if (channel >= mc.channels) channel = 0;
    Chart chart{"imputation: " + s.ds.channel_names[channel]};
    auto x = iota_axis(mc.input_len, static_cast<double>(begin));
    chart.series.push_back({"ground truth", x, row(truth, channel), "#2ca02c"});
    chart.series.push_back({"imputed", x, row(imputed, channel), "#d62728", true});
    chart.shades = mask_shades(row(mask, channel), static_cast<double>(begin));
    write_svg((dir / "imputed.svg").string(), {chart});
    std::cout << "wrote " << (dir / "imputed.csv").string() << ", mask.csv and imputed.svg\n";
    return 0;
}

int cmd_superres(const Common& c, std::optional<std::size_t> start, std::size_t channel) {
    LoadedModel lm = require_checkpoint(c);
    RunConfig cfg = resolve_config(c, &lm.config);
    Series s = load_series(c, lm, cfg);
    const auto& mc = lm.model.config();
    std::size_t begin = window_start(start, mc.input_len, s.ds.length());
    Tensor truth = slice_time(s.normalized, begin, mc.input_len);
    Tensor low = downsample(truth, mc.sr_ratio);
    Tensor y;
    {
        NoGradScope ng;
        y = lm.model.forward(adapt_superres(low, mc.sr_ratio));
    }
    print_metrics("super-resolution", metrics(y, truth));
    fs::path dir = out_dir(c);
    write_csv((dir / "superres.csv").string(), s.ds.channel_names, s.ds.denormalize(y));
    write_csv((dir / "low_res.csv").string(), s.ds.channel_names, s.ds.denormalize(low));
    if (channel >= mc.channels) channel = 0;
    Chart chart{"super-resolution x" + std::to_string(mc.sr_ratio) + ": " + s.ds.channel_names[channel]};
    auto x = iota_axis(mc.input_len, static_cast<double>(begin));
    std::vector<double> xl;
    for (std::size_t i = 0; i < low.dim(-1); ++i) xl.push_back(static_cast<double>(begin + i * mc.sr_ratio));
    chart.series.push_back({"ground truth", x, row(truth, channel), "#2ca02c"});
    chart.series.push_back({"low-rate input", xl, row(low, channel), "#444"});
    chart.series.push_back({"reconstruction", x, row(y, channel), "#d62728", true});
    write_svg((dir / "superres.svg").string(), {chart});
    std::cout << "wrote " << (dir / "superres.csv").string() << ", low_res.csv and superres.svg\n";
    return 0;
}

int cmd_synth(const Common& c, const std::string& family, SynthSpec spec, std::optional<std::size_t> onset) {
    spec.family = parse_synth_family(family);
    if (c.seed) spec.seed = *c.seed;
    if (onset) spec.onset = onset;
    Tensor signal = generate(spec);
    Tensor clean = denoised_target(spec);
    fs::path dir = out_dir(c);
    write_csv((dir / "signal.csv").string(), {"s"}, signal);
    write_csv((dir / "denoised.csv").string(), {"s"}, clean);
    std::vector<double> t(spec.n_points);
    for (std::size_t i = 0; i < t.size(); ++i) t[i] = synth_time(i, spec.n_points);
    Chart chart{"synthetic " + family};
    chart.series.push_back({"signal", t, signal.values(), "#1f77b4"});
    chart.series.push_back({"denoised", t, clean.values(), "#d62728"});
    write_svg((dir / "synth.svg").string(), {chart});
    std::cout << "wrote " << (dir / "signal.csv").string() << ", denoised.csv and synth.svg\n";
    return 0;
}

int cmd_decompose(const Common& c, bool wavelet, std::optional<std::size_t> levels, std::optional<std::size_t> kernel,
                  std::optional<std::size_t> start, std::optional<std::size_t> length) {
    RunConfig cfg;
    std::vector<LiftingLevel> lifting;
    std::optional<LoadedModel> lm;
    if (!c.checkpoint.empty()) {
        lm = load_model(c.checkpoint);
        cfg = resolve_config(c, &lm->config);
    } else {
        cfg = resolve_config(c);
    }
    LoadedData d = load_data(c, cfg);
    Tensor values = d.dataset.normalized();
    std::size_t L = length.value_or(lm ? lm->model.config().input_len : d.dataset.length());
    std::size_t begin = window_start(start.value_or(0), L, d.dataset.length());
    Tensor x = slice_time(values, begin, L);
    fs::path dir = out_dir(c);

    DecomposedSeries parts = decompose(x, cfg.model.ma_window);
    write_csv((dir / "trend.csv").string(), d.dataset.channel_names, d.dataset.denormalize(parts.trend));
    write_csv((dir / "seasonal.csv").string(), d.dataset.channel_names, parts.seasonal);
    std::vector<Chart> charts;
    auto xs = iota_axis(L, static_cast<double>(begin));
    Chart top{"series / trend (" + d.dataset.channel_names[0] + ", normalized)"};
    top.series.push_back({"series", xs, row(x, 0), "#444"});
    top.series.push_back({"trend", xs, row(parts.trend, 0), "#d62728"});
    charts.push_back(top);
    Chart seas{"seasonal"};
    seas.series.push_back({"seasonal", xs, row(parts.seasonal, 0), "#1f77b4"});
    charts.push_back(seas);

    if (wavelet) {
        if (lm) {
            if (levels && *levels != lm->model.config().levels) throw DataError("--levels conflicts with the checkpoint");
            if (lm->model.config().channels != d.dataset.channels()) throw DataError("data channel count does not match checkpoint");
            lifting = lm->model.lifting_levels();
        } else {
            std::size_t n = levels.value_or(cfg.model.levels), k = kernel.value_or(cfg.model.kernel_size);
            for (std::size_t l = 0; l < n; ++l) lifting.push_back(LiftingLevel::zeros(d.dataset.channels(), k, false));
        }
        NoGradScope ng;
        WaveletPyramid p = analyze(parts.seasonal, lifting);
        for (std::size_t l = 0; l < p.levels(); ++l) {
            std::string tag = "level" + std::to_string(l + 1);
            write_csv((dir / ("wavelet_" + tag + "_approx.csv")).string(), d.dataset.channel_names, p.approximations[l]);
            write_csv((dir / ("wavelet_" + tag + "_detail.csv")).string(), d.dataset.channel_names, p.details[l]);
            std::size_t n = p.details[l].dim(-1);
            double step = static_cast<double>(L) / static_cast<double>(n);
            std::vector<double> xl(n);
            for (std::size_t i = 0; i < n; ++i) xl[i] = static_cast<double>(begin) + step * static_cast<double>(i);
            Chart ch{tag + ": approximation / detail"};
            ch.series.push_back({"approximation", xl, row(p.approximations[l], 0), "#1f77b4"});
            ch.series.push_back({"detail", xl, row(p.details[l], 0), "#ff7f0e"});
            charts.push_back(ch);
        }
    }
    write_svg((dir / "decompose.svg").string(), charts);
    std::cout << "wrote trend.csv, seasonal.csv" << (wavelet ? ", wavelet_level*.csv" : "") << " and decompose.svg to "
              << dir.string() << "\n";
    return 0;
}

int cmd_bench(const Common& c, const std::string& manifest) {
    auto cells = read_manifest(manifest);
    RunConfig base = RunConfig::from_key_values(overrides(c));
    BenchReport report = run_benchmark(cells, base, fs::path(manifest).parent_path(), &std::cerr);
    fs::path dir = out_dir(c);
    {
        std::ofstream csv(dir / "results.csv");
        write_results_csv(csv, report.results);
    }
    {
        std::ofstream md(dir / "report.md");
        write_markdown_report(md, report.results, report.notices);
    }
    write_markdown_report(std::cout, report.results, report.notices);
    return report.partial ? 2 : 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"AdaWaveNet: adaptive lifting wavelets for time-series forecasting, imputation and super-resolution"};
    app.require_subcommand(1);
    Common common;
    std::optional<std::size_t> start, levels, kernel, length, onset;
    std::size_t channel = 0;
    bool wavelet = false;
    std::string family = "simple", manifest;
    SynthSpec synth;

    auto* train = app.add_subcommand("train", "train a model and write a checkpoint");
    add_common(train, common, true);
    auto* eval = app.add_subcommand("eval", "evaluate a checkpoint on the test split");
    add_common(eval, common, true);
    std::vector<CLI::App*> predictors;
    for (const char* name : {"forecast", "impute", "superres"}) {
        auto* sub = app.add_subcommand(name, std::string("run a checkpoint on one window (") + name + ")");
        add_common(sub, common, true);
        sub->add_option("--start", start, "first time index of the window");
        sub->add_option("--channel", channel, "channel to plot");
        predictors.push_back(sub);
    }
    auto* synth_cmd = app.add_subcommand("synth", "generate a synthetic non-stationary signal");
    add_common(synth_cmd, common, false);
    synth_cmd->add_option("--family", family, "simple|traffic|electricity");
    synth_cmd->add_option("--variance-shift", synth.variance_shift, "noise amplitude factor (1 + v) after the onset");
    synth_cmd->add_option("--step-change", synth.step_change, "constant added after the onset");
    synth_cmd->add_option("--noise", synth.noise_sigma, "noise standard deviation");
    synth_cmd->add_option("--n", synth.n_points, "number of points");
    synth_cmd->add_option("--onset", onset, "index where shifts start (default n/2)");
    auto* dec = app.add_subcommand("decompose", "seasonal/trend split and optional lifting pyramid of a window");
    add_common(dec, common, true);
    dec->add_flag("--wavelet", wavelet, "also write per-level approximations and details");
    dec->add_option("--levels", levels, "lifting levels (without a checkpoint)");
    dec->add_option("--kernel-size", kernel, "lifting kernel size (without a checkpoint)");
    dec->add_option("--start", start, "first time index");
    dec->add_option("--length", length, "window length");
    auto* bench = app.add_subcommand("bench", "run a benchmark manifest");
    add_common(bench, common, false);
    bench->add_option("--manifest", manifest, "manifest file")->required()->check(CLI::ExistingFile);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        if (*train) return cmd_train(common);
        if (*eval) return cmd_eval(common);
        if (*predictors[0]) return cmd_forecast(common, start, channel);
        if (*predictors[1]) return cmd_impute(common, start, channel);
        if (*predictors[2]) return cmd_superres(common, start, channel);
        if (*synth_cmd) return cmd_synth(common, family, synth, onset);
        if (*dec) return cmd_decompose(common, wavelet, levels, kernel, start, length);
        if (*bench) return cmd_bench(common, manifest);
    } catch (const CLI::ParseError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    } catch (const ShapeError& e) {
        std::cerr << "configuration error: " << e.what() << '\n';
        return 1;
    } catch (const NumericalError& e) {
        std::cerr << "numerical failure: " << e.what() << '\n';
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "data error: " << e.what() << '\n';
        return 2;
    }
    return 1;
}
