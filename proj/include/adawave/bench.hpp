#pragma once

// Benchmark harness. A manifest is a text file with one cell per line:
//
//   task=forecast dataset=synthetic:simple settings=96 seeds=0,1,2 epochs=10
//   task=impute dataset=data/ETTh1.csv split=ett-hour settings=0.125,0.25 seeds=0 model=linear
//
// `settings` is the prediction/look-back length for forecasting, the mask
// ratio for imputation and the decimation ratio for super-resolution. Any
// other key is a run-configuration override. `model` selects adawavenet
// (default), linear or persistence. Blank lines and '#' comments are ignored.

#include <adawave/experiment.hpp>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

namespace adawave {

struct BenchCell {
    Task task = Task::forecast;
    std::string dataset;
    std::vector<std::string> settings;
    std::vector<std::uint64_t> seeds{0};
    std::string model = "adawavenet";
    KeyValues overrides;
};

struct RunResult {
    std::string task;
    std::string dataset;
    std::string model;
    std::string setting;
    double mse = 0.0;
    double mae = 0.0;
    double seconds = 0.0;
    std::uint64_t config_hash = 0;
    std::uint64_t seed = 0;
};

struct CellSummary {
    std::string task, dataset, model, setting;
    std::size_t runs = 0;
    double mse_mean = 0.0, mse_std = 0.0;
    double mae_mean = 0.0, mae_std = 0.0;
};

struct BenchReport {
    std::vector<RunResult> results;
    std::vector<std::string> notices;
    bool partial = false;
};

namespace detail {

inline std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    for (std::string item; std::getline(ss, item, ',');) {
        item = trim(item);
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

} // namespace detail

inline std::vector<BenchCell> parse_manifest(std::istream& in) {
    std::vector<BenchCell> cells;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        std::istringstream tokens(line);
        BenchCell cell;
        bool any = false;
        for (std::string tok; tokens >> tok;) {
            any = true;
            auto eq = tok.find('=');
            if (eq == std::string::npos || eq == 0) {
                throw DataError("manifest line " + std::to_string(lineno) + ": expected key=value, got '" + tok + "'");
            }
            std::string key = tok.substr(0, eq), value = tok.substr(eq + 1);
            if (key == "task") cell.task = parse_task(value);
            else if (key == "dataset") cell.dataset = value;
            else if (key == "settings") cell.settings = detail::split_list(value);
            else if (key == "seeds") {
                cell.seeds.clear();
                for (const auto& s : detail::split_list(value)) cell.seeds.push_back(parse_u64(s, "seeds"));
            } else if (key == "model") {
                if (value != "adawavenet" && value != "linear" && value != "persistence") {
                    throw DataError("manifest line " + std::to_string(lineno) + ": unknown model '" + value + "'");
                }
                cell.model = value;
            } else cell.overrides[key] = value;
        }
        if (!any) continue;
        if (cell.dataset.empty()) throw DataError("manifest line " + std::to_string(lineno) + ": missing dataset");
        if (cell.settings.empty()) throw DataError("manifest line " + std::to_string(lineno) + ": missing settings");
        if (cell.seeds.empty()) throw DataError("manifest line " + std::to_string(lineno) + ": missing seeds");
        cells.push_back(std::move(cell));
    }
    return cells;
}

inline std::vector<BenchCell> read_manifest(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open manifest " + path);
    return parse_manifest(in);
}

/// Configuration of one (cell, setting, seed) run.
inline RunConfig cell_config(const BenchCell& cell, const std::string& setting, std::uint64_t seed,
                             const RunConfig& base = {}) {
    RunConfig c = base;
    const bool synthetic = cell.dataset.rfind("synthetic:", 0) == 0;
    if (synthetic) {
        c = synthetic_run_config(parse_synth_family(cell.dataset.substr(10)), seed);
    }
    c.model.set_task(cell.task);
    c = RunConfig::from_key_values(cell.overrides, c);
    switch (cell.task) {
    case Task::forecast:
        c.model.input_len = c.model.pred_len = parse_u64(setting, "setting");
        break;
    case Task::impute:
        c.task.mask.ratio = parse_double(setting, "setting");
        break;
    case Task::superres:
        c.model.sr_ratio = parse_u64(setting, "setting");
        break;
    }
    c.set_seed(seed);
    return c;
}

inline void check_result(const RunResult& r) {
    if (!(r.mse >= 0.0) || !(r.mae >= 0.0)) throw NumericalError("benchmark: negative or non-finite metric");
    if (r.mae > std::sqrt(r.mse) * (1.0 + 1e-12) + 1e-15) {
        throw NumericalError("benchmark: MAE exceeds sqrt(MSE), metrics are inconsistent");
    }
}

/// Trains and evaluates one run. Synthetic datasets are evaluated against their denoised signal.
inline RunResult run_single(const BenchCell& cell, const RunConfig& cfg, const std::string& setting,
                            const std::filesystem::path& base_dir = {}) {
    const bool synthetic = cell.dataset.rfind("synthetic:", 0) == 0;
    Dataset ds;
    std::optional<Tensor> clean;
    if (synthetic) {
        SyntheticSetup s = synthetic_setup(cfg);
        ds = std::move(s.dataset);
        clean = std::move(s.denoised);
    } else {
        std::filesystem::path p(cell.dataset);
        if (p.is_relative() && !base_dir.empty()) p = base_dir / p;
        ds = load_csv(p.string(), SplitSpec::parse(cfg.split));
    }
    RunConfig c = cfg;
    c.model.channels = ds.channels();
    if (c.model.n_clusters > c.model.channels) c.model.n_clusters = c.model.channels;
    TaskSplits splits = make_task_splits(ds, c.task, clean);

    ExperimentResult er;
    if (cell.model == "persistence") {
        PersistenceBaseline m(c.model.pred_len);
        er = run_experiment(m, splits, c.train);
    } else if (cell.model == "linear") {
        LinearBaseline m(c.model.input_len, c.model.pred_len, c.model.seed);
        er = run_experiment(m, splits, c.train);
    } else {
        AdaWaveNet m(c.model);
        prepare_model(m, splits.train);
        er = run_experiment(m, splits, c.train);
    }
    RunResult r{to_string(cell.task), cell.dataset, cell.model, setting, er.test.mse, er.test.mae,
                er.seconds, c.hash(), c.model.seed};
    check_result(r);
    return r;
}

/// Runs every (cell, setting, seed). Cells whose dataset file is missing are
/// skipped with a notice and mark the report as partial.
inline BenchReport run_benchmark(const std::vector<BenchCell>& cells, const RunConfig& base = {},
                                 const std::filesystem::path& base_dir = {}, std::ostream* log = nullptr) {
    BenchReport report;
    for (const auto& cell : cells) {
        if (cell.dataset.rfind("synthetic:", 0) != 0) {
            std::filesystem::path p(cell.dataset);
            if (p.is_relative() && !base_dir.empty()) p = base_dir / p;
            if (!std::filesystem::exists(p)) {
                report.notices.push_back("skipped " + to_string(cell.task) + " on " + cell.dataset +
                                         ": dataset file not found");
                report.partial = true;
                if (log) *log << report.notices.back() << '\n';
                continue;
            }
        }
        for (const auto& setting : cell.settings) {
            for (auto seed : cell.seeds) {
                RunConfig cfg = cell_config(cell, setting, seed, base);
                RunResult r = run_single(cell, cfg, setting, base_dir);
                if (log) {
                    *log << r.task << ' ' << r.dataset << ' ' << r.model << ' ' << r.setting << " seed " << r.seed
                         << ": mse " << r.mse << " mae " << r.mae << " (" << r.seconds << "s)\n";
                }
                report.results.push_back(r);
            }
        }
    }
    return report;
}

/// Mean and sample standard deviation (n - 1; 0 for a single run) per cell, in first-seen order.
inline std::vector<CellSummary> summarize(const std::vector<RunResult>& results) {
    std::vector<CellSummary> out;
    std::vector<std::vector<const RunResult*>> members;
    for (const auto& r : results) {
        auto it = std::find_if(out.begin(), out.end(), [&](const CellSummary& s) {
            return s.task == r.task && s.dataset == r.dataset && s.model == r.model && s.setting == r.setting;
        });
        if (it == out.end()) {
            out.push_back({r.task, r.dataset, r.model, r.setting});
            members.emplace_back();
            it = out.end() - 1;
        }
        members[static_cast<std::size_t>(it - out.begin())].push_back(&r);
    }
    for (std::size_t i = 0; i < out.size(); ++i) {
        const auto& m = members[i];
        double n = static_cast<double>(m.size());
        double smse = 0.0, smae = 0.0;
        for (auto* r : m) {
            smse += r->mse;
            smae += r->mae;
        }
        out[i].runs = m.size();
        out[i].mse_mean = smse / n;
        out[i].mae_mean = smae / n;
        if (m.size() > 1) {
            double vmse = 0.0, vmae = 0.0;
            for (auto* r : m) {
                vmse += (r->mse - out[i].mse_mean) * (r->mse - out[i].mse_mean);
                vmae += (r->mae - out[i].mae_mean) * (r->mae - out[i].mae_mean);
            }
            out[i].mse_std = std::sqrt(vmse / (n - 1.0));
            out[i].mae_std = std::sqrt(vmae / (n - 1.0));
        }
    }
    return out;
}

inline void write_results_csv(std::ostream& out, const std::vector<RunResult>& results) {
    out << "task,dataset,model,setting,mse,mae,seconds,config_hash,seed\n";
    for (const auto& r : results) {
        out << r.task << ',' << r.dataset << ',' << r.model << ',' << r.setting << ',' << format_double(r.mse) << ','
            << format_double(r.mae) << ',' << format_double(r.seconds) << ',' << std::hex << std::setw(16)
            << std::setfill('0') << r.config_hash << std::dec << std::setfill(' ') << ',' << r.seed << '\n';
    }
}

inline std::vector<RunResult> read_results_csv(std::istream& in) {
    std::vector<RunResult> out;
    std::string line;
    if (!std::getline(in, line)) return out;
    while (std::getline(in, line)) {
        if (trim(line).empty()) continue;
        auto f = detail::split_csv_line(line);
        if (f.size() != 9) throw DataError("results csv: expected 9 fields, got " + std::to_string(f.size()));
        RunResult r;
        r.task = f[0];
        r.dataset = f[1];
        r.model = f[2];
        r.setting = f[3];
        r.mse = parse_double(f[4], "mse");
        r.mae = parse_double(f[5], "mae");
        r.seconds = parse_double(f[6], "seconds");
        r.config_hash = std::stoull(f[7], nullptr, 16);
        r.seed = parse_u64(f[8], "seed");
        out.push_back(r);
    }
    return out;
}

/// Markdown table: one row per (dataset, setting), one MSE/MAE column pair per model,
/// grouped by task. Values are mean ± std over seeds.
inline void write_markdown_report(std::ostream& out, const std::vector<RunResult>& results,
                                  const std::vector<std::string>& notices = {}) {
    auto summary = summarize(results);
    std::vector<std::string> tasks;
    for (const auto& s : summary) {
        if (std::find(tasks.begin(), tasks.end(), s.task) == tasks.end()) tasks.push_back(s.task);
    }
    auto fmt = [](double mean, double sd, std::size_t n) {
        std::ostringstream os;
        os << std::fixed << std::setprecision(3) << mean;
        if (n > 1) os << " ± " << sd;
        return os.str();
    };
    out << "# Benchmark results\n";
    for (const auto& task : tasks) {
        std::vector<std::string> models;
        std::vector<std::pair<std::string, std::string>> rows;
        for (const auto& s : summary) {
            if (s.task != task) continue;
            if (std::find(models.begin(), models.end(), s.model) == models.end()) models.push_back(s.model);
            std::pair<std::string, std::string> row{s.dataset, s.setting};
            if (std::find(rows.begin(), rows.end(), row) == rows.end()) rows.push_back(row);
        }
        out << "\n## " << task << "\n\n| dataset | setting |";
        for (const auto& m : models) out << ' ' << m << " MSE | " << m << " MAE |";
        out << "\n|---|---|";
        for (std::size_t i = 0; i < models.size(); ++i) out << "---|---|";
        out << '\n';
        for (const auto& [dataset, setting] : rows) {
            out << "| " << dataset << " | " << setting << " |";
            for (const auto& m : models) {
                auto it = std::find_if(summary.begin(), summary.end(), [&](const CellSummary& s) {
                    return s.task == task && s.dataset == dataset && s.setting == setting && s.model == m;
                });
                if (it == summary.end()) out << " - | - |";
                else out << ' ' << fmt(it->mse_mean, it->mse_std, it->runs) << " | " << fmt(it->mae_mean, it->mae_std, it->runs) << " |";
            }
            out << '\n';
        }
    }
    if (!notices.empty()) {
        out << "\n## Notices\n\n";
        for (const auto& n : notices) out << "- " << n << '\n';
    }
}

} // namespace adawave
