#pragma once

// Dataset ingestion, chronological splits, z-normalization from the training
// split, sliding windows per task and masking for imputation.

#include <adawave/config.hpp>
#include <adawave/random.hpp>
#include <adawave/resample.hpp>
#include <adawave/task.hpp>
#include <adawave/tensor.hpp>

#include <algorithm>
#include <array>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace adawave {

/// Half-open index range [begin, end) on the time axis.
struct Range {
    std::size_t begin = 0;
    std::size_t end = 0;
    std::size_t size() const { return end - begin; }
};

enum class SplitId { train, val, test };

/// How to cut T rows into train/val/test. Either fractions of the total or
/// explicit row counts (rows beyond their sum are ignored).
struct SplitSpec {
    std::array<double, 3> fractions{0.7, 0.1, 0.2};
    std::optional<std::array<std::size_t, 3>> counts;

    static SplitSpec from_fractions(double train, double val, double test) {
        SplitSpec s;
        s.fractions = {train, val, test};
        return s;
    }
    static SplitSpec from_counts(std::size_t train, std::size_t val, std::size_t test) {
        SplitSpec s;
        s.counts = std::array<std::size_t, 3>{train, val, test};
        return s;
    }

    /// "0.7,0.1,0.2", "8640,2880,2880", or a named preset ("ett-hour", "ett-minute").
    static SplitSpec parse(const std::string& text) {
        if (text == "ett-hour") return from_counts(12 * 30 * 24, 4 * 30 * 24, 4 * 30 * 24);
        if (text == "ett-minute") return from_counts(4 * 12 * 30 * 24, 4 * 4 * 30 * 24, 4 * 4 * 30 * 24);
        std::vector<std::string> parts;
        std::stringstream ss(text);
        std::string item;
        while (std::getline(ss, item, ',')) parts.push_back(trim(item));
        if (parts.size() != 3) throw DataError("split: expected three comma-separated values, got '" + text + "'");
        if (text.find('.') != std::string::npos) {
            return from_fractions(parse_double(parts[0], "split"), parse_double(parts[1], "split"),
                                  parse_double(parts[2], "split"));
        }
        return from_counts(parse_u64(parts[0], "split"), parse_u64(parts[1], "split"), parse_u64(parts[2], "split"));
    }
};

struct Dataset {
    std::vector<std::string> channel_names;
    /// Raw values [C, T].
    Tensor values;
    Range train, val, test;
    /// Per-channel statistics of the training split.
    std::vector<double> mean, stdev;
    std::vector<std::string> warnings;

    std::size_t channels() const { return values.dim(0); }
    std::size_t length() const { return values.dim(1); }

    const Range& split(SplitId id) const {
        switch (id) {
        case SplitId::train: return train;
        case SplitId::val: return val;
        case SplitId::test: return test;
        }
        return train;
    }

    /// Values z-normalized with the training statistics.
    Tensor normalized() const { return normalize(values); }

    /// x: [..., C, L] on the raw scale.
    Tensor normalize(const Tensor& x) const { return affine(x, true); }
    Tensor denormalize(const Tensor& x) const { return affine(x, false); }

private:
    Tensor affine(const Tensor& x, bool forward) const {
        std::size_t C = channels();
        if (x.rank() < 2 || x.dim(-2) != C) throw ShapeError("normalize: channel mismatch " + shape_str(x.shape()));
        std::size_t L = x.dim(-1);
        std::vector<double> y(x.values());
        for (std::size_t i = 0; i < y.size(); ++i) {
            std::size_t c = (i / L) % C;
            y[i] = forward ? (y[i] - mean[c]) / stdev[c] : y[i] * stdev[c] + mean[c];
        }
        return Tensor(x.shape(), std::move(y));
    }
};

namespace detail {

inline std::array<Range, 3> make_splits(std::size_t total, const SplitSpec& spec) {
    std::size_t ntrain, nval, ntest;
    if (spec.counts) {
        auto [a, b, c] = *spec.counts;
        ntrain = a;
        nval = b;
        ntest = c;
        if (ntrain + nval + ntest > total) {
            throw DataError("split counts " + std::to_string(ntrain + nval + ntest) + " exceed " +
                            std::to_string(total) + " rows");
        }
    } else {
        auto [a, b, c] = spec.fractions;
        if (a <= 0.0 || b < 0.0 || c < 0.0 || std::abs(a + b + c - 1.0) > 1e-9) {
            throw DataError("split fractions must be non-negative, train > 0, and sum to 1");
        }
        ntrain = static_cast<std::size_t>(std::floor(static_cast<double>(total) * a + 1e-9));
        ntest = static_cast<std::size_t>(std::floor(static_cast<double>(total) * c + 1e-9));
        nval = total - ntrain - ntest;
    }
    if (ntrain == 0) throw DataError("training split is empty");
    return {Range{0, ntrain}, Range{ntrain, ntrain + nval}, Range{ntrain + nval, ntrain + nval + ntest}};
}

inline bool is_time_column(std::string name) {
    std::transform(name.begin(), name.end(), name.begin(), [](unsigned char ch) { return std::tolower(ch); });
    return name == "date" || name == "time" || name == "timestamp" || name == "datetime";
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> cells;
    std::string cell;
    std::stringstream ss(line);
    while (std::getline(ss, cell, ',')) cells.push_back(trim(cell));
    if (!line.empty() && line.back() == ',') cells.emplace_back();
    return cells;
}

} // namespace detail

/// Builds a dataset from raw values [C, T]; statistics come from the training
/// split only. Constant channels get stdev 1 and a warning.
inline Dataset make_dataset(std::vector<std::string> names, Tensor values, const SplitSpec& spec) {
    if (values.rank() != 2) throw DataError("dataset values must be [C, T]");
    if (names.size() != values.dim(0)) throw DataError("channel name count does not match values");
    Dataset d;
    d.channel_names = std::move(names);
    d.values = std::move(values);
    auto splits = detail::make_splits(d.length(), spec);
    d.train = splits[0];
    d.val = splits[1];
    d.test = splits[2];
    std::size_t C = d.channels(), T = d.length();
    auto v = d.values.data();
    d.mean.assign(C, 0.0);
    d.stdev.assign(C, 1.0);
    for (std::size_t c = 0; c < C; ++c) {
        double m = 0.0;
        for (std::size_t t = d.train.begin; t < d.train.end; ++t) m += v[c * T + t];
        m /= static_cast<double>(d.train.size());
        double var = 0.0;
        for (std::size_t t = d.train.begin; t < d.train.end; ++t) var += (v[c * T + t] - m) * (v[c * T + t] - m);
        double sd = std::sqrt(var / static_cast<double>(d.train.size()));
        d.mean[c] = m;
        if (!(sd > 0.0)) {
            d.warnings.push_back("channel '" + d.channel_names[c] + "' is constant on the training split; stdev set to 1");
            sd = 1.0;
        }
        d.stdev[c] = sd;
    }
    return d;
}

/// Reads a CSV with a header row of channel names and one numeric row per time
/// step. Columns named date/time/timestamp/datetime are skipped.
inline Dataset load_csv_stream(std::istream& in, const SplitSpec& spec, const std::string& origin = "<stream>") {
    std::string line;
    std::vector<std::string> header;
    while (std::getline(in, line)) {
        if (!trim(line).empty()) {
            header = detail::split_csv_line(trim(line));
            break;
        }
    }
    if (header.empty()) throw DataError(origin + ": empty file");
    std::vector<std::size_t> keep;
    std::vector<std::string> names;
    for (std::size_t i = 0; i < header.size(); ++i) {
        if (!detail::is_time_column(header[i])) {
            keep.push_back(i);
            names.push_back(header[i]);
        }
    }
    if (keep.empty()) throw DataError(origin + ": no value columns");
    std::vector<std::vector<double>> cols(keep.size());
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        std::string t = trim(line);
        if (t.empty()) continue;
        auto cells = detail::split_csv_line(t);
        if (cells.size() != header.size()) {
            throw DataError(origin + ":" + std::to_string(lineno) + ": expected " + std::to_string(header.size()) +
                            " cells, got " + std::to_string(cells.size()));
        }
        for (std::size_t j = 0; j < keep.size(); ++j) {
            const std::string& cell = cells[keep[j]];
            double v = 0.0;
            auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
            if (cell.empty() || ec != std::errc() || ptr != cell.data() + cell.size() || !std::isfinite(v)) {
                throw DataError(origin + ":" + std::to_string(lineno) + ": non-numeric cell '" + cell + "'");
            }
            cols[j].push_back(v);
        }
    }
    if (cols.front().empty()) throw DataError(origin + ": no data rows");
    std::size_t T = cols.front().size();
    std::vector<double> flat;
    flat.reserve(keep.size() * T);
    for (const auto& c : cols) flat.insert(flat.end(), c.begin(), c.end());
    return make_dataset(std::move(names), Tensor({keep.size(), T}, std::move(flat)), spec);
}

inline Dataset load_csv(const std::string& path, const SplitSpec& spec) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open " + path);
    return load_csv_stream(in, spec, path);
}

/// One training/evaluation example located on the time axis.
struct WindowRef {
    std::size_t input_begin;
    std::size_t target_begin;
};

/// Stride-1 windows inside `split`. Forecasting targets immediately follow the
/// input; imputation and super-resolution targets are the input window itself.
/// With `borrow_lookback`, forecasting inputs may start before the split (never
/// before index 0) so that every target position inside the split is covered;
/// targets always stay inside the split.
inline std::vector<WindowRef> windows(const Range& split, std::size_t input_len, std::size_t pred_len, Task task,
                                      bool borrow_lookback = false) {
    const bool forecast = task == Task::forecast;
    std::size_t span = forecast ? input_len + pred_len : input_len;
    std::size_t first = split.begin;
    if (forecast && borrow_lookback) first = split.begin >= input_len ? split.begin - input_len : 0;
    std::size_t avail = split.end - first;
    if (span == 0 || (forecast && split.size() < pred_len) || avail < span) {
        throw DataError("split of length " + std::to_string(split.size()) + " too short for window span " +
                        std::to_string(span));
    }
    std::vector<WindowRef> out;
    out.reserve(avail - span + 1);
    for (std::size_t s = first; s + span <= split.end; ++s) {
        out.push_back({s, forecast ? s + input_len : s});
    }
    return out;
}

/// Copy of columns [begin, begin+len) of a [C, T] tensor.
inline Tensor slice_time(const Tensor& values, std::size_t begin, std::size_t len) {
    std::size_t C = values.dim(0), T = values.dim(1);
    if (begin + len > T) throw ShapeError("slice_time out of range");
    std::vector<double> out(C * len);
    auto v = values.data();
    for (std::size_t c = 0; c < C; ++c) std::copy_n(v.data() + c * T + begin, len, out.data() + c * len);
    return Tensor({C, len}, std::move(out));
}

enum class MaskMode { random, extended };

inline MaskMode parse_mask_mode(const std::string& s) {
    if (s == "random") return MaskMode::random;
    if (s == "extended") return MaskMode::extended;
    throw DataError("mask mode: expected random|extended, got '" + s + "'");
}

struct MaskSpec {
    MaskMode mode = MaskMode::random;
    double ratio = 0.25;
    /// Extended mode only: 0 masks one contiguous block of round(ratio * L);
    /// otherwise blocks of this length are placed on a grid until the total is reached.
    std::size_t segment_length = 0;
    std::uint64_t seed = 0;
};

/// Number of masked points for a window of length L.
inline std::size_t masked_count(double ratio, std::size_t L) {
    if (!(ratio > 0.0 && ratio < 1.0)) throw DataError("mask ratio must lie in (0, 1)");
    auto n = static_cast<std::size_t>(std::llround(ratio * static_cast<double>(L)));
    if (std::abs(static_cast<double>(n) / static_cast<double>(L) - ratio) > 1.0 / static_cast<double>(L)) {
        throw DataError("mask ratio not representable at this length");
    }
    return n;
}

/// Binary mask [C, L] with 1 = observed, 0 = masked. `stream` separates the
/// generator of each window so masks are reproducible in any order.
inline Tensor make_mask(const MaskSpec& spec, std::size_t C, std::size_t L, std::uint64_t stream = 0) {
    std::size_t n = masked_count(spec.ratio, L);
    Rng rng = make_rng(spec.seed, {0x6d61736bULL, stream});
    std::vector<double> m(C * L, 1.0);
    if (spec.mode == MaskMode::random) {
        std::vector<std::size_t> idx(L);
        for (std::size_t c = 0; c < C; ++c) {
            std::iota(idx.begin(), idx.end(), 0);
            // partial Fisher-Yates: first n entries are a uniform n-subset
            for (std::size_t i = 0; i < n; ++i) {
                std::size_t j = std::uniform_int_distribution<std::size_t>(i, L - 1)(rng);
                std::swap(idx[i], idx[j]);
                m[c * L + idx[i]] = 0.0;
            }
        }
        return Tensor({C, L}, std::move(m));
    }
    std::vector<double> row(L, 1.0);
    if (spec.segment_length == 0 || spec.segment_length >= n) {
        std::size_t off = std::uniform_int_distribution<std::size_t>(0, L - n)(rng);
        std::fill_n(row.begin() + static_cast<std::ptrdiff_t>(off), n, 0.0);
    } else {
        std::size_t seg = spec.segment_length;
        std::size_t slots = L / seg;
        std::size_t blocks = (n + seg - 1) / seg;
        if (blocks > slots) throw DataError("extended mask: segments do not fit the window");
        std::vector<std::size_t> ids(slots);
        std::iota(ids.begin(), ids.end(), 0);
        for (std::size_t i = 0; i < blocks; ++i) {
            std::size_t j = std::uniform_int_distribution<std::size_t>(i, slots - 1)(rng);
            std::swap(ids[i], ids[j]);
        }
        std::sort(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(blocks));
        std::size_t left = n;
        for (std::size_t i = 0; i < blocks; ++i) {
            std::size_t len = std::min(seg, left);
            std::fill_n(row.begin() + static_cast<std::ptrdiff_t>(ids[i] * seg), len, 0.0);
            left -= len;
        }
    }
    for (std::size_t c = 0; c < C; ++c) std::copy(row.begin(), row.end(), m.begin() + static_cast<std::ptrdiff_t>(c * L));
    return Tensor({C, L}, std::move(m));
}

/// Writes a [C, T] tensor as CSV with the given header.
inline void write_csv(std::ostream& out, const std::vector<std::string>& names, const Tensor& values) {
    std::size_t C = values.dim(0), T = values.dim(1);
    for (std::size_t c = 0; c < C; ++c) out << (c ? "," : "") << names.at(c);
    out << '\n';
    auto v = values.data();
    for (std::size_t t = 0; t < T; ++t) {
        for (std::size_t c = 0; c < C; ++c) out << (c ? "," : "") << format_double(v[c * T + t]);
        out << '\n';
    }
}

inline void write_csv(const std::string& path, const std::vector<std::string>& names, const Tensor& values) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write " + path);
    write_csv(out, names, values);
}

} // namespace adawave
