#pragma once

// Checkpoint file layout (all integers little-endian):
//
//   "AWN1"                      4 bytes magic
//   version                     u32 (currently 1)
//   config_len                  u32, then config_len bytes of UTF-8 "key=value\n" text
//   array_count                 u32
//   array_count times:
//     name_len                  u32, then name_len bytes of UTF-8
//     rank                      u32
//     dims                      rank x u64
//     values                    product(dims) x IEEE-754 binary64
//
// Model checkpoints store every parameter under its registered name plus
// "data.mean", "data.stdev" (normalization statistics, [C]),
// "trend.assignments" ([C], cluster index as a real) and "trend.centroids".

#include <adawave/config.hpp>
#include <adawave/data.hpp>
#include <adawave/model.hpp>

#include <bit>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <istream>
#include <limits>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

namespace adawave {

static_assert(sizeof(double) == 8 && std::numeric_limits<double>::is_iec559);

struct NamedArray {
    std::string name;
    Shape shape;
    std::vector<double> data;
};

struct Checkpoint {
    static constexpr std::uint32_t version = 1;
    KeyValues config;
    std::vector<NamedArray> arrays;

    const NamedArray* find(const std::string& name) const {
        for (const auto& a : arrays) {
            if (a.name == name) return &a;
        }
        return nullptr;
    }
};

namespace detail {

inline void put_u32(std::ostream& out, std::uint32_t v) {
    char b[4];
    for (int i = 0; i < 4; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xffu);
    out.write(b, 4);
}

inline void put_u64(std::ostream& out, std::uint64_t v) {
    char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xffu);
    out.write(b, 8);
}

inline std::uint64_t get_le(std::istream& in, int bytes) {
    unsigned char b[8] = {};
    in.read(reinterpret_cast<char*>(b), bytes);
    if (!in) throw DataError("checkpoint: truncated file");
    std::uint64_t v = 0;
    for (int i = bytes - 1; i >= 0; --i) v = (v << 8) | b[i];
    return v;
}

inline std::uint32_t get_u32(std::istream& in) { return static_cast<std::uint32_t>(get_le(in, 4)); }
inline std::uint64_t get_u64(std::istream& in) { return get_le(in, 8); }

inline std::uint32_t checked_u32(std::size_t n, const char* what) {
    if (n > 0xffffffffu) throw DataError(std::string("checkpoint: ") + what + " too large");
    return static_cast<std::uint32_t>(n);
}

inline std::string get_string(std::istream& in, std::uint32_t len) {
    std::string s(len, '\0');
    in.read(s.data(), len);
    if (!in) throw DataError("checkpoint: truncated string");
    return s;
}

} // namespace detail

inline void write_checkpoint(std::ostream& out, const Checkpoint& ck) {
    out.write("AWN1", 4);
    detail::put_u32(out, Checkpoint::version);
    std::string text = format_key_values(ck.config);
    detail::put_u32(out, detail::checked_u32(text.size(), "config"));
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    detail::put_u32(out, detail::checked_u32(ck.arrays.size(), "array count"));
    for (const auto& a : ck.arrays) {
        if (shape_size(a.shape) != a.data.size()) throw ShapeError("checkpoint: array " + a.name + " size mismatch");
        detail::put_u32(out, detail::checked_u32(a.name.size(), "name"));
        out.write(a.name.data(), static_cast<std::streamsize>(a.name.size()));
        detail::put_u32(out, detail::checked_u32(a.shape.size(), "rank"));
        for (auto d : a.shape) detail::put_u64(out, d);
        for (double v : a.data) detail::put_u64(out, std::bit_cast<std::uint64_t>(v));
    }
    if (!out) throw DataError("checkpoint: write failed");
}

inline Checkpoint read_checkpoint(std::istream& in) {
    char magic[4];
    in.read(magic, 4);
    if (!in || std::string(magic, 4) != "AWN1") throw DataError("checkpoint: bad magic (expected AWN1)");
    std::uint32_t ver = detail::get_u32(in);
    if (ver != Checkpoint::version) throw DataError("checkpoint: unsupported version " + std::to_string(ver));
    Checkpoint ck;
    ck.config = parse_key_values(detail::get_string(in, detail::get_u32(in)));
    std::uint32_t count = detail::get_u32(in);
    for (std::uint32_t i = 0; i < count; ++i) {
        NamedArray a;
        a.name = detail::get_string(in, detail::get_u32(in));
        std::uint32_t rank = detail::get_u32(in);
        if (rank > 16) throw DataError("checkpoint: implausible rank for " + a.name);
        std::size_t n = 1;
        for (std::uint32_t r = 0; r < rank; ++r) {
            a.shape.push_back(static_cast<std::size_t>(detail::get_u64(in)));
            n *= a.shape.back();
        }
        if (n > (std::size_t{1} << 32)) throw DataError("checkpoint: implausible size for " + a.name);
        a.data.resize(n);
        for (auto& v : a.data) v = std::bit_cast<double>(detail::get_u64(in));
        ck.arrays.push_back(std::move(a));
    }
    return ck;
}

inline void save_checkpoint(const std::string& path, const Checkpoint& ck) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write checkpoint " + path);
    write_checkpoint(out, ck);
}

inline Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open checkpoint " + path);
    return read_checkpoint(in);
}

/// Normalization statistics carried with a model so it can be applied to raw data.
struct NormalizationStats {
    std::vector<std::string> channel_names;
    std::vector<double> mean, stdev;

    static NormalizationStats of(const Dataset& ds) { return {ds.channel_names, ds.mean, ds.stdev}; }
};

inline Checkpoint make_checkpoint(const AdaWaveNet& model, const std::optional<NormalizationStats>& stats = std::nullopt,
                                  const KeyValues& extra = {}) {
    Checkpoint ck;
    ck.config = extra;
    for (const auto& [k, v] : model.config().to_key_values()) ck.config[k] = v;
    for (const auto& p : model.parameters()) ck.arrays.push_back({p.name, p.value.shape(), p.value.values()});
    if (stats) {
        std::string names;
        for (std::size_t i = 0; i < stats->channel_names.size(); ++i) {
            names += (i ? "," : "") + stats->channel_names[i];
        }
        ck.config["channel_names"] = names;
        ck.arrays.push_back({"data.mean", {stats->mean.size()}, stats->mean});
        ck.arrays.push_back({"data.stdev", {stats->stdev.size()}, stats->stdev});
    }
    if (model.clustering_fitted()) {
        const auto& cl = model.trend_head().clustering();
        std::vector<double> a(cl.assignments.begin(), cl.assignments.end());
        ck.arrays.push_back({"trend.assignments", {a.size()}, a});
        if (!cl.centroids.empty() && !cl.centroids.front().empty()) {
            std::vector<double> flat;
            for (const auto& c : cl.centroids) flat.insert(flat.end(), c.begin(), c.end());
            ck.arrays.push_back({"trend.centroids", {cl.centroids.size(), cl.centroids.front().size()}, flat});
        }
        ck.config["trend.feature"] = cl.feature;
    }
    return ck;
}

struct LoadedModel {
    AdaWaveNet model;
    std::optional<NormalizationStats> stats;
    KeyValues config;
};

inline LoadedModel model_from_checkpoint(const Checkpoint& ck) {
    AdaWaveNet model(ModelConfig::from_key_values(ck.config));
    for (const auto& p : model.parameters()) {
        const NamedArray* a = ck.find(p.name);
        if (!a) throw DataError("checkpoint: missing parameter " + p.name);
        if (a->shape != p.value.shape()) {
            throw DataError("checkpoint: parameter " + p.name + " has shape " + shape_str(a->shape) + ", model expects " +
                            shape_str(p.value.shape()));
        }
        Tensor t = p.value;
        auto dst = t.mutable_data();
        std::copy(a->data.begin(), a->data.end(), dst.begin());
    }
    if (const NamedArray* a = ck.find("trend.assignments")) {
        ChannelClustering cl;
        cl.k = model.config().n_clusters;
        for (double v : a->data) {
            if (v < 0.0 || v != std::floor(v)) throw DataError("checkpoint: invalid cluster assignment");
            cl.assignments.push_back(static_cast<std::size_t>(v));
        }
        if (const NamedArray* c = ck.find("trend.centroids"); c && c->shape.size() == 2) {
            for (std::size_t i = 0; i < c->shape[0]; ++i) {
                auto first = c->data.begin() + static_cast<std::ptrdiff_t>(i * c->shape[1]);
                cl.centroids.emplace_back(first, first + static_cast<std::ptrdiff_t>(c->shape[1]));
            }
        }
        if (auto it = ck.config.find("trend.feature"); it != ck.config.end()) cl.feature = it->second;
        model.set_clustering(std::move(cl));
    }
    LoadedModel out{std::move(model), std::nullopt, ck.config};
    const NamedArray* mean = ck.find("data.mean");
    const NamedArray* stdev = ck.find("data.stdev");
    if (mean && stdev) {
        NormalizationStats s{{}, mean->data, stdev->data};
        if (auto it = ck.config.find("channel_names"); it != ck.config.end()) {
            std::stringstream ss(it->second);
            for (std::string name; std::getline(ss, name, ',');) s.channel_names.push_back(name);
        }
        out.stats = std::move(s);
    }
    return out;
}

inline void save_model(const std::string& path, const AdaWaveNet& model,
                       const std::optional<NormalizationStats>& stats = std::nullopt, const KeyValues& extra = {}) {
    save_checkpoint(path, make_checkpoint(model, stats, extra));
}

inline LoadedModel load_model(const std::string& path) { return model_from_checkpoint(load_checkpoint(path)); }

} // namespace adawave
