#pragma once

// Trend head: channels are clustered once with k-means on their average trend
// shape, then every cluster gets its own linear map from the input window to
// the output horizon.

#include <adawave/ops.hpp>
#include <adawave/parameters.hpp>
#include <adawave/random.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

namespace adawave {

using Points = std::vector<std::vector<double>>;

struct ChannelClustering {
    std::size_t k = 0;
    std::vector<std::size_t> assignments;
    /// [k][F] cluster centers in feature space.
    Points centroids;
    std::string feature = "znorm-mean-trend";
    /// Within-cluster sum of squares after every centroid update.
    std::vector<double> wcss_history;
};

namespace detail {

inline double sq_dist(const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
    return s;
}

inline Points cluster_means(const Points& pts, const std::vector<std::size_t>& assign, const Points& previous) {
    Points c(previous.size(), std::vector<double>(pts.front().size(), 0.0));
    std::vector<std::size_t> count(previous.size(), 0);
    for (std::size_t i = 0; i < pts.size(); ++i) {
        ++count[assign[i]];
        for (std::size_t f = 0; f < pts[i].size(); ++f) c[assign[i]][f] += pts[i][f];
    }
    for (std::size_t j = 0; j < c.size(); ++j) {
        if (count[j] == 0) {
            c[j] = previous[j];
            continue;
        }
        for (auto& v : c[j]) v /= static_cast<double>(count[j]);
    }
    return c;
}

} // namespace detail

/// Nearest centroid per point; ties go to the lowest centroid index.
inline std::vector<std::size_t> assign_clusters(const Points& pts, const Points& centroids) {
    std::vector<std::size_t> out(pts.size(), 0);
    for (std::size_t i = 0; i < pts.size(); ++i) {
        double best = std::numeric_limits<double>::infinity();
        for (std::size_t j = 0; j < centroids.size(); ++j) {
            double d = detail::sq_dist(pts[i], centroids[j]);
            if (d < best) {
                best = d;
                out[i] = j;
            }
        }
    }
    return out;
}

inline double within_cluster_ss(const Points& pts, const std::vector<std::size_t>& assign, const Points& centroids) {
    double s = 0.0;
    for (std::size_t i = 0; i < pts.size(); ++i) s += detail::sq_dist(pts[i], centroids[assign[i]]);
    return s;
}

/// k-means with k-means++ seeding and Lloyd iterations until the assignment
/// reaches a fixpoint (at most `max_iter` updates). Clusters left empty are
/// re-seeded with the point farthest from its own centroid; identical points
/// may end up sharing one cluster while others stay empty.
inline ChannelClustering kmeans(const Points& pts, std::size_t k, std::uint64_t seed, std::size_t max_iter = 100) {
    if (k < 1) throw ShapeError("k-means: k must be at least 1");
    if (k > pts.size()) {
        throw ShapeError("k-means: k = " + std::to_string(k) + " exceeds " + std::to_string(pts.size()) + " points");
    }
    Rng rng = make_rng(seed, {0x6b6d65616e73ULL});

    Points centroids;
    std::uniform_int_distribution<std::size_t> first(0, pts.size() - 1);
    centroids.push_back(pts[first(rng)]);
    std::vector<double> d2(pts.size());
    while (centroids.size() < k) {
        double total = 0.0;
        for (std::size_t i = 0; i < pts.size(); ++i) {
            double best = std::numeric_limits<double>::infinity();
            for (const auto& c : centroids) best = std::min(best, detail::sq_dist(pts[i], c));
            d2[i] = best;
            total += best;
        }
        std::size_t pick = 0;
        if (total > 0.0) {
            double r = std::uniform_real_distribution<double>(0.0, total)(rng);
            double acc = 0.0;
            pick = pts.size() - 1;
            for (std::size_t i = 0; i < pts.size(); ++i) {
                acc += d2[i];
                if (d2[i] > 0.0 && r < acc) {
                    pick = i;
                    break;
                }
            }
            while (d2[pick] == 0.0) --pick;
        }
        centroids.push_back(pts[pick]);
    }

    ChannelClustering out;
    out.k = k;
    std::vector<std::size_t> assign = assign_clusters(pts, centroids);
    for (std::size_t it = 0; it < max_iter; ++it) {
        centroids = detail::cluster_means(pts, assign, centroids);
        for (std::size_t j = 0; j < k; ++j) {
            std::vector<std::size_t> count(k, 0);
            for (auto a : assign) ++count[a];
            if (count[j] != 0) continue;
            std::optional<std::size_t> far;
            double far_d = 0.0;
            for (std::size_t i = 0; i < pts.size(); ++i) {
                if (count[assign[i]] < 2) continue;
                double d = detail::sq_dist(pts[i], centroids[assign[i]]);
                if (d > far_d) {
                    far_d = d;
                    far = i;
                }
            }
            if (!far) continue;
            assign[*far] = j;
            centroids = detail::cluster_means(pts, assign, centroids);
        }
        out.wcss_history.push_back(within_cluster_ss(pts, assign, centroids));
        auto next = assign_clusters(pts, centroids);
        if (next == assign) break;
        assign = std::move(next);
    }
    out.assignments = std::move(assign);
    out.centroids = std::move(centroids);
    return out;
}

/// Per-channel clustering features from trend windows [S, C, L]: the mean trend
/// window over the first min(S, 512) samples, z-normalized along time.
inline Points channel_features(const Tensor& trend_samples, std::size_t max_samples = 512) {
    if (trend_samples.rank() != 3) throw ShapeError("channel_features expects [S, C, L]");
    std::size_t S = std::min(trend_samples.dim(0), max_samples), C = trend_samples.dim(1), L = trend_samples.dim(2);
    auto v = trend_samples.data();
    Points feats(C, std::vector<double>(L, 0.0));
    for (std::size_t s = 0; s < S; ++s) {
        for (std::size_t c = 0; c < C; ++c) {
            for (std::size_t t = 0; t < L; ++t) feats[c][t] += v[(s * C + c) * L + t];
        }
    }
    for (auto& f : feats) {
        double mu = 0.0;
        for (auto& x : f) {
            x /= static_cast<double>(S);
            mu += x;
        }
        mu /= static_cast<double>(L);
        double var = 0.0;
        for (double x : f) var += (x - mu) * (x - mu);
        double sd = std::sqrt(var / static_cast<double>(L));
        for (auto& x : f) x = sd > 1e-12 ? (x - mu) / sd : 0.0;
    }
    return feats;
}

inline ChannelClustering fit_clustering(const Tensor& trend_samples, std::size_t k, std::uint64_t seed) {
    if (trend_samples.rank() != 3) throw ShapeError("fit_clustering expects [S, C, L]");
    if (k < 1 || k > trend_samples.dim(1)) {
        throw ShapeError("fit_clustering: k = " + std::to_string(k) + " must lie in [1, " +
                         std::to_string(trend_samples.dim(1)) + "]");
    }
    return kmeans(channel_features(trend_samples), k, seed);
}

enum class LinearInit {
    /// Uniform(-1/sqrt(L), 1/sqrt(L)) weights and biases.
    random,
    /// Identity weights (requires equal lengths), zero biases.
    identity,
};

class GroupedLinear {
public:
    GroupedLinear() = default;

    GroupedLinear(ParameterSet& params, const std::string& prefix, std::size_t channels, std::size_t k,
                  std::size_t in_len, std::size_t out_len, Rng& rng, LinearInit init = LinearInit::random)
        : channels_(channels), k_(k) {
        if (k < 1 || k > channels) throw ShapeError("grouped linear: k must lie in [1, channels]");
        if (init == LinearInit::identity) {
            if (in_len != out_len) throw ShapeError("identity grouped linear needs equal lengths");
            Tensor w = Tensor::zeros({k, in_len, out_len});
            auto wd = w.mutable_data();
            for (std::size_t g = 0; g < k; ++g) {
                for (std::size_t i = 0; i < in_len; ++i) wd[(g * in_len + i) * out_len + i] = 1.0;
            }
            weights_ = params.add(prefix + ".weight", w);
            biases_ = params.add(prefix + ".bias", Tensor::zeros({k, out_len}));
        } else {
            double bound = 1.0 / std::sqrt(static_cast<double>(in_len));
            weights_ = params.add(prefix + ".weight", uniform({k, in_len, out_len}, -bound, bound, rng));
            biases_ = params.add(prefix + ".bias", uniform({k, out_len}, -bound, bound, rng));
        }
    }

    std::size_t clusters() const { return k_; }
    bool fitted() const { return clustering_.has_value(); }
    const ChannelClustering& clustering() const {
        if (!clustering_) throw ShapeError("grouped linear: clustering not fitted");
        return *clustering_;
    }

    /// Freezes the channel-to-cluster table.
    void set_clustering(ChannelClustering c) {
        if (c.k != k_ || c.assignments.size() != channels_) {
            throw ShapeError("grouped linear: clustering does not match k/channels");
        }
        for (auto a : c.assignments) {
            if (a >= k_) throw ShapeError("grouped linear: assignment out of range");
        }
        clustering_ = std::move(c);
    }

    const Tensor& weights() const { return weights_; }
    const Tensor& biases() const { return biases_; }

    /// x_trend [..., C, L] -> [..., C, L_out]
    Tensor forward(const Tensor& x_trend) const {
        if (!clustering_) throw ShapeError("grouped linear: clustering not fitted");
        return grouped_linear(x_trend, weights_, biases_, clustering_->assignments);
    }

private:
    std::size_t channels_ = 0, k_ = 1;
    Tensor weights_, biases_;
    std::optional<ChannelClustering> clustering_;
};

} // namespace adawave
