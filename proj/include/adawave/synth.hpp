#pragma once

// Synthetic non-stationary signals: a two-tone signal with a decaying transient
// and a linear trend ("simple"), plus traffic-like and electricity-like mixtures.
// Optional variance shifts and step changes switch on at an onset index.

#include <adawave/data.hpp>
#include <adawave/random.hpp>

#include <cmath>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

namespace adawave {

enum class SynthFamily { simple, traffic, electricity };

inline SynthFamily parse_synth_family(const std::string& s) {
    if (s == "simple") return SynthFamily::simple;
    if (s == "traffic") return SynthFamily::traffic;
    if (s == "electricity") return SynthFamily::electricity;
    throw DataError("unknown synthetic family '" + s + "' (simple|traffic|electricity)");
}

inline std::string to_string(SynthFamily f) {
    switch (f) {
    case SynthFamily::simple: return "simple";
    case SynthFamily::traffic: return "traffic";
    case SynthFamily::electricity: return "electricity";
    }
    return "?";
}

struct SynthSpec {
    SynthFamily family = SynthFamily::simple;
    double f1 = 5.0;
    double f2 = 50.0;
    double alpha = 50.0;
    double t0 = 0.5;
    double beta = 1.0;
    double noise_sigma = 0.1;
    /// Noise amplitude is multiplied by (1 + variance_shift) from the onset on.
    double variance_shift = 0.0;
    /// Constant added from the onset on.
    double step_change = 0.0;
    /// Defaults to n_points / 2, the start of the test half.
    std::optional<std::size_t> onset;
    std::size_t n_points = 1024;
    std::uint64_t seed = 0;

    std::size_t onset_index() const { return onset.value_or(n_points / 2); }
};

/// Sample times t_i = i / n on [0, 1).
inline double synth_time(std::size_t i, std::size_t n) { return static_cast<double>(i) / static_cast<double>(n); }

/// Noise-free value of the family at time t.
inline double synth_clean(const SynthSpec& s, double t) {
    constexpr double pi = std::numbers::pi;
    switch (s.family) {
    case SynthFamily::simple:
        return std::sin(2.0 * pi * s.f1 * t) + std::sin(2.0 * pi * s.f2 * t) * std::exp(-s.alpha * (t - s.t0) * (t - s.t0)) +
               s.beta * t;
    case SynthFamily::traffic:
        return std::sin(2.0 * pi * 24.0 * t) + 0.5 * std::sin(4.0 * pi * 24.0 * t) + std::sin(2.0 * pi * 7.0 * t) +
               0.5 * t;
    case SynthFamily::electricity:
        return 5.0 * std::sin(2.0 * pi * t) + 2.0 * std::sin(4.0 * pi * t) + 3.0 * std::sin(2.0 * pi * 365.0 * t) +
               2.0 * t;
    }
    return 0.0;
}

/// Noisy signal [1, n_points] with shifts applied from the onset index.
inline Tensor generate(const SynthSpec& s) {
    if (s.n_points < 2) throw DataError("synthetic signal needs at least 2 points");
    Rng rng = make_rng(s.seed, {0x73796e7468ULL});
    std::normal_distribution<double> noise(0.0, 1.0);
    std::vector<double> v(s.n_points);
    std::size_t onset = s.onset_index();
    for (std::size_t i = 0; i < s.n_points; ++i) {
        double eps = s.noise_sigma * noise(rng);
        double x = synth_clean(s, synth_time(i, s.n_points));
        if (i >= onset) {
            eps *= 1.0 + s.variance_shift;
            x += s.step_change;
        }
        v[i] = x + eps;
    }
    return Tensor({1, s.n_points}, std::move(v));
}

/// Noise-free and shift-free reference [1, n_points].
inline Tensor denoised_target(const SynthSpec& s) {
    SynthSpec clean = s;
    clean.noise_sigma = 0.0;
    clean.variance_shift = 0.0;
    clean.step_change = 0.0;
    return generate(clean);
}

/// The case-study layout: first half trains, second half tests, no validation split.
inline Dataset synthetic_dataset(const SynthSpec& s) {
    return make_dataset({"s"}, generate(s), SplitSpec::from_counts(s.n_points / 2, 0, s.n_points - s.n_points / 2));
}

} // namespace adawave
