#include "gradient_cases.hpp"

#include <adawave/lifting.hpp>

#include <gtest/gtest.h>

#include <cmath>

using namespace adawave;
using adawave::testing::cases::random_level;

namespace {

// Zero-padded depthwise correlation of one channel, left pad (K-1)/2.
std::vector<double> corr(const std::vector<double>& x, const double* w, std::size_t K, double b) {
    std::vector<double> y(x.size());
    long pad = static_cast<long>((K - 1) / 2);
    for (std::size_t n = 0; n < x.size(); ++n) {
        double acc = b;
        for (std::size_t j = 0; j < K; ++j) {
            long s = static_cast<long>(n + j) - pad;
            if (s >= 0 && s < static_cast<long>(x.size())) acc += w[j] * x[static_cast<std::size_t>(s)];
        }
        y[n] = acc;
    }
    return y;
}

// Adjoint of corr: the transposed convolution of one channel.
std::vector<double> corr_t(const std::vector<double>& x, const double* w, std::size_t K, double b) {
    std::vector<double> y(x.size(), b);
    long pad = static_cast<long>((K - 1) / 2);
    for (std::size_t n = 0; n < x.size(); ++n) {
        for (std::size_t j = 0; j < K; ++j) {
            long s = static_cast<long>(n + j) - pad;
            if (s >= 0 && s < static_cast<long>(x.size())) y[static_cast<std::size_t>(s)] += w[j] * x[n];
        }
    }
    return y;
}

Tensor random_tensor(Shape s, std::uint64_t seed) {
    Rng rng = make_rng(seed);
    return normal(std::move(s), 0, 1, rng);
}

} // namespace

TEST(Split, ByDefinition) {
    auto [e, o] = split(Tensor({1, 4}, {0, 1, 2, 3}));
    EXPECT_EQ(e.values(), (std::vector<double>{0, 2}));
    EXPECT_EQ(o.values(), (std::vector<double>{1, 3}));
    auto [ce, co] = split(Tensor::full({2, 6}, 4.0));
    for (double v : ce.data()) EXPECT_EQ(v, 4.0);
    for (double v : co.data()) EXPECT_EQ(v, 4.0);
    EXPECT_THROW(split(Tensor::zeros({1, 5})), ShapeError);
}

TEST(Split, InterleaveRoundTrip) {
    for (std::uint64_t s = 0; s < 10; ++s) {
        Tensor x = random_tensor({3, 2 * (s + 1)}, s);
        auto [e, o] = split(x);
        EXPECT_EQ(interleave(e, o).values(), x.values());
    }
}

TEST(LiftForward, ZeroInitIsPolyphasePassThrough) {
    LiftingLevel l = LiftingLevel::zeros(2, 7, false);
    Tensor x = random_tensor({2, 10}, 1);
    auto s = lift_forward(x, l);
    auto [e, o] = split(x);
    EXPECT_EQ(s.approx.values(), e.values());
    EXPECT_EQ(s.detail.values(), o.values());
    EXPECT_FALSE(s.padded);
    auto c = lift_forward(Tensor::full({2, 8}, 2.5), l);
    for (double v : c.approx.data()) EXPECT_EQ(v, 2.5);
    for (double v : c.detail.data()) EXPECT_EQ(v, 2.5);
}

TEST(LiftForward, MatchesDirectFormula) {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        Rng rng = make_rng(seed, {1});
        std::size_t C = 1 + seed % 3, K = 1 + seed % 8, L = 8 + seed;
        LiftingLevel l = random_level(C, K, false, rng, 0.8);
        Tensor x = normal({C, L}, 0, 1, rng);
        auto s = lift_forward(x, l);
        std::size_t half = (L + 1) / 2;
        ASSERT_EQ(s.approx.dim(-1), half);
        EXPECT_EQ(s.padded, L % 2 == 1);
        for (std::size_t c = 0; c < C; ++c) {
            std::vector<double> e(half), o(half);
            for (std::size_t n = 0; n < half; ++n) {
                e[n] = x[c * L + 2 * n];
                o[n] = x[c * L + std::min(2 * n + 1, L - 1)];
            }
            auto p = corr(e, &l.predict_kernel.data()[c * K], K, l.predict_bias[c]);
            std::vector<double> d(half);
            for (std::size_t n = 0; n < half; ++n) d[n] = o[n] - std::tanh(p[n]);
            auto u = corr(d, &l.update_kernel.data()[c * K], K, l.update_bias[c]);
            for (std::size_t n = 0; n < half; ++n) {
                EXPECT_NEAR(s.detail[c * half + n], d[n], 1e-13);
                EXPECT_NEAR(s.approx[c * half + n], e[n] + std::tanh(u[n]), 1e-13);
            }
        }
    }
}

TEST(LiftInverseTied, PerfectReconstructionIncludingOddLengths) {
    for (std::uint64_t seed = 0; seed < 30; ++seed) {
        Rng rng = make_rng(seed, {2});
        std::size_t C = 1 + seed % 3, K = std::vector<std::size_t>{3, 7, 16}[seed % 3], L = 9 + seed;
        LiftingLevel l = random_level(C, K, false, rng, 1.0);
        Tensor x = normal({2, C, L}, 0, 1, rng);
        auto s = lift_forward(x, l);
        Tensor r = lift_inverse_tied(s.approx, s.detail, s.padded, l);
        ASSERT_EQ(r.shape(), x.shape());
        for (std::size_t i = 0; i < x.size(); ++i) EXPECT_NEAR(r[i], x[i], 1e-10);
    }
}

TEST(LiftInverseTied, ZeroInitDeinterleaves) {
    LiftingLevel l = LiftingLevel::zeros(1, 3, false);
    Tensor r = lift_inverse_tied(Tensor({1, 2}, {0, 2}), Tensor({1, 2}, {1, 3}), false, l);
    EXPECT_EQ(r.values(), (std::vector<double>{0, 1, 2, 3}));
}

TEST(LiftInverseLearned, ZeroInitInterleavesAndShapeLaw) {
    LiftingLevel l = LiftingLevel::zeros(2, 5, true);
    Tensor a = random_tensor({2, 6}, 3), d = random_tensor({2, 6}, 4);
    Tensor r = lift_inverse_learned(a, d, false, l);
    EXPECT_EQ(r.values(), interleave(a, d).values());
    EXPECT_EQ(lift_inverse_learned(a, d, true, l).dim(-1), 11u);
    EXPECT_THROW(lift_inverse_learned(a, d, false, LiftingLevel::zeros(2, 5, false)), ShapeError);
}

TEST(LiftInverseLearned, MatchesDirectFormula) {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        Rng rng = make_rng(seed, {3});
        std::size_t C = 1 + seed % 2, K = 1 + seed % 7, n = 3 + seed % 5;
        LiftingLevel l = random_level(C, K, true, rng, 0.8);
        Tensor a = normal({C, n}, 0, 1, rng), d = normal({C, n}, 0, 1, rng);
        bool literal = seed % 2;
        Tensor r = lift_inverse_learned(a, d, false, l, literal);
        for (std::size_t c = 0; c < C; ++c) {
            std::vector<double> dv(n), base(n);
            for (std::size_t i = 0; i < n; ++i) {
                dv[i] = d[c * n + i];
                base[i] = a[c * n + i] - (literal ? dv[i] : 0.0);
            }
            auto u = corr_t(dv, &l.inv_update_kernel.data()[c * K], K, l.inv_update_bias[c]);
            std::vector<double> e(n);
            for (std::size_t i = 0; i < n; ++i) e[i] = base[i] - std::tanh(u[i]);
            auto p = corr_t(e, &l.inv_predict_kernel.data()[c * K], K, l.inv_predict_bias[c]);
            for (std::size_t i = 0; i < n; ++i) {
                EXPECT_NEAR(r[c * 2 * n + 2 * i], e[i], 1e-13);
                EXPECT_NEAR(r[c * 2 * n + 2 * i + 1], dv[i] + std::tanh(p[i]), 1e-13);
            }
        }
    }
}

TEST(Analyze, ShapeLaws) {
    auto levels = [](std::size_t n) {
        std::vector<LiftingLevel> v;
        for (std::size_t i = 0; i < n; ++i) v.push_back(LiftingLevel::zeros(1, 3, false));
        return v;
    };
    auto p1 = analyze(Tensor::zeros({1, 8}), levels(1));
    EXPECT_EQ(p1.approximation.dim(-1), 4u);
    EXPECT_EQ(p1.details.at(0).dim(-1), 4u);
    auto p3 = analyze(Tensor::zeros({1, 96}), levels(3));
    EXPECT_EQ(p3.approximation.dim(-1), 12u);
    EXPECT_EQ(p3.details[0].dim(-1), 48u);
    EXPECT_EQ(p3.details[1].dim(-1), 24u);
    EXPECT_EQ(p3.details[2].dim(-1), 12u);
    EXPECT_THROW(analyze(Tensor::zeros({1, 31}), levels(3)), ShapeError);
    EXPECT_THROW(analyze(Tensor::zeros({1, 32}), {}), ShapeError);
}

TEST(Analyze, ElementCountConservation) {
    for (std::size_t L : {64u, 65u, 77u, 96u, 101u}) {
        std::vector<LiftingLevel> lv(3, LiftingLevel::zeros(2, 3, false));
        auto p = analyze(random_tensor({2, L}, L), lv);
        std::size_t count = p.approximation.size();
        std::size_t pads = 0;
        for (std::size_t l = 0; l < p.levels(); ++l) {
            count += p.details[l].size();
            pads += p.padded[l] ? 2 : 0; // one replicated sample per channel
        }
        EXPECT_EQ(count - pads, 2 * L);
        EXPECT_EQ(p.approximation.dim(-1), approximation_length(L, 3));
    }
}

TEST(Analyze, ZeroInitIsEvenDecimation) {
    std::vector<LiftingLevel> lv(2, LiftingLevel::zeros(1, 5, false));
    Tensor x = random_tensor({1, 32}, 9);
    auto p = analyze(x, lv);
    for (std::size_t n = 0; n < 8; ++n) EXPECT_EQ(p.approximation[n], x[4 * n]);
}

TEST(Synthesize, TiedPerfectReconstructionAcrossLevelsAndKernels) {
    std::uint64_t seed = 0;
    for (std::size_t N = 1; N <= 5; ++N) {
        for (std::size_t K : {3u, 7u, 16u}) {
            for (std::size_t extra : {0u, 1u, 3u}) {
                Rng rng = make_rng(seed++, {4});
                std::size_t L = min_analysis_length(N) + extra;
                std::vector<LiftingLevel> lv;
                for (std::size_t l = 0; l < N; ++l) lv.push_back(random_level(2, K, false, rng, 1.0));
                Tensor x = normal({2, L}, 0, 2, rng);
                Tensor r = synthesize(analyze(x, lv), lv, InverseMode::tied);
                ASSERT_EQ(r.shape(), x.shape());
                for (std::size_t i = 0; i < x.size(); ++i) ASSERT_NEAR(r[i], x[i], 1e-10) << "N=" << N << " K=" << K;
            }
        }
    }
}

TEST(Synthesize, LearnedZeroInitInvertsAnalysis) {
    std::vector<LiftingLevel> lv(3, LiftingLevel::zeros(2, 7, true));
    for (std::size_t L : {32u, 45u, 96u}) {
        Tensor x = random_tensor({2, L}, L);
        Tensor r = synthesize(analyze(x, lv), lv, InverseMode::learned);
        EXPECT_EQ(r.values(), x.values());
    }
}

TEST(Synthesize, LevelCountMismatch) {
    std::vector<LiftingLevel> lv(2, LiftingLevel::zeros(1, 3, false));
    auto p = analyze(Tensor::zeros({1, 32}), lv);
    lv.pop_back();
    EXPECT_THROW(synthesize(p, lv, InverseMode::tied), ShapeError);
}

TEST(Lifting, GradientsReachEveryKernel) {
    Rng rng = make_rng(5);
    ParameterSet ps;
    std::vector<LiftingLevel> lv;
    for (int l = 0; l < 3; ++l) lv.push_back(LiftingLevel::zeros(ps, "l" + std::to_string(l), 2, 7, true));
    Tensor x = normal({4, 2, 64}, 0, 1, rng), y = normal({4, 2, 64}, 0, 1, rng);
    Tape tape;
    {
        TapeScope s(tape);
        auto p = analyze(x, lv);
        p.approximation = scale(p.approximation, 0.5);
        tape.backward(mse(synthesize(p, lv, InverseMode::learned), y));
    }
    for (const auto& p : ps) {
        if (p.name.find("weight") == std::string::npos) continue;
        ASSERT_TRUE(p.value.has_grad()) << p.name;
        double norm = 0.0;
        for (double g : p.value.grad()) norm += g * g;
        EXPECT_GT(norm, 0.0) << p.name;
    }
}
