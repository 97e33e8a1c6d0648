#include <adawave/attention.hpp>

#include <gtest/gtest.h>

using namespace adawave;

namespace {

struct Fixture {
    ParameterSet params;
    AttentionHead head;
    Fixture(std::size_t lin, std::size_t lout, std::size_t d, std::size_t h, std::uint64_t seed, bool mixing = true) {
        Rng rng = make_rng(seed);
        head = AttentionHead(params, "att", lin, lout, d, h, rng, HeadInit::random, mixing);
    }
};

} // namespace

TEST(Attention, ShapeAndLengthChecks) {
    Fixture f(6, 6, 8, 4, 1);
    Rng rng = make_rng(2);
    EXPECT_EQ(f.head.forward(normal({5, 6}, 0, 1, rng)).shape(), (Shape{5, 6}));
    EXPECT_EQ(f.head.forward(normal({3, 5, 6}, 0, 1, rng)).shape(), (Shape{3, 5, 6}));
    EXPECT_THROW(f.head.forward(normal({5, 7}, 0, 1, rng)), ShapeError);
    ParameterSet ps;
    EXPECT_THROW(AttentionHead(ps, "x", 6, 6, 10, 4, rng), ShapeError);
}

TEST(Attention, SingleTokenEqualsEmbedProjectPath) {
    // With one channel the softmax weight is exactly 1, so the block adds the
    // value path of the token itself; compare against the explicit formula.
    Fixture f(6, 4, 8, 2, 3);
    Rng rng = make_rng(4);
    Tensor x = normal({1, 6}, 0, 1, rng);
    AttentionTrace trace;
    Tensor y = f.head.forward(x, &trace);
    for (double w : trace.weights.data()) EXPECT_DOUBLE_EQ(w, 1.0);
    const auto& P = f.params;
    Tensor tok = linear(x, P.at("att.embed.weight"), P.at("att.embed.bias"));
    Tensor h = layer_norm(tok, P.at("att.norm.weight"), P.at("att.norm.bias"));
    Tensor v = linear(h, P.at("att.value.weight"), P.at("att.value.bias"));
    Tensor out = tok + linear(v, P.at("att.out.weight"), P.at("att.out.bias"));
    Tensor expected = linear(out, P.at("att.project.weight"), P.at("att.project.bias"));
    for (std::size_t i = 0; i < y.size(); ++i) EXPECT_NEAR(y[i], expected[i], 1e-12);
}

TEST(Attention, WithoutMixingIsEmbedProject) {
    Fixture f(6, 4, 8, 2, 5, false);
    Rng rng = make_rng(6);
    Tensor x = normal({3, 6}, 0, 1, rng);
    const auto& P = f.params;
    Tensor expected = linear(linear(x, P.at("att.embed.weight"), P.at("att.embed.bias")), P.at("att.project.weight"),
                             P.at("att.project.bias"));
    Tensor y = f.head.forward(x);
    for (std::size_t i = 0; i < y.size(); ++i) EXPECT_NEAR(y[i], expected[i], 1e-12);
}

TEST(Attention, PermutationEquivariant) {
    Fixture f(8, 8, 16, 4, 7);
    for (std::uint64_t s = 0; s < 10; ++s) {
        Rng rng = make_rng(s, {8});
        const std::size_t C = 5;
        Tensor x = normal({2, C, 8}, 0, 1, rng);
        std::vector<std::size_t> perm(C);
        std::iota(perm.begin(), perm.end(), 0);
        std::shuffle(perm.begin(), perm.end(), rng);
        std::vector<double> xp(x.size());
        for (std::size_t b = 0; b < 2; ++b)
            for (std::size_t c = 0; c < C; ++c)
                for (std::size_t t = 0; t < 8; ++t) xp[(b * C + c) * 8 + t] = x[(b * C + perm[c]) * 8 + t];
        Tensor y = f.head.forward(x), yp = f.head.forward(Tensor(x.shape(), xp));
        for (std::size_t b = 0; b < 2; ++b)
            for (std::size_t c = 0; c < C; ++c)
                for (std::size_t t = 0; t < 8; ++t)
                    EXPECT_NEAR(yp[(b * C + c) * 8 + t], y[(b * C + perm[c]) * 8 + t], 1e-12);
    }
}

TEST(Attention, WeightRowsSumToOne) {
    Fixture f(6, 6, 8, 4, 9);
    Rng rng = make_rng(10);
    AttentionTrace trace;
    f.head.forward(normal({3, 7, 6}, 0, 3, rng), &trace);
    ASSERT_EQ(trace.weights.shape(), (Shape{3, 4, 7, 7}));
    for (std::size_t r = 0; r < trace.weights.size() / 7; ++r) {
        double s = 0.0;
        for (std::size_t j = 0; j < 7; ++j) s += trace.weights[r * 7 + j];
        EXPECT_NEAR(s, 1.0, 1e-8);
    }
}

TEST(Attention, PassThroughInitIsIdentity) {
    ParameterSet ps;
    Rng rng = make_rng(11);
    AttentionHead h(ps, "att", 6, 6, 8, 2, rng, HeadInit::pass_through);
    Tensor x = normal({4, 6}, 0, 1, rng);
    Tensor y = h.forward(x);
    for (std::size_t i = 0; i < x.size(); ++i) EXPECT_NEAR(y[i], x[i], 1e-12);
}

TEST(Attention, GradientsReachEveryParameter) {
    Fixture f(6, 6, 8, 2, 12);
    Rng rng = make_rng(13);
    Tensor x = normal({2, 4, 6}, 0, 1, rng), y = normal({2, 4, 6}, 0, 1, rng);
    Tape tape;
    {
        TapeScope s(tape);
        tape.backward(mse(f.head.forward(x), y));
    }
    for (const auto& p : f.params) {
        ASSERT_TRUE(p.value.has_grad()) << p.name;
        double n = 0.0;
        for (double g : p.value.grad()) n += g * g;
        EXPECT_GT(n, 0.0) << p.name;
    }
}
