#include "gradient_cases.hpp"

#include <gtest/gtest.h>

using namespace adawave;
using namespace adawave::testing;

namespace {

constexpr std::uint64_t kInstances = 20;

class GradientCheck : public ::testing::TestWithParam<std::string> {};

const GradientCase& find_case(const std::string& name) {
    static const auto all = gradient_cases();
    for (const auto& c : all) {
        if (c.name == name) return c;
    }
    throw std::runtime_error("no gradient case " + name);
}

std::vector<std::string> case_names() {
    std::vector<std::string> out;
    for (const auto& c : gradient_cases()) out.push_back(c.name);
    return out;
}

} // namespace

TEST_P(GradientCheck, MatchesCentralDifferences) {
    const auto& c = find_case(GetParam());
    for (std::uint64_t i = 0; i < kInstances; ++i) {
        GradCheckResult r = c.run(i);
        EXPECT_TRUE(r.ok) << c.name << " instance " << i << ": " << r.worst << " (max error " << r.max_error << ")";
        EXPECT_GT(r.checked, 0u);
    }
}

INSTANTIATE_TEST_SUITE_P(AllOperations, GradientCheck, ::testing::ValuesIn(case_names()),
                         [](const ::testing::TestParamInfo<std::string>& info) { return info.param; });

TEST(GradientCoverage, CompositeConvTanhLinearMse) {
    Rng rng = make_rng(11);
    Tensor x = uniform({2, 3, 8}, -1, 1, rng);
    Tensor k = uniform({3, 3, 3}, -1, 1, rng), kb = uniform({3}, -1, 1, rng);
    Tensor w = uniform({8, 4}, -1, 1, rng), b = uniform({4}, -1, 1, rng);
    Tensor y = uniform({2, 3, 4}, -1, 1, rng);
    auto r = gradcheck({x, k, kb, w, b}, [&] { return mse(linear(tanh(conv1d(x, k, kb)), w, b), y); });
    EXPECT_TRUE(r.ok) << r.worst;
}

TEST(GradientCoverage, CheckerRejectsSlightlyWrongGradient) {
    // The taped pass computes 1.001 * f, so analytic and numeric differ by 1e-3 relative.
    Rng rng = make_rng(12);
    Tensor x = uniform({3, 5}, -1, 1, rng), w = uniform({5, 2}, -1, 1, rng);
    auto r = gradcheck({x, w}, [&] {
        Tensor f = sum(tanh(matmul(x, w)));
        return active_tape() ? scale(f, 1.001) : f;
    });
    EXPECT_FALSE(r.ok);
    auto ok = gradcheck({x, w}, [&] { return sum(tanh(matmul(x, w))); });
    EXPECT_TRUE(ok.ok) << ok.worst;
}
