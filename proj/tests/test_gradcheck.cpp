#include <gtest/gtest.h>

#include "dsdr/gradcheck.hpp"
#include "dsdr/model_check.hpp"

using namespace dsdr;

TEST(FiniteDiff, QuadraticIsExact) {
    std::vector<float> p = {0.5f, -1.25f, 2.0f, 3.5f};
    std::vector<float> g(p.size());
    for (std::size_t i = 0; i < p.size(); ++i) g[i] = 2 * p[i];
    const auto f = [&] {
        double s = 0.0;
        for (float v : p) s += double(v) * v;
        return s;
    };
    Rng rng(1);
    const GradCheckResult r = finite_diff_check(f, {std::span<float>(p)}, {std::span<const float>(g)}, 1e-3, 20, rng);
    EXPECT_EQ(r.samples, 20);
    EXPECT_LE(r.max_rel_error, 1e-6);
    EXPECT_EQ(p, (std::vector<float>{0.5f, -1.25f, 2.0f, 3.5f}));  // restored
}

TEST(FiniteDiff, ConstantFunction) {
    std::vector<float> p = {1.0f, 2.0f};
    std::vector<float> g = {0.0f, 0.0f};
    Rng rng(2);
    const GradCheckResult r =
        finite_diff_check([] { return 3.0; }, {std::span<float>(p)}, {std::span<const float>(g)}, 1e-3, 10, rng);
    EXPECT_LE(r.max_abs_error, 1e-6);
}

TEST(FiniteDiff, DetectsWrongGradient) {
    std::vector<float> p = {1.0f};
    std::vector<float> g = {3.0f};  // true gradient of p^2 is 2
    Rng rng(3);
    const auto f = [&] { return double(p[0]) * p[0]; };
    EXPECT_GT(finite_diff_check(f, {std::span<float>(p)}, {std::span<const float>(g)}, 1e-3, 5, rng).max_rel_error, 0.3);
}

TEST(FiniteDiff, CountsKinkCrossings) {
    std::vector<float> p = {0.001f};
    std::vector<float> g = {1.0f};
    Rng rng(4);
    const auto probe = [&] { return LossProbe{std::max(0.0, double(p[0])), p[0] > 0 ? 1u : 0u}; };
    const GradCheckResult r =
        finite_diff_check(probe, {std::span<float>(p)}, {std::span<const float>(g)}, 1e-2, 3, rng);
    EXPECT_EQ(r.kink_crossings, 3);
    EXPECT_EQ(r.max_rel_error_smooth, 0.0);
    EXPECT_GT(r.max_rel_error, 0.1);
}

TEST(FiniteDiff, RejectsBadArguments) {
    std::vector<float> p = {1.0f}, g = {1.0f, 2.0f};
    Rng rng(0);
    const auto f = [] { return 0.0; };
    EXPECT_THROW(finite_diff_check(f, {std::span<float>(p)}, {std::span<const float>(g)}, 1e-3, 1, rng),
                 std::invalid_argument);
    EXPECT_THROW(finite_diff_check(f, {std::span<float>(p)}, {std::span<const float>(p)}, 0.0, 1, rng),
                 std::invalid_argument);
}

// Away from activation kinks the model gradient agrees with central differences.
TEST(ModelGradCheck, SmoothSamplesAgree) {
    ModelGradCheckOptions o;
    o.step = 1e-3;
    o.samples = 12;
    o.seed = 1;
    o.abs_floor = 1e-2;  // float32 activations: tiny gradients carry ~1e-4 absolute noise
    for (const GroupCheck& g : gradcheck_model(o)) {
        EXPECT_EQ(g.result.samples, 12);
        EXPECT_LE(g.result.max_rel_error_smooth, 2e-2) << group_name(g.group);
    }
}

TEST(ModelGradCheck, CorruptedGradientsFail) {
    ModelGradCheckOptions o;
    o.samples = 3;
    o.corrupt_gradients = true;
    for (const GroupCheck& g : gradcheck_model(o)) EXPECT_FALSE(g.passed()) << group_name(g.group);
}

TEST(ModelGradCheck, ReportsAllGroupsInOrder) {
    ModelGradCheckOptions o;
    o.samples = 1;
    const auto report = gradcheck_model(o);
    ASSERT_EQ(report.size(), 7u);
    for (int g = 0; g < 7; ++g) EXPECT_EQ(static_cast<int>(report[g].group), g);
    o.size = 12;
    EXPECT_THROW(gradcheck_model(o), std::invalid_argument);
}
