// Copyright Contributors to the binosplat project
// SPDX-License-Identifier: Apache-2.0

#include "binosplat/adaptive_control.hpp"
#include "test_util.hpp"

#include <gtest/gtest.h>

#include <cmath>

namespace binosplat {
namespace {

GaussianCloud cloud_with_opacities(const std::vector<double>& alphas, double log_scale = std::log(0.001)) {
    GaussianCloud c;
    for (std::size_t i = 0; i < alphas.size(); ++i)
        c.push_back(Vec3(static_cast<double>(i), 0, 3), Vec4(1, 0, 0, 0), Vec3::Constant(log_scale), logit(alphas[i]),
                    Vec3(0.1 * static_cast<double>(i), 0, 0));
    return c;
}

TEST(OpacityDecay, SingleStep) {
    GaussianCloud c = cloud_with_opacities({0.8});
    opacity_decay(c, 0.995);
    EXPECT_NEAR(sigmoid(c.opacity_logits[0]), 0.796, 1e-12);
}

TEST(OpacityDecay, UnitLambdaIsNoOp) {
    GaussianCloud c = cloud_with_opacities({0.3, 0.7, 0.99});
    const GaussianCloud before = c;
    opacity_decay(c, 1.0);
    EXPECT_EQ(c, before);
}

TEST(OpacityDecay, CompoundsGeometrically) {
    GaussianCloud c = cloud_with_opacities({0.9, 0.4});
    for (int k = 0; k < 300; ++k) opacity_decay(c, 0.99);
    EXPECT_NEAR(sigmoid(c.opacity_logits[0]) / (0.9 * std::pow(0.99, 300)), 1.0, 1e-6);
    EXPECT_NEAR(sigmoid(c.opacity_logits[1]) / (0.4 * std::pow(0.99, 300)), 1.0, 1e-6);
}

TEST(OpacityDecay, FloorKeepsLogitFinite) {
    GaussianCloud c = cloud_with_opacities({1e-5});
    for (int k = 0; k < 5000; ++k) opacity_decay(c, 0.9);
    EXPECT_TRUE(std::isfinite(c.opacity_logits[0]));
    EXPECT_NEAR(sigmoid(c.opacity_logits[0]), kOpacityFloor, 1e-9);
}

TEST(OpacityDecay, RejectsBadLambda) {
    GaussianCloud c = cloud_with_opacities({0.5});
    EXPECT_THROW(opacity_decay(c, 0.0), std::invalid_argument);
    EXPECT_THROW(opacity_decay(c, 1.01), std::invalid_argument);
}

TEST(DensifyStats, Accumulation) {
    DensifyStats s(2);
    accumulate_densify_stats(s, {Vec2(3, 4), Vec2(0, 0)}, {1, 1});
    EXPECT_EQ(s.grad_accum[0], 5.0);
    EXPECT_EQ(s.grad_accum[1], 0.0);
    EXPECT_EQ(s.counts[1], 1.0);
    accumulate_densify_stats(s, {Vec2(6, 8), Vec2(1, 0)}, {1, 0});
    EXPECT_EQ(s.grad_accum[0], 15.0);
    EXPECT_EQ(s.counts[0], 2.0);
    EXPECT_EQ(s.grad_accum[1], 0.0);
    EXPECT_EQ(s.counts[1], 1.0);
    EXPECT_THROW(accumulate_densify_stats(s, {Vec2(1, 1)}, {1}), std::invalid_argument);
}

TEST(Densify, QuietCloudUnchanged) {
    GaussianCloud c = cloud_with_opacities({0.5, 0.6, 0.7});
    const GaussianCloud before = c;
    DensifyStats s(3);
    accumulate_densify_stats(s, {Vec2(1e-5, 0), Vec2(0, 1e-5), Vec2(0, 0)}, {1, 1, 1});
    Rng rng(1);
    const DensifyReport r = densify_and_prune(c, s, DensifyConfig{}, rng);
    EXPECT_EQ(c, before);
    EXPECT_EQ(r.cloned + r.split + r.pruned, 0u);
    EXPECT_EQ(s.grad_accum, std::vector<double>(3, 0.0));
}

TEST(Densify, SmallHighGradientGaussianIsCloned) {
    GaussianCloud c = cloud_with_opacities({0.5});
    DensifyStats s(1);
    accumulate_densify_stats(s, {Vec2(4e-4, 0)}, {1});
    Rng rng(2);
    const DensifyReport r = densify_and_prune(c, s, DensifyConfig{}, rng);
    ASSERT_EQ(c.size(), 2u);
    EXPECT_EQ(r.cloned, 1u);
    EXPECT_EQ(r.source, (std::vector<std::ptrdiff_t>{0, -1}));
    EXPECT_EQ(c.log_scales[1], c.log_scales[0]);
    EXPECT_EQ(c.opacity_logits[1], c.opacity_logits[0]);
    EXPECT_LT((c.positions[1] - c.positions[0]).norm(), 0.01);
}

TEST(Densify, LargeHighGradientGaussianIsSplit) {
    GaussianCloud c = cloud_with_opacities({0.5, 0.5}, std::log(0.5));
    DensifyStats s(2);
    accumulate_densify_stats(s, {Vec2(0, 1e-3), Vec2(0, 0)}, {1, 1});
    Rng rng(3);
    DensifyConfig cfg;
    cfg.scene_extent = 2.0;
    const DensifyReport r = densify_and_prune(c, s, cfg, rng);
    ASSERT_EQ(c.size(), 3u);
    EXPECT_EQ(r.split, 1u);
    EXPECT_EQ(r.source, (std::vector<std::ptrdiff_t>{1, -1, -1}));
    for (int k = 1; k < 3; ++k) {
        EXPECT_NEAR(std::exp(c.log_scales[k](0)), 0.5 / 1.6, 1e-12);
        EXPECT_LT((c.positions[k] - Vec3(0, 0, 3)).norm(), 3.0);
    }
    for (std::size_t i = 0; i < c.size(); ++i) EXPECT_TRUE(c.positions[i].allFinite());
}

TEST(Densify, DecayedHalfIsPrunedExactly) {
    std::vector<double> alphas;
    for (int i = 0; i < 10; ++i) alphas.push_back(i % 2 ? 0.9 : 0.02);
    GaussianCloud c = cloud_with_opacities(alphas);
    // 0.02 * 0.99^150 = 0.0044 < 0.005 while 0.9 * 0.99^150 = 0.199 stays.
    for (int k = 0; k < 150; ++k) opacity_decay(c, 0.99);
    std::vector<Vec3> expected_colors;
    for (int i = 1; i < 10; i += 2) expected_colors.push_back(c.colors[static_cast<std::size_t>(i)]);
    DensifyStats s(10);
    Rng rng(4);
    const DensifyReport r = densify_and_prune(c, s, DensifyConfig{}, rng);
    EXPECT_EQ(r.pruned, 5u);
    ASSERT_EQ(c.size(), 5u);
    EXPECT_EQ(c.colors, expected_colors);
    EXPECT_EQ(r.source, (std::vector<std::ptrdiff_t>{1, 3, 5, 7, 9}));
}

TEST(Prune, RemovesExactlyTransparentSet) {
    Rng rng(5);
    std::uniform_real_distribution<double> u(0.0, 0.02);
    std::vector<double> alphas(200);
    for (double& a : alphas) a = u(rng);
    GaussianCloud c = cloud_with_opacities(alphas);
    std::vector<std::ptrdiff_t> expected;
    for (std::size_t i = 0; i < alphas.size(); ++i)
        if (!(sigmoid(c.opacity_logits[i]) < 0.005)) expected.push_back(static_cast<std::ptrdiff_t>(i));
    const GaussianCloud before = c;
    const auto kept = prune_transparent(c, 0.005);
    EXPECT_EQ(kept, expected);
    ASSERT_NO_THROW(c.validate());
    for (std::size_t j = 0; j < kept.size(); ++j) EXPECT_EQ(c.positions[j], before.positions[kept[j]]);
}

// Two Gaussians receive constant opacity pressure of different strength; decay is interleaved after each step.
TEST(DecayPrune, StrongSupportSurvivesWeakSupportIsPruned) {
    GaussianCloud c = cloud_with_opacities({0.5, 0.5});
    const double lr = 0.01;
    const double g_a = 1.0, g_b = 0.1;  // descent direction on the logit: logit += lr * g
    const double lambda = 0.995;
    int pruned_at = -1;
    for (int step = 0; step < 2000 && pruned_at < 0; ++step) {
        c.opacity_logits[0] += lr * g_a;
        c.opacity_logits[1] += lr * g_b;
        opacity_decay(c, lambda);
        if (sigmoid(c.opacity_logits[1]) < 0.005) pruned_at = step;
    }
    ASSERT_GE(pruned_at, 0) << "B never fell below the prune threshold";
    // A approaches the fixed point 1 - (1 - lambda) / (lr * g_a) = 0.5.
    EXPECT_NEAR(sigmoid(c.opacity_logits[0]), 0.5, 0.05);
    DensifyStats s(2);
    Rng rng(6);
    const DensifyReport r = densify_and_prune(c, s, DensifyConfig{}, rng);
    EXPECT_EQ(r.source, (std::vector<std::ptrdiff_t>{0}));
}

}  // namespace
}  // namespace binosplat
