// Copyright Contributors to the binosplat project
// SPDX-License-Identifier: Apache-2.0

#include "binosplat/consistency.hpp"
#include "binosplat/losses.hpp"
#include "test_util.hpp"

#include <gtest/gtest.h>

#include <cmath>

namespace binosplat {
namespace {

using test::random_image;
using test::simple_camera;

// Smooth three-channel texture on a fronto-parallel plane, indexed by world (X, Y).
Vec3 plane_texture(double X, double Y) {
    return Vec3(0.5 + 0.35 * std::sin(1.3 * X + 0.4 * Y), 0.5 + 0.3 * std::sin(0.9 * X - 0.7 * Y + 1.0),
                0.5 + 0.25 * std::cos(1.7 * X + 0.2));
}

// Image of the plane Z = depth seen by a camera at identity rotation whose center sits at (cx_world, 0, 0).
Image render_plane(const CameraModel& cam, double depth, double center_x) {
    Image img(cam.width, cam.height, 3);
    for (int r = 0; r < cam.height; ++r)
        for (int c = 0; c < cam.width; ++c) {
            const double X = (c - cam.cx) * depth / cam.fx + center_x;
            const double Y = (r - cam.cy) * depth / cam.fy;
            const Vec3 t = plane_texture(X, Y);
            for (int ch = 0; ch < 3; ++ch) img.at(r, c, ch) = t(ch);
        }
    return img;
}

struct PlaneSetup {
    CameraModel cam = simple_camera(64, 48, 100);
    double depth = 2.0;
    Image left;
    Image depth_map;
    Image alpha;
    Image right_for(double d_cam) const {
        return render_plane(cam, depth, translate_camera(cam, d_cam).optical_center().x());
    }
    PlaneSetup() {
        left = render_plane(cam, depth, 0.0);
        depth_map = Image(cam.width, cam.height, 1, depth);
        alpha = Image(cam.width, cam.height, 1, 1.0);
    }
};

TEST(Disparity, Examples) {
    const Image depth(6, 4, 1, 2.0), alpha(6, 4, 1, 1.0);
    const DisparityMap d = compute_disparity(depth, 100, 0.4, alpha, 0.5);
    for (double v : d.values.data) EXPECT_DOUBLE_EQ(v, 20.0);
    for (auto m : d.valid_mask) EXPECT_EQ(m, 1);
    for (double v : compute_disparity(depth, 100, 0.0, alpha, 0.5).values.data) EXPECT_EQ(v, 0.0);
    for (double v : compute_disparity(depth, 100, -0.4, alpha, 0.5).values.data) EXPECT_DOUBLE_EQ(v, -20.0);
}

TEST(Disparity, MaskRules) {
    Image depth(3, 1, 1, 2.0), alpha(3, 1, 1, 1.0);
    alpha.at(0, 1) = 0.49;
    depth.at(0, 2) = 0.0;
    const DisparityMap d = compute_disparity(depth, 50, 0.1, alpha, 0.5);
    EXPECT_EQ(d.valid_mask, (std::vector<std::uint8_t>{1, 0, 0}));
    EXPECT_TRUE(std::isfinite(d.values.at(0, 2)));
    const DisparityMap literal = compute_disparity(depth, 50, 0.1, alpha, 0.0);
    EXPECT_EQ(literal.valid_mask, (std::vector<std::uint8_t>{1, 1, 0}));
}

TEST(Warp, ZeroDisparityIsIdentity) {
    Rng rng(1);
    const Image right = random_image(9, 7, 3, rng);
    const DisparityMap d = compute_disparity(Image(9, 7, 1, 3.0), 40, 0.0, Image(9, 7, 1, 1.0), 0.5);
    const WarpResult w = warp_right_to_left(right, d);
    EXPECT_EQ(w.shifted.data, right.data);
    for (auto m : w.mask) EXPECT_EQ(m, 1);
}

TEST(Warp, RampWithIntegerShift) {
    const int W = 12, H = 3;
    Image ramp(W, H, 3);
    for (int r = 0; r < H; ++r)
        for (int c = 0; c < W; ++c)
            for (int ch = 0; ch < 3; ++ch) ramp.at(r, c, ch) = static_cast<double>(c) / W;
    // f * d_cam / depth = 2 exactly.
    const DisparityMap d = compute_disparity(Image(W, H, 1, 4.0), 80, 0.1, Image(W, H, 1, 1.0), 0.5);
    const WarpResult w = warp_right_to_left(ramp, d);
    for (int r = 0; r < H; ++r)
        for (int c = 0; c < W; ++c) {
            if (c < 2) {
                EXPECT_EQ(w.mask[r * W + c], 0);
                continue;
            }
            EXPECT_EQ(w.mask[r * W + c], 1);
            for (int ch = 0; ch < 3; ++ch) EXPECT_NEAR(w.shifted.at(r, c, ch), ramp.at(r, c - 2, ch), 1e-15);
        }
}

TEST(Warp, ConstantImageIsInvariant) {
    Rng rng(3);
    const Image constant(10, 6, 3, 0.37);
    Image depth = random_image(10, 6, 1, rng, 1.0, 4.0);
    const DisparityMap d = compute_disparity(depth, 30, 0.3, Image(10, 6, 1, 1.0), 0.5);
    const WarpResult w = warp_right_to_left(constant, d);
    for (int p = 0; p < 60; ++p)
        if (w.mask[p])
            for (int ch = 0; ch < 3; ++ch) EXPECT_NEAR(w.shifted.data[p * 3 + ch], 0.37, 1e-15);
}

TEST(ConsistencyLoss, PlaneOracleBothDirections) {
    const PlaneSetup s;
    for (double d_cam : {-0.4, -0.1, 0.1, 0.4}) {
        const ConsistencyResult r = consistency_loss(s.left, s.right_for(d_cam), s.depth_map, s.alpha, s.cam, d_cam);
        EXPECT_LT(r.value, 1e-3) << "d_cam " << d_cam;
        EXPECT_GT(r.masked_pixels, 0u);
    }
}

TEST(ConsistencyLoss, DepthPerturbationIsPenalizedAndCorrected) {
    const PlaneSetup s;
    const double d_cam = 0.4;
    const Image right = s.right_for(d_cam);
    const ConsistencyResult exact = consistency_loss(s.left, right, s.depth_map, s.alpha, s.cam, d_cam);
    Image wrong = s.depth_map;
    for (double& v : wrong.data) v *= 1.1;
    const ConsistencyResult off = consistency_loss(s.left, right, wrong, s.alpha, s.cam, d_cam);
    EXPECT_GT(off.value, exact.value);
    // Depth is too large everywhere, so a descent step must lower it: the adjoint should be positive.
    const WarpResult warp = warp_right_to_left(right, compute_disparity(wrong, s.cam.fx, d_cam, s.alpha, 0.5));
    std::size_t masked = 0, restoring = 0;
    for (std::size_t p = 0; p < warp.mask.size(); ++p) {
        if (!warp.mask[p]) continue;
        ++masked;
        if (off.d_depth_left.data[p] > 0.0) ++restoring;
    }
    ASSERT_GT(masked, 0u);
    EXPECT_GE(static_cast<double>(restoring), 0.95 * static_cast<double>(masked));
}

TEST(ConsistencyLoss, ConstantImagesGiveZero) {
    Rng rng(4);
    const Image c(10, 8, 3, 0.6);
    const Image depth = random_image(10, 8, 1, rng, 1, 3);
    const ConsistencyResult r = consistency_loss(c, c, depth, Image(10, 8, 1, 1.0), simple_camera(10, 8, 20), 0.3);
    EXPECT_EQ(r.value, 0.0);
}

TEST(ConsistencyLoss, ZeroShiftEqualsMaskedL1) {
    Rng rng(5);
    const Image gt = random_image(12, 10, 3, rng, 0, 1);
    const Image rendered = random_image(12, 10, 3, rng, 0, 1);
    const Image depth = random_image(12, 10, 1, rng, 1, 3);
    const ConsistencyResult r =
        consistency_loss(gt, rendered, depth, Image(12, 10, 1, 1.0), simple_camera(12, 10, 20), 0.0);
    EXPECT_NEAR(r.value, l1_loss(rendered, gt).value, 1e-12);
}

TEST(ConsistencyLoss, EmptyMaskGivesZero) {
    Rng rng(6);
    const Image gt = random_image(8, 8, 3, rng, 0, 1);
    const ConsistencyResult r =
        consistency_loss(gt, gt, Image(8, 8, 1, 2.0), Image(8, 8, 1, 0.1), simple_camera(8, 8, 10), 0.3);
    EXPECT_EQ(r.value, 0.0);
    EXPECT_EQ(r.masked_pixels, 0u);
    for (double v : r.d_right.data) EXPECT_EQ(v, 0.0);
    for (double v : r.d_depth_left.data) EXPECT_EQ(v, 0.0);
}

TEST(ConsistencyLoss, MaskedColumnsDoNotMatter) {
    // Disparity of +4 px: left columns 0..3 sample outside the image, and right columns >= W-4 are never read.
    const int W = 16, H = 6;
    Rng rng(7);
    const Image gt = random_image(W, H, 3, rng, 0, 1);
    Image right = random_image(W, H, 3, rng, 0, 1);
    const Image depth(W, H, 1, 2.0), alpha(W, H, 1, 1.0);
    const CameraModel cam = simple_camera(W, H, 40);
    const double d_cam = 0.2;
    const double base = consistency_loss(gt, right, depth, alpha, cam, d_cam).value;
    for (int r = 0; r < H; ++r)
        for (int c = W - 4; c < W; ++c)
            for (int ch = 0; ch < 3; ++ch) right.at(r, c, ch) = 100.0;
    EXPECT_EQ(consistency_loss(gt, right, depth, alpha, cam, d_cam).value, base);
}

TEST(ConsistencyLoss, AdjointsMatchFiniteDifferences) {
    for (int seed = 0; seed < 5; ++seed) {
        Rng rng(100 + seed);
        const Image gt = random_image(16, 16, 3, rng, 0, 1);
        const Image right = random_image(16, 16, 3, rng, 0, 1);
        const Image depth = random_image(16, 16, 1, rng, 1.5, 3.0);
        Image alpha = random_image(16, 16, 1, rng, 0, 1);
        const CameraModel cam = simple_camera(16, 16, 20);
        const double d_cam = seed % 2 ? 0.23 : -0.31;
        const ConsistencyResult base = consistency_loss(gt, right, depth, alpha, cam, d_cam);
        const double h = 1e-6;
        auto check = [&](const Image& analytic, bool perturb_right) {
            std::size_t checked = 0;
            const Image& x = perturb_right ? right : depth;
            for (std::size_t i = 0; i < x.size(); ++i) {
                Image p = x, m = x;
                p.data[i] += h;
                m.data[i] -= h;
                const ConsistencyResult rp = perturb_right ? consistency_loss(gt, p, depth, alpha, cam, d_cam)
                                                           : consistency_loss(gt, right, p, alpha, cam, d_cam);
                const ConsistencyResult rm = perturb_right ? consistency_loss(gt, m, depth, alpha, cam, d_cam)
                                                           : consistency_loss(gt, right, m, alpha, cam, d_cam);
                if (rp.branch_signature != base.branch_signature || rm.branch_signature != base.branch_signature)
                    continue;
                ++checked;
                const double fd = (rp.value - rm.value) / (2 * h);
                const double an = analytic.data[i];
                const double diff = std::abs(fd - an);
                if (diff <= 1e-6) continue;
                EXPECT_LE(diff / std::max(std::abs(fd), std::abs(an)), 1e-3)
                    << (perturb_right ? "right " : "depth ") << i << " fd " << fd << " an " << an;
            }
            EXPECT_GT(checked, x.size() / 2);
        };
        check(base.d_right, true);
        check(base.d_depth_left, false);
    }
}

TEST(SampleShift, BoundsAndMean) {
    Rng rng(42);
    double sum = 0.0;
    for (int i = 0; i < 100000; ++i) {
        const double s = sample_shift(rng, 0.4);
        ASSERT_GE(s, -0.4);
        ASSERT_LE(s, 0.4);
        sum += s;
    }
    EXPECT_LT(std::abs(sum / 100000), 0.01);
    for (int i = 0; i < 1000; ++i) EXPECT_LE(std::abs(sample_shift(rng, 0.1)), 0.1);
}

TEST(SampleShift, Reproducible) {
    Rng a(9), b(9);
    for (int i = 0; i < 100; ++i) EXPECT_EQ(sample_shift(a, 0.4), sample_shift(b, 0.4));
    EXPECT_THROW(sample_shift(a, 0.0), std::invalid_argument);
}

}  // namespace
}  // namespace binosplat
