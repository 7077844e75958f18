// Copyright Contributors to the binosplat project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "binosplat/image.hpp"

#include <limits>

namespace binosplat {

/// A scalar loss and its adjoint with respect to the first (rendered) image.
struct LossValue {
    double value = 0.0;
    Image d_image;
};

inline constexpr double kSsimC1 = 0.01 * 0.01;
inline constexpr double kSsimC2 = 0.03 * 0.03;
inline constexpr int kSsimWindow = 11;
inline constexpr double kSsimSigma = 1.5;

LossValue l1_loss(const Image& rendered, const Image& target);

/// Mean SSIM (11x11 Gaussian window, sigma 1.5, reflect padding), channel averaged.
double ssim(const Image& rendered, const Image& target);

/// (1 - SSIM) / 2 with its analytic adjoint.
LossValue d_ssim(const Image& rendered, const Image& target);

/// (1 - beta) L1 + beta D-SSIM.
LossValue color_loss(const Image& rendered, const Image& target, double beta);

/// Returned by psnr() for identical images.
inline constexpr double kPsnrIdentical = std::numeric_limits<double>::infinity();

double psnr(const Image& rendered, const Image& target);

}  // namespace binosplat
