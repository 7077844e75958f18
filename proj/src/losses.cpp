// Copyright Contributors to the binosplat project
// SPDX-License-Identifier: Apache-2.0

#include "binosplat/losses.hpp"

#include <array>
#include <cmath>
#include <stdexcept>
#include <vector>

namespace binosplat {

namespace {

void require_same_shape(const Image& a, const Image& b, const char* what) {
    if (!a.same_shape(b) || a.size() == 0)
        throw std::invalid_argument(std::string(what) + ": images must be non-empty with identical dimensions");
}

// numpy-style "reflect": -1 -> 1, n -> n-2, repeated for windows wider than the image.
int reflect(int i, int n) {
    if (n == 1) return 0;
    const int period = 2 * (n - 1);
    i %= period;
    if (i < 0) i += period;
    return i < n ? i : period - i;
}

std::array<double, kSsimWindow> gaussian_window() {
    std::array<double, kSsimWindow> w{};
    double sum = 0.0;
    for (int k = 0; k < kSsimWindow; ++k) {
        const double x = k - kSsimWindow / 2;
        w[k] = std::exp(-x * x / (2.0 * kSsimSigma * kSsimSigma));
        sum += w[k];
    }
    for (double& v : w) v /= sum;
    return w;
}

// Separable blur of one channel plane (H x W) with reflect padding.
struct Blur {
    int width;
    int height;
    std::array<double, kSsimWindow> w = gaussian_window();

    std::vector<double> forward(const std::vector<double>& in) const {
        std::vector<double> tmp(in.size(), 0.0), out(in.size(), 0.0);
        const int h = kSsimWindow / 2;
        for (int r = 0; r < height; ++r)
            for (int c = 0; c < width; ++c) {
                double acc = 0.0;
                for (int k = -h; k <= h; ++k) acc += w[k + h] * in[r * width + reflect(c + k, width)];
                tmp[r * width + c] = acc;
            }
        for (int r = 0; r < height; ++r)
            for (int c = 0; c < width; ++c) {
                double acc = 0.0;
                for (int k = -h; k <= h; ++k) acc += w[k + h] * tmp[reflect(r + k, height) * width + c];
                out[r * width + c] = acc;
            }
        return out;
    }

    // Adjoint of forward().
    std::vector<double> transpose(const std::vector<double>& g) const {
        std::vector<double> tmp(g.size(), 0.0), out(g.size(), 0.0);
        const int h = kSsimWindow / 2;
        for (int r = 0; r < height; ++r)
            for (int c = 0; c < width; ++c)
                for (int k = -h; k <= h; ++k) tmp[reflect(r + k, height) * width + c] += w[k + h] * g[r * width + c];
        for (int r = 0; r < height; ++r)
            for (int c = 0; c < width; ++c)
                for (int k = -h; k <= h; ++k) out[r * width + reflect(c + k, width)] += w[k + h] * tmp[r * width + c];
        return out;
    }
};

std::vector<double> plane(const Image& img, int ch) {
    std::vector<double> p(static_cast<std::size_t>(img.width) * img.height);
    for (int r = 0; r < img.height; ++r)
        for (int c = 0; c < img.width; ++c) p[r * img.width + c] = img.at(r, c, ch);
    return p;
}

// Mean SSIM; if grad is non-null it receives d(mean SSIM)/d(x).
double ssim_impl(const Image& x, const Image& y, Image* grad) {
    const Blur blur{x.width, x.height};
    const std::size_t n = static_cast<std::size_t>(x.width) * x.height;
    const double inv_count = 1.0 / static_cast<double>(n * x.channels);
    double total = 0.0;
    if (grad) *grad = Image(x.width, x.height, x.channels);

    for (int ch = 0; ch < x.channels; ++ch) {
        const auto px = plane(x, ch);
        const auto py = plane(y, ch);
        std::vector<double> xx(n), yy(n), xy(n);
        for (std::size_t i = 0; i < n; ++i) {
            xx[i] = px[i] * px[i];
            yy[i] = py[i] * py[i];
            xy[i] = px[i] * py[i];
        }
        const auto mx = blur.forward(px), my = blur.forward(py);
        const auto exx = blur.forward(xx), eyy = blur.forward(yy), exy = blur.forward(xy);

        std::vector<double> g_mx(n), g_exx(n), g_exy(n);
        for (std::size_t i = 0; i < n; ++i) {
            const double sxx = exx[i] - mx[i] * mx[i];
            const double syy = eyy[i] - my[i] * my[i];
            const double sxy = exy[i] - mx[i] * my[i];
            const double a1 = 2.0 * mx[i] * my[i] + kSsimC1;
            const double a2 = 2.0 * sxy + kSsimC2;
            const double b1 = mx[i] * mx[i] + my[i] * my[i] + kSsimC1;
            const double b2 = sxx + syy + kSsimC2;
            const double s = (a1 * a2) / (b1 * b2);
            total += s;
            if (!grad) continue;
            // s as a function of (mx, exx, exy) with my, eyy fixed.
            const double ds_da1 = a2 / (b1 * b2);
            const double ds_da2 = a1 / (b1 * b2);
            const double ds_db1 = -s / b1;
            const double ds_db2 = -s / b2;
            g_mx[i] = inv_count * (ds_da1 * 2.0 * my[i] + ds_da2 * (-2.0 * my[i]) + ds_db1 * 2.0 * mx[i] +
                                   ds_db2 * (-2.0 * mx[i]));
            g_exx[i] = inv_count * ds_db2;
            g_exy[i] = inv_count * ds_da2 * 2.0;
        }
        if (!grad) continue;
        const auto t_mx = blur.transpose(g_mx);
        const auto t_exx = blur.transpose(g_exx);
        const auto t_exy = blur.transpose(g_exy);
        for (int r = 0; r < x.height; ++r)
            for (int c = 0; c < x.width; ++c) {
                const std::size_t i = static_cast<std::size_t>(r) * x.width + c;
                grad->at(r, c, ch) = t_mx[i] + 2.0 * px[i] * t_exx[i] + py[i] * t_exy[i];
            }
    }
    return total * inv_count;
}

}  // namespace

LossValue l1_loss(const Image& rendered, const Image& target) {
    require_same_shape(rendered, target, "l1_loss");
    LossValue out;
    out.d_image = Image(rendered.width, rendered.height, rendered.channels);
    const double inv = 1.0 / static_cast<double>(rendered.size());
    double sum = 0.0;
    for (std::size_t i = 0; i < rendered.size(); ++i) {
        const double d = rendered.data[i] - target.data[i];
        sum += std::abs(d);
        out.d_image.data[i] = d > 0.0 ? inv : (d < 0.0 ? -inv : 0.0);
    }
    out.value = sum * inv;
    return out;
}

double ssim(const Image& rendered, const Image& target) {
    require_same_shape(rendered, target, "ssim");
    return ssim_impl(rendered, target, nullptr);
}

LossValue d_ssim(const Image& rendered, const Image& target) {
    require_same_shape(rendered, target, "d_ssim");
    LossValue out;
    const double s = ssim_impl(rendered, target, &out.d_image);
    out.value = 0.5 * (1.0 - s);
    for (double& g : out.d_image.data) g *= -0.5;
    return out;
}

LossValue color_loss(const Image& rendered, const Image& target, double beta) {
    if (!(beta >= 0.0 && beta <= 1.0)) throw std::invalid_argument("color_loss: beta must lie in [0, 1]");
    if (beta == 0.0) return l1_loss(rendered, target);
    if (beta == 1.0) return d_ssim(rendered, target);
    LossValue l1 = l1_loss(rendered, target);
    const LossValue ds = d_ssim(rendered, target);
    l1.value = (1.0 - beta) * l1.value + beta * ds.value;
    for (std::size_t i = 0; i < l1.d_image.size(); ++i)
        l1.d_image.data[i] = (1.0 - beta) * l1.d_image.data[i] + beta * ds.d_image.data[i];
    return l1;
}

double psnr(const Image& rendered, const Image& target) {
    require_same_shape(rendered, target, "psnr");
    double sum = 0.0;
    for (std::size_t i = 0; i < rendered.size(); ++i) {
        const double d = rendered.data[i] - target.data[i];
        sum += d * d;
    }
    const double mse = sum / static_cast<double>(rendered.size());
    if (mse == 0.0) return kPsnrIdentical;
    return 10.0 * std::log10(1.0 / mse);
}

}  // namespace binosplat
