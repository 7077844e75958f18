// Copyright Contributors to the binosplat project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <vector>

namespace binosplat {

/// Row-major H x W x C image of doubles.
struct Image {
    int width = 0;
    int height = 0;
    int channels = 0;
    std::vector<double> data;

    Image() = default;
    Image(int w, int h, int c, double fill = 0.0)
        : width(w), height(h), channels(c), data(static_cast<std::size_t>(w) * h * c, fill) {}

    std::size_t index(int row, int col, int ch = 0) const {
        return (static_cast<std::size_t>(row) * width + col) * channels + ch;
    }
    double& at(int row, int col, int ch = 0) { return data[index(row, col, ch)]; }
    double at(int row, int col, int ch = 0) const { return data[index(row, col, ch)]; }
    std::size_t size() const { return data.size(); }
    bool same_shape(const Image& other) const {
        return width == other.width && height == other.height && channels == other.channels;
    }
};

/// Rounds every value to the nearest multiple of 1/255 after clamping to [0, 1],
/// i.e. what an 8-bit encode followed by a decode yields.
Image quantize_8bit(const Image& img);

/// Rounds every value through a 32-bit float.
Image quantize_float(const Image& img);

}  // namespace binosplat
