// Copyright Contributors to the binosplat project
// SPDX-License-Identifier: Apache-2.0

#include "binosplat/image.hpp"

#include <algorithm>
#include <cmath>

namespace binosplat {

Image quantize_8bit(const Image& img) {
    Image out = img;
    for (double& v : out.data) v = std::round(std::clamp(v, 0.0, 1.0) * 255.0) / 255.0;
    return out;
}

Image quantize_float(const Image& img) {
    Image out = img;
    for (double& v : out.data) v = static_cast<double>(static_cast<float>(v));
    return out;
}

}  // namespace binosplat
