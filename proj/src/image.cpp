// Copyright Contributors to the dofsplat project
// SPDX-License-Identifier: Apache-2.0
//
#include "dofsplat/image.hpp"

#include "dofsplat/error.hpp"

#include <algorithm>
#include <cmath>

namespace dofsplat {

Image
resize_bilinear(const Image &src, int width, int height) {
    if (width < 1 || height < 1) {
        throw ContractError("resize_bilinear: target size must be positive");
    }
    if (width == src.width && height == src.height) {
        return src;
    }
    Image out(width, height, src.channels);
    const double sx = static_cast<double>(src.width) / width;
    const double sy = static_cast<double>(src.height) / height;
    for (int y = 0; y < height; ++y) {
        const double fy = std::clamp((y + 0.5) * sy - 0.5, 0.0, static_cast<double>(src.height - 1));
        const int y0 = static_cast<int>(std::floor(fy));
        const int y1 = std::min(y0 + 1, src.height - 1);
        const double ty = fy - y0;
        for (int x = 0; x < width; ++x) {
            const double fx = std::clamp((x + 0.5) * sx - 0.5, 0.0, static_cast<double>(src.width - 1));
            const int x0 = static_cast<int>(std::floor(fx));
            const int x1 = std::min(x0 + 1, src.width - 1);
            const double tx = fx - x0;
            for (int c = 0; c < src.channels; ++c) {
                const double top = (1.0 - tx) * src.at(x0, y0, c) + tx * src.at(x1, y0, c);
                const double bottom = (1.0 - tx) * src.at(x0, y1, c) + tx * src.at(x1, y1, c);
                out.at(x, y, c) = (1.0 - ty) * top + ty * bottom;
            }
        }
    }
    return out;
}

} // namespace dofsplat
