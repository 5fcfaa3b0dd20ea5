// Copyright Contributors to the dofsplat project
// SPDX-License-Identifier: Apache-2.0
//
#include "dofsplat/metrics.hpp"

#include "dofsplat/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace dofsplat {

double
pearson(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) {
        throw ContractError("pearson: length mismatch");
    }
    if (a.size() < 2) {
        throw ContractError("pearson: need at least two values");
    }
    const double n = static_cast<double>(a.size());
    double ma = 0.0, mb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        ma += a[i];
        mb += b[i];
    }
    ma /= n;
    mb /= n;
    double cov = 0.0, va = 0.0, vb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double da = a[i] - ma;
        const double db = b[i] - mb;
        cov += da * db;
        va += da * da;
        vb += db * db;
    }
    if (va / n < 1e-18 || vb / n < 1e-18) {
        return 0.0;
    }
    return std::clamp(cov / std::sqrt(va * vb), -1.0, 1.0);
}

PdcResult
pdc(const Image &pred_depth, const Image &ref_depth, int patch) {
    if (!pred_depth.same_shape(ref_depth) || pred_depth.channels != 1) {
        throw ContractError("pdc: depth maps must be single-channel with matching shapes");
    }
    if (patch < 2) {
        throw ContractError("pdc: patch size must be at least 2");
    }
    if (pred_depth.width < patch || pred_depth.height < patch) {
        throw ContractError("pdc: image " + std::to_string(pred_depth.width) + "x" +
                            std::to_string(pred_depth.height) + " is smaller than one " + std::to_string(patch) +
                            "-pixel patch");
    }
    const auto finite = [](const Image &im) {
        return std::all_of(im.data.begin(), im.data.end(), [](double v) { return std::isfinite(v); });
    };
    if (!finite(pred_depth) || !finite(ref_depth)) {
        throw ContractError("pdc: depth maps must be finite");
    }
    PdcResult out;
    out.patch_size = patch;
    out.patches_x = pred_depth.width / patch;
    out.patches_y = pred_depth.height / patch;
    out.per_patch.reserve(static_cast<std::size_t>(out.patches_x) * out.patches_y);
    std::vector<double> a, b;
    a.reserve(static_cast<std::size_t>(patch) * patch);
    b.reserve(a.capacity());
    double sum = 0.0;
    for (int py = 0; py < out.patches_y; ++py) {
        for (int px = 0; px < out.patches_x; ++px) {
            a.clear();
            b.clear();
            for (int y = py * patch; y < (py + 1) * patch; ++y) {
                for (int x = px * patch; x < (px + 1) * patch; ++x) {
                    a.push_back(pred_depth.at(x, y));
                    b.push_back(ref_depth.at(x, y));
                }
            }
            const double r = pearson(a, b);
            out.per_patch.push_back(r);
            sum += r;
        }
    }
    out.mean = sum / static_cast<double>(out.per_patch.size());
    out.pixels_evaluated = out.per_patch.size() * static_cast<std::size_t>(patch) * patch;
    return out;
}

Rgb8
pdc_tint(double r) {
    constexpr std::array<double, 3> green = {87.0, 156.0, 44.0};
    constexpr std::array<double, 3> gray = {170.0, 170.0, 170.0};
    constexpr std::array<double, 3> purple = {195.0, 31.0, 125.0};
    r = std::clamp(std::isfinite(r) ? r : 0.0, -1.0, 1.0);
    const auto &end = r >= 0.0 ? green : purple;
    const double t = std::abs(r);
    Rgb8 out{};
    for (int c = 0; c < 3; ++c) {
        out[c] = static_cast<std::uint8_t>(std::round(gray[c] + t * (end[c] - gray[c])));
    }
    return out;
}

Image
pdc_overlay(const PdcResult &grid, const Image &base_depth) {
    const int p = grid.patch_size;
    if (base_depth.channels != 1 || base_depth.width / p != grid.patches_x || base_depth.height / p != grid.patches_y) {
        throw ContractError("pdc_overlay: patch grid does not match the base depth image");
    }
    const int w = grid.patches_x * p, h = grid.patches_y * p;
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            lo = std::min(lo, base_depth.at(x, y));
            hi = std::max(hi, base_depth.at(x, y));
        }
    }
    const double range = hi > lo ? hi - lo : 1.0;
    Image out(w, h, 3);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const double gray = 255.0 * (base_depth.at(x, y) - lo) / range;
            const Rgb8 tint = pdc_tint(grid.at(x / p, y / p));
            for (int c = 0; c < 3; ++c) {
                out.at(x, y, c) = std::round(0.5 * tint[c] + 0.5 * gray) / 255.0;
            }
        }
    }
    return out;
}

double
psnr(const Image &a, const Image &b) {
    if (!a.same_shape(b) || a.data.empty()) {
        throw ContractError("psnr: shape mismatch");
    }
    double mse = 0.0;
    for (std::size_t i = 0; i < a.data.size(); ++i) {
        const double d = a.data[i] - b.data[i];
        mse += d * d;
    }
    mse /= static_cast<double>(a.data.size());
    if (mse < 1e-12) {
        return kPsnrCap;
    }
    return 10.0 * std::log10(1.0 / mse);
}

} // namespace dofsplat
