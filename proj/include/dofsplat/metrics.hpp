// Copyright Contributors to the dofsplat project
// SPDX-License-Identifier: Apache-2.0
//
#pragma once

#include "dofsplat/image.hpp"

#include <array>
#include <cstdint>
#include <span>
#include <vector>

namespace dofsplat {

inline constexpr double kPsnrCap = 120.0;
inline constexpr int kDefaultPatchSize = 16;

/// Pearson correlation; 0 when either population variance is below 1e-18.
double pearson(std::span<const double> a, std::span<const double> b);

struct PdcResult {
    double mean = 0.0;
    int patch_size = kDefaultPatchSize;
    int patches_x = 0;
    int patches_y = 0;
    std::vector<double> per_patch; // row-major patches_y × patches_x
    std::size_t pixels_evaluated = 0;

    double at(int px, int py) const { return per_patch[static_cast<std::size_t>(py) * patches_x + px]; }
};

/// Patch-wise depth Pearson correlation over non-overlapping tiles after cropping
/// both maps to a multiple of `patch`. Non-finite inputs are rejected.
PdcResult pdc(const Image &pred_depth, const Image &ref_depth, int patch = kDefaultPatchSize);

using Rgb8 = std::array<std::uint8_t, 3>;

/// Tint for a correlation r: purple at −1, gray at 0, green at +1, linear in between.
Rgb8 pdc_tint(double r);

/// 8-bit RGB image (values in [0,1]) of the min-max normalized depth with each
/// patch's tint blended at 50%.
Image pdc_overlay(const PdcResult &grid, const Image &base_depth);

/// 10·log10(1/MSE); MSE < 1e-12 reports the 120 dB cap.
double psnr(const Image &a, const Image &b);

struct MetricsReport {
    double psnr = 0.0;
    double ssim = 0.0;
    PdcResult pdc;
};

} // namespace dofsplat
