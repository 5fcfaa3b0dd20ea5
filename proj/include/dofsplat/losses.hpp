// Copyright Contributors to the dofsplat project
// SPDX-License-Identifier: Apache-2.0
//
// Training objectives and schedules. Every loss returns its value together with
// the adjoints of its image arguments.
#pragma once

#include "dofsplat/image.hpp"

#include <array>
#include <cstddef>

namespace dofsplat {

inline constexpr int kSsimWindow = 11;
inline constexpr double kSsimSigma = 1.5;
inline constexpr double kSsimC1 = 0.01 * 0.01;
inline constexpr double kSsimC2 = 0.03 * 0.03;

struct LossBreakdown {
    double l1 = 0.0;
    double dssim = 0.0;
    double visibility = 0.0;
    double total = 0.0;
    double vis_weight_used = 0.0;
    std::size_t masked_pixel_count = 0;
};

struct SsimResult {
    double value = 0.0;
    Image d_a; // ∂ssim/∂a; empty unless requested
};

/// Mean SSIM over pixels and channels: 11×11 Gaussian window (σ = 1.5) with zero
/// padding outside the image, dynamic range 1.
SsimResult ssim(const Image &a, const Image &b, bool with_gradient = false);

struct PhotometricLoss {
    double l1 = 0.0;
    double dssim = 0.0; // (1 − SSIM) / 2
    Image d_l1;         // ∂l1/∂rendered
    Image d_dssim;      // ∂dssim/∂rendered
};

PhotometricLoss photometric_loss(const Image &rendered, const Image &target);

struct VisibilityLoss {
    double value = 0.0;
    std::size_t masked = 0;
    Image d_rendered_depth;
    Image d_per_view_depth;
    Image d_alpha; // non-zero only when depth had to be block-downsampled
};

/// Mean of (D̂ − D)² over pixels with alpha ≥ threshold; 0 when no pixel qualifies.
/// All three maps must share one shape.
VisibilityLoss visibility_loss(const Image &rendered_depth, const Image &per_view_depth, const Image &alpha,
                               double alpha_threshold = 0.5);

/// Visibility loss when the render and the per-view depth map differ in resolution.
/// Renders that are an integer multiple of the map are block-downsampled first
/// (alpha-weighted); other ratios compare each rendered pixel with the nearest map cell.
VisibilityLoss visibility_loss_resampled(const Image &rendered_depth, const Image &alpha,
                                         const Image &per_view_depth, double alpha_threshold = 0.5);

struct DownsampledDepth {
    Image depth;
    Image alpha;
};

/// Alpha-weighted k×k block mean of depth (0 for blocks without coverage) and the block mean of alpha.
DownsampledDepth depth_downsample(const Image &depth, const Image &alpha, int factor);

struct DownsampleAdjoint {
    Image d_depth;
    Image d_alpha;
};

DownsampleAdjoint depth_downsample_backward(const Image &depth, const Image &alpha, int factor,
                                            const Image &d_out_depth, const Image &d_out_alpha);

/// λ0·(1 − t/T); requires 0 ≤ t ≤ T and T ≥ 1.
double vis_weight(long iteration, long total, double lambda0);

/// min(3, ⌊t / step⌋).
int sh_degree_at(long iteration, long step = 100);

/// Before `stage_iters`, the longer side is min(stage_long_side, native long side),
/// aspect preserved and rounded to the nearest integer ≥ 1; native afterwards.
std::array<int, 2> render_resolution_at(long iteration, int native_width, int native_height, long stage_iters = 2000,
                                        int stage_long_side = 512);

} // namespace dofsplat
