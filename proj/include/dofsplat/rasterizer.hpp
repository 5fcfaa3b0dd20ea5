// Copyright Contributors to the dofsplat project
// SPDX-License-Identifier: Apache-2.0
//
// Deterministic CPU splatting of 3D Gaussians (perspective EWA projection,
// front-to-back alpha compositing) with an exact reverse-mode pass.
//
// Per pixel, splats whose 3σ box covers the pixel center are visited in order of
// camera depth, ties broken by their index in the input list. Each contributes
// α = min(0.999, opacity·exp(−½ dᵀΣ⁻¹d)) with weight α·T, where T is the
// transmittance before it; compositing stops before the first splat that would
// drive T below 1e-4. The backward pass replays exactly these decisions.
#pragma once

#include "dofsplat/geometry.hpp"
#include "dofsplat/image.hpp"
#include "dofsplat/scene.hpp"

#include <Eigen/Core>

#include <memory>
#include <optional>
#include <span>
#include <vector>

namespace dofsplat {

inline constexpr double kLowPassDilation = 0.3;
inline constexpr double kMaxAlpha = 0.999;
inline constexpr double kMinTransmittance = 1e-4;
inline constexpr double kDepthNormalizerFloor = 1e-10;
inline constexpr double kRadiusSigmas = 3.0;

enum class DepthMode {
    Normalized,  // Σ w·z / max(Σ w, 1e-10)
    Accumulated, // Σ w·z
};

struct RenderOptions {
    int sh_degree = kMaxShDegree;
    DepthMode depth_mode = DepthMode::Normalized;
};

struct SplatProjection {
    PixelCoord mean2d;
    Eigen::Matrix2d cov2d = Eigen::Matrix2d::Identity(); // includes the low-pass dilation
    Eigen::Matrix2d conic = Eigen::Matrix2d::Identity(); // cov2d⁻¹
    double camera_depth = 0.0;
    double radius_px = 0.0;
    Eigen::Vector3d camera_point = Eigen::Vector3d::Zero();
    Eigen::Matrix<double, 2, 3> jacobian = Eigen::Matrix<double, 2, 3>::Zero(); // J·W
    // Inclusive pixel range whose centers lie inside the radius box, clipped to the image.
    int x_min = 0, x_max = -1, y_min = 0, y_max = -1;
};

Eigen::Matrix3d covariance_3d(const MaterializedGaussian &g);

/// 2D covariance without dilation, J·W·Σ·Wᵀ·Jᵀ. Requires camera-space z > 0.
Eigen::Matrix2d screen_covariance(const MaterializedGaussian &g, const Camera &cam);

/// std::nullopt when the splat is culled: camera depth ≤ 1e-8 or its box covers no pixel center.
std::optional<SplatProjection> project_gaussian(const MaterializedGaussian &g, const Camera &cam);

struct RenderOutput {
    Image color; // H×W×3
    Image depth; // H×W
    Image alpha; // H×W
};

/// Renders at the camera's resolution.
RenderOutput render(std::span<const MaterializedGaussian> gaussians, const Camera &cam,
                    const RenderOptions &opts = {});

/// Adjoints of the loss with respect to the render outputs. Empty images count as zero.
struct RenderUpstream {
    Image d_color;
    Image d_depth;
    Image d_alpha;
};

/// Loss gradient with respect to the render camera: center in world coordinates,
/// rotation as a right perturbation R → R·exp([ε]×) of the camera-to-world rotation.
struct CameraGradient {
    Eigen::Vector3d d_center = Eigen::Vector3d::Zero();
    Eigen::Vector3d d_rotation = Eigen::Vector3d::Zero();
};

struct RenderGradients {
    std::vector<GaussianAdjoint> gaussians; // indexed like the input list
    CameraGradient camera;
};

RenderGradients render_backward(std::span<const MaterializedGaussian> gaussians, const Camera &cam,
                                const RenderUpstream &upstream, const RenderOptions &opts = {});

/// Forward state kept for a later backward pass over the same inputs.
struct RenderState;

struct RetainedRender {
    RenderOutput output;
    std::shared_ptr<const RenderState> state;
};

/// Same output as render(); the retained state lets render_backward skip re-projection
/// and re-evaluation of every Gaussian weight.
RetainedRender render_retained(std::span<const MaterializedGaussian> gaussians, const Camera &cam,
                               const RenderOptions &opts = {});

/// `gaussians` must be the list `forward` was rendered from.
RenderGradients render_backward(const RetainedRender &forward, std::span<const MaterializedGaussian> gaussians,
                                const RenderUpstream &upstream);

/// Scene-level backward: materializes the scene, renders through `cam` and chains the
/// adjoints into per-view parameter gradients (one GradientBuffers per view).
std::vector<GradientBuffers> render_backward(const Scene &scene, const Camera &cam, const RenderUpstream &upstream,
                                             const RenderOptions &opts = {});

} // namespace dofsplat
