// Copyright Contributors to the dofsplat project
// SPDX-License-Identifier: Apache-2.0
//
// DoF-separated scene representation. Every Gaussian is tied to one pixel of one
// view: its position is the unprojection of the pixel center shifted by a
// bounded sub-pixel offset, at the view's (log-parameterized) depth. Only the
// ray-aligned depth and the two image-plane offsets are positional parameters.
#pragma once

#include "dofsplat/geometry.hpp"
#include "dofsplat/image.hpp"
#include "dofsplat/sh.hpp"

#include <Eigen/Core>

#include <array>
#include <cstddef>
#include <span>
#include <vector>

namespace dofsplat {

enum class ParamClass { LogDepth, RawOffset, LogScale, Rotation, OpacityLogit, Sh, FreeMean };

inline constexpr std::array<ParamClass, 7> kAllParamClasses = {
    ParamClass::LogDepth,     ParamClass::RawOffset, ParamClass::LogScale, ParamClass::Rotation,
    ParamClass::OpacityLogit, ParamClass::Sh,        ParamClass::FreeMean};

const char *param_class_name(ParamClass pc);

/// Number of scalars per Gaussian for a parameter class.
int param_class_width(ParamClass pc);

/// The per-pixel arrays shared by parameters and their adjoints. `free_mean` is
/// only populated by the free-position baseline and is empty otherwise.
struct ParameterArrays {
    std::vector<double> log_depth;     // n
    std::vector<double> raw_offset;    // n × 2 (u, v)
    std::vector<double> log_scale;     // n × 3
    std::vector<double> rotation;      // n × 4 (w, x, y, z), normalized at use
    std::vector<double> opacity_logit; // n
    std::vector<double> sh_coeffs;     // n × 16 × 3
    std::vector<double> free_mean;     // n × 3 or empty

    std::vector<double> &operator[](ParamClass pc);
    const std::vector<double> &operator[](ParamClass pc) const;

    friend bool operator==(const ParameterArrays &, const ParameterArrays &) = default;
};

struct ViewParameters : ParameterArrays {
    int grid_width = 0;
    int grid_height = 0;
    int stride = 1;

    std::size_t count() const { return static_cast<std::size_t>(grid_width) * grid_height; }
    bool free_position() const { return !free_mean.empty(); }
    /// Image pixel the k-th Gaussian is tied to (row-major over the stride grid).
    PixelIndex pixel_of(std::size_t k) const {
        return {static_cast<int>(k % grid_width) * stride, static_cast<int>(k / grid_width) * stride};
    }
    /// Throws ContractError if array sizes disagree with the grid.
    void validate() const;

    friend bool operator==(const ViewParameters &, const ViewParameters &) = default;
};

struct GradientBuffers : ParameterArrays {
    static GradientBuffers zeros_like(const ViewParameters &vp);
    bool all_finite() const;
};

struct SceneView {
    Camera camera;
    ViewParameters params;
};

struct Scene {
    std::vector<SceneView> views;
    std::size_t gaussian_count() const;
};

struct GaussianSource {
    int view = 0;
    PixelIndex pixel;
    std::size_t index = 0; // position within the view's parameter arrays
};

struct MaterializedGaussian {
    WorldPoint mean = WorldPoint::Zero();
    Eigen::Vector3d scale = Eigen::Vector3d::Ones();
    Eigen::Vector4d rotation = {1.0, 0.0, 0.0, 0.0}; // unit quaternion (w, x, y, z)
    double opacity = 0.5;
    ShCoeffs sh{};
    GaussianSource source;
};

/// Adjoint of the loss with respect to one materialized Gaussian's attributes.
struct GaussianAdjoint {
    Eigen::Vector3d d_mean = Eigen::Vector3d::Zero();
    Eigen::Vector3d d_scale = Eigen::Vector3d::Zero();
    Eigen::Vector4d d_rotation = Eigen::Vector4d::Zero();
    double d_opacity = 0.0;
    ShCoeffs d_sh{};
};

inline constexpr double kMaxOffset = 0.5;
/// Pixels kept between |δ| and the bound, so the strict bound survives rounding.
inline constexpr double kOffsetMargin = 1e-9;

/// δ = 0.5·tanh(o), componentwise, clamped to ±(0.5 − 1e-9); strictly inside (−0.5, 0.5).
Eigen::Vector2d bounded_offset(const Eigen::Vector2d &raw);
/// dδ/do = 0.5·(1 − tanh²(o)), componentwise; 0 where the clamp is active.
Eigen::Vector2d bounded_offset_derivative(const Eigen::Vector2d &raw);

double sigmoid(double x);
double logit(double p);
Eigen::Matrix3d quaternion_to_rotation(const Eigen::Vector4d &unit_q);

/// Stride-grid dimensions (⌈W/stride⌉, ⌈H/stride⌉).
std::array<int, 2> grid_dims(const Camera &cam, int stride);

/// Parameters for one view initialized from its per-view depth map and image:
/// zero offsets, isotropic scale covering ≈ stride/2 pixels, identity rotation,
/// opacity 0.1 and a degree-0 color equal to the pixel color.
ViewParameters initialize_view(const Camera &cam, const Image &color, const Image &depth, int stride = 1);

std::vector<MaterializedGaussian> materialize_view(const ViewParameters &vp, const Camera &cam, int view_index = 0);
/// All views concatenated, view order then row-major. No deduplication.
std::vector<MaterializedGaussian> materialize_scene(const Scene &scene);

/// Source-view camera-space z of every Gaussian, on the view's stride grid.
Image gaussian_depth_map(const ViewParameters &vp, const Camera &cam);

/// Chains per-Gaussian adjoints of one view through unprojection, the bounded
/// offset and the attribute activations. `adjoints` is indexed like the view's arrays.
GradientBuffers backprop_view(const ViewParameters &vp, const Camera &cam, std::span<const GaussianAdjoint> adjoints);

} // namespace dofsplat
