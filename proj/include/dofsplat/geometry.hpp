// Copyright Contributors to the dofsplat project
// SPDX-License-Identifier: Apache-2.0
//
// Pinhole camera model. Camera space is right-handed with +z forward, +x right
// and +y down, so image v grows downward. Integer pixel (i, j) has its center at
// continuous coordinate (i + 0.5, j + 0.5).
#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

namespace dofsplat {

using WorldPoint = Eigen::Vector3d;

struct PixelCoord {
    double u = 0.0;
    double v = 0.0;
};

struct PixelIndex {
    int i = 0; // column
    int j = 0; // row
};

inline PixelCoord pixel_center(PixelIndex px) { return {px.i + 0.5, px.j + 0.5}; }

/// Rigid transform x -> rotation * x + translation.
struct Pose {
    Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();
    Eigen::Vector3d translation = Eigen::Vector3d::Zero();

    Eigen::Vector3d apply(const Eigen::Vector3d &x) const { return rotation * x + translation; }
    Pose inverse() const;
    /// (this * other)(x) == this(other(x))
    Pose compose(const Pose &other) const;
    Eigen::Matrix4d matrix() const;
    static Pose from_matrix(const Eigen::Matrix4d &m);
    /// ‖RᵀR − I‖∞ and det(R) checks.
    bool is_rigid(double tol = 1e-9) const;
};

struct Camera {
    double fx = 1.0;
    double fy = 1.0;
    double cx = 0.0;
    double cy = 0.0;
    int width = 1;
    int height = 1;
    Pose cam_to_world;

    /// Throws ContractError when intrinsics, dimensions or pose are invalid.
    void validate() const;

    Eigen::Vector3d center() const { return cam_to_world.translation; }
    Eigen::Matrix3d world_to_cam_rotation() const { return cam_to_world.rotation.transpose(); }
    Eigen::Vector3d to_camera(const WorldPoint &x) const {
        return cam_to_world.rotation.transpose() * (x - cam_to_world.translation);
    }
    bool contains(PixelCoord p) const { return p.u >= 0.0 && p.u < width && p.v >= 0.0 && p.v < height; }
};

struct Projection {
    PixelCoord pixel;
    double depth = 0.0;
};

inline constexpr double kMinCameraDepth = 1e-8;

/// Camera-space point at z-depth `depth` through image point `p`, mapped to world.
WorldPoint unproject(PixelCoord p, double depth, const Camera &cam);

/// Throws BehindCameraError when the camera-space z is at most `min_depth`.
Projection project(const WorldPoint &x, const Camera &cam, double min_depth = kMinCameraDepth);

/// True iff `x` projects into the unit square of pixel `px` with positive depth,
/// i.e. lies inside the frustum spanned by the rays through the pixel's four corners.
bool frustum_contains(PixelIndex px, const WorldPoint &x, const Camera &cam);

/// Same pose, intrinsics rescaled to a `width` x `height` image.
Camera rescaled(const Camera &cam, int width, int height);

Eigen::Matrix3d skew(const Eigen::Vector3d &w);
/// Rodrigues exponential map.
Eigen::Matrix3d so3_exp(const Eigen::Vector3d &w);
/// Inverse of so3_exp, angle in [0, pi].
Eigen::Vector3d so3_log(const Eigen::Matrix3d &r);
/// Right Jacobian: exp(w + dw) ≈ exp(w) exp(Jr(w) dw).
Eigen::Matrix3d so3_right_jacobian(const Eigen::Vector3d &w);

/// Rotation whose columns are the camera axes for a camera at `eye` looking at `target`.
Eigen::Matrix3d look_at_rotation(const Eigen::Vector3d &eye, const Eigen::Vector3d &target,
                                 const Eigen::Vector3d &world_up);

} // namespace dofsplat
