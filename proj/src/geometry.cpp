// Copyright Contributors to the dofsplat project
// SPDX-License-Identifier: Apache-2.0
//
#include "dofsplat/geometry.hpp"

#include "dofsplat/error.hpp"

#include <cmath>
#include <string>

namespace dofsplat {

Pose
Pose::inverse() const {
    Pose inv;
    inv.rotation = rotation.transpose();
    inv.translation = -(inv.rotation * translation);
    return inv;
}

Pose
Pose::compose(const Pose &other) const {
    Pose out;
    out.rotation = rotation * other.rotation;
    out.translation = rotation * other.translation + translation;
    return out;
}

Eigen::Matrix4d
Pose::matrix() const {
    Eigen::Matrix4d m = Eigen::Matrix4d::Identity();
    m.topLeftCorner<3, 3>() = rotation;
    m.topRightCorner<3, 1>() = translation;
    return m;
}

Pose
Pose::from_matrix(const Eigen::Matrix4d &m) {
    Pose p;
    p.rotation = m.topLeftCorner<3, 3>();
    p.translation = m.topRightCorner<3, 1>();
    return p;
}

bool
Pose::is_rigid(double tol) const {
    if (!rotation.allFinite() || !translation.allFinite()) {
        return false;
    }
    const double orth = (rotation.transpose() * rotation - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff();
    return orth <= tol && rotation.determinant() > 0.0;
}

void
Camera::validate() const {
    if (!(fx > 0.0) || !(fy > 0.0) || !std::isfinite(fx) || !std::isfinite(fy)) {
        throw ContractError("camera focal lengths must be positive and finite");
    }
    if (!std::isfinite(cx) || !std::isfinite(cy)) {
        throw ContractError("camera principal point must be finite");
    }
    if (width < 1 || height < 1) {
        throw ContractError("camera dimensions must be at least 1x1, got " + std::to_string(width) + "x" +
                            std::to_string(height));
    }
    if (!cam_to_world.is_rigid(1e-9)) {
        throw ContractError("camera rotation is not orthonormal with determinant +1");
    }
}

WorldPoint
unproject(PixelCoord p, double depth, const Camera &cam) {
    if (!(depth > 0.0)) {
        throw DomainError("unproject: depth must be positive");
    }
    if (!std::isfinite(p.u) || !std::isfinite(p.v)) {
        throw DomainError("unproject: pixel coordinate must be finite");
    }
    const Eigen::Vector3d xc((p.u - cam.cx) / cam.fx * depth, (p.v - cam.cy) / cam.fy * depth, depth);
    return cam.cam_to_world.apply(xc);
}

Projection
project(const WorldPoint &x, const Camera &cam, double min_depth) {
    const Eigen::Vector3d xc = cam.to_camera(x);
    if (!(xc.z() > min_depth)) {
        throw BehindCameraError("project: point is behind the camera");
    }
    return {{cam.fx * xc.x() / xc.z() + cam.cx, cam.fy * xc.y() / xc.z() + cam.cy}, xc.z()};
}

bool
frustum_contains(PixelIndex px, const WorldPoint &x, const Camera &cam) {
    const Eigen::Vector3d xc = cam.to_camera(x);
    if (!(xc.z() > kMinCameraDepth)) {
        return false;
    }
    const double u = cam.fx * xc.x() / xc.z() + cam.cx;
    const double v = cam.fy * xc.y() / xc.z() + cam.cy;
    return u >= px.i && u < px.i + 1 && v >= px.j && v < px.j + 1;
}

Camera
rescaled(const Camera &cam, int width, int height) {
    if (width < 1 || height < 1) {
        throw ContractError("rescaled: target dimensions must be positive");
    }
    Camera out = cam;
    const double sx = static_cast<double>(width) / cam.width;
    const double sy = static_cast<double>(height) / cam.height;
    out.fx *= sx;
    out.cx *= sx;
    out.fy *= sy;
    out.cy *= sy;
    out.width = width;
    out.height = height;
    return out;
}

Eigen::Matrix3d
skew(const Eigen::Vector3d &w) {
    Eigen::Matrix3d s;
    s << 0.0, -w.z(), w.y(), w.z(), 0.0, -w.x(), -w.y(), w.x(), 0.0;
    return s;
}

Eigen::Matrix3d
so3_exp(const Eigen::Vector3d &w) {
    const double theta = w.norm();
    const Eigen::Matrix3d k = skew(w);
    if (theta < 1e-8) {
        return Eigen::Matrix3d::Identity() + k + 0.5 * k * k;
    }
    return Eigen::Matrix3d::Identity() + std::sin(theta) / theta * k +
           (1.0 - std::cos(theta)) / (theta * theta) * k * k;
}

Eigen::Vector3d
so3_log(const Eigen::Matrix3d &r) {
    const Eigen::AngleAxisd aa(r);
    return aa.angle() * aa.axis();
}

Eigen::Matrix3d
so3_right_jacobian(const Eigen::Vector3d &w) {
    const double theta = w.norm();
    const Eigen::Matrix3d k = skew(w);
    if (theta < 1e-5) {
        return Eigen::Matrix3d::Identity() - 0.5 * k + k * k / 6.0;
    }
    const double t2 = theta * theta;
    return Eigen::Matrix3d::Identity() - (1.0 - std::cos(theta)) / t2 * k + (theta - std::sin(theta)) / (t2 * theta) * k * k;
}

Eigen::Matrix3d
look_at_rotation(const Eigen::Vector3d &eye, const Eigen::Vector3d &target, const Eigen::Vector3d &world_up) {
    const Eigen::Vector3d forward = (target - eye).normalized();
    Eigen::Vector3d right = forward.cross(world_up);
    if (right.norm() < 1e-12) {
        throw ContractError("look_at_rotation: viewing direction is parallel to the up vector");
    }
    right.normalize();
    const Eigen::Vector3d down = forward.cross(right);
    Eigen::Matrix3d r;
    r.col(0) = right;
    r.col(1) = down;
    r.col(2) = forward;
    return r;
}

} // namespace dofsplat
