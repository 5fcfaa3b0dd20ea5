// Copyright Contributors to the dofsplat project
// SPDX-License-Identifier: Apache-2.0
//
#include "dofsplat/scene.hpp"

#include "dofsplat/error.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace dofsplat {

const char *
param_class_name(ParamClass pc) {
    switch (pc) {
    case ParamClass::LogDepth: return "log_depth";
    case ParamClass::RawOffset: return "raw_offset";
    case ParamClass::LogScale: return "log_scale";
    case ParamClass::Rotation: return "rotation";
    case ParamClass::OpacityLogit: return "opacity_logit";
    case ParamClass::Sh: return "sh_coeffs";
    case ParamClass::FreeMean: return "free_mean";
    }
    return "unknown";
}

int
param_class_width(ParamClass pc) {
    switch (pc) {
    case ParamClass::LogDepth: return 1;
    case ParamClass::RawOffset: return 2;
    case ParamClass::LogScale: return 3;
    case ParamClass::Rotation: return 4;
    case ParamClass::OpacityLogit: return 1;
    case ParamClass::Sh: return kShCoeffs;
    case ParamClass::FreeMean: return 3;
    }
    return 0;
}

std::vector<double> &
ParameterArrays::operator[](ParamClass pc) {
    switch (pc) {
    case ParamClass::LogDepth: return log_depth;
    case ParamClass::RawOffset: return raw_offset;
    case ParamClass::LogScale: return log_scale;
    case ParamClass::Rotation: return rotation;
    case ParamClass::OpacityLogit: return opacity_logit;
    case ParamClass::Sh: return sh_coeffs;
    case ParamClass::FreeMean: return free_mean;
    }
    throw ContractError("unknown parameter class");
}

const std::vector<double> &
ParameterArrays::operator[](ParamClass pc) const {
    return const_cast<ParameterArrays &>(*this)[pc];
}

void
ViewParameters::validate() const {
    if (grid_width < 1 || grid_height < 1 || stride < 1) {
        throw ContractError("view parameters: grid dimensions and stride must be positive");
    }
    const std::size_t n = count();
    for (ParamClass pc : kAllParamClasses) {
        const std::size_t expected = n * param_class_width(pc);
        const std::size_t got = (*this)[pc].size();
        if (pc == ParamClass::FreeMean && got == 0) {
            continue;
        }
        if (got != expected) {
            throw ContractError(std::string("view parameters: ") + param_class_name(pc) + " has " +
                                std::to_string(got) + " values, expected " + std::to_string(expected));
        }
    }
}

GradientBuffers
GradientBuffers::zeros_like(const ViewParameters &vp) {
    GradientBuffers g;
    for (ParamClass pc : kAllParamClasses) {
        g[pc].assign(vp[pc].size(), 0.0);
    }
    return g;
}

bool
GradientBuffers::all_finite() const {
    for (ParamClass pc : kAllParamClasses) {
        for (double v : (*this)[pc]) {
            if (!std::isfinite(v)) {
                return false;
            }
        }
    }
    return true;
}

std::size_t
Scene::gaussian_count() const {
    std::size_t n = 0;
    for (const auto &v : views) {
        n += v.params.count();
    }
    return n;
}

namespace {

// tanh rounds to ±1 for large arguments, and a point a few ulps inside the pixel
// border can leave it after unprojection and reprojection. Offsets therefore stop
// a hair short of the bound; below |o| ≈ 10.7 the clamp is inactive.
constexpr double kOffsetLimit = kMaxOffset - kOffsetMargin;

double
offset_1d(double o) {
    return std::clamp(kMaxOffset * std::tanh(o), -kOffsetLimit, kOffsetLimit);
}

double
offset_derivative_1d(double o) {
    const double t = std::tanh(o);
    return std::abs(kMaxOffset * t) >= kOffsetLimit ? 0.0 : kMaxOffset * (1.0 - t * t);
}

} // namespace

Eigen::Vector2d
bounded_offset(const Eigen::Vector2d &raw) {
    return {offset_1d(raw.x()), offset_1d(raw.y())};
}

Eigen::Vector2d
bounded_offset_derivative(const Eigen::Vector2d &raw) {
    return {offset_derivative_1d(raw.x()), offset_derivative_1d(raw.y())};
}

double
sigmoid(double x) {
    if (x >= 0.0) {
        return 1.0 / (1.0 + std::exp(-x));
    }
    const double e = std::exp(x);
    return e / (1.0 + e);
}

double
logit(double p) {
    return std::log(p / (1.0 - p));
}

Eigen::Matrix3d
quaternion_to_rotation(const Eigen::Vector4d &q) {
    const double w = q[0], x = q[1], y = q[2], z = q[3];
    Eigen::Matrix3d r;
    r << 1.0 - 2.0 * (y * y + z * z), 2.0 * (x * y - w * z), 2.0 * (x * z + w * y),
        2.0 * (x * y + w * z), 1.0 - 2.0 * (x * x + z * z), 2.0 * (y * z - w * x),
        2.0 * (x * z - w * y), 2.0 * (y * z + w * x), 1.0 - 2.0 * (x * x + y * y);
    return r;
}

std::array<int, 2>
grid_dims(const Camera &cam, int stride) {
    if (stride < 1) {
        throw ContractError("stride must be positive");
    }
    return {(cam.width + stride - 1) / stride, (cam.height + stride - 1) / stride};
}

ViewParameters
initialize_view(const Camera &cam, const Image &color, const Image &depth, int stride) {
    cam.validate();
    if (color.width != cam.width || color.height != cam.height || color.channels != 3) {
        throw ContractError("initialize_view: color image must be RGB at camera resolution");
    }
    if (depth.width != cam.width || depth.height != cam.height || depth.channels != 1) {
        throw ContractError("initialize_view: depth map must be single-channel at camera resolution");
    }
    const auto [gw, gh] = grid_dims(cam, stride);
    ViewParameters vp;
    vp.grid_width = gw;
    vp.grid_height = gh;
    vp.stride = stride;
    const std::size_t n = vp.count();
    vp.log_depth.resize(n);
    vp.raw_offset.assign(2 * n, 0.0);
    vp.log_scale.resize(3 * n);
    vp.rotation.assign(4 * n, 0.0);
    vp.opacity_logit.assign(n, logit(0.1));
    vp.sh_coeffs.assign(n * kShCoeffs, 0.0);

    const double focal = 0.5 * (cam.fx + cam.fy);
    for (std::size_t k = 0; k < n; ++k) {
        const PixelIndex px = vp.pixel_of(k);
        const double d = depth.at(px.i, px.j);
        if (!(d > 0.0) || !std::isfinite(d)) {
            throw ContractError("initialize_view: per-view depth must be positive and finite at pixel (" +
                                std::to_string(px.i) + ", " + std::to_string(px.j) + ")");
        }
        vp.log_depth[k] = std::log(d);
        const double log_s = std::log(0.5 * stride * d / focal);
        for (int a = 0; a < 3; ++a) {
            vp.log_scale[3 * k + a] = log_s;
        }
        vp.rotation[4 * k] = 1.0;
        for (int c = 0; c < 3; ++c) {
            vp.sh_coeffs[k * kShCoeffs + c] = (color.at(px.i, px.j, c) - 0.5) / kShC0;
        }
    }
    return vp;
}

namespace {

Eigen::Vector4d
normalized_quaternion(const double *q) {
    Eigen::Vector4d v(q[0], q[1], q[2], q[3]);
    const double n = v.norm();
    if (n < 1e-12) {
        return {1.0, 0.0, 0.0, 0.0};
    }
    return v / n;
}

} // namespace

std::vector<MaterializedGaussian>
materialize_view(const ViewParameters &vp, const Camera &cam, int view_index) {
    vp.validate();
    const std::size_t n = vp.count();
    std::vector<MaterializedGaussian> out(n);
    const bool free = vp.free_position();
    for (std::size_t k = 0; k < n; ++k) {
        MaterializedGaussian &g = out[k];
        const PixelIndex px = vp.pixel_of(k);
        if (free) {
            g.mean = {vp.free_mean[3 * k], vp.free_mean[3 * k + 1], vp.free_mean[3 * k + 2]};
        } else {
            const Eigen::Vector2d delta = bounded_offset({vp.raw_offset[2 * k], vp.raw_offset[2 * k + 1]});
            const PixelCoord c = pixel_center(px);
            g.mean = unproject({c.u + delta.x(), c.v + delta.y()}, std::exp(vp.log_depth[k]), cam);
        }
        g.scale = {std::exp(vp.log_scale[3 * k]), std::exp(vp.log_scale[3 * k + 1]), std::exp(vp.log_scale[3 * k + 2])};
        g.rotation = normalized_quaternion(&vp.rotation[4 * k]);
        g.opacity = sigmoid(vp.opacity_logit[k]);
        std::copy_n(vp.sh_coeffs.begin() + static_cast<std::ptrdiff_t>(k * kShCoeffs), kShCoeffs, g.sh.begin());
        g.source = {view_index, px, k};
    }
    return out;
}

std::vector<MaterializedGaussian>
materialize_scene(const Scene &scene) {
    if (scene.views.empty()) {
        throw ContractError("materialize_scene: scene has no views");
    }
    std::vector<MaterializedGaussian> out;
    out.reserve(scene.gaussian_count());
    for (std::size_t v = 0; v < scene.views.size(); ++v) {
        auto part = materialize_view(scene.views[v].params, scene.views[v].camera, static_cast<int>(v));
        out.insert(out.end(), part.begin(), part.end());
    }
    return out;
}

Image
gaussian_depth_map(const ViewParameters &vp, const Camera &cam) {
    vp.validate();
    Image depth(vp.grid_width, vp.grid_height, 1);
    if (!vp.free_position()) {
        for (std::size_t k = 0; k < vp.count(); ++k) {
            depth.data[k] = std::exp(vp.log_depth[k]);
        }
        return depth;
    }
    for (std::size_t k = 0; k < vp.count(); ++k) {
        const Eigen::Vector3d x(vp.free_mean[3 * k], vp.free_mean[3 * k + 1], vp.free_mean[3 * k + 2]);
        depth.data[k] = cam.to_camera(x).z();
    }
    return depth;
}

GradientBuffers
backprop_view(const ViewParameters &vp, const Camera &cam, std::span<const GaussianAdjoint> adjoints) {
    vp.validate();
    if (adjoints.size() != vp.count()) {
        throw ContractError("backprop_view: adjoint count does not match the view");
    }
    GradientBuffers g = GradientBuffers::zeros_like(vp);
    const bool free = vp.free_position();
    const Eigen::Matrix3d rot_t = cam.cam_to_world.rotation.transpose();
    for (std::size_t k = 0; k < vp.count(); ++k) {
        const GaussianAdjoint &a = adjoints[k];

        for (int i = 0; i < 3; ++i) {
            g.log_scale[3 * k + i] = a.d_scale[i] * std::exp(vp.log_scale[3 * k + i]);
        }

        const Eigen::Vector4d q(vp.rotation[4 * k], vp.rotation[4 * k + 1], vp.rotation[4 * k + 2], vp.rotation[4 * k + 3]);
        const double qn = q.norm();
        if (qn >= 1e-12) {
            const Eigen::Vector4d qh = q / qn;
            const Eigen::Vector4d dq = (a.d_rotation - qh * qh.dot(a.d_rotation)) / qn;
            for (int i = 0; i < 4; ++i) {
                g.rotation[4 * k + i] = dq[i];
            }
        }

        const double op = sigmoid(vp.opacity_logit[k]);
        g.opacity_logit[k] = a.d_opacity * op * (1.0 - op);

        std::copy(a.d_sh.begin(), a.d_sh.end(), g.sh_coeffs.begin() + static_cast<std::ptrdiff_t>(k * kShCoeffs));

        if (free) {
            for (int i = 0; i < 3; ++i) {
                g.free_mean[3 * k + i] = a.d_mean[i];
            }
            continue;
        }
        const Eigen::Vector2d raw(vp.raw_offset[2 * k], vp.raw_offset[2 * k + 1]);
        const Eigen::Vector2d delta = bounded_offset(raw);
        const Eigen::Vector2d ddelta = bounded_offset_derivative(raw);
        const PixelCoord c = pixel_center(vp.pixel_of(k));
        const double u = c.u + delta.x();
        const double v = c.v + delta.y();
        const double d = std::exp(vp.log_depth[k]);
        const Eigen::Vector3d d_cam = rot_t * a.d_mean;
        const double d_depth = d_cam.x() * (u - cam.cx) / cam.fx + d_cam.y() * (v - cam.cy) / cam.fy + d_cam.z();
        g.log_depth[k] = d_depth * d;
        g.raw_offset[2 * k] = d_cam.x() * d / cam.fx * ddelta.x();
        g.raw_offset[2 * k + 1] = d_cam.y() * d / cam.fy * ddelta.y();
    }
    return g;
}

} // namespace dofsplat
