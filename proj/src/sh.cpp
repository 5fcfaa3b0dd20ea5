// Copyright Contributors to the dofsplat project
// SPDX-License-Identifier: Apache-2.0
//
#include "dofsplat/sh.hpp"

#include "dofsplat/error.hpp"

#include <cmath>

namespace dofsplat {

namespace {

constexpr double kC1 = 0.4886025119029199;
constexpr double kC2[] = {1.0925484305920792, -1.0925484305920792, 0.31539156525252005, -1.0925484305920792,
                          0.5462742152960396};
constexpr double kC3[] = {-0.5900435899266435, 2.890611442640554, -0.4570457994644658, 0.3731763325901154,
                          -0.4570457994644658, 1.445305721320277,  -0.5900435899266435};

void
check_inputs(const Eigen::Vector3d &dir, int active_degree) {
    if (active_degree < 0 || active_degree > kMaxShDegree) {
        throw DomainError("sh_eval: active degree must be in 0..3");
    }
    if (!dir.allFinite() || std::abs(dir.norm() - 1.0) > 1e-6) {
        throw DomainError("sh_eval: direction must be a unit vector");
    }
}

Eigen::Vector3d
raw_color(std::span<const double, kShCoeffs> coeffs, const ShBasis &basis, int active_degree) {
    Eigen::Vector3d rgb = Eigen::Vector3d::Constant(0.5);
    const int n = sh_bases_for_degree(active_degree);
    for (int k = 0; k < n; ++k) {
        for (int c = 0; c < 3; ++c) {
            rgb[c] += basis.value[k] * coeffs[k * 3 + c];
        }
    }
    return rgb;
}

} // namespace

ShBasis
sh_basis(const Eigen::Vector3d &dir, int active_degree) {
    ShBasis b;
    for (auto &g : b.grad) {
        g.setZero();
    }
    b.value[0] = kShC0;
    if (active_degree < 1) {
        return b;
    }
    const double x = dir.x(), y = dir.y(), z = dir.z();
    b.value[1] = -kC1 * y;
    b.value[2] = kC1 * z;
    b.value[3] = -kC1 * x;
    b.grad[1] = {0.0, -kC1, 0.0};
    b.grad[2] = {0.0, 0.0, kC1};
    b.grad[3] = {-kC1, 0.0, 0.0};
    if (active_degree < 2) {
        return b;
    }
    const double xx = x * x, yy = y * y, zz = z * z;
    const double xy = x * y, yz = y * z, xz = x * z;
    b.value[4] = kC2[0] * xy;
    b.value[5] = kC2[1] * yz;
    b.value[6] = kC2[2] * (2.0 * zz - xx - yy);
    b.value[7] = kC2[3] * xz;
    b.value[8] = kC2[4] * (xx - yy);
    b.grad[4] = {kC2[0] * y, kC2[0] * x, 0.0};
    b.grad[5] = {0.0, kC2[1] * z, kC2[1] * y};
    b.grad[6] = {-2.0 * kC2[2] * x, -2.0 * kC2[2] * y, 4.0 * kC2[2] * z};
    b.grad[7] = {kC2[3] * z, 0.0, kC2[3] * x};
    b.grad[8] = {2.0 * kC2[4] * x, -2.0 * kC2[4] * y, 0.0};
    if (active_degree < 3) {
        return b;
    }
    b.value[9] = kC3[0] * y * (3.0 * xx - yy);
    b.value[10] = kC3[1] * xy * z;
    b.value[11] = kC3[2] * y * (4.0 * zz - xx - yy);
    b.value[12] = kC3[3] * z * (2.0 * zz - 3.0 * xx - 3.0 * yy);
    b.value[13] = kC3[4] * x * (4.0 * zz - xx - yy);
    b.value[14] = kC3[5] * z * (xx - yy);
    b.value[15] = kC3[6] * x * (xx - 3.0 * yy);
    b.grad[9] = {6.0 * kC3[0] * xy, kC3[0] * (3.0 * xx - 3.0 * yy), 0.0};
    b.grad[10] = {kC3[1] * yz, kC3[1] * xz, kC3[1] * xy};
    b.grad[11] = {-2.0 * kC3[2] * xy, kC3[2] * (4.0 * zz - xx - 3.0 * yy), 8.0 * kC3[2] * yz};
    b.grad[12] = {-6.0 * kC3[3] * xz, -6.0 * kC3[3] * yz, kC3[3] * (6.0 * zz - 3.0 * xx - 3.0 * yy)};
    b.grad[13] = {kC3[4] * (4.0 * zz - 3.0 * xx - yy), -2.0 * kC3[4] * xy, 8.0 * kC3[4] * xz};
    b.grad[14] = {2.0 * kC3[5] * xz, -2.0 * kC3[5] * yz, kC3[5] * (xx - yy)};
    b.grad[15] = {kC3[6] * (3.0 * xx - 3.0 * yy), -6.0 * kC3[6] * xy, 0.0};
    return b;
}

Eigen::Vector3d
sh_eval(std::span<const double, kShCoeffs> coeffs, const Eigen::Vector3d &dir, int active_degree) {
    check_inputs(dir, active_degree);
    return raw_color(coeffs, sh_basis(dir, active_degree), active_degree).cwiseMax(0.0);
}

ShGradient
sh_eval_backward(std::span<const double, kShCoeffs> coeffs, const Eigen::Vector3d &dir, int active_degree,
                 const Eigen::Vector3d &d_rgb) {
    check_inputs(dir, active_degree);
    const ShBasis basis = sh_basis(dir, active_degree);
    const Eigen::Vector3d raw = raw_color(coeffs, basis, active_degree);
    Eigen::Vector3d g = d_rgb;
    for (int c = 0; c < 3; ++c) {
        if (raw[c] < 0.0) {
            g[c] = 0.0;
        }
    }
    ShGradient out;
    const int n = sh_bases_for_degree(active_degree);
    for (int k = 0; k < n; ++k) {
        double weight = 0.0;
        for (int c = 0; c < 3; ++c) {
            out.d_coeffs[k * 3 + c] = basis.value[k] * g[c];
            weight += coeffs[k * 3 + c] * g[c];
        }
        out.d_dir += weight * basis.grad[k];
    }
    return out;
}

} // namespace dofsplat
