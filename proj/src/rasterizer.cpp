// Copyright Contributors to the dofsplat project
// SPDX-License-Identifier: Apache-2.0
//
#include "dofsplat/rasterizer.hpp"

#include "dofsplat/error.hpp"
#include "dofsplat/sh.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <utility>

namespace dofsplat {

namespace {

struct PreparedSplat {
    std::size_t index = 0;
    SplatProjection proj;
    Eigen::Vector3d color = Eigen::Vector3d::Zero();
    Eigen::Vector3d view_dir = Eigen::Vector3d::UnitZ();
    double view_dist = 1.0;
    double opacity = 0.0;
};

// The fields compositing touches per pixel, packed for cache locality.
struct HotSplat {
    double u, v;
    double ca, cb, cc; // conic entries (0,0), (0,1), (1,1)
    double opacity;
};

struct Prepared {
    std::vector<PreparedSplat> splats; // sorted by (camera depth, index)
    std::vector<HotSplat> hot;         // parallel to `splats`
    // Per-pixel lists (CSR) of the splats whose box contains the pixel center, in splat order.
    std::vector<std::uint32_t> pixel_begin;
    std::vector<std::uint32_t> pixel_splats;
    int width = 0;
};

Prepared
prepare(std::span<const MaterializedGaussian> gaussians, const Camera &cam, const RenderOptions &opts) {
    cam.validate();
    std::vector<PreparedSplat> unsorted;
    unsorted.reserve(gaussians.size());
    const Eigen::Vector3d center = cam.center();
    for (std::size_t i = 0; i < gaussians.size(); ++i) {
        const MaterializedGaussian &g = gaussians[i];
        auto proj = project_gaussian(g, cam);
        if (!proj) {
            continue;
        }
        PreparedSplat s;
        s.index = i;
        s.proj = *proj;
        s.opacity = g.opacity;
        const Eigen::Vector3d v = g.mean - center;
        s.view_dist = v.norm();
        s.view_dir = v / s.view_dist;
        s.color = sh_eval(g.sh, s.view_dir, opts.sh_degree);
        unsorted.push_back(s);
    }
    std::vector<std::pair<double, std::size_t>> keys(unsorted.size());
    for (std::size_t k = 0; k < unsorted.size(); ++k) {
        keys[k] = {unsorted[k].proj.camera_depth, k}; // `k` is increasing in the Gaussian index
    }
    std::sort(keys.begin(), keys.end());

    Prepared p;
    p.width = cam.width;
    p.splats.reserve(keys.size());
    p.hot.reserve(keys.size());
    for (const auto &key : keys) {
        const PreparedSplat &s = unsorted[key.second];
        p.splats.push_back(s);
        const Eigen::Matrix2d &m = s.proj.conic;
        p.hot.push_back({s.proj.mean2d.u, s.proj.mean2d.v, m(0, 0), m(0, 1), m(1, 1), s.opacity});
    }

    const std::size_t npix = static_cast<std::size_t>(cam.width) * cam.height;
    p.pixel_begin.assign(npix + 1, 0);
    for (const PreparedSplat &s : p.splats) {
        for (int y = s.proj.y_min; y <= s.proj.y_max; ++y) {
            std::uint32_t *row = p.pixel_begin.data() + static_cast<std::size_t>(y) * cam.width + 1;
            for (int x = s.proj.x_min; x <= s.proj.x_max; ++x) {
                ++row[x];
            }
        }
    }
    std::partial_sum(p.pixel_begin.begin(), p.pixel_begin.end(), p.pixel_begin.begin());
    p.pixel_splats.resize(p.pixel_begin.back());
    std::vector<std::uint32_t> cursor(p.pixel_begin.begin(), p.pixel_begin.end() - 1);
    for (std::uint32_t si = 0; si < p.splats.size(); ++si) {
        const SplatProjection &pr = p.splats[si].proj;
        for (int y = pr.y_min; y <= pr.y_max; ++y) {
            std::uint32_t *row = cursor.data() + static_cast<std::size_t>(y) * cam.width;
            for (int x = pr.x_min; x <= pr.x_max; ++x) {
                p.pixel_splats[row[x]++] = si;
            }
        }
    }
    return p;
}

struct Contribution {
    int splat = 0;
    double alpha = 0.0;
    double gauss = 0.0;
    bool clamped = false;
    double dx = 0.0, dy = 0.0;
    double transmittance = 1.0; // before this splat
};

// Splats composited at pixel (x, y), in order, with early termination. Evaluated
// Gaussian weights are written to `gauss` at their CSR slots; the number composited
// is returned.
std::uint32_t
composite_pixel(const Prepared &p, int x, int y, double *gauss_out, std::vector<Contribution> *out) {
    if (out) {
        out->clear();
    }
    double t = 1.0;
    const double px = x + 0.5;
    const double py = y + 0.5;
    const std::size_t pix = static_cast<std::size_t>(y) * p.width + x;
    const std::uint32_t begin = p.pixel_begin[pix];
    std::uint32_t e = begin;
    for (; e < p.pixel_begin[pix + 1]; ++e) {
        const std::uint32_t s = p.pixel_splats[e];
        const HotSplat &h = p.hot[s];
        const double dx = px - h.u;
        const double dy = py - h.v;
        const double power = -0.5 * (h.ca * dx * dx + 2.0 * h.cb * dx * dy + h.cc * dy * dy);
        const double gauss = std::exp(power);
        double alpha = h.opacity * gauss;
        bool clamped = false;
        if (alpha > kMaxAlpha) {
            alpha = kMaxAlpha;
            clamped = true;
        }
        const double next_t = t * (1.0 - alpha);
        if (next_t < kMinTransmittance) {
            break;
        }
        if (gauss_out) {
            gauss_out[e] = gauss;
        }
        if (out) {
            out->push_back({static_cast<int>(s), alpha, gauss, clamped, dx, dy, t});
        }
        t = next_t;
    }
    return e - begin;
}

// Rebuilds the contribution list of a pixel from stored weights, reproducing the
// forward arithmetic exactly.
void
replay_pixel(const Prepared &p, const double *gauss, std::uint32_t count, int x, int y,
             std::vector<Contribution> &out) {
    out.clear();
    double t = 1.0;
    const double px = x + 0.5;
    const double py = y + 0.5;
    const std::uint32_t begin = p.pixel_begin[static_cast<std::size_t>(y) * p.width + x];
    for (std::uint32_t e = begin; e < begin + count; ++e) {
        const std::uint32_t s = p.pixel_splats[e];
        const HotSplat &h = p.hot[s];
        double alpha = h.opacity * gauss[e];
        bool clamped = false;
        if (alpha > kMaxAlpha) {
            alpha = kMaxAlpha;
            clamped = true;
        }
        out.push_back({static_cast<int>(s), alpha, gauss[e], clamped, px - h.u, py - h.v, t});
        t *= 1.0 - alpha;
    }
}

} // namespace

Eigen::Matrix3d
covariance_3d(const MaterializedGaussian &g) {
    const Eigen::Matrix3d m = quaternion_to_rotation(g.rotation) * g.scale.asDiagonal();
    return m * m.transpose();
}

Eigen::Matrix2d
screen_covariance(const MaterializedGaussian &g, const Camera &cam) {
    const Eigen::Matrix3d w = cam.world_to_cam_rotation();
    const Eigen::Vector3d p = cam.to_camera(g.mean);
    if (!(p.z() > kMinCameraDepth)) {
        throw BehindCameraError("screen_covariance: Gaussian is behind the camera");
    }
    Eigen::Matrix<double, 2, 3> j;
    j << cam.fx / p.z(), 0.0, -cam.fx * p.x() / (p.z() * p.z()), 0.0, cam.fy / p.z(), -cam.fy * p.y() / (p.z() * p.z());
    const Eigen::Matrix<double, 2, 3> t = j * w;
    return t * covariance_3d(g) * t.transpose();
}

std::optional<SplatProjection>
project_gaussian(const MaterializedGaussian &g, const Camera &cam) {
    SplatProjection out;
    const Eigen::Matrix3d w = cam.world_to_cam_rotation();
    const Eigen::Vector3d p = cam.to_camera(g.mean);
    if (!(p.z() > kMinCameraDepth) || !p.allFinite()) {
        return std::nullopt;
    }
    const double z = p.z();
    Eigen::Matrix<double, 2, 3> j;
    j << cam.fx / z, 0.0, -cam.fx * p.x() / (z * z), 0.0, cam.fy / z, -cam.fy * p.y() / (z * z);
    out.jacobian = j * w;
    out.cov2d = out.jacobian * covariance_3d(g) * out.jacobian.transpose();
    out.cov2d(0, 0) += kLowPassDilation;
    out.cov2d(1, 1) += kLowPassDilation;
    out.cov2d(0, 1) = out.cov2d(1, 0) = 0.5 * (out.cov2d(0, 1) + out.cov2d(1, 0));
    const double det = out.cov2d.determinant();
    if (!(det > 0.0)) {
        return std::nullopt;
    }
    out.conic << out.cov2d(1, 1) / det, -out.cov2d(0, 1) / det, -out.cov2d(1, 0) / det, out.cov2d(0, 0) / det;
    const double mid = 0.5 * (out.cov2d(0, 0) + out.cov2d(1, 1));
    const double lambda_max = mid + std::sqrt(std::max(0.0, mid * mid - det));
    out.radius_px = kRadiusSigmas * std::sqrt(lambda_max);
    out.mean2d = {cam.fx * p.x() / z + cam.cx, cam.fy * p.y() / z + cam.cy};
    out.camera_depth = z;
    out.camera_point = p;
    if (!std::isfinite(out.mean2d.u) || !std::isfinite(out.mean2d.v) || !std::isfinite(out.radius_px)) {
        return std::nullopt;
    }
    // Pixel centers x + 0.5 within [mean − r, mean + r].
    const double r = out.radius_px;
    const double xlo = std::ceil(out.mean2d.u - r - 0.5);
    const double xhi = std::floor(out.mean2d.u + r - 0.5);
    const double ylo = std::ceil(out.mean2d.v - r - 0.5);
    const double yhi = std::floor(out.mean2d.v + r - 0.5);
    if (xhi < 0.0 || yhi < 0.0 || xlo > cam.width - 1 || ylo > cam.height - 1 || xlo > xhi || ylo > yhi) {
        return std::nullopt;
    }
    out.x_min = static_cast<int>(std::max(xlo, 0.0));
    out.x_max = static_cast<int>(std::min(xhi, static_cast<double>(cam.width - 1)));
    out.y_min = static_cast<int>(std::max(ylo, 0.0));
    out.y_max = static_cast<int>(std::min(yhi, static_cast<double>(cam.height - 1)));
    return out;
}

struct RenderState {
    Camera camera;
    RenderOptions options;
    std::size_t gaussian_count = 0;
    Prepared prepared;
    std::vector<double> gauss;         // per CSR slot, valid for the composited prefix
    std::vector<std::uint32_t> count;  // composited splats per pixel
};

RetainedRender
render_retained(std::span<const MaterializedGaussian> gaussians, const Camera &cam, const RenderOptions &opts) {
    auto state = std::make_shared<RenderState>();
    state->camera = cam;
    state->options = opts;
    state->gaussian_count = gaussians.size();
    state->prepared = prepare(gaussians, cam, opts);
    const Prepared &p = state->prepared;
    state->gauss.resize(p.pixel_splats.size());
    state->count.resize(static_cast<std::size_t>(cam.width) * cam.height);

    RenderOutput out{Image(cam.width, cam.height, 3), Image(cam.width, cam.height, 1), Image(cam.width, cam.height, 1)};
    for (int y = 0; y < cam.height; ++y) {
        for (int x = 0; x < cam.width; ++x) {
            const std::size_t pix = static_cast<std::size_t>(y) * cam.width + x;
            const std::uint32_t n = composite_pixel(p, x, y, state->gauss.data(), nullptr);
            state->count[pix] = n;
            double c0 = 0.0, c1 = 0.0, c2 = 0.0;
            double wsum = 0.0, zsum = 0.0, t = 1.0;
            const std::uint32_t begin = p.pixel_begin[pix];
            for (std::uint32_t e = begin; e < begin + n; ++e) {
                const PreparedSplat &sp = p.splats[p.pixel_splats[e]];
                const double alpha = std::min(kMaxAlpha, p.hot[p.pixel_splats[e]].opacity * state->gauss[e]);
                const double w = alpha * t;
                c0 += w * sp.color[0];
                c1 += w * sp.color[1];
                c2 += w * sp.color[2];
                wsum += w;
                zsum += w * sp.proj.camera_depth;
                t *= 1.0 - alpha;
            }
            out.color.at(x, y, 0) = c0;
            out.color.at(x, y, 1) = c1;
            out.color.at(x, y, 2) = c2;
            out.alpha.at(x, y) = wsum;
            if (opts.depth_mode == DepthMode::Normalized) {
                out.depth.at(x, y) = wsum > 0.0 ? zsum / std::max(wsum, kDepthNormalizerFloor) : 0.0;
            } else {
                out.depth.at(x, y) = zsum;
            }
        }
    }
    return {std::move(out), std::move(state)};
}

RenderOutput
render(std::span<const MaterializedGaussian> gaussians, const Camera &cam, const RenderOptions &opts) {
    return render_retained(gaussians, cam, opts).output;
}

namespace {

struct SplatAdjoint2d {
    Eigen::Vector2d d_mean2d = Eigen::Vector2d::Zero();
    Eigen::Vector3d d_conic = Eigen::Vector3d::Zero(); // (a, b, c) with power = −½(a dx² + 2b dx dy + c dy²)
    double d_opacity = 0.0;
    Eigen::Vector3d d_color = Eigen::Vector3d::Zero();
    double d_depth = 0.0;
};

double
upstream_at(const Image &img, int x, int y, int c = 0) {
    return img.data.empty() ? 0.0 : img.at(x, y, c);
}

void
check_upstream(const Image &img, const Camera &cam, int channels, const char *name) {
    if (img.data.empty()) {
        return;
    }
    if (img.width != cam.width || img.height != cam.height || img.channels != channels) {
        throw ContractError(std::string("render_backward: upstream ") + name + " has the wrong shape");
    }
}

} // namespace

RenderGradients
render_backward(std::span<const MaterializedGaussian> gaussians, const Camera &cam, const RenderUpstream &upstream,
                const RenderOptions &opts) {
    return render_backward(render_retained(gaussians, cam, opts), gaussians, upstream);
}

RenderGradients
render_backward(const RetainedRender &forward, std::span<const MaterializedGaussian> gaussians,
                const RenderUpstream &upstream) {
    if (!forward.state || forward.state->gaussian_count != gaussians.size()) {
        throw ContractError("render_backward: forward state does not match the Gaussian list");
    }
    const RenderState &state = *forward.state;
    const Camera &cam = state.camera;
    const RenderOptions &opts = state.options;
    check_upstream(upstream.d_color, cam, 3, "color");
    check_upstream(upstream.d_depth, cam, 1, "depth");
    check_upstream(upstream.d_alpha, cam, 1, "alpha");

    const Prepared &p = state.prepared;
    std::vector<SplatAdjoint2d> adj(p.splats.size());
    std::vector<Contribution> list;
    std::vector<double> g_w;

    for (int y = 0; y < cam.height; ++y) {
        for (int x = 0; x < cam.width; ++x) {
            const Eigen::Vector3d gc(upstream_at(upstream.d_color, x, y, 0), upstream_at(upstream.d_color, x, y, 1),
                                     upstream_at(upstream.d_color, x, y, 2));
            const double gd = upstream_at(upstream.d_depth, x, y);
            const double ga = upstream_at(upstream.d_alpha, x, y);
            if (gc.isZero(0.0) && gd == 0.0 && ga == 0.0) {
                continue;
            }
            replay_pixel(p, state.gauss.data(), state.count[static_cast<std::size_t>(y) * cam.width + x], x, y, list);
            if (list.empty()) {
                continue;
            }
            double wsum = 0.0;
            double zsum = 0.0;
            for (const Contribution &k : list) {
                const double w = k.alpha * k.transmittance;
                wsum += w;
                zsum += w * p.splats[k.splat].proj.camera_depth;
            }
            // ∂depth/∂w_k = dw_z + dw_lin·z_k, ∂depth/∂z_k = dz_scale·w_k
            double dw_lin = 1.0, dw_const = 0.0, dz_scale = 1.0;
            if (opts.depth_mode == DepthMode::Normalized) {
                if (wsum > kDepthNormalizerFloor) {
                    dw_lin = 1.0 / wsum;
                    dw_const = -zsum / (wsum * wsum);
                    dz_scale = 1.0 / wsum;
                } else {
                    dw_lin = 1.0 / kDepthNormalizerFloor;
                    dz_scale = 1.0 / kDepthNormalizerFloor;
                }
            }
            g_w.resize(list.size());
            for (std::size_t k = 0; k < list.size(); ++k) {
                const PreparedSplat &sp = p.splats[list[k].splat];
                g_w[k] = gc.dot(sp.color) + gd * (dw_lin * sp.proj.camera_depth + dw_const) + ga;
            }
            // dL/dα_k = g_k·T_k − (Σ_{m>k} g_m·w_m) / (1 − α_k)
            double suffix = 0.0;
            for (std::size_t kk = list.size(); kk-- > 0;) {
                const Contribution &k = list[kk];
                const PreparedSplat &sp = p.splats[k.splat];
                SplatAdjoint2d &a = adj[k.splat];
                const double w = k.alpha * k.transmittance;
                a.d_color += gc * w;
                a.d_depth += gd * dz_scale * w;
                const double d_alpha = g_w[kk] * k.transmittance - suffix / (1.0 - k.alpha);
                suffix += g_w[kk] * w;
                if (k.clamped) {
                    continue;
                }
                a.d_opacity += d_alpha * k.gauss;
                const double d_power = d_alpha * sp.opacity * k.gauss;
                const Eigen::Matrix2d &m = sp.proj.conic;
                a.d_mean2d.x() += d_power * (m(0, 0) * k.dx + m(0, 1) * k.dy);
                a.d_mean2d.y() += d_power * (m(0, 1) * k.dx + m(1, 1) * k.dy);
                a.d_conic[0] += -0.5 * k.dx * k.dx * d_power;
                a.d_conic[1] += -k.dx * k.dy * d_power;
                a.d_conic[2] += -0.5 * k.dy * k.dy * d_power;
            }
        }
    }

    RenderGradients out;
    out.gaussians.resize(gaussians.size());
    const Eigen::Matrix3d w = cam.world_to_cam_rotation();
    Eigen::Matrix3d d_w_total = Eigen::Matrix3d::Zero(); // direct dependence of J·W on W
    Eigen::Vector3d d_eps_points = Eigen::Vector3d::Zero();
    for (std::size_t s = 0; s < p.splats.size(); ++s) {
        const PreparedSplat &sp = p.splats[s];
        const SplatAdjoint2d &a = adj[s];
        const MaterializedGaussian &g = gaussians[sp.index];
        GaussianAdjoint &ga = out.gaussians[sp.index];
        const SplatProjection &pr = sp.proj;

        ga.d_opacity = a.d_opacity;

        // Conic → 2D covariance: M = C⁻¹, dL/dC = −M·G_M·M with G_M the symmetric gradient.
        Eigen::Matrix2d g_m;
        g_m << a.d_conic[0], 0.5 * a.d_conic[1], 0.5 * a.d_conic[1], a.d_conic[2];
        const Eigen::Matrix2d g_c = -pr.conic * g_m * pr.conic;

        // C = T·Σ·Tᵀ + dilation
        const Eigen::Matrix3d sigma = covariance_3d(g);
        const Eigen::Matrix3d g_sigma = pr.jacobian.transpose() * g_c * pr.jacobian;
        const Eigen::Matrix<double, 2, 3> g_t = 2.0 * g_c * pr.jacobian * sigma;

        // T = J·W
        const Eigen::Matrix<double, 2, 3> g_j = g_t * w.transpose();
        Eigen::Matrix<double, 2, 3> j;
        const Eigen::Vector3d &pc = pr.camera_point;
        const double z = pc.z(), z2 = z * z, z3 = z2 * z;
        j << cam.fx / z, 0.0, -cam.fx * pc.x() / z2, 0.0, cam.fy / z, -cam.fy * pc.y() / z2;
        d_w_total += j.transpose() * g_t;

        Eigen::Vector3d d_p = Eigen::Vector3d::Zero();
        d_p.x() += g_j(0, 2) * (-cam.fx / z2);
        d_p.y() += g_j(1, 2) * (-cam.fy / z2);
        d_p.z() += g_j(0, 0) * (-cam.fx / z2) + g_j(0, 2) * (2.0 * cam.fx * pc.x() / z3) + g_j(1, 1) * (-cam.fy / z2) +
                   g_j(1, 2) * (2.0 * cam.fy * pc.y() / z3);
        d_p.x() += a.d_mean2d.x() * cam.fx / z;
        d_p.y() += a.d_mean2d.y() * cam.fy / z;
        d_p.z() += -a.d_mean2d.x() * cam.fx * pc.x() / z2 - a.d_mean2d.y() * cam.fy * pc.y() / z2;
        d_p.z() += a.d_depth;

        ga.d_mean = w.transpose() * d_p;
        out.camera.d_center -= w.transpose() * d_p;
        d_eps_points += d_p.cross(pc);

        // Σ = (R·S)(R·S)ᵀ
        const Eigen::Matrix3d r = quaternion_to_rotation(g.rotation);
        const Eigen::Matrix3d rs = r * g.scale.asDiagonal();
        const Eigen::Matrix3d g_rs = 2.0 * g_sigma * rs;
        Eigen::Matrix3d g_r;
        for (int i = 0; i < 3; ++i) {
            ga.d_scale[i] = g_rs.col(i).dot(r.col(i));
            g_r.col(i) = g_rs.col(i) * g.scale[i];
        }
        const double qw = g.rotation[0], qx = g.rotation[1], qy = g.rotation[2], qz = g.rotation[3];
        ga.d_rotation[0] = 2.0 * (-qz * g_r(0, 1) + qy * g_r(0, 2) + qz * g_r(1, 0) - qx * g_r(1, 2) - qy * g_r(2, 0) +
                                  qx * g_r(2, 1));
        ga.d_rotation[1] = 2.0 * (qy * g_r(0, 1) + qz * g_r(0, 2) + qy * g_r(1, 0) - 2.0 * qx * g_r(1, 1) -
                                  qw * g_r(1, 2) + qz * g_r(2, 0) + qw * g_r(2, 1) - 2.0 * qx * g_r(2, 2));
        ga.d_rotation[2] = 2.0 * (-2.0 * qy * g_r(0, 0) + qx * g_r(0, 1) + qw * g_r(0, 2) + qx * g_r(1, 0) +
                                  qz * g_r(1, 2) - qw * g_r(2, 0) + qz * g_r(2, 1) - 2.0 * qy * g_r(2, 2));
        ga.d_rotation[3] = 2.0 * (-2.0 * qz * g_r(0, 0) - qw * g_r(0, 1) + qx * g_r(0, 2) + qw * g_r(1, 0) -
                                  2.0 * qz * g_r(1, 1) + qy * g_r(1, 2) + qx * g_r(2, 0) + qy * g_r(2, 1));

        // View-dependent color through the normalized view direction.
        const ShGradient shg = sh_eval_backward(g.sh, sp.view_dir, opts.sh_degree, a.d_color);
        ga.d_sh = shg.d_coeffs;
        const Eigen::Vector3d d_v =
            (shg.d_dir - sp.view_dir * sp.view_dir.dot(shg.d_dir)) / sp.view_dist;
        ga.d_mean += d_v;
        out.camera.d_center -= d_v;
    }
    // W → exp(−[ε]×)·W for a right perturbation of the camera-to-world rotation.
    const Eigen::Matrix3d pw = w * d_w_total.transpose();
    out.camera.d_rotation = d_eps_points - Eigen::Vector3d(pw(1, 2) - pw(2, 1), pw(2, 0) - pw(0, 2), pw(0, 1) - pw(1, 0));
    return out;
}

std::vector<GradientBuffers>
render_backward(const Scene &scene, const Camera &cam, const RenderUpstream &upstream, const RenderOptions &opts) {
    const std::vector<MaterializedGaussian> gaussians = materialize_scene(scene);
    const RenderGradients grads = render_backward(gaussians, cam, upstream, opts);
    std::vector<GradientBuffers> out;
    out.reserve(scene.views.size());
    std::size_t offset = 0;
    for (const SceneView &view : scene.views) {
        const std::size_t n = view.params.count();
        out.push_back(backprop_view(view.params, view.camera,
                                    std::span<const GaussianAdjoint>(grads.gaussians).subspan(offset, n)));
        offset += n;
    }
    return out;
}

} // namespace dofsplat
