// Copyright Contributors to the dofsplat project
// SPDX-License-Identifier: Apache-2.0
//
#include "dofsplat/losses.hpp"

#include "dofsplat/error.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

namespace dofsplat {

namespace {

std::array<double, kSsimWindow>
gaussian_window() {
    std::array<double, kSsimWindow> w{};
    double sum = 0.0;
    for (int i = 0; i < kSsimWindow; ++i) {
        const double d = i - kSsimWindow / 2;
        w[i] = std::exp(-d * d / (2.0 * kSsimSigma * kSsimSigma));
        sum += w[i];
    }
    for (double &v : w) {
        v /= sum;
    }
    return w;
}

// Separable zero-padded filtering of one channel stored as a dense H×W plane.
std::vector<double>
blur(const std::vector<double> &src, int width, int height) {
    static const auto kernel = gaussian_window();
    constexpr int half = kSsimWindow / 2;
    std::vector<double> tmp(src.size(), 0.0), out(src.size(), 0.0);
    // Both passes accumulate one tap at a time over contiguous runs; zero padding
    // becomes a clipped run range instead of a per-sample branch.
    for (int y = 0; y < height; ++y) {
        const double *s = src.data() + static_cast<std::size_t>(y) * width;
        double *t = tmp.data() + static_cast<std::size_t>(y) * width;
        for (int k = -half; k <= half; ++k) {
            const double w = kernel[k + half];
            const int x0 = std::max(0, -k), x1 = std::min(width, width - k);
            for (int x = x0; x < x1; ++x) {
                t[x] += w * s[x + k];
            }
        }
    }
    for (int y = 0; y < height; ++y) {
        double *o = out.data() + static_cast<std::size_t>(y) * width;
        for (int k = -half; k <= half; ++k) {
            const int yy = y + k;
            if (yy < 0 || yy >= height) {
                continue;
            }
            const double w = kernel[k + half];
            const double *t = tmp.data() + static_cast<std::size_t>(yy) * width;
            for (int x = 0; x < width; ++x) {
                o[x] += w * t[x];
            }
        }
    }
    return out;
}

void
require_same_shape(const Image &a, const Image &b, const char *what) {
    if (!a.same_shape(b)) {
        throw ContractError(std::string(what) + ": shape mismatch (" + std::to_string(a.width) + "x" +
                            std::to_string(a.height) + "x" + std::to_string(a.channels) + " vs " +
                            std::to_string(b.width) + "x" + std::to_string(b.height) + "x" +
                            std::to_string(b.channels) + ")");
    }
}

} // namespace

SsimResult
ssim(const Image &a, const Image &b, bool with_gradient) {
    require_same_shape(a, b, "ssim");
    if (a.data.empty()) {
        throw ContractError("ssim: empty image");
    }
    const int w = a.width, h = a.height, nc = a.channels;
    const std::size_t np = a.pixel_count();
    const double norm = 1.0 / static_cast<double>(np * nc);
    SsimResult res;
    if (with_gradient) {
        res.d_a = Image(w, h, nc);
    }
    std::vector<double> x(np), y(np), xx(np), yy(np), xy(np);
    double total = 0.0;
    for (int c = 0; c < nc; ++c) {
        for (std::size_t i = 0; i < np; ++i) {
            x[i] = a.data[i * nc + c];
            y[i] = b.data[i * nc + c];
            xx[i] = x[i] * x[i];
            yy[i] = y[i] * y[i];
            xy[i] = x[i] * y[i];
        }
        const auto mu_x = blur(x, w, h), mu_y = blur(y, w, h);
        const auto e_xx = blur(xx, w, h), e_yy = blur(yy, w, h), e_xy = blur(xy, w, h);
        std::vector<double> g_a, g_b, g_c;
        if (with_gradient) {
            g_a.resize(np);
            g_b.resize(np);
            g_c.resize(np);
        }
        for (std::size_t i = 0; i < np; ++i) {
            const double mx = mu_x[i], my = mu_y[i];
            const double sxx = e_xx[i] - mx * mx;
            const double syy = e_yy[i] - my * my;
            const double sxy = e_xy[i] - mx * my;
            const double l = 2.0 * mx * my + kSsimC1;
            const double m = 2.0 * sxy + kSsimC2;
            const double p = mx * mx + my * my + kSsimC1;
            const double q = sxx + syy + kSsimC2;
            const double s = l * m / (p * q);
            total += s;
            if (with_gradient) {
                const double ds_dmx = 2.0 * my * m / (p * q) - s * 2.0 * mx / p;
                const double ds_dsxx = -s / q;
                const double ds_dsxy = 2.0 * l / (p * q);
                g_a[i] = norm * (ds_dmx - 2.0 * mx * ds_dsxx - my * ds_dsxy);
                g_b[i] = norm * ds_dsxx;
                g_c[i] = norm * ds_dsxy;
            }
        }
        if (with_gradient) {
            // The window is symmetric, so the adjoint of zero-padded filtering is the same filter.
            const auto ba = blur(g_a, w, h), bb = blur(g_b, w, h), bc = blur(g_c, w, h);
            for (std::size_t i = 0; i < np; ++i) {
                res.d_a.data[i * nc + c] = ba[i] + 2.0 * x[i] * bb[i] + y[i] * bc[i];
            }
        }
    }
    res.value = total * norm;
    return res;
}

PhotometricLoss
photometric_loss(const Image &rendered, const Image &target) {
    require_same_shape(rendered, target, "photometric_loss");
    PhotometricLoss out;
    const double n = static_cast<double>(rendered.data.size());
    out.d_l1 = Image(rendered.width, rendered.height, rendered.channels);
    double sum = 0.0;
    for (std::size_t i = 0; i < rendered.data.size(); ++i) {
        const double d = rendered.data[i] - target.data[i];
        sum += std::abs(d);
        out.d_l1.data[i] = (d > 0.0 ? 1.0 : (d < 0.0 ? -1.0 : 0.0)) / n;
    }
    out.l1 = sum / n;
    SsimResult s = ssim(rendered, target, true);
    out.dssim = 0.5 * (1.0 - s.value);
    out.d_dssim = std::move(s.d_a);
    for (double &v : out.d_dssim.data) {
        v *= -0.5;
    }
    return out;
}

VisibilityLoss
visibility_loss(const Image &rendered_depth, const Image &per_view_depth, const Image &alpha, double alpha_threshold) {
    require_same_shape(rendered_depth, per_view_depth, "visibility_loss");
    require_same_shape(rendered_depth, alpha, "visibility_loss");
    if (rendered_depth.channels != 1) {
        throw ContractError("visibility_loss: depth maps must be single-channel");
    }
    VisibilityLoss out;
    out.d_rendered_depth = Image(rendered_depth.width, rendered_depth.height, 1);
    out.d_per_view_depth = Image(rendered_depth.width, rendered_depth.height, 1);
    out.d_alpha = Image(rendered_depth.width, rendered_depth.height, 1);
    double sum = 0.0;
    for (std::size_t i = 0; i < rendered_depth.data.size(); ++i) {
        if (alpha.data[i] >= alpha_threshold) {
            const double d = rendered_depth.data[i] - per_view_depth.data[i];
            sum += d * d;
            ++out.masked;
        }
    }
    if (out.masked == 0) {
        return out;
    }
    const double inv = 1.0 / static_cast<double>(out.masked);
    out.value = sum * inv;
    for (std::size_t i = 0; i < rendered_depth.data.size(); ++i) {
        if (alpha.data[i] >= alpha_threshold) {
            const double d = rendered_depth.data[i] - per_view_depth.data[i];
            out.d_rendered_depth.data[i] = 2.0 * d * inv;
            out.d_per_view_depth.data[i] = -2.0 * d * inv;
        }
    }
    return out;
}

VisibilityLoss
visibility_loss_resampled(const Image &rendered_depth, const Image &alpha, const Image &per_view_depth,
                          double alpha_threshold) {
    require_same_shape(rendered_depth, alpha, "visibility_loss_resampled");
    const int rw = rendered_depth.width, rh = rendered_depth.height;
    const int gw = per_view_depth.width, gh = per_view_depth.height;
    if (rw == gw && rh == gh) {
        return visibility_loss(rendered_depth, per_view_depth, alpha, alpha_threshold);
    }
    if (rw % gw == 0 && rh % gh == 0 && rw / gw == rh / gh) {
        const int k = rw / gw;
        const DownsampledDepth ds = depth_downsample(rendered_depth, alpha, k);
        VisibilityLoss coarse = visibility_loss(ds.depth, per_view_depth, ds.alpha, alpha_threshold);
        DownsampleAdjoint back = depth_downsample_backward(rendered_depth, alpha, k, coarse.d_rendered_depth, coarse.d_alpha);
        coarse.d_rendered_depth = std::move(back.d_depth);
        coarse.d_alpha = std::move(back.d_alpha);
        return coarse;
    }
    VisibilityLoss out;
    out.d_rendered_depth = Image(rw, rh, 1);
    out.d_alpha = Image(rw, rh, 1);
    out.d_per_view_depth = Image(gw, gh, 1);
    auto cell = [&](int x, int y) {
        const int cx = std::min(gw - 1, static_cast<int>((x + 0.5) * gw / rw));
        const int cy = std::min(gh - 1, static_cast<int>((y + 0.5) * gh / rh));
        return per_view_depth.index(cx, cy);
    };
    double sum = 0.0;
    for (int y = 0; y < rh; ++y) {
        for (int x = 0; x < rw; ++x) {
            if (alpha.at(x, y) >= alpha_threshold) {
                const double d = rendered_depth.at(x, y) - per_view_depth.data[cell(x, y)];
                sum += d * d;
                ++out.masked;
            }
        }
    }
    if (out.masked == 0) {
        return out;
    }
    const double inv = 1.0 / static_cast<double>(out.masked);
    out.value = sum * inv;
    for (int y = 0; y < rh; ++y) {
        for (int x = 0; x < rw; ++x) {
            if (alpha.at(x, y) >= alpha_threshold) {
                const std::size_t c = cell(x, y);
                const double d = rendered_depth.at(x, y) - per_view_depth.data[c];
                out.d_rendered_depth.at(x, y) = 2.0 * d * inv;
                out.d_per_view_depth.data[c] -= 2.0 * d * inv;
            }
        }
    }
    return out;
}

DownsampledDepth
depth_downsample(const Image &depth, const Image &alpha, int factor) {
    require_same_shape(depth, alpha, "depth_downsample");
    if (factor < 1 || depth.width % factor != 0 || depth.height % factor != 0) {
        throw ContractError("depth_downsample: factor " + std::to_string(factor) + " does not divide " +
                            std::to_string(depth.width) + "x" + std::to_string(depth.height));
    }
    if (factor == 1) {
        return {depth, alpha};
    }
    const int w = depth.width / factor, h = depth.height / factor;
    DownsampledDepth out{Image(w, h, 1), Image(w, h, 1)};
    const double area = static_cast<double>(factor) * factor;
    for (int by = 0; by < h; ++by) {
        for (int bx = 0; bx < w; ++bx) {
            double a_sum = 0.0, ad_sum = 0.0;
            for (int y = by * factor; y < (by + 1) * factor; ++y) {
                for (int x = bx * factor; x < (bx + 1) * factor; ++x) {
                    a_sum += alpha.at(x, y);
                    ad_sum += alpha.at(x, y) * depth.at(x, y);
                }
            }
            out.depth.at(bx, by) = a_sum > 0.0 ? ad_sum / a_sum : 0.0;
            out.alpha.at(bx, by) = a_sum / area;
        }
    }
    return out;
}

DownsampleAdjoint
depth_downsample_backward(const Image &depth, const Image &alpha, int factor, const Image &d_out_depth,
                          const Image &d_out_alpha) {
    if (factor == 1) {
        return {d_out_depth, d_out_alpha};
    }
    const DownsampledDepth fwd = depth_downsample(depth, alpha, factor);
    DownsampleAdjoint out{Image(depth.width, depth.height, 1), Image(depth.width, depth.height, 1)};
    const double area = static_cast<double>(factor) * factor;
    for (int by = 0; by < fwd.depth.height; ++by) {
        for (int bx = 0; bx < fwd.depth.width; ++bx) {
            const double a_sum = fwd.alpha.at(bx, by) * area;
            const double gd = d_out_depth.at(bx, by);
            const double ga = d_out_alpha.at(bx, by);
            for (int y = by * factor; y < (by + 1) * factor; ++y) {
                for (int x = bx * factor; x < (bx + 1) * factor; ++x) {
                    out.d_alpha.at(x, y) = ga / area;
                    if (a_sum > 0.0) {
                        out.d_depth.at(x, y) = gd * alpha.at(x, y) / a_sum;
                        out.d_alpha.at(x, y) += gd * (depth.at(x, y) - fwd.depth.at(bx, by)) / a_sum;
                    }
                }
            }
        }
    }
    return out;
}

double
vis_weight(long iteration, long total, double lambda0) {
    if (total < 1 || iteration < 0 || iteration > total) {
        throw ContractError("vis_weight: requires 0 <= t <= T and T >= 1 (t=" + std::to_string(iteration) +
                            ", T=" + std::to_string(total) + ")");
    }
    return lambda0 * (1.0 - static_cast<double>(iteration) / static_cast<double>(total));
}

int
sh_degree_at(long iteration, long step) {
    if (iteration < 0 || step < 1) {
        throw ContractError("sh_degree_at: iteration must be non-negative and step positive");
    }
    return static_cast<int>(std::min<long>(3, iteration / step));
}

std::array<int, 2>
render_resolution_at(long iteration, int native_width, int native_height, long stage_iters, int stage_long_side) {
    if (native_width < 1 || native_height < 1 || iteration < 0) {
        throw ContractError("render_resolution_at: invalid arguments");
    }
    if (iteration >= stage_iters) {
        return {native_width, native_height};
    }
    const int long_side = std::max(native_width, native_height);
    const int target = std::min(stage_long_side, long_side);
    if (target == long_side) {
        return {native_width, native_height};
    }
    const double s = static_cast<double>(target) / long_side;
    return {std::max(1, static_cast<int>(std::lround(native_width * s))),
            std::max(1, static_cast<int>(std::lround(native_height * s)))};
}

} // namespace dofsplat
