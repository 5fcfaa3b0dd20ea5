// Copyright Contributors to the dofsplat project
// SPDX-License-Identifier: Apache-2.0
//
#include "dofsplat/io.hpp"

#include "dofsplat/error.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <limits>
#include <string>
#include <system_error>

namespace dofsplat {

namespace fs = std::filesystem;

namespace {

// Little-endian scalar encoding that does not depend on host byte order.
template <typename U>
void
put_le(Bytes &out, U value) {
    for (std::size_t i = 0; i < sizeof(U); ++i) {
        out.push_back(static_cast<std::uint8_t>(value >> (8 * i)));
    }
}

void
put_f64(Bytes &out, double v) {
    put_le(out, std::bit_cast<std::uint64_t>(v));
}

void
put_f32(Bytes &out, float v) {
    put_le(out, std::bit_cast<std::uint32_t>(v));
}

void
put_text(Bytes &out, std::string_view s) {
    out.insert(out.end(), s.begin(), s.end());
}

/// Bounds-checked cursor over a byte buffer.
class Reader {
  public:
    Reader(const Bytes &bytes, const char *what) : mBytes(bytes), mWhat(what) {}

    std::size_t offset() const { return mPos; }
    std::size_t remaining() const { return mBytes.size() - mPos; }
    bool at_end() const { return mPos == mBytes.size(); }

    [[noreturn]] void fail(const std::string &msg) const { throw FormatError(std::string(mWhat) + ": " + msg, mPos); }
    [[noreturn]] void fail_at(const std::string &msg, std::size_t at) const {
        throw FormatError(std::string(mWhat) + ": " + msg, at);
    }

    void need(std::size_t n) const {
        if (remaining() < n) {
            fail("truncated, need " + std::to_string(n) + " more bytes, have " + std::to_string(remaining()));
        }
    }

    template <typename U>
    U le() {
        need(sizeof(U));
        U v = 0;
        for (std::size_t i = 0; i < sizeof(U); ++i) {
            v |= static_cast<U>(mBytes[mPos + i]) << (8 * i);
        }
        mPos += sizeof(U);
        return v;
    }

    std::uint8_t u8() { return le<std::uint8_t>(); }
    std::uint32_t u32() { return le<std::uint32_t>(); }
    double f64() { return std::bit_cast<double>(le<std::uint64_t>()); }
    float f32() { return std::bit_cast<float>(le<std::uint32_t>()); }

    void expect(std::string_view literal, const char *msg) {
        if (remaining() < literal.size() ||
            std::memcmp(mBytes.data() + mPos, literal.data(), literal.size()) != 0) {
            fail(msg);
        }
        mPos += literal.size();
    }

    /// Netpbm-style header token: skips whitespace (and '#' comments when allowed),
    /// then returns the run of non-whitespace bytes.
    std::string_view token(bool allow_comments) {
        for (;;) {
            while (!at_end() && is_space(mBytes[mPos])) {
                ++mPos;
            }
            if (allow_comments && !at_end() && mBytes[mPos] == '#') {
                while (!at_end() && mBytes[mPos] != '\n') {
                    ++mPos;
                }
                continue;
            }
            break;
        }
        const std::size_t start = mPos;
        while (!at_end() && !is_space(mBytes[mPos]) && mPos - start < 64) {
            ++mPos;
        }
        if (mPos == start) {
            fail("unexpected end of header");
        }
        return {reinterpret_cast<const char *>(mBytes.data()) + start, mPos - start};
    }

    /// The single whitespace byte that separates a netpbm header from its payload.
    void header_terminator() {
        if (at_end() || !is_space(mBytes[mPos])) {
            fail("header must end with a single whitespace byte");
        }
        ++mPos;
    }

    const std::uint8_t *data() const { return mBytes.data() + mPos; }
    void skip(std::size_t n) {
        need(n);
        mPos += n;
    }

  private:
    static bool is_space(std::uint8_t c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\v' || c == '\f'; }

    const Bytes &mBytes;
    const char *mWhat;
    std::size_t mPos = 0;
};

int
parse_dimension(Reader &r, bool allow_comments, const char *name) {
    const std::size_t at = r.offset();
    const std::string_view tok = r.token(allow_comments);
    long v = 0;
    const auto [end, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
    if (ec != std::errc{} || end != tok.data() + tok.size() || v <= 0 || v > (1L << 20)) {
        r.fail_at(std::string("invalid ") + name + " '" + std::string(tok) + "'", at);
    }
    return static_cast<int>(v);
}

void
check_payload(Reader &r, int w, int h, std::size_t bytes_per_pixel) {
    const std::size_t n = static_cast<std::size_t>(w) * static_cast<std::size_t>(h) * bytes_per_pixel;
    r.need(n);
    if (r.remaining() != n) {
        r.fail_at("unexpected trailing bytes after payload", r.offset() + n);
    }
}

} // namespace

Bytes
read_file(const fs::path &path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw FormatError("cannot open '" + path.string() + "' for reading");
    }
    return Bytes(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

void
write_file_atomic(const fs::path &path, std::string_view contents) {
    fs::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) {
            throw FormatError("cannot open '" + tmp.string() + "' for writing");
        }
        out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
        out.flush();
        if (!out) {
            throw FormatError("write to '" + tmp.string() + "' failed");
        }
    }
    std::error_code ec;
    fs::rename(tmp, path, ec);
    if (ec) {
        fs::remove(tmp, ec);
        throw FormatError("cannot rename into '" + path.string() + "'");
    }
}

void
write_file_atomic(const fs::path &path, const Bytes &contents) {
    write_file_atomic(path, std::string_view(reinterpret_cast<const char *>(contents.data()), contents.size()));
}

// ---- PFM --------------------------------------------------------------------

Bytes
encode_pfm(const Image &depth) {
    if (depth.channels != 1 || depth.width <= 0 || depth.height <= 0) {
        throw ContractError("encode_pfm: expected a non-empty single-channel image");
    }
    Bytes out;
    put_text(out, "Pf\n" + std::to_string(depth.width) + " " + std::to_string(depth.height) + "\n-1.0\n");
    out.reserve(out.size() + depth.pixel_count() * 4);
    for (int y = depth.height - 1; y >= 0; --y) {
        for (int x = 0; x < depth.width; ++x) {
            const double v = depth.at(x, y);
            if (!std::isfinite(v)) {
                throw ContractError("encode_pfm: non-finite value");
            }
            put_f32(out, static_cast<float>(v));
        }
    }
    return out;
}

Image
decode_pfm(const Bytes &bytes) {
    Reader r(bytes, "pfm");
    if (bytes.size() >= 2 && bytes[0] == 'P' && bytes[1] == 'F') {
        r.fail("color PFM ('PF') is not supported, expected grayscale 'Pf'");
    }
    r.expect("Pf", "missing 'Pf' magic");
    const int w = parse_dimension(r, false, "width");
    const int h = parse_dimension(r, false, "height");
    const std::size_t scale_at = r.offset();
    const std::string_view tok = r.token(false);
    double scale = 0.0;
    const auto [end, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), scale);
    if (ec != std::errc{} || end != tok.data() + tok.size() || !std::isfinite(scale) || scale == 0.0) {
        r.fail_at("invalid scale '" + std::string(tok) + "'", scale_at);
    }
    if (scale > 0.0) {
        r.fail_at("big-endian PFM (positive scale) is not supported", scale_at);
    }
    r.header_terminator();
    check_payload(r, w, h, 4);
    Image img(w, h, 1);
    for (int y = h - 1; y >= 0; --y) {
        for (int x = 0; x < w; ++x) {
            const std::size_t at = r.offset();
            const float v = r.f32();
            if (!std::isfinite(v)) {
                r.fail_at("non-finite value", at);
            }
            img.at(x, y) = static_cast<double>(v);
        }
    }
    return img;
}

void
write_pfm(const fs::path &path, const Image &depth) {
    write_file_atomic(path, encode_pfm(depth));
}

Image
read_pfm(const fs::path &path) {
    return decode_pfm(read_file(path));
}

// ---- PPM --------------------------------------------------------------------

Bytes
encode_ppm(const Image &rgb) {
    if (rgb.channels != 3 || rgb.width <= 0 || rgb.height <= 0) {
        throw ContractError("encode_ppm: expected a non-empty 3-channel image");
    }
    Bytes out;
    put_text(out, "P6\n" + std::to_string(rgb.width) + " " + std::to_string(rgb.height) + "\n255\n");
    out.reserve(out.size() + rgb.data.size());
    for (double v : rgb.data) {
        const double c = std::isfinite(v) ? std::clamp(v, 0.0, 1.0) : 0.0;
        out.push_back(static_cast<std::uint8_t>(std::round(c * 255.0)));
    }
    return out;
}

Image
decode_ppm(const Bytes &bytes) {
    Reader r(bytes, "ppm");
    r.expect("P6", "missing 'P6' magic");
    const int w = parse_dimension(r, true, "width");
    const int h = parse_dimension(r, true, "height");
    const std::size_t max_at = r.offset();
    const std::string_view tok = r.token(true);
    if (tok != "255") {
        r.fail_at("maxval must be 255, got '" + std::string(tok) + "'", max_at);
    }
    r.header_terminator();
    check_payload(r, w, h, 3);
    Image img(w, h, 3);
    const std::uint8_t *p = r.data();
    for (std::size_t i = 0; i < img.data.size(); ++i) {
        img.data[i] = static_cast<double>(p[i]) / 255.0;
    }
    return img;
}

void
write_ppm(const fs::path &path, const Image &rgb) {
    write_file_atomic(path, encode_ppm(rgb));
}

Image
read_ppm(const fs::path &path) {
    return decode_ppm(read_file(path));
}

// ---- Camera JSON ------------------------------------------------------------

nlohmann::json
camera_to_json(const Camera &cam) {
    const Eigen::Matrix4d m = cam.cam_to_world.matrix();
    nlohmann::json rows = nlohmann::json::array();
    for (int r = 0; r < 4; ++r) {
        for (int c = 0; c < 4; ++c) {
            rows.push_back(m(r, c));
        }
    }
    return {{"fx", cam.fx},       {"fy", cam.fy},         {"cx", cam.cx},          {"cy", cam.cy},
            {"width", cam.width}, {"height", cam.height}, {"cam_to_world", rows}};
}

Camera
camera_from_json(const nlohmann::json &j) {
    auto number = [&](const char *key) {
        if (!j.is_object() || !j.contains(key) || !j.at(key).is_number()) {
            throw FormatError(std::string("camera: missing or non-numeric '") + key + "'");
        }
        return j.at(key).get<double>();
    };
    auto integer = [&](const char *key) {
        if (!j.is_object() || !j.contains(key) || !j.at(key).is_number_integer()) {
            throw FormatError(std::string("camera: missing or non-integer '") + key + "'");
        }
        const auto v = j.at(key).get<long long>();
        if (v <= 0 || v > (1LL << 20)) {
            throw FormatError(std::string("camera: '") + key + "' out of range");
        }
        return static_cast<int>(v);
    };
    Camera cam;
    cam.fx = number("fx");
    cam.fy = number("fy");
    cam.cx = number("cx");
    cam.cy = number("cy");
    cam.width = integer("width");
    cam.height = integer("height");
    const auto &rows = j.contains("cam_to_world") ? j.at("cam_to_world") : nlohmann::json();
    if (!rows.is_array() || rows.size() != 16) {
        throw FormatError("camera: 'cam_to_world' must be an array of 16 numbers");
    }
    Eigen::Matrix4d m;
    for (int k = 0; k < 16; ++k) {
        if (!rows[k].is_number()) {
            throw FormatError("camera: 'cam_to_world' must be an array of 16 numbers");
        }
        m(k / 4, k % 4) = rows[k].get<double>();
    }
    if (m(3, 0) != 0.0 || m(3, 1) != 0.0 || m(3, 2) != 0.0 || m(3, 3) != 1.0) {
        throw FormatError("camera: last row of 'cam_to_world' must be 0 0 0 1");
    }
    cam.cam_to_world = Pose::from_matrix(m);
    try {
        cam.validate();
    } catch (const ContractError &e) {
        throw FormatError(std::string("camera: ") + e.what());
    }
    return cam;
}

void
write_camera(const fs::path &path, const Camera &cam) {
    write_file_atomic(path, camera_to_json(cam).dump(2) + "\n");
}

Camera
read_camera(const fs::path &path) {
    const Bytes bytes = read_file(path);
    const nlohmann::json j = nlohmann::json::parse(bytes.begin(), bytes.end(), nullptr, false);
    if (j.is_discarded()) {
        throw FormatError("camera: '" + path.string() + "' is not valid JSON");
    }
    return camera_from_json(j);
}

// ---- Checkpoint -------------------------------------------------------------
//
// "GSDS1" | u8 version | u32 views | per view:
//   camera: f64 fx fy cx cy | u32 width height | f64 × 16 row-major cam_to_world
//   u32 stride
//   six arrays in ParamClass order, each: u32 rank | u32 dims[rank] | f64 data
//   u8 has_free_mean, then the free_mean array when set

namespace {

void
put_array(Bytes &out, const std::vector<double> &data, const std::vector<std::uint32_t> &dims) {
    put_le(out, static_cast<std::uint32_t>(dims.size()));
    for (std::uint32_t d : dims) {
        put_le(out, d);
    }
    for (double v : data) {
        put_f64(out, v);
    }
}

std::vector<std::uint32_t>
array_dims(const ViewParameters &vp, ParamClass pc) {
    const auto h = static_cast<std::uint32_t>(vp.grid_height);
    const auto w = static_cast<std::uint32_t>(vp.grid_width);
    switch (pc) {
    case ParamClass::LogDepth:
    case ParamClass::OpacityLogit:
        return {h, w};
    case ParamClass::Sh:
        return {h, w, static_cast<std::uint32_t>(kShBases), 3};
    default:
        return {h, w, static_cast<std::uint32_t>(param_class_width(pc))};
    }
}

std::vector<double>
get_array(Reader &r, const std::vector<std::uint32_t> &expected, const char *name) {
    const std::size_t at = r.offset();
    const std::uint32_t rank = r.u32();
    if (rank != expected.size()) {
        r.fail_at(std::string("array '") + name + "' has rank " + std::to_string(rank) + ", expected " +
                      std::to_string(expected.size()),
                  at);
    }
    std::size_t n = 1;
    for (std::uint32_t e : expected) {
        const std::size_t dim_at = r.offset();
        const std::uint32_t d = r.u32();
        if (d != e) {
            r.fail_at(std::string("array '") + name + "' shape mismatch", dim_at);
        }
        n *= d;
    }
    r.need(n * 8);
    std::vector<double> data(n);
    for (double &v : data) {
        v = r.f64();
    }
    return data;
}

} // namespace

Bytes
encode_checkpoint(const Scene &scene) {
    Bytes out;
    out.insert(out.end(), std::begin(kCheckpointMagic), std::end(kCheckpointMagic));
    out.push_back(kCheckpointVersion);
    put_le(out, static_cast<std::uint32_t>(scene.views.size()));
    for (const SceneView &view : scene.views) {
        view.camera.validate();
        view.params.validate();
        const Camera &c = view.camera;
        put_f64(out, c.fx);
        put_f64(out, c.fy);
        put_f64(out, c.cx);
        put_f64(out, c.cy);
        put_le(out, static_cast<std::uint32_t>(c.width));
        put_le(out, static_cast<std::uint32_t>(c.height));
        const Eigen::Matrix4d m = c.cam_to_world.matrix();
        for (int k = 0; k < 16; ++k) {
            put_f64(out, m(k / 4, k % 4));
        }
        put_le(out, static_cast<std::uint32_t>(view.params.stride));
        for (ParamClass pc : kAllParamClasses) {
            if (pc == ParamClass::FreeMean) {
                continue;
            }
            put_array(out, view.params[pc], array_dims(view.params, pc));
        }
        out.push_back(view.params.free_position() ? 1 : 0);
        if (view.params.free_position()) {
            put_array(out, view.params.free_mean, array_dims(view.params, ParamClass::FreeMean));
        }
    }
    return out;
}

Scene
decode_checkpoint(const Bytes &bytes) {
    Reader r(bytes, "checkpoint");
    r.expect(std::string_view(kCheckpointMagic, sizeof(kCheckpointMagic)), "bad magic, expected 'GSDS1'");
    const std::size_t version_at = r.offset();
    const std::uint8_t version = r.u8();
    if (version != kCheckpointVersion) {
        throw UnsupportedVersionError("checkpoint: unsupported format version " + std::to_string(version) +
                                          " (this build reads version " + std::to_string(kCheckpointVersion) + ")",
                                      version_at);
    }
    const std::uint32_t view_count = r.u32();
    // Each view needs at least its camera record; reject absurd counts before allocating.
    constexpr std::size_t kMinViewBytes = 4 * 8 + 2 * 4 + 16 * 8 + 4;
    if (view_count > r.remaining() / kMinViewBytes) {
        r.fail("view count " + std::to_string(view_count) + " exceeds file size");
    }
    Scene scene;
    scene.views.reserve(view_count);
    for (std::uint32_t vi = 0; vi < view_count; ++vi) {
        SceneView view;
        Camera &c = view.camera;
        const std::size_t cam_at = r.offset();
        c.fx = r.f64();
        c.fy = r.f64();
        c.cx = r.f64();
        c.cy = r.f64();
        const std::uint32_t w = r.u32();
        const std::uint32_t h = r.u32();
        if (w == 0 || h == 0 || w > (1u << 20) || h > (1u << 20)) {
            r.fail_at("invalid camera dimensions", cam_at);
        }
        c.width = static_cast<int>(w);
        c.height = static_cast<int>(h);
        Eigen::Matrix4d m;
        for (int k = 0; k < 16; ++k) {
            m(k / 4, k % 4) = r.f64();
        }
        c.cam_to_world = Pose::from_matrix(m);
        try {
            c.validate();
        } catch (const ContractError &e) {
            r.fail_at(std::string("invalid camera: ") + e.what(), cam_at);
        }
        const std::size_t stride_at = r.offset();
        const std::uint32_t stride = r.u32();
        if (stride == 0 || stride > std::max(w, h)) {
            r.fail_at("invalid stride " + std::to_string(stride), stride_at);
        }
        ViewParameters &vp = view.params;
        vp.stride = static_cast<int>(stride);
        const auto dims = grid_dims(c, vp.stride);
        vp.grid_width = dims[0];
        vp.grid_height = dims[1];
        for (ParamClass pc : kAllParamClasses) {
            if (pc == ParamClass::FreeMean) {
                continue;
            }
            vp[pc] = get_array(r, array_dims(vp, pc), param_class_name(pc));
        }
        const std::size_t flag_at = r.offset();
        const std::uint8_t has_free = r.u8();
        if (has_free > 1) {
            r.fail_at("invalid free-position flag", flag_at);
        }
        if (has_free == 1) {
            vp.free_mean = get_array(r, array_dims(vp, ParamClass::FreeMean), param_class_name(ParamClass::FreeMean));
        }
        scene.views.push_back(std::move(view));
    }
    if (!r.at_end()) {
        r.fail("unexpected trailing bytes");
    }
    return scene;
}

void
save_checkpoint(const fs::path &path, const Scene &scene) {
    write_file_atomic(path, encode_checkpoint(scene));
}

Scene
load_checkpoint(const fs::path &path) {
    return decode_checkpoint(read_file(path));
}

// ---- TrainConfig JSON -------------------------------------------------------

nlohmann::json
train_config_to_json(const TrainConfig &cfg) {
    nlohmann::json lr = nlohmann::json::object();
    for (ParamClass pc : kAllParamClasses) {
        lr[param_class_name(pc)] = cfg.lr.of(pc);
    }
    return {
        {"iterations", cfg.iterations},
        {"lr", lr},
        {"lambda_dssim", cfg.lambda_dssim},
        {"lambda_vis", cfg.lambda_vis},
        {"alpha_mask_threshold", cfg.alpha_mask_threshold},
        {"stage_iters", cfg.stage_iters},
        {"stage_long_side", cfg.stage_long_side},
        {"sh_step", cfg.sh_step},
        {"scale_clip_px", cfg.scale_clip_px},
        {"seed", cfg.seed},
        {"disable_vis_loss", cfg.disable_vis_loss},
        {"freeze_offsets", cfg.freeze_offsets},
        {"naive_free_position", cfg.naive_free_position},
        {"depth_mode", cfg.depth_mode == DepthMode::Normalized ? "normalized" : "accumulated"},
        {"stride", cfg.stride},
    };
}

namespace {

double &
lr_slot(LearningRates &lr, ParamClass pc) {
    switch (pc) {
    case ParamClass::LogDepth: return lr.log_depth;
    case ParamClass::RawOffset: return lr.raw_offset;
    case ParamClass::LogScale: return lr.log_scale;
    case ParamClass::Rotation: return lr.rotation;
    case ParamClass::OpacityLogit: return lr.opacity_logit;
    case ParamClass::Sh: return lr.sh;
    case ParamClass::FreeMean: return lr.free_mean;
    }
    return lr.log_depth;
}

template <typename T>
void
read_field(const nlohmann::json &j, const char *key, T &dst) {
    const auto &v = j.at(key);
    if constexpr (std::is_same_v<T, bool>) {
        if (!v.is_boolean()) {
            throw FormatError(std::string("config: '") + key + "' must be a boolean");
        }
    } else if constexpr (std::is_integral_v<T>) {
        if (!v.is_number_integer()) {
            throw FormatError(std::string("config: '") + key + "' must be an integer");
        }
        if constexpr (std::is_unsigned_v<T>) {
            if (v.is_number_unsigned()) {
                dst = v.get<T>();
                return;
            }
            if (v.get<long long>() < 0) {
                throw FormatError(std::string("config: '") + key + "' must be non-negative");
            }
        }
    } else {
        if (!v.is_number()) {
            throw FormatError(std::string("config: '") + key + "' must be a number");
        }
    }
    dst = v.get<T>();
}

} // namespace

TrainConfig
train_config_from_json(const nlohmann::json &j, const TrainConfig &base) {
    if (!j.is_object()) {
        throw FormatError("config: expected a JSON object");
    }
    TrainConfig cfg = base;
    for (const auto &[key, value] : j.items()) {
        const char *k = key.c_str();
        if (key == "iterations") read_field(j, k, cfg.iterations);
        else if (key == "lambda_dssim") read_field(j, k, cfg.lambda_dssim);
        else if (key == "lambda_vis") read_field(j, k, cfg.lambda_vis);
        else if (key == "alpha_mask_threshold") read_field(j, k, cfg.alpha_mask_threshold);
        else if (key == "stage_iters") read_field(j, k, cfg.stage_iters);
        else if (key == "stage_long_side") read_field(j, k, cfg.stage_long_side);
        else if (key == "sh_step") read_field(j, k, cfg.sh_step);
        else if (key == "scale_clip_px") read_field(j, k, cfg.scale_clip_px);
        else if (key == "seed") read_field(j, k, cfg.seed);
        else if (key == "disable_vis_loss") read_field(j, k, cfg.disable_vis_loss);
        else if (key == "freeze_offsets") read_field(j, k, cfg.freeze_offsets);
        else if (key == "naive_free_position") read_field(j, k, cfg.naive_free_position);
        else if (key == "stride") read_field(j, k, cfg.stride);
        else if (key == "depth_mode") {
            if (value == "normalized") cfg.depth_mode = DepthMode::Normalized;
            else if (value == "accumulated") cfg.depth_mode = DepthMode::Accumulated;
            else throw FormatError("config: 'depth_mode' must be \"normalized\" or \"accumulated\"");
        } else if (key == "lr") {
            if (!value.is_object()) {
                throw FormatError("config: 'lr' must be an object");
            }
            for (const auto &[lr_key, lr_value] : value.items()) {
                const auto pc = std::find_if(kAllParamClasses.begin(), kAllParamClasses.end(),
                                             [&](ParamClass p) { return lr_key == param_class_name(p); });
                if (pc == kAllParamClasses.end()) {
                    throw FormatError("config: unknown learning rate '" + lr_key + "'");
                }
                read_field(value, lr_key.c_str(), lr_slot(cfg.lr, *pc));
            }
        } else {
            throw FormatError("config: unknown key '" + key + "'");
        }
    }
    try {
        cfg.validate();
    } catch (const ContractError &e) {
        throw FormatError(std::string("config: ") + e.what());
    }
    return cfg;
}

} // namespace dofsplat
