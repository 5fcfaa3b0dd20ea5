// Copyright Contributors to the dofsplat project
// SPDX-License-Identifier: Apache-2.0
//
// File formats and the synthetic ground-truth generator.
#include "dofsplat/error.hpp"
#include "dofsplat/io.hpp"
#include "dofsplat/pipeline.hpp"
#include "dofsplat/synthetic.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

#include <doctest.h>

#include <cmath>
#include <cstring>
#include <random>

using namespace dofsplat;

namespace {

Bytes
bytes_of(std::string_view s) {
    return Bytes(s.begin(), s.end());
}

/// Feeds a decoder byte flips, truncations, insertions and random garbage. Any
/// exception other than FormatError (or a crash) fails the test.
template <class Decode>
void
fuzz_decoder(const Bytes &valid, Decode decode, std::uint64_t seed, int rounds = 400) {
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<int> byte(0, 255);
    int rejected = 0, accepted = 0;
    for (int r = 0; r < rounds; ++r) {
        Bytes b = valid;
        switch (r % 4) {
        case 0:
            for (int k = 0; k < 1 + r % 5; ++k) {
                b[std::uniform_int_distribution<std::size_t>(0, b.size() - 1)(rng)] = static_cast<std::uint8_t>(byte(rng));
            }
            break;
        case 1: b.resize(std::uniform_int_distribution<std::size_t>(0, b.size() - 1)(rng)); break;
        case 2:
            b.insert(b.begin() + static_cast<std::ptrdiff_t>(std::uniform_int_distribution<std::size_t>(0, b.size())(rng)),
                     static_cast<std::uint8_t>(byte(rng)));
            break;
        default:
            b.assign(std::uniform_int_distribution<std::size_t>(0, 64)(rng), 0);
            for (auto &x : b) x = static_cast<std::uint8_t>(byte(rng));
        }
        try {
            decode(b);
            ++accepted;
        } catch (const FormatError &) {
            ++rejected;
        }
    }
    CHECK(rejected > 0);
    CHECK(rejected + accepted == rounds);
}

Scene
sample_scene() {
    std::mt19937_64 rng(5);
    Scene s;
    for (int v = 0; v < 2; ++v) {
        const Camera c = testutil::random_camera(rng, 6 + v, 5);
        const Image color = oracle::random_image(c.width, c.height, 3, 10 + v);
        const Image depth = oracle::random_image(c.width, c.height, 1, 20 + v, 1.0, 3.0);
        s.views.push_back({c, initialize_view(c, color, depth, 1 + v)});
        std::uniform_real_distribution<double> u(-2.0, 2.0);
        for (double &x : s.views.back().params.sh_coeffs) x = u(rng);
        for (double &x : s.views.back().params.raw_offset) x = u(rng);
    }
    return s;
}

} // namespace

TEST_CASE("PFM bytes") {
    Image one(1, 1, 1, 2.0);
    const Bytes b = encode_pfm(one);
    Bytes want = bytes_of("Pf\n1 1\n-1.0\n");
    for (std::uint8_t x : {0x00, 0x00, 0x00, 0x40}) want.push_back(x);
    CHECK(b == want);

    // Bottom row first.
    Image two(1, 2, 1);
    two.data = {1.0, 2.0};
    const Bytes t = encode_pfm(two);
    float first = 0.0f;
    std::memcpy(&first, t.data() + t.size() - 8, 4);
    CHECK(first == 2.0f);
}

TEST_CASE("PFM round trip and rejects") {
    Image d = oracle::random_image(7, 5, 1, 3, -10.0, 10.0);
    for (double &v : d.data) v = static_cast<float>(v);
    CHECK(decode_pfm(encode_pfm(d)) == d);

    CHECK_THROWS_AS(decode_pfm(bytes_of("PF\n1 1\n-1.0\n\0\0\0\0")), FormatError);
    Bytes big = bytes_of("Pf\n1 1\n1.0\n");
    for (int i = 0; i < 4; ++i) big.push_back(0);
    CHECK_THROWS_AS(decode_pfm(big), FormatError);
    Bytes trunc = encode_pfm(d);
    trunc.pop_back();
    CHECK_THROWS_AS(decode_pfm(trunc), FormatError);
    Bytes nan = encode_pfm(Image(1, 1, 1, 0.0));
    const float q = std::numeric_limits<float>::quiet_NaN();
    std::memcpy(nan.data() + nan.size() - 4, &q, 4);
    try {
        decode_pfm(nan);
        FAIL("non-finite value accepted");
    } catch (const FormatError &e) {
        CHECK(e.offset() > 0);
    }
    fuzz_decoder(encode_pfm(d), [](const Bytes &b) { decode_pfm(b); }, 1);
}

TEST_CASE("PPM bytes and round trip") {
    const Bytes w = encode_ppm(Image(1, 1, 3, 1.0));
    Bytes want = bytes_of("P6\n1 1\n255\n");
    for (int i = 0; i < 3; ++i) want.push_back(0xFF);
    CHECK(w == want);
    CHECK(encode_ppm(Image(1, 1, 3, 0.5)).back() == 128);

    const Image img = oracle::random_image(9, 4, 3, 2);
    const Image back = decode_ppm(encode_ppm(img));
    double worst = 0.0;
    for (std::size_t i = 0; i < img.data.size(); ++i) worst = std::max(worst, std::abs(back.data[i] - img.data[i]));
    CHECK(worst <= 1.0 / 510.0 + 1e-15);
    CHECK(decode_ppm(encode_ppm(back)) == back); // quantized values round-trip exactly

    // Comments in the header are allowed.
    Bytes c = bytes_of("P6\n# hi\n1 1\n255\n");
    for (int i = 0; i < 3; ++i) c.push_back(0);
    CHECK(decode_ppm(c) == Image(1, 1, 3, 0.0));

    Bytes m = bytes_of("P6\n1 1\n65535\n");
    for (int i = 0; i < 6; ++i) m.push_back(0);
    CHECK_THROWS_AS(decode_ppm(m), FormatError);
    CHECK_THROWS_AS(decode_ppm(bytes_of("P5\n1 1\n255\n\0")), FormatError);
    fuzz_decoder(encode_ppm(img), [](const Bytes &b) { decode_ppm(b); }, 2);
}

TEST_CASE("camera JSON round trip and rejects") {
    std::mt19937_64 rng(4);
    const Camera c = testutil::random_camera(rng);
    const Camera back = camera_from_json(nlohmann::json::parse(camera_to_json(c).dump()));
    CHECK(back.fx == c.fx);
    CHECK(back.cy == c.cy);
    CHECK(back.cam_to_world.matrix() == c.cam_to_world.matrix());

    nlohmann::json j = camera_to_json(c);
    j["cam_to_world"][15] = 2.0;
    CHECK_THROWS_AS(camera_from_json(j), FormatError);
    j = camera_to_json(c);
    j.erase("fx");
    CHECK_THROWS_AS(camera_from_json(j), FormatError);
    j = camera_to_json(c);
    j["fx"] = -1.0;
    CHECK_THROWS_AS(camera_from_json(j), FormatError);
    j = camera_to_json(c);
    j["cam_to_world"][0] = 3.0; // not a rotation
    CHECK_THROWS_AS(camera_from_json(j), FormatError);
}

TEST_CASE("checkpoint round trip is bitwise") {
    const Scene s = sample_scene();
    const Bytes b = encode_checkpoint(s);
    CHECK(std::memcmp(b.data(), "GSDS1", 5) == 0);
    const Scene back = decode_checkpoint(b);
    REQUIRE(back.views.size() == s.views.size());
    for (std::size_t v = 0; v < s.views.size(); ++v) {
        CHECK(back.views[v].params == s.views[v].params);
        CHECK(back.views[v].camera.cam_to_world.matrix() == s.views[v].camera.cam_to_world.matrix());
        CHECK(back.views[v].camera.fx == s.views[v].camera.fx);
    }
    CHECK(encode_checkpoint(back) == b);

    const auto dir = testutil::scratch_dir("ckpt");
    save_checkpoint(dir / "a.gsds", s);
    CHECK(read_file(dir / "a.gsds") == b);
    CHECK_FALSE(std::filesystem::exists(dir / "a.gsds.tmp"));
}

TEST_CASE("checkpoint rejects") {
    const Bytes b = encode_checkpoint(sample_scene());
    for (std::size_t cut : {std::size_t{0}, std::size_t{3}, std::size_t{6}, b.size() / 2, b.size() - 1}) {
        CHECK_THROWS_AS(decode_checkpoint(Bytes(b.begin(), b.begin() + static_cast<std::ptrdiff_t>(cut))), FormatError);
    }
    Bytes v = b;
    v[5] = 2;
    CHECK_THROWS_AS(decode_checkpoint(v), UnsupportedVersionError);
    Bytes m = b;
    m[0] = 'X';
    CHECK_THROWS_AS(decode_checkpoint(m), FormatError);
    Bytes extra = b;
    extra.push_back(0);
    CHECK_THROWS_AS(decode_checkpoint(extra), FormatError);
    fuzz_decoder(b, [](const Bytes &x) { decode_checkpoint(x); }, 3, 300);
}

TEST_CASE("train config JSON") {
    TrainConfig c;
    c.iterations = 123;
    c.lr.raw_offset = 0.02;
    c.depth_mode = DepthMode::Accumulated;
    c.freeze_offsets = true;
    const TrainConfig back = train_config_from_json(train_config_to_json(c));
    CHECK(train_config_to_json(back) == train_config_to_json(c));
    CHECK(back.lr.raw_offset == 0.02);

    const TrainConfig partial = train_config_from_json(nlohmann::json{{"iterations", 7}});
    CHECK(partial.iterations == 7);
    CHECK(partial.lambda_dssim == 0.2);
    CHECK_THROWS_AS(train_config_from_json(nlohmann::json{{"iteratons", 7}}), FormatError);
    CHECK_THROWS_AS(train_config_from_json(nlohmann::json{{"iterations", "many"}}), FormatError);
}

TEST_CASE("two_planes depth equals the closed-form intersection") {
    SyntheticSpec s = SyntheticSpec::defaults(SceneKind::TwoPlanes);
    s.views = 3;
    s.width = 40;
    s.height = 24;
    const Dataset d = synthesize(s);
    double worst = 0.0;
    for (std::size_t v = 0; v < d.views.size(); ++v) {
        const Camera &c = d.views[v].camera;
        const Eigen::Vector3d o = c.center();
        for (int y = 0; y < c.height; ++y) {
            for (int x = 0; x < c.width; ++x) {
                const Eigen::Vector3d dir =
                    c.cam_to_world.rotation * Eigen::Vector3d((x + 0.5 - c.cx) / c.fx, (y + 0.5 - c.cy) / c.fy, 1.0);
                // Wall z = 0 and floor y = −1; with a unit-z camera ray, t is the camera depth.
                double t = std::numeric_limits<double>::infinity();
                if (dir.z() != 0.0 && -o.z() / dir.z() > 0.0) t = std::min(t, -o.z() / dir.z());
                if (dir.y() != 0.0 && (-1.0 - o.y()) / dir.y() > 0.0) t = std::min(t, (-1.0 - o.y()) / dir.y());
                worst = std::max(worst, std::abs(d.ground_truth_depth[v].at(x, y) - t));
            }
        }
    }
    CHECK(worst <= 1e-12);
}

TEST_CASE("synthesis is deterministic and perturbation-free when asked") {
    SyntheticSpec s = SyntheticSpec::defaults(SceneKind::SphereOnPlane);
    s.width = s.height = 24;
    s.views = 3;
    const Dataset clean = synthesize(s);
    for (std::size_t v = 0; v < clean.views.size(); ++v) {
        CHECK(clean.views[v].depth == clean.ground_truth_depth[v]);
    }
    s.noise_sigma = 0.02;
    s.bump_amp = 0.02;
    s.seed = 9;
    const Dataset a = synthesize(s), b = synthesize(s);
    CHECK(a.views[1].depth == b.views[1].depth);
    CHECK(a.views[1].image == b.views[1].image);
    CHECK(a.views[1].depth != a.ground_truth_depth[1]);
    CHECK(a.test_views.size() == 2);

    s.kind = SceneKind::BoxRoom;
    s = SyntheticSpec::defaults(SceneKind::BoxRoom);
    s.width = s.height = 16;
    CHECK_NOTHROW(synthesize(s));
}

TEST_CASE("synthetic spec validation") {
    SyntheticSpec s;
    s.views = 1;
    CHECK_THROWS_AS(s.validate(), SpecError);
    s = SyntheticSpec{};
    s.width = 8;
    CHECK_THROWS_AS(s.validate(), SpecError);
    s = SyntheticSpec{};
    s.noise_sigma = -0.1;
    CHECK_THROWS_AS(s.validate(), SpecError);
    s = SyntheticSpec{};
    s.ring_radius = 0.0;
    CHECK_THROWS_AS(synthesize(s), SpecError);
    CHECK_THROWS_AS(parse_scene_kind("teapot"), SpecError);
}

TEST_CASE("dataset files round trip and keep ground truth apart") {
    SyntheticSpec s = SyntheticSpec::defaults(SceneKind::TwoPlanes);
    s.width = s.height = 16;
    s.views = 2;
    s.noise_sigma = 0.01;
    const Dataset d = synthesize(s);
    const auto dir = testutil::scratch_dir("dataset");
    write_dataset(d, s, dir);
    CHECK(std::filesystem::exists(dir / "gt_view_000_depth.pfm"));
    CHECK(std::filesystem::exists(dir / "synth_config.json"));

    const Dataset train_only = load_dataset(dir, false);
    CHECK(train_only.ground_truth_depth.empty());
    CHECK(train_only.test_views.empty());
    const Dataset full = load_dataset(dir, true);
    REQUIRE(full.views.size() == 2);
    for (std::size_t v = 0; v < 2; ++v) {
        CHECK(full.views[v].camera.cam_to_world.matrix() == d.views[v].camera.cam_to_world.matrix());
        for (std::size_t i = 0; i < d.views[v].depth.data.size(); ++i) {
            CHECK(full.views[v].depth.data[i] == static_cast<double>(static_cast<float>(d.views[v].depth.data[i])));
        }
    }
    CHECK(full.test_views.size() == 1);

    std::filesystem::remove(dir / "view_001_depth.pfm");
    CHECK_THROWS(load_dataset(dir, false));
}

TEST_CASE("evaluation of an untrained zero-noise scene") {
    SyntheticSpec s = SyntheticSpec::defaults(SceneKind::TwoPlanes);
    s.width = s.height = 32;
    s.views = 2;
    const Dataset d = synthesize(s);
    const EvalReport r = evaluate_scene(initial_scene(d), d);
    CHECK(std::abs(r.pdc - 1.0) <= 1e-9);
    CHECK(r.depth_rmse <= 1e-12);
    CHECK(r.held_out);
    const nlohmann::json j = eval_report_to_json(r);
    for (const char *key : {"psnr", "ssim", "pdc", "patch_size", "per_patch", "pixels_evaluated"}) {
        CHECK(j.contains(key));
    }
    CHECK(j["per_patch"].size() == 2);
    CHECK(j["per_patch"][0].size() == 4);
}
