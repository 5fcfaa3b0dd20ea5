// Copyright Contributors to the dofsplat project
// SPDX-License-Identifier: Apache-2.0
//
// End-to-end runs of the command-line tool.
#include "dofsplat/io.hpp"
#include "dofsplat/pipeline.hpp"
#include "test_util.hpp"

#include <doctest.h>

#include <cstdlib>
#include <fstream>
#include <string>
#include <sys/wait.h>

using namespace dofsplat;
namespace fs = std::filesystem;

namespace {

int
run(const std::string &args) {
    const std::string cmd = std::string(DOFSPLAT_CLI) + " " + args + " >/dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

nlohmann::json
load_json(const fs::path &p) {
    const Bytes b = read_file(p);
    return nlohmann::json::parse(b.begin(), b.end());
}

std::string
q(const fs::path &p) {
    return "'" + p.string() + "'";
}

} // namespace

TEST_CASE("usage errors exit 1") {
    CHECK(run("") == 1);
    CHECK(run("frobnicate") == 1);
    CHECK(run("gradcheck --bogus 3") == 1);
    CHECK(run("synth --spec two_planes") == 1);                       // missing --out
    CHECK(run("synth --spec teapot --out /tmp/dofsplat_x") == 1);     // bad kind
    CHECK(run("synth --spec two_planes --size 64 --out /tmp/x") == 1); // bad size
    CHECK(run("--help") == 0);
}

TEST_CASE("gradcheck example passes") {
    CHECK(run("gradcheck --seed 7 --size 16 --gaussians 20 --tol 1e-5") == 0);
    CHECK(run("gradcheck --seed 7 --size 16 --gaussians 20 --tol 1e-14") == 2);
}

TEST_CASE("synth, zero-iteration train, eval, render and align") {
    const fs::path dir = testutil::scratch_dir("cli_pipeline");
    const fs::path data = dir / "data", run0 = dir / "run0";
    REQUIRE(run("synth --spec two_planes --views 2 --size 32x32 --seed 1 --noise-sigma 0 --bump-amp 0 --out " +
                q(data)) == 0);
    REQUIRE(run("train --data " + q(data) + " --out " + q(run0) + " --iters 0 --seed 1") == 0);
    CHECK(fs::exists(run0 / "train_config.json"));
    CHECK(load_json(run0 / "train_config.json")["config"]["iterations"] == 0);

    // The checkpoint is the initial scene.
    const Scene ckpt = load_checkpoint(run0 / "checkpoint.gsds");
    const Scene init = initial_scene(load_dataset(data, false));
    REQUIRE(ckpt.views.size() == init.views.size());
    for (std::size_t v = 0; v < init.views.size(); ++v) {
        CHECK(ckpt.views[v].params == init.views[v].params);
    }

    const fs::path report = dir / "eval.json";
    REQUIRE(run("eval --checkpoint " + q(run0 / "checkpoint.gsds") + " --data " + q(data) +
                " --patch 16 --out " + q(report) + " --overlay " + q(dir / "overlay")) == 0);
    const nlohmann::json j = load_json(report);
    CHECK(std::abs(j["pdc"].get<double>() - 1.0) <= 1e-9);
    CHECK(j["config_echo"]["patch"] == 16);
    CHECK(fs::exists(dir / "overlay" / "view_000_pdc.ppm"));
    CHECK(run("eval --checkpoint " + q(run0 / "checkpoint.gsds") + " --data " + q(data) + " --out " +
              q(dir / "e2.json") + " --min-pdc 1.5") == 2);

    const fs::path rdir = dir / "render";
    REQUIRE(run("render --checkpoint " + q(run0 / "checkpoint.gsds") + " --camera " +
                q(data / "view_000_camera.json") + " --out-color " + q(rdir / "c.ppm") + " --out-depth " +
                q(rdir / "d.pfm")) == 0);
    CHECK(read_ppm(rdir / "c.ppm").width == 32);
    CHECK(read_pfm(rdir / "d.pfm").height == 32);
    CHECK(fs::exists(rdir / "render_config.json"));

    REQUIRE(run("align --checkpoint " + q(run0 / "checkpoint.gsds") + " --image " + q(data / "view_000.ppm") +
                " --init-camera " + q(data / "view_000_camera.json") + " --iters 5 --out " +
                q(dir / "align" / "cam.json")) == 0);
    CHECK(read_camera(dir / "align" / "cam.json").width == 32);
    CHECK(fs::exists(dir / "align" / "align_config.json"));
}

TEST_CASE("format errors exit 1") {
    const fs::path dir = testutil::scratch_dir("cli_errors");
    {
        std::ofstream f(dir / "junk.gsds", std::ios::binary);
        f << "GSDS1 but not really";
    }
    CHECK(run("render --checkpoint " + q(dir / "junk.gsds") + " --camera " + q(dir / "none.json") +
              " --out-color " + q(dir / "c.ppm") + " --out-depth " + q(dir / "d.pfm")) == 1);
    CHECK(run("train --data " + q(dir / "missing") + " --out " + q(dir / "o") + " --iters 1") == 1);
    {
        std::ofstream f(dir / "bad_config.json");
        f << "{\"iterations\": 3, \"no_such_field\": 1}";
    }
    CHECK(run("train --data " + q(dir) + " --out " + q(dir / "o") + " --config " + q(dir / "bad_config.json")) == 1);
}

TEST_CASE("config file and flag precedence") {
    const fs::path dir = testutil::scratch_dir("cli_config");
    REQUIRE(run("synth --spec two_planes --views 2 --size 16x16 --seed 2 --noise-sigma 0.01 --bump-amp 0.01 --out " +
                q(dir / "data")) == 0);
    {
        std::ofstream f(dir / "cfg.json");
        f << R"({"iterations": 4, "lambda_vis": 0.5, "seed": 3})";
    }
    REQUIRE(run("train --data " + q(dir / "data") + " --out " + q(dir / "run") + " --config " + q(dir / "cfg.json") +
                " --iters 2 --no-vis-loss") == 0);
    const nlohmann::json echo = load_json(dir / "run" / "train_config.json")["config"];
    CHECK(echo["iterations"] == 2);
    CHECK(echo["lambda_vis"] == 0.5);
    CHECK(echo["seed"] == 3);
    CHECK(echo["disable_vis_loss"] == true);
    CHECK(load_json(dir / "run" / "loss_history.json").size() == 2);
}

TEST_CASE("synth, train and eval are byte-for-byte reproducible") {
    const fs::path dir = testutil::scratch_dir("cli_determinism");
    for (const char *name : {"a", "b"}) {
        const fs::path root = dir / name;
        REQUIRE(run("synth --spec sphere_on_plane --views 2 --size 16x16 --seed 5 --noise-sigma 0.02 --bump-amp 0.02 "
                    "--out " + q(root / "data")) == 0);
        REQUIRE(run("train --data " + q(root / "data") + " --out " + q(root / "run") + " --iters 6 --seed 5") == 0);
        REQUIRE(run("eval --checkpoint " + q(root / "run" / "checkpoint.gsds") + " --data " + q(root / "data") +
                    " --patch 8 --out " + q(dir / (std::string(name) + ".json"))) == 0);
    }
    CHECK(read_file(dir / "a" / "run" / "checkpoint.gsds") == read_file(dir / "b" / "run" / "checkpoint.gsds"));
    CHECK(read_file(dir / "a" / "run" / "loss_history.json") == read_file(dir / "b" / "run" / "loss_history.json"));
    // Report bytes differ only through the echoed paths, so compare without them.
    nlohmann::json ja = load_json(dir / "a.json"), jb = load_json(dir / "b.json");
    ja.erase("config_echo");
    jb.erase("config_echo");
    CHECK(ja.dump() == jb.dump());
}
