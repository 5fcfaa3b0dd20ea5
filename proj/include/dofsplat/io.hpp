// Copyright Contributors to the dofsplat project
// SPDX-License-Identifier: Apache-2.0
//
// File formats: PFM depth maps, binary PPM images, JSON camera records, binary
// scene checkpoints and JSON training configs. Readers throw FormatError (with the
// byte offset where parsing failed) and never return partial results.
#pragma once

#include "dofsplat/geometry.hpp"
#include "dofsplat/image.hpp"
#include "dofsplat/scene.hpp"
#include "dofsplat/training.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace dofsplat {

using Bytes = std::vector<std::uint8_t>;

Bytes read_file(const std::filesystem::path &path);
/// Writes to a sibling temporary file, then renames it over `path`.
void write_file_atomic(const std::filesystem::path &path, std::string_view contents);
void write_file_atomic(const std::filesystem::path &path, const Bytes &contents);

/// Grayscale PFM, little-endian, bottom row first. Values are stored as float32.
Bytes encode_pfm(const Image &depth);
Image decode_pfm(const Bytes &bytes);
void write_pfm(const std::filesystem::path &path, const Image &depth);
Image read_pfm(const std::filesystem::path &path);

/// Binary P6 with maxval 255; channel values in [0,1] map linearly to bytes,
/// rounding half away from zero after clamping.
Bytes encode_ppm(const Image &rgb);
Image decode_ppm(const Bytes &bytes);
void write_ppm(const std::filesystem::path &path, const Image &rgb);
Image read_ppm(const std::filesystem::path &path);

/// {fx, fy, cx, cy, width, height, cam_to_world: 16 row-major values, last row 0 0 0 1}
nlohmann::json camera_to_json(const Camera &cam);
Camera camera_from_json(const nlohmann::json &j);
void write_camera(const std::filesystem::path &path, const Camera &cam);
Camera read_camera(const std::filesystem::path &path);

inline constexpr char kCheckpointMagic[5] = {'G', 'S', 'D', 'S', '1'};
inline constexpr std::uint8_t kCheckpointVersion = 1;

Bytes encode_checkpoint(const Scene &scene);
Scene decode_checkpoint(const Bytes &bytes);
void save_checkpoint(const std::filesystem::path &path, const Scene &scene);
Scene load_checkpoint(const std::filesystem::path &path);

nlohmann::json train_config_to_json(const TrainConfig &cfg);
/// Fields absent from `j` keep their values from `base`; unknown keys are rejected.
TrainConfig train_config_from_json(const nlohmann::json &j, const TrainConfig &base = {});

} // namespace dofsplat
