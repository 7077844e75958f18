// Copyright Contributors to the binosplat project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "binosplat/camera.hpp"
#include "binosplat/image.hpp"
#include "binosplat/trainer.hpp"

#include <filesystem>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace binosplat {

class SceneError : public std::runtime_error {
public:
    enum class Kind { Schema, MissingFile, Dimension, DuplicateId, UnknownId, Overlap, ImageFormat };
    SceneError(Kind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
    Kind kind() const { return kind_; }

private:
    Kind kind_;
};

/// A scene directory: `scene.json` plus the files it references (paths relative to the directory).
struct SceneBundle {
    std::filesystem::path root;
    std::vector<std::string> camera_ids;  // manifest order
    std::map<std::string, CameraModel> cameras;
    std::vector<std::string> train_ids;
    std::vector<std::string> test_ids;
    std::map<std::string, std::string> images;
    std::map<std::string, std::string> depths;
    std::optional<std::string> init_ply;
    std::optional<std::string> correspondences;

    std::filesystem::path resolve(const std::string& relative) const { return root / relative; }
};

SceneBundle load_scene(const std::filesystem::path& dir);
void write_scene_manifest(const SceneBundle& scene);

/// Loads image (and GT depth when listed) for each id.
std::vector<View> load_views(const SceneBundle& scene, const std::vector<std::string>& ids);

std::vector<CorrespondenceSet> parse_correspondences(const std::string& json_text);
std::string format_correspondences(const std::vector<CorrespondenceSet>& sets);
std::vector<CorrespondenceSet> read_correspondences(const std::filesystem::path& path);

/// 8-bit RGB PNG. Values are clamped to [0, 1] and rounded.
void write_png(const std::filesystem::path& path, const Image& rgb);
Image read_png(const std::filesystem::path& path);
/// Width and height from the PNG header only.
std::pair<int, int> png_dimensions(const std::filesystem::path& path);
/// 16-bit grayscale PNG of `depth * scale`.
void write_png16(const std::filesystem::path& path, const Image& depth, double scale);

/// Little-endian single-channel PFM ("Pf", scale -1, rows stored bottom-up).
void write_pfm(const std::filesystem::path& path, const Image& depth);
Image read_pfm(const std::filesystem::path& path);

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, const std::string& text);

}  // namespace binosplat
