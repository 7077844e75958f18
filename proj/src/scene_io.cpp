// Copyright Contributors to the binosplat project
// SPDX-License-Identifier: Apache-2.0

#include "binosplat/scene_io.hpp"

#include <json.hpp>
#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <memory>
#include <set>
#include <sstream>

namespace binosplat {

using nlohmann::json;
namespace fs = std::filesystem;
using K = SceneError::Kind;

std::string read_text_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw SceneError(K::MissingFile, "cannot open '" + path.string() + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_text_file(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw SceneError(K::MissingFile, "cannot open '" + path.string() + "' for writing");
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
}

// ---------------------------------------------------------------------------
// Manifest

namespace {

CameraModel camera_from_json(const json& j) {
    CameraModel cam;
    cam.fx = j.at("fx").get<double>();
    cam.fy = j.at("fy").get<double>();
    cam.cx = j.at("cx").get<double>();
    cam.cy = j.at("cy").get<double>();
    cam.width = j.at("width").get<int>();
    cam.height = j.at("height").get<int>();
    const auto R = j.at("rotation").get<std::vector<double>>();
    const auto t = j.at("translation").get<std::vector<double>>();
    if (R.size() != 9 || t.size() != 3) throw SceneError(K::Schema, "camera rotation needs 9 values, translation 3");
    for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c) cam.rotation(r, c) = R[r * 3 + c];
    cam.translation = Vec3(t[0], t[1], t[2]);
    if (j.contains("near")) cam.near = j.at("near").get<double>();
    return cam;
}

json camera_to_json(const std::string& id, const CameraModel& cam) {
    std::vector<double> R(9);
    for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c) R[r * 3 + c] = cam.rotation(r, c);
    return json{{"id", id},
                {"fx", cam.fx},
                {"fy", cam.fy},
                {"cx", cam.cx},
                {"cy", cam.cy},
                {"width", cam.width},
                {"height", cam.height},
                {"rotation", R},
                {"translation", {cam.translation.x(), cam.translation.y(), cam.translation.z()}},
                {"near", cam.near}};
}

}  // namespace

SceneBundle load_scene(const fs::path& dir) {
    const fs::path manifest = dir / "scene.json";
    if (!fs::exists(manifest)) throw SceneError(K::MissingFile, "missing scene manifest '" + manifest.string() + "'");
    json j;
    try {
        j = json::parse(read_text_file(manifest));
    } catch (const json::parse_error& e) {
        throw SceneError(K::Schema, std::string("scene.json is not valid JSON: ") + e.what());
    }

    SceneBundle s;
    s.root = dir;
    try {
        if (j.value("version", 1) != 1) throw SceneError(K::Schema, "unsupported scene.json version");
        for (const auto& jc : j.at("cameras")) {
            const std::string id = jc.at("id").get<std::string>();
            if (s.cameras.contains(id)) throw SceneError(K::DuplicateId, "duplicate camera id '" + id + "'");
            CameraModel cam = camera_from_json(jc);
            try {
                cam.validate();
            } catch (const std::invalid_argument& e) {
                throw SceneError(K::Schema, "camera '" + id + "': " + e.what());
            }
            s.cameras.emplace(id, cam);
            s.camera_ids.push_back(id);
        }
        s.train_ids = j.at("train").get<std::vector<std::string>>();
        s.test_ids = j.value("test", std::vector<std::string>{});
        s.images = j.at("images").get<std::map<std::string, std::string>>();
        if (j.contains("depths")) s.depths = j.at("depths").get<std::map<std::string, std::string>>();
        if (j.contains("init_ply")) s.init_ply = j.at("init_ply").get<std::string>();
        if (j.contains("correspondences")) s.correspondences = j.at("correspondences").get<std::string>();
    } catch (const json::exception& e) {
        throw SceneError(K::Schema, std::string("scene.json schema error: ") + e.what());
    }

    auto require_known = [&](const std::string& id, const char* where) {
        if (!s.cameras.contains(id))
            throw SceneError(K::UnknownId, std::string(where) + " references unknown camera id '" + id + "'");
    };
    std::set<std::string> seen;
    for (const auto& id : s.train_ids) {
        require_known(id, "train list");
        if (!seen.insert(id).second) throw SceneError(K::DuplicateId, "duplicate train id '" + id + "'");
    }
    std::set<std::string> seen_test;
    for (const auto& id : s.test_ids) {
        require_known(id, "test list");
        if (seen.contains(id)) throw SceneError(K::Overlap, "view '" + id + "' is in both train and test");
        if (!seen_test.insert(id).second) throw SceneError(K::DuplicateId, "duplicate test id '" + id + "'");
    }
    if (s.train_ids.empty()) throw SceneError(K::Schema, "scene has no training views");
    for (const auto& [id, path] : s.images) require_known(id, "images map");
    for (const auto& [id, path] : s.depths) require_known(id, "depths map");

    std::vector<std::string> used = s.train_ids;
    used.insert(used.end(), s.test_ids.begin(), s.test_ids.end());
    for (const auto& id : used) {
        const auto it = s.images.find(id);
        if (it == s.images.end()) throw SceneError(K::MissingFile, "missing image for view '" + id + "'");
        const fs::path p = s.resolve(it->second);
        if (!fs::exists(p)) throw SceneError(K::MissingFile, "missing image for view '" + id + "': " + p.string());
        const auto [w, h] = png_dimensions(p);
        const CameraModel& cam = s.cameras.at(id);
        if (w != cam.width || h != cam.height)
            throw SceneError(K::Dimension, "image for view '" + id + "' is " + std::to_string(w) + "x" +
                                               std::to_string(h) + " but camera declares " +
                                               std::to_string(cam.width) + "x" + std::to_string(cam.height));
    }
    for (const auto& [id, path] : s.depths)
        if (!fs::exists(s.resolve(path))) throw SceneError(K::MissingFile, "missing depth for view '" + id + "'");
    if (s.init_ply && !fs::exists(s.resolve(*s.init_ply)))
        throw SceneError(K::MissingFile, "missing init_ply '" + *s.init_ply + "'");
    if (s.correspondences && !fs::exists(s.resolve(*s.correspondences)))
        throw SceneError(K::MissingFile, "missing correspondence file '" + *s.correspondences + "'");
    return s;
}

void write_scene_manifest(const SceneBundle& s) {
    json j;
    j["version"] = 1;
    j["cameras"] = json::array();
    for (const auto& id : s.camera_ids) j["cameras"].push_back(camera_to_json(id, s.cameras.at(id)));
    j["train"] = s.train_ids;
    j["test"] = s.test_ids;
    j["images"] = s.images;
    if (!s.depths.empty()) j["depths"] = s.depths;
    if (s.init_ply) j["init_ply"] = *s.init_ply;
    if (s.correspondences) j["correspondences"] = *s.correspondences;
    write_text_file(s.root / "scene.json", j.dump(2) + "\n");
}

std::vector<View> load_views(const SceneBundle& scene, const std::vector<std::string>& ids) {
    std::vector<View> views;
    for (const auto& id : ids) {
        View v;
        v.id = id;
        v.camera = scene.cameras.at(id);
        v.image = read_png(scene.resolve(scene.images.at(id)));
        if (v.image.width != v.camera.width || v.image.height != v.camera.height)
            throw SceneError(K::Dimension, "image for view '" + id + "' does not match its camera");
        if (const auto it = scene.depths.find(id); it != scene.depths.end()) {
            v.depth = read_pfm(scene.resolve(it->second));
            if (v.depth->width != v.camera.width || v.depth->height != v.camera.height)
                throw SceneError(K::Dimension, "depth for view '" + id + "' does not match its camera");
        }
        views.push_back(std::move(v));
    }
    return views;
}

// ---------------------------------------------------------------------------
// Correspondences

std::vector<CorrespondenceSet> parse_correspondences(const std::string& text) {
    std::vector<CorrespondenceSet> sets;
    try {
        const json j = json::parse(text);
        if (j.value("version", 1) != 1) throw SceneError(K::Schema, "unsupported correspondence file version");
        for (const auto& jp : j.at("pairs")) {
            CorrespondenceSet s;
            s.view_a = jp.at("view_a").get<std::string>();
            s.view_b = jp.at("view_b").get<std::string>();
            for (const auto& jm : jp.at("matches")) {
                const auto v = jm.get<std::vector<double>>();
                if (v.size() != 5) throw SceneError(K::Schema, "match entries need [x_a, y_a, x_b, y_b, conf]");
                if (!(v[4] >= 0.0 && v[4] <= 1.0)) throw SceneError(K::Schema, "match confidence outside [0, 1]");
                s.matches.push_back(Match{v[0], v[1], v[2], v[3], v[4]});
            }
            sets.push_back(std::move(s));
        }
    } catch (const json::exception& e) {
        throw SceneError(K::Schema, std::string("correspondence file schema error: ") + e.what());
    }
    return sets;
}

std::string format_correspondences(const std::vector<CorrespondenceSet>& sets) {
    json j;
    j["version"] = 1;
    j["pairs"] = json::array();
    for (const auto& s : sets) {
        json m = json::array();
        for (const auto& x : s.matches) m.push_back({x.x_a, x.y_a, x.x_b, x.y_b, x.confidence});
        j["pairs"].push_back({{"view_a", s.view_a}, {"view_b", s.view_b}, {"matches", m}});
    }
    return j.dump() + "\n";
}

std::vector<CorrespondenceSet> read_correspondences(const fs::path& path) {
    return parse_correspondences(read_text_file(path));
}

// ---------------------------------------------------------------------------
// PNG

namespace {

struct FileCloser {
    void operator()(std::FILE* f) const {
        if (f) std::fclose(f);
    }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

FilePtr open_file(const fs::path& path, const char* mode) {
    FilePtr f(std::fopen(path.c_str(), mode));
    if (!f) throw SceneError(K::MissingFile, "cannot open '" + path.string() + "'");
    return f;
}

[[noreturn]] void png_fail(png_structp, png_const_charp msg) { throw SceneError(K::ImageFormat, std::string("png: ") + msg); }
void png_warn(png_structp, png_const_charp) {}

void write_png_rows(const fs::path& path, int width, int height, int bit_depth, int color_type,
                    const std::vector<std::vector<png_byte>>& rows) {
    FilePtr f = open_file(path, "wb");
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, png_fail, png_warn);
    png_infop info = png_create_info_struct(png);
    try {
        png_init_io(png, f.get());
        png_set_IHDR(png, info, width, height, bit_depth, color_type, PNG_INTERLACE_NONE,
                     PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
        png_write_info(png, info);
        for (const auto& row : rows) png_write_row(png, row.data());
        png_write_end(png, nullptr);
    } catch (...) {
        png_destroy_write_struct(&png, &info);
        throw;
    }
    png_destroy_write_struct(&png, &info);
}

}  // namespace

void write_png(const fs::path& path, const Image& rgb) {
    if (rgb.channels != 3) throw SceneError(K::ImageFormat, "write_png expects a 3-channel image");
    std::vector<std::vector<png_byte>> rows(rgb.height, std::vector<png_byte>(rgb.width * 3));
    for (int r = 0; r < rgb.height; ++r)
        for (int c = 0; c < rgb.width; ++c)
            for (int ch = 0; ch < 3; ++ch)
                rows[r][c * 3 + ch] = static_cast<png_byte>(std::lround(std::clamp(rgb.at(r, c, ch), 0.0, 1.0) * 255.0));
    write_png_rows(path, rgb.width, rgb.height, 8, PNG_COLOR_TYPE_RGB, rows);
}

void write_png16(const fs::path& path, const Image& depth, double scale) {
    std::vector<std::vector<png_byte>> rows(depth.height, std::vector<png_byte>(depth.width * 2));
    for (int r = 0; r < depth.height; ++r)
        for (int c = 0; c < depth.width; ++c) {
            const auto v = static_cast<std::uint16_t>(std::lround(std::clamp(depth.at(r, c) * scale, 0.0, 65535.0)));
            rows[r][c * 2] = static_cast<png_byte>(v >> 8);
            rows[r][c * 2 + 1] = static_cast<png_byte>(v & 0xff);
        }
    write_png_rows(path, depth.width, depth.height, 16, PNG_COLOR_TYPE_GRAY, rows);
}

namespace {

template <typename Body>
void with_png_reader(const fs::path& path, Body&& body) {
    FilePtr f = open_file(path, "rb");
    png_byte sig[8];
    if (std::fread(sig, 1, 8, f.get()) != 8 || png_sig_cmp(sig, 0, 8) != 0)
        throw SceneError(K::ImageFormat, "'" + path.string() + "' is not a PNG file");
    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, png_fail, png_warn);
    png_infop info = png_create_info_struct(png);
    try {
        png_init_io(png, f.get());
        png_set_sig_bytes(png, 8);
        png_read_info(png, info);
        body(png, info);
    } catch (...) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw;
    }
    png_destroy_read_struct(&png, &info, nullptr);
}

}  // namespace

std::pair<int, int> png_dimensions(const fs::path& path) {
    std::pair<int, int> dims;
    with_png_reader(path, [&](png_structp png, png_infop info) {
        dims = {static_cast<int>(png_get_image_width(png, info)), static_cast<int>(png_get_image_height(png, info))};
    });
    return dims;
}

Image read_png(const fs::path& path) {
    Image img;
    with_png_reader(path, [&](png_structp png, png_infop info) {
        const int w = static_cast<int>(png_get_image_width(png, info));
        const int h = static_cast<int>(png_get_image_height(png, info));
        const int color = png_get_color_type(png, info);
        if (png_get_bit_depth(png, info) == 16) png_set_strip_16(png);
        if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
        if (color == PNG_COLOR_TYPE_GRAY || color == PNG_COLOR_TYPE_GRAY_ALPHA) png_set_gray_to_rgb(png);
        if (color & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
        if (png_get_bit_depth(png, info) < 8) png_set_packing(png);
        png_read_update_info(png, info);
        if (png_get_channels(png, info) != 3) throw SceneError(K::ImageFormat, "png: unsupported channel layout");
        std::vector<png_byte> row(static_cast<std::size_t>(w) * 3);
        img = Image(w, h, 3);
        for (int r = 0; r < h; ++r) {
            png_read_row(png, row.data(), nullptr);
            for (int c = 0; c < w * 3; ++c) img.data[static_cast<std::size_t>(r) * w * 3 + c] = row[c] / 255.0;
        }
    });
    return img;
}

// ---------------------------------------------------------------------------
// PFM

void write_pfm(const fs::path& path, const Image& depth) {
    std::ostringstream out;
    out << "Pf\n" << depth.width << " " << depth.height << "\n-1\n";
    std::string bytes = out.str();
    for (int r = depth.height - 1; r >= 0; --r)
        for (int c = 0; c < depth.width; ++c) {
            const float v = static_cast<float>(depth.at(r, c));
            bytes.append(reinterpret_cast<const char*>(&v), sizeof(float));
        }
    write_text_file(path, bytes);
}

Image read_pfm(const fs::path& path) {
    const std::string bytes = read_text_file(path);
    std::istringstream in(bytes);
    std::string magic;
    int w = 0, h = 0;
    double scale = 0.0;
    in >> magic >> w >> h >> scale;
    if (magic != "Pf" || w < 1 || h < 1 || !in) throw SceneError(K::ImageFormat, "'" + path.string() + "' is not a grayscale PFM");
    if (scale > 0.0) throw SceneError(K::ImageFormat, "big-endian PFM is not supported");
    in.get();  // single whitespace before the payload
    const auto offset = static_cast<std::size_t>(in.tellg());
    if (bytes.size() < offset + static_cast<std::size_t>(w) * h * sizeof(float))
        throw SceneError(K::ImageFormat, "PFM payload truncated in '" + path.string() + "'");
    Image img(w, h, 1);
    const char* p = bytes.data() + offset;
    for (int r = h - 1; r >= 0; --r)
        for (int c = 0; c < w; ++c) {
            float v;
            std::memcpy(&v, p, sizeof(float));
            p += sizeof(float);
            img.at(r, c) = v;
        }
    return img;
}

}  // namespace binosplat
