// Copyright Contributors to the binosplat project
// SPDX-License-Identifier: Apache-2.0

#include "binosplat/gaussian_cloud.hpp"

#include <algorithm>
#include <array>
#include <cassert>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

namespace binosplat {

void GaussianCloud::resize(std::size_t n) {
    positions.resize(n, Vec3::Zero());
    rotations.resize(n, Vec4(1, 0, 0, 0));
    log_scales.resize(n, Vec3::Zero());
    opacity_logits.resize(n, 0.0);
    colors.resize(n, Vec3::Zero());
}

void GaussianCloud::reserve(std::size_t n) {
    positions.reserve(n);
    rotations.reserve(n);
    log_scales.reserve(n);
    opacity_logits.reserve(n);
    colors.reserve(n);
}

void GaussianCloud::push_back(const Vec3& position, const Vec4& rotation, const Vec3& log_scale,
                              double opacity_logit, const Vec3& color) {
    positions.push_back(position);
    rotations.push_back(rotation);
    log_scales.push_back(log_scale);
    opacity_logits.push_back(opacity_logit);
    colors.push_back(color);
}

void GaussianCloud::append_from(const GaussianCloud& other, std::size_t i) {
    push_back(other.positions[i], other.rotations[i], other.log_scales[i], other.opacity_logits[i],
              other.colors[i]);
}

void GaussianCloud::validate() const {
    const std::size_t n = positions.size();
    if (rotations.size() != n || log_scales.size() != n || opacity_logits.size() != n || colors.size() != n)
        throw std::invalid_argument("gaussian cloud arrays have mismatched lengths");
    for (std::size_t i = 0; i < n; ++i) {
        if (!positions[i].allFinite() || !rotations[i].allFinite() || !log_scales[i].allFinite() ||
            !std::isfinite(opacity_logits[i]) || !colors[i].allFinite())
            throw std::invalid_argument("gaussian " + std::to_string(i) + " has non-finite parameters");
        if (rotations[i].norm() <= 1e-12)
            throw std::invalid_argument("gaussian " + std::to_string(i) + " has a degenerate quaternion");
    }
}

double sigmoid(double x) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

double logit(double p) { return std::log(p / (1.0 - p)); }

Vec3 sh_to_rgb(const Vec3& feature) { return (kShC0 * feature.array() + 0.5).max(0.0).matrix(); }

Vec3 rgb_to_sh(const Vec3& rgb) { return ((rgb.array() - 0.5) / kShC0).matrix(); }

Mat3 quaternion_to_rotation(const Vec4& q_raw) {
    const Vec4 q = q_raw.normalized();
    const double w = q(0), x = q(1), y = q(2), z = q(3);
    Mat3 R;
    R << 1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y),
         2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x),
         2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y);
    return R;
}

ActivatedGaussian activated(const GaussianCloud& cloud, std::size_t index) {
    assert(index < cloud.size());
    return ActivatedGaussian{cloud.positions[index], quaternion_to_rotation(cloud.rotations[index]),
                             cloud.log_scales[index].array().exp().matrix(),
                             sigmoid(cloud.opacity_logits[index]), sh_to_rgb(cloud.colors[index])};
}

Mat3 build_covariance(const Vec4& quat, const Vec3& log_scale) {
    assert(quat.norm() > 1e-12);
    const Mat3 M = quaternion_to_rotation(quat) * log_scale.array().exp().matrix().asDiagonal();
    return M * M.transpose();
}

Mat2 project_covariance(const Mat3& sigma, const Mat3& view_rotation, const Mat23& jacobian,
                        double dilation) {
    const Mat23 T = jacobian * view_rotation;
    Mat2 cov = T * sigma * T.transpose();
    cov(0, 1) = cov(1, 0) = 0.5 * (cov(0, 1) + cov(1, 0));
    cov(0, 0) += dilation;
    cov(1, 1) += dilation;
    return cov;
}

// ---------------------------------------------------------------------------
// PLY

namespace {

constexpr std::array<const char*, 17> kGaussianProperties = {
    "x",     "y",       "z",       "nx",      "ny",      "nz",      "f_dc_0", "f_dc_1", "f_dc_2",
    "opacity", "scale_0", "scale_1", "scale_2", "rot_0", "rot_1", "rot_2", "rot_3"};

enum class PlyType { Int8, UInt8, Int16, UInt16, Int32, UInt32, Float32, Float64 };

bool parse_type(const std::string& s, PlyType& t) {
    if (s == "char" || s == "int8") t = PlyType::Int8;
    else if (s == "uchar" || s == "uint8") t = PlyType::UInt8;
    else if (s == "short" || s == "int16") t = PlyType::Int16;
    else if (s == "ushort" || s == "uint16") t = PlyType::UInt16;
    else if (s == "int" || s == "int32") t = PlyType::Int32;
    else if (s == "uint" || s == "uint32") t = PlyType::UInt32;
    else if (s == "float" || s == "float32") t = PlyType::Float32;
    else if (s == "double" || s == "float64") t = PlyType::Float64;
    else return false;
    return true;
}

std::size_t type_size(PlyType t) {
    switch (t) {
        case PlyType::Int8:
        case PlyType::UInt8: return 1;
        case PlyType::Int16:
        case PlyType::UInt16: return 2;
        case PlyType::Int32:
        case PlyType::UInt32:
        case PlyType::Float32: return 4;
        case PlyType::Float64: return 8;
    }
    return 0;
}

template <typename T>
T read_le(const char* p) {
    T v;
    std::memcpy(&v, p, sizeof(T));
    return v;
}

double decode(PlyType t, const char* p) {
    switch (t) {
        case PlyType::Int8: return read_le<std::int8_t>(p);
        case PlyType::UInt8: return read_le<std::uint8_t>(p);
        case PlyType::Int16: return read_le<std::int16_t>(p);
        case PlyType::UInt16: return read_le<std::uint16_t>(p);
        case PlyType::Int32: return read_le<std::int32_t>(p);
        case PlyType::UInt32: return read_le<std::uint32_t>(p);
        case PlyType::Float32: return read_le<float>(p);
        case PlyType::Float64: return read_le<double>(p);
    }
    return 0.0;
}

struct PlyHeader {
    bool binary = false;
    std::size_t vertex_count = 0;
    std::vector<std::string> names;
    std::vector<PlyType> types;
    std::size_t payload_offset = 0;
};

PlyHeader parse_header(const std::string& bytes) {
    using K = PlyError::Kind;
    const std::size_t end = bytes.find("end_header");
    if (bytes.rfind("ply", 0) != 0 || end == std::string::npos)
        throw PlyError(K::Header, "ply: missing 'ply' magic or 'end_header'");
    std::size_t payload = bytes.find('\n', end);
    if (payload == std::string::npos) throw PlyError(K::Header, "ply: header not newline-terminated");

    PlyHeader h;
    h.payload_offset = payload + 1;
    std::istringstream in(bytes.substr(0, end));
    std::string line;
    bool have_format = false;
    bool in_vertex = false;
    bool seen_vertex = false;
    std::getline(in, line);  // magic
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        std::istringstream ls(line);
        std::string kw;
        ls >> kw;
        if (kw.empty() || kw == "comment" || kw == "obj_info") continue;
        if (kw == "format") {
            std::string fmt, version;
            ls >> fmt >> version;
            if (fmt == "binary_little_endian") h.binary = true;
            else if (fmt == "ascii") h.binary = false;
            else throw PlyError(K::Format, "ply: unsupported format '" + fmt + "'");
            have_format = true;
        } else if (kw == "element") {
            std::string name;
            long long count = -1;
            ls >> name >> count;
            if (name == "vertex" && !seen_vertex) {
                if (count < 0) throw PlyError(K::Header, "ply: bad vertex count");
                h.vertex_count = static_cast<std::size_t>(count);
                in_vertex = true;
                seen_vertex = true;
            } else {
                if (count != 0) throw PlyError(K::Properties, "ply: unsupported element '" + name + "'");
                in_vertex = false;
            }
        } else if (kw == "property") {
            std::string type, name;
            ls >> type >> name;
            if (!in_vertex) continue;
            PlyType t;
            if (type == "list" || !parse_type(type, t))
                throw PlyError(K::Properties, "ply: unsupported vertex property type '" + type + "'");
            h.names.push_back(name);
            h.types.push_back(t);
        } else {
            throw PlyError(K::Header, "ply: unknown header keyword '" + kw + "'");
        }
    }
    if (!have_format) throw PlyError(K::Format, "ply: missing format line");
    if (!seen_vertex) throw PlyError(K::Header, "ply: no vertex element");
    return h;
}

}  // namespace

int PlyVertexTable::column(const std::string& name) const {
    const auto it = std::find(names.begin(), names.end(), name);
    return it == names.end() ? -1 : static_cast<int>(it - names.begin());
}

PlyVertexTable parse_ply_vertices(const std::string& bytes) {
    using K = PlyError::Kind;
    const PlyHeader h = parse_header(bytes);
    PlyVertexTable table;
    table.names = h.names;
    table.rows.reserve(h.vertex_count);
    const std::size_t ncol = h.names.size();

    if (h.binary) {
        std::size_t stride = 0;
        for (auto t : h.types) stride += type_size(t);
        const std::size_t available = bytes.size() - h.payload_offset;
        if (available < stride * h.vertex_count)
            throw PlyError(K::Truncated, "ply: payload truncated: header declares " +
                                             std::to_string(h.vertex_count) + " vertices, data holds " +
                                             std::to_string(stride ? available / stride : 0));
        const char* p = bytes.data() + h.payload_offset;
        for (std::size_t v = 0; v < h.vertex_count; ++v) {
            std::vector<double> row(ncol);
            for (std::size_t c = 0; c < ncol; ++c) {
                row[c] = decode(h.types[c], p);
                p += type_size(h.types[c]);
            }
            table.rows.push_back(std::move(row));
        }
    } else {
        std::istringstream in(bytes.substr(h.payload_offset));
        for (std::size_t v = 0; v < h.vertex_count; ++v) {
            std::vector<double> row(ncol);
            for (std::size_t c = 0; c < ncol; ++c) {
                if (!(in >> row[c]))
                    throw PlyError(K::Truncated, "ply: ascii payload truncated at vertex " + std::to_string(v));
            }
            table.rows.push_back(std::move(row));
        }
    }
    return table;
}

std::string save_ply(const GaussianCloud& cloud) {
    std::ostringstream out;
    out << "ply\nformat binary_little_endian 1.0\nelement vertex " << cloud.size() << "\n";
    for (const char* name : kGaussianProperties) out << "property float " << name << "\n";
    out << "end_header\n";
    std::string bytes = out.str();

    std::vector<float> row(kGaussianProperties.size());
    bytes.reserve(bytes.size() + cloud.size() * row.size() * sizeof(float));
    for (std::size_t i = 0; i < cloud.size(); ++i) {
        std::size_t k = 0;
        for (int d = 0; d < 3; ++d) row[k++] = static_cast<float>(cloud.positions[i](d));
        for (int d = 0; d < 3; ++d) row[k++] = 0.0f;
        for (int d = 0; d < 3; ++d) row[k++] = static_cast<float>(cloud.colors[i](d));
        row[k++] = static_cast<float>(cloud.opacity_logits[i]);
        for (int d = 0; d < 3; ++d) row[k++] = static_cast<float>(cloud.log_scales[i](d));
        for (int d = 0; d < 4; ++d) row[k++] = static_cast<float>(cloud.rotations[i](d));
        bytes.append(reinterpret_cast<const char*>(row.data()), row.size() * sizeof(float));
    }
    return bytes;
}

GaussianCloud load_ply(const std::string& bytes) {
    using K = PlyError::Kind;
    const PlyHeader h = parse_header(bytes);
    if (!h.binary) throw PlyError(K::Format, "ply: gaussian clouds must be binary_little_endian");
    bool layout_ok = h.names.size() == kGaussianProperties.size();
    for (std::size_t c = 0; layout_ok && c < h.names.size(); ++c)
        layout_ok = h.names[c] == kGaussianProperties[c] && h.types[c] == PlyType::Float32;
    if (!layout_ok) throw PlyError(K::Properties, "ply: vertex properties do not match the gaussian layout");

    const PlyVertexTable table = parse_ply_vertices(bytes);
    GaussianCloud cloud;
    cloud.reserve(table.rows.size());
    for (const auto& r : table.rows) {
        cloud.push_back(Vec3(r[0], r[1], r[2]), Vec4(r[13], r[14], r[15], r[16]), Vec3(r[10], r[11], r[12]),
                        r[9], Vec3(r[6], r[7], r[8]));
    }
    return cloud;
}

void write_ply_file(const std::string& path, const GaussianCloud& cloud) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw PlyError(PlyError::Kind::Io, "ply: cannot open '" + path + "' for writing");
    const std::string bytes = save_ply(cloud);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

GaussianCloud read_ply_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw PlyError(PlyError::Kind::Io, "ply: cannot open '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return load_ply(ss.str());
}

GaussianCloud quantize_to_float(const GaussianCloud& cloud) {
    auto q = [](double v) { return static_cast<double>(static_cast<float>(v)); };
    auto round_all = [&](auto& v) {
        for (Eigen::Index k = 0; k < v.size(); ++k) v(k) = q(v(k));
    };
    GaussianCloud out = cloud;
    for (std::size_t i = 0; i < out.size(); ++i) {
        round_all(out.positions[i]);
        round_all(out.rotations[i]);
        round_all(out.log_scales[i]);
        out.opacity_logits[i] = q(out.opacity_logits[i]);
        round_all(out.colors[i]);
    }
    return out;
}

}  // namespace binosplat
