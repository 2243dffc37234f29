#pragma once

// File formats: 16-bit binary PGM with a JSON pose sidecar, contour CSV,
// Wavefront OBJ. Everything is written deterministically so that identical
// inputs give byte-identical files.

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "lvseg/error.hpp"
#include "lvseg/geometry.hpp"
#include "lvseg/mesh.hpp"

namespace lvseg::io {

namespace fs = std::filesystem;
using json = nlohmann::json;

/// Shortest decimal text that parses back to the same double.
inline std::string fmt(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

inline json vec_json(const Vec3& v) { return json::array({v.x(), v.y(), v.z()}); }

inline Vec3 vec_from(const json& j, const char* name) {
    if (!j.contains(name) || !j[name].is_array() || j[name].size() != 3)
        throw ValidationError(std::string("sidecar field '") + name + "' must be a 3-element array");
    return Vec3(j[name][0].get<double>(), j[name][1].get<double>(), j[name][2].get<double>());
}

inline std::string read_text(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw ValidationError("cannot open " + p.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline void write_text(const fs::path& p, const std::string& text) {
    if (p.has_parent_path()) fs::create_directories(p.parent_path());
    std::ofstream out(p, std::ios::binary);
    if (!out) throw Error("cannot write " + p.string());
    out << text;
    if (!out) throw Error("write failed: " + p.string());
}

inline json read_json(const fs::path& p) {
    try {
        return json::parse(read_text(p));
    } catch (const json::exception& e) {
        throw ValidationError(p.string() + ": " + e.what());
    }
}

inline void write_json(const fs::path& p, const json& j) { write_text(p, j.dump(2) + "\n"); }

// ---------------------------------------------------------------------------
// images

struct Quantization {
    double slope = 1.0 / 64.0; // stored value = round((v - intercept) / slope)
    double intercept = 0.0;
};

inline void write_pgm16(const fs::path& p, const Image2D& img, const Quantization& q) {
    std::string out = "P5\n" + std::to_string(img.width) + " " + std::to_string(img.height) + "\n65535\n";
    out.reserve(out.size() + img.data.size() * 2);
    for (double v : img.data) {
        const double s = std::round((v - q.intercept) / q.slope);
        const auto u = static_cast<std::uint16_t>(std::clamp(s, 0.0, 65535.0));
        out.push_back(static_cast<char>(u >> 8));
        out.push_back(static_cast<char>(u & 0xff));
    }
    write_text(p, out);
}

inline Image2D read_pgm16(const fs::path& p, const Quantization& q) {
    const std::string data = read_text(p);
    std::size_t pos = 0;
    auto token = [&]() {
        for (;;) {
            while (pos < data.size() && std::isspace(static_cast<unsigned char>(data[pos]))) ++pos;
            if (pos < data.size() && data[pos] == '#') {
                while (pos < data.size() && data[pos] != '\n') ++pos;
                continue;
            }
            break;
        }
        const std::size_t start = pos;
        while (pos < data.size() && !std::isspace(static_cast<unsigned char>(data[pos]))) ++pos;
        return data.substr(start, pos - start);
    };
    if (token() != "P5") throw ValidationError(p.string() + ": not a binary PGM");
    int w = 0, h = 0, maxval = 0;
    try {
        w = std::stoi(token());
        h = std::stoi(token());
        maxval = std::stoi(token());
    } catch (const std::exception&) {
        throw ValidationError(p.string() + ": malformed PGM header");
    }
    if (w <= 0 || h <= 0 || maxval <= 0 || maxval > 65535) throw ValidationError(p.string() + ": bad PGM dimensions");
    ++pos; // single whitespace after maxval
    const int bpp = maxval > 255 ? 2 : 1;
    if (data.size() < pos + static_cast<std::size_t>(w) * h * bpp) throw ValidationError(p.string() + ": truncated PGM");
    Image2D img(w, h);
    for (std::size_t i = 0; i < img.data.size(); ++i) {
        unsigned v = static_cast<unsigned char>(data[pos + i * bpp]);
        if (bpp == 2) v = (v << 8) | static_cast<unsigned char>(data[pos + i * bpp + 1]);
        img.data[i] = q.intercept + q.slope * v;
    }
    return img;
}

inline json pose_json(const SlicePlane& s, const Quantization& q) {
    return json{{"label", to_string(s.label)},
                {"width", s.width()},
                {"height", s.height()},
                {"origin", vec_json(s.origin)},
                {"row_dir", vec_json(s.row_dir)},
                {"col_dir", vec_json(s.col_dir)},
                {"pixel_spacing", s.pixel_spacing},
                {"thickness", s.thickness},
                {"rescale_slope", q.slope},
                {"rescale_intercept", q.intercept}};
}

/// Write `<stem>.pgm` and `<stem>.json`.
inline void write_slice(const fs::path& stem, const SlicePlane& s, const Quantization& q = {}) {
    write_pgm16(fs::path(stem.string() + ".pgm"), s.pixels, q);
    write_json(fs::path(stem.string() + ".json"), pose_json(s, q));
}

inline SlicePlane read_slice(const fs::path& stem) {
    const fs::path jp(stem.string() + ".json"), ip(stem.string() + ".pgm");
    if (!fs::exists(jp)) throw ValidationError("missing sidecar " + jp.string());
    if (!fs::exists(ip)) throw ValidationError("missing image " + ip.string());
    const json j = read_json(jp);
    SlicePlane s;
    try {
        Quantization q;
        q.slope = j.value("rescale_slope", 1.0);
        q.intercept = j.value("rescale_intercept", 0.0);
        s.pixels = read_pgm16(ip, q);
        s.origin = vec_from(j, "origin");
        s.row_dir = vec_from(j, "row_dir");
        s.col_dir = vec_from(j, "col_dir");
        s.pixel_spacing = j.at("pixel_spacing").get<double>();
        s.thickness = j.at("thickness").get<double>();
        s.label = slice_label_from_string(j.at("label").get<std::string>());
        if (j.contains("width") && (j["width"].get<int>() != s.width() || j["height"].get<int>() != s.height()))
            throw ValidationError("sidecar dimensions disagree with the image");
    } catch (const json::exception& e) {
        throw ValidationError(jp.string() + ": " + e.what());
    }
    s.validate();
    return s;
}

// ---------------------------------------------------------------------------
// contours and meshes

inline std::string contour_csv(const std::vector<Vec2>& pts) {
    std::string out = "index,u,v\n";
    for (std::size_t i = 0; i < pts.size(); ++i) out += std::to_string(i) + "," + fmt(pts[i].x()) + "," + fmt(pts[i].y()) + "\n";
    return out;
}

inline void write_contour(const fs::path& p, const std::vector<Vec2>& pts) { write_text(p, contour_csv(pts)); }

inline std::vector<Vec2> read_contour(const fs::path& p) {
    std::istringstream in(read_text(p));
    std::string line;
    std::vector<Vec2> pts;
    bool header = true;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        if (header) {
            header = false;
            if (line.find_first_not_of("0123456789.,-+eE ") != std::string::npos) continue;
        }
        std::vector<std::string> cols;
        std::stringstream ls(line);
        for (std::string c; std::getline(ls, c, ',');) cols.push_back(c);
        if (cols.size() != 3) throw ValidationError(p.string() + ":" + std::to_string(lineno) + ": expected 3 columns");
        try {
            pts.emplace_back(std::stod(cols[1]), std::stod(cols[2]));
        } catch (const std::exception&) {
            throw ValidationError(p.string() + ":" + std::to_string(lineno) + ": not a number");
        }
    }
    return pts;
}

/// OBJ text of a mesh whose frame coordinates are mapped to world mm.
inline std::string mesh_obj(const mesh::SimplexMesh& m, const mesh::Frame& f) {
    std::string out = "# simplex mesh (" + std::string(m.role == mesh::Role::Endo ? "endo" : "epi") + "), world mm\n";
    for (const auto& v : m.vertices) {
        const Vec3 w = f.to_world(v);
        out += "v " + fmt(w.x()) + " " + fmt(w.y()) + " " + fmt(w.z()) + "\n";
    }
    for (const auto& face : mesh::faces(m)) {
        out += "f";
        for (int i : face) out += " " + std::to_string(i + 1);
        out += "\n";
    }
    return out;
}

inline std::string index_name(int k) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "%04d", k);
    return buf;
}

} // namespace lvseg::io
