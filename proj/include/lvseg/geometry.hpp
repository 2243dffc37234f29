#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Geometry>

#include "lvseg/error.hpp"

namespace lvseg {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;

/// Integer in-plane pixel shift.
struct Shift {
    int du = 0;
    int dv = 0;

    friend bool operator==(const Shift&, const Shift&) = default;
    int norm2() const { return du * du + dv * dv; }
};

/// Deterministic ordering for equally good shifts: smaller Euclidean length
/// first, then lexicographic (du, dv).
inline bool shift_preferred(const Shift& a, const Shift& b) {
    if (a.norm2() != b.norm2()) return a.norm2() < b.norm2();
    if (a.du != b.du) return a.du < b.du;
    return a.dv < b.dv;
}

/// Row-major scalar image; pixel (u, v) lives at data[v * width + u].
struct Image2D {
    int width = 0;
    int height = 0;
    std::vector<double> data;

    Image2D() = default;
    Image2D(int w, int h, double fill = 0.0)
        : width(w), height(h), data(static_cast<std::size_t>(w) * static_cast<std::size_t>(h), fill) {}

    double& at(int u, int v) { return data[static_cast<std::size_t>(v) * width + u]; }
    double at(int u, int v) const { return data[static_cast<std::size_t>(v) * width + u]; }
    bool contains(int u, int v) const { return u >= 0 && v >= 0 && u < width && v < height; }
    bool empty() const { return data.empty(); }
};

enum class SliceLabel { SA, LA4C, LA2C };

inline std::string to_string(SliceLabel l) {
    switch (l) {
        case SliceLabel::SA: return "SA";
        case SliceLabel::LA4C: return "LA4C";
        case SliceLabel::LA2C: return "LA2C";
    }
    return "SA";
}

inline SliceLabel slice_label_from_string(const std::string& s) {
    if (s == "SA") return SliceLabel::SA;
    if (s == "LA4C") return SliceLabel::LA4C;
    if (s == "LA2C") return SliceLabel::LA2C;
    throw ValidationError("unknown slice label '" + s + "'");
}

/// A 2D pixel grid posed in 3D. Pixel centers sit at integer (u, v); the
/// world position of (u, v) is origin + u*spacing*row_dir + v*spacing*col_dir.
struct SlicePlane {
    Image2D pixels;
    Vec3 origin = Vec3::Zero();
    Vec3 row_dir = Vec3::UnitX();
    Vec3 col_dir = Vec3::UnitY();
    double pixel_spacing = 1.0;
    double thickness = 1.0;
    SliceLabel label = SliceLabel::SA;

    int width() const { return pixels.width; }
    int height() const { return pixels.height; }
    Vec3 normal() const { return row_dir.cross(col_dir); }

    void validate() const {
        if (!(pixel_spacing > 0.0)) throw ValidationError("pixel_spacing must be positive");
        if (std::abs(row_dir.norm() - 1.0) > 1e-9 || std::abs(col_dir.norm() - 1.0) > 1e-9)
            throw ValidationError("row_dir and col_dir must be unit vectors");
        if (std::abs(row_dir.dot(col_dir)) > 1e-9)
            throw ValidationError("row_dir and col_dir must be orthogonal");
        if (pixels.width <= 0 || pixels.height <= 0 ||
            pixels.data.size() != static_cast<std::size_t>(pixels.width) * pixels.height)
            throw ValidationError("pixel array is empty or inconsistent with its dimensions");
    }
};

/// Sampling ray in world coordinates.
struct Ray {
    Vec3 start = Vec3::Zero();
    Vec3 direction = Vec3::UnitX();
    double step = 1.0;
    int length = 2;

    void validate() const {
        if (std::abs(direction.norm() - 1.0) > 1e-9) throw ValidationError("ray direction must be unit length");
        if (!(step > 0.0)) throw ValidationError("ray step must be positive");
        if (length < 2) throw ValidationError("ray length must be at least 2");
    }
};

/// Intensity samples with a validity flag per position. Positions outside the
/// image footprint are invalid and carry value 0.
struct Profile {
    std::vector<double> values;
    std::vector<std::uint8_t> valid;

    std::size_t size() const { return values.size(); }
    bool ok(std::size_t i) const { return i < valid.size() && valid[i] != 0; }
    std::size_t valid_count() const {
        return static_cast<std::size_t>(std::count(valid.begin(), valid.end(), std::uint8_t{1}));
    }
};

struct Segment {
    Vec3 a;
    Vec3 b;
    double length() const { return (b - a).norm(); }
};

// ---------------------------------------------------------------------------
// world <-> image

inline Vec2 world_to_image(const Vec3& p, const SlicePlane& img) {
    const Vec3 d = p - img.origin;
    return {d.dot(img.row_dir) / img.pixel_spacing, d.dot(img.col_dir) / img.pixel_spacing};
}

inline Vec3 image_to_world(const Vec2& uv, const SlicePlane& img) {
    return img.origin + (uv.x() * img.pixel_spacing) * img.row_dir + (uv.y() * img.pixel_spacing) * img.col_dir;
}

/// Full 3D image frame of a slice: (u, v) pixels in-plane, w = signed
/// distance from the plane along its normal, also in pixels.
inline Vec3 world_to_frame(const Vec3& p, const SlicePlane& img) {
    const Vec3 d = p - img.origin;
    return Vec3(d.dot(img.row_dir), d.dot(img.col_dir), d.dot(img.normal())) / img.pixel_spacing;
}

inline Vec3 frame_to_world(const Vec3& f, const SlicePlane& img) {
    return img.origin + img.pixel_spacing * (f.x() * img.row_dir + f.y() * img.col_dir + f.z() * img.normal());
}

/// Shift a slice in its own plane by an integer number of pixels.
inline SlicePlane translated(SlicePlane img, const Shift& s) {
    img.origin += (s.du * img.pixel_spacing) * img.row_dir + (s.dv * img.pixel_spacing) * img.col_dir;
    return img;
}

// ---------------------------------------------------------------------------
// interpolation and sampling

/// Bilinear interpolation at pixel coordinates; nullopt outside [0,W-1]x[0,H-1].
inline std::optional<double> bilinear(const Image2D& img, double u, double v) {
    if (!(u >= 0.0 && v >= 0.0 && u <= img.width - 1 && v <= img.height - 1)) return std::nullopt;
    const int u0 = std::min(static_cast<int>(std::floor(u)), std::max(img.width - 2, 0));
    const int v0 = std::min(static_cast<int>(std::floor(v)), std::max(img.height - 2, 0));
    const double fu = u - u0;
    const double fv = v - v0;
    const int u1 = std::min(u0 + 1, img.width - 1);
    const int v1 = std::min(v0 + 1, img.height - 1);
    const double top = img.at(u0, v0) + fu * (img.at(u1, v0) - img.at(u0, v0));
    const double bot = img.at(u0, v1) + fu * (img.at(u1, v1) - img.at(u0, v1));
    return top + fv * (bot - top);
}

/// Sample `n` points start + k*step*dir (pixel coordinates) by bilinear interpolation.
inline Profile sample_pixels(const Image2D& img, const Vec2& start, const Vec2& dir, double step, int n) {
    Profile p;
    p.values.assign(static_cast<std::size_t>(std::max(n, 0)), 0.0);
    p.valid.assign(p.values.size(), 0);
    for (int k = 0; k < n; ++k) {
        const Vec2 q = start + (k * step) * dir;
        if (auto val = bilinear(img, q.x(), q.y())) {
            p.values[k] = *val;
            p.valid[k] = 1;
        }
    }
    return p;
}

/// Sample an in-plane world ray over a slice.
inline Profile sample_along(const SlicePlane& img, const Ray& ray) {
    ray.validate();
    const Vec3 n = img.normal();
    if (std::abs(ray.direction.dot(n)) > 1e-6 || std::abs((ray.start - img.origin).dot(n)) > 1e-6)
        throw CoplanarityError("ray does not lie in the image plane");
    const Vec2 start = world_to_image(ray.start, img);
    Vec2 dir(ray.direction.dot(img.row_dir), ray.direction.dot(img.col_dir));
    dir.normalize();
    return sample_pixels(img.pixels, start, dir, ray.step / img.pixel_spacing, ray.length);
}

/// Resample `src` onto the pixel grid of `target` (bilinear through world
/// coordinates). Pixels that fall outside the source take `fill`.
inline SlicePlane resample_onto(const SlicePlane& src, const SlicePlane& target, double fill = 0.0) {
    SlicePlane out = target;
    out.label = src.label;
    out.thickness = src.thickness;
    for (int v = 0; v < target.height(); ++v) {
        for (int u = 0; u < target.width(); ++u) {
            const Vec2 q = world_to_image(image_to_world(Vec2(u, v), target), src);
            out.pixels.at(u, v) = bilinear(src.pixels, q.x(), q.y()).value_or(fill);
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// plane intersection

namespace detail {

// Restrict parameter interval [lo, hi] of x0 + s*d so that 0 <= f(s) <= limit,
// where f(s) = f0 + s*df. Returns false when the interval empties.
inline bool clip_parameter(double f0, double df, double limit, double& lo, double& hi) {
    if (std::abs(df) < 1e-12) return f0 >= -1e-9 && f0 <= limit + 1e-9;
    double a = (0.0 - f0) / df;
    double b = (limit - f0) / df;
    if (a > b) std::swap(a, b);
    lo = std::max(lo, a);
    hi = std::min(hi, b);
    return lo <= hi;
}

// Clip the line x0 + s*d to the pixel-center footprint of img.
inline bool clip_to_footprint(const SlicePlane& img, const Vec3& x0, const Vec3& d, double& lo, double& hi) {
    const Vec2 f0 = world_to_image(x0, img);
    const Vec2 df(d.dot(img.row_dir) / img.pixel_spacing, d.dot(img.col_dir) / img.pixel_spacing);
    return clip_parameter(f0.x(), df.x(), img.width() - 1, lo, hi) &&
           clip_parameter(f0.y(), df.y(), img.height() - 1, lo, hi);
}

} // namespace detail

/// Infinite intersection line of two slice planes as (point, unit direction).
/// The point is the one closest to the world origin, so it is symmetric in
/// the argument order.
inline std::optional<std::pair<Vec3, Vec3>> plane_intersection_line(const SlicePlane& a, const SlicePlane& b) {
    const Vec3 na = a.normal();
    const Vec3 nb = b.normal();
    Vec3 dir = na.cross(nb);
    const double dn = dir.norm();
    if (dn < 1e-9) return std::nullopt;
    dir /= dn;
    const double da = na.dot(a.origin);
    const double db = nb.dot(b.origin);
    const double aa = na.dot(na), bb = nb.dot(nb), ab = na.dot(nb);
    const double det = aa * bb - ab * ab;
    const Vec3 x0 = ((da * bb - db * ab) * na + (db * aa - da * ab) * nb) / det;
    return std::make_pair(x0, dir);
}

/// Segment of the intersection line of two planes lying inside both image
/// footprints; nullopt when the planes are parallel or footprints disjoint.
inline std::optional<Segment> intersect_planes(const SlicePlane& a, const SlicePlane& b) {
    const auto line = plane_intersection_line(a, b);
    if (!line) return std::nullopt;
    const auto& [x0, dir] = *line;
    double lo = -1e300, hi = 1e300;
    if (!detail::clip_to_footprint(a, x0, dir, lo, hi)) return std::nullopt;
    if (!detail::clip_to_footprint(b, x0, dir, lo, hi)) return std::nullopt;
    if (!(hi > lo)) return std::nullopt;
    return Segment{x0 + lo * dir, x0 + hi * dir};
}

// ---------------------------------------------------------------------------
// planar polygon helpers (pixel coordinates)

inline Vec2 centroid(const std::vector<Vec2>& pts) {
    Vec2 c = Vec2::Zero();
    for (const auto& p : pts) c += p;
    return pts.empty() ? c : Vec2(c / static_cast<double>(pts.size()));
}

/// Even-odd point-in-polygon test; the polygon is implicitly closed.
inline bool point_in_polygon(const std::vector<Vec2>& poly, const Vec2& q) {
    bool inside = false;
    const std::size_t n = poly.size();
    for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
        const Vec2& a = poly[i];
        const Vec2& b = poly[j];
        if ((a.y() > q.y()) != (b.y() > q.y())) {
            const double x = a.x() + (q.y() - a.y()) * (b.x() - a.x()) / (b.y() - a.y());
            if (q.x() < x) inside = !inside;
        }
    }
    return inside;
}

/// Distances along `dir` (unit) from `origin` to every crossing with the
/// closed polygon, sorted ascending. Half-open edge rule avoids double
/// counting at vertices.
inline std::vector<double> ray_polygon_hits(const std::vector<Vec2>& poly, const Vec2& origin, const Vec2& dir) {
    std::vector<double> hits;
    const std::size_t n = poly.size();
    for (std::size_t i = 0; i < n; ++i) {
        const Vec2 a = poly[i] - origin;
        const Vec2 b = poly[(i + 1) % n] - origin;
        // side of each endpoint relative to the ray's supporting line
        const double sa = dir.x() * a.y() - dir.y() * a.x();
        const double sb = dir.x() * b.y() - dir.y() * b.x();
        if ((sa > 0.0) == (sb > 0.0)) continue;
        const double f = sa / (sa - sb);
        const Vec2 x = a + f * (b - a);
        const double along = x.dot(dir);
        if (along >= 0.0) hits.push_back(along);
    }
    std::sort(hits.begin(), hits.end());
    return hits;
}

inline double polygon_area(const std::vector<Vec2>& poly) {
    double a = 0.0;
    for (std::size_t i = 0, n = poly.size(); i < n; ++i) {
        const Vec2& p = poly[i];
        const Vec2& q = poly[(i + 1) % n];
        a += p.x() * q.y() - q.x() * p.y();
    }
    return 0.5 * a;
}

/// Scale a star-shaped contour radially about its centroid by a fixed
/// distance `delta` (positive grows). Used to build dilated/eroded priors.
inline std::vector<Vec2> offset_radially(const std::vector<Vec2>& poly, const Vec2& center, double delta) {
    std::vector<Vec2> out;
    out.reserve(poly.size());
    for (const auto& p : poly) {
        const Vec2 r = p - center;
        const double len = r.norm();
        out.push_back(len > 0.0 ? Vec2(center + r * ((len + delta) / len)) : p);
    }
    return out;
}

inline double deg2rad(double d) { return d * std::numbers::pi / 180.0; }

} // namespace lvseg
