#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

#include "lvseg/error.hpp"
#include "lvseg/geometry.hpp"

namespace lvseg::metrics {

struct Mask {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> data;

    Mask() = default;
    Mask(int w, int h) : width(w), height(h), data(static_cast<std::size_t>(w) * h, 0) {}
    std::uint8_t& at(int u, int v) { return data[static_cast<std::size_t>(v) * width + u]; }
    std::uint8_t at(int u, int v) const { return data[static_cast<std::size_t>(v) * width + u]; }
    std::size_t count() const { return static_cast<std::size_t>(std::count(data.begin(), data.end(), 1)); }
};

/// Pixels whose centers lie inside the polygon (even-odd rule).
inline Mask rasterize(const std::vector<Vec2>& poly, int width, int height) {
    Mask m(width, height);
    if (poly.size() < 3) return m;
    const std::size_t n = poly.size();
    std::vector<double> xs;
    for (int v = 0; v < height; ++v) {
        xs.clear();
        const double y = v;
        for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
            const Vec2& a = poly[i];
            const Vec2& b = poly[j];
            if ((a.y() > y) != (b.y() > y)) xs.push_back(a.x() + (y - a.y()) * (b.x() - a.x()) / (b.y() - a.y()));
        }
        std::sort(xs.begin(), xs.end());
        // center u is inside when an odd number of crossings lie strictly to
        // its right, i.e. xs[2k] <= u < xs[2k+1] (same rule as point_in_polygon)
        for (std::size_t k = 0; k + 1 < xs.size(); k += 2) {
            const int u0 = std::max(0, static_cast<int>(std::ceil(xs[k])));
            const int u1 = std::min(width - 1, static_cast<int>(std::ceil(xs[k + 1])) - 1);
            for (int u = u0; u <= u1; ++u) m.at(u, v) = 1;
        }
    }
    return m;
}

struct SegmentationMasks {
    Mask bp;
    Mask myo;
    Mask lv;
};

/// Blood pool, myocardium and whole-LV masks of one slice. The blood pool is
/// clipped to the LV so that BP and myocardium partition it exactly.
inline SegmentationMasks masks_from_contours(const std::vector<Vec2>& endo, const std::vector<Vec2>& epi, int width,
                                             int height) {
    SegmentationMasks s;
    s.lv = rasterize(epi, width, height);
    const Mask inner = rasterize(endo, width, height);
    s.bp = Mask(width, height);
    s.myo = Mask(width, height);
    for (std::size_t i = 0; i < s.lv.data.size(); ++i) {
        s.bp.data[i] = s.lv.data[i] && inner.data[i];
        s.myo.data[i] = s.lv.data[i] && !inner.data[i];
    }
    return s;
}

inline double dice(const Mask& a, const Mask& b) {
    if (a.width != b.width || a.height != b.height) throw ValidationError("dice: mask dimensions differ");
    std::size_t na = 0, nb = 0, both = 0;
    for (std::size_t i = 0; i < a.data.size(); ++i) {
        na += a.data[i];
        nb += b.data[i];
        both += a.data[i] & b.data[i];
    }
    if (na + nb == 0) return 1.0;
    return 2.0 * static_cast<double>(both) / static_cast<double>(na + nb);
}

/// Dice over all voxels of two mask stacks.
inline double volumetric_dice(const std::vector<Mask>& a, const std::vector<Mask>& b) {
    if (a.size() != b.size()) throw ValidationError("volumetric_dice: stack lengths differ");
    std::size_t na = 0, nb = 0, both = 0;
    for (std::size_t k = 0; k < a.size(); ++k) {
        if (a[k].width != b[k].width || a[k].height != b[k].height)
            throw ValidationError("volumetric_dice: mask dimensions differ");
        for (std::size_t i = 0; i < a[k].data.size(); ++i) {
            na += a[k].data[i];
            nb += b[k].data[i];
            both += a[k].data[i] & b[k].data[i];
        }
    }
    if (na + nb == 0) return 1.0;
    return 2.0 * static_cast<double>(both) / static_cast<double>(na + nb);
}

inline double point_segment_distance(const Vec2& p, const Vec2& a, const Vec2& b) {
    const Vec2 ab = b - a;
    const double len2 = ab.squaredNorm();
    const double s = len2 > 0.0 ? std::clamp((p - a).dot(ab) / len2, 0.0, 1.0) : 0.0;
    return (p - (a + s * ab)).norm();
}

/// Distance from p to the closed polyline through `poly`.
inline double point_polyline_distance(const Vec2& p, const std::vector<Vec2>& poly) {
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0, n = poly.size(); i < n; ++i)
        best = std::min(best, point_segment_distance(p, poly[i], poly[(i + 1) % n]));
    return best;
}

namespace detail {

inline void check_contour(const std::vector<Vec2>& c) {
    if (c.size() < 8) throw ValidationError("contour needs at least 8 points");
    double perimeter = 0.0;
    for (std::size_t i = 0; i < c.size(); ++i) {
        if (!std::isfinite(c[i].x()) || !std::isfinite(c[i].y())) throw ValidationError("contour has non-finite points");
        perimeter += (c[(i + 1) % c.size()] - c[i]).norm();
    }
    if (!(perimeter > 0.0)) throw ValidationError("contour is degenerate (zero length)");
}

inline double directed_mean(const std::vector<Vec2>& a, const std::vector<Vec2>& b) {
    double acc = 0.0;
    for (const auto& p : a) acc += point_polyline_distance(p, b);
    return acc / static_cast<double>(a.size());
}

} // namespace detail

/// Symmetric mean distance between two closed contours: the average of the
/// two directed point-to-polyline means. Units follow the inputs.
inline double mean_contour_distance(const std::vector<Vec2>& a, const std::vector<Vec2>& b) {
    detail::check_contour(a);
    detail::check_contour(b);
    return 0.5 * (detail::directed_mean(a, b) + detail::directed_mean(b, a));
}

inline std::vector<Vec2> scaled(std::vector<Vec2> pts, double s) {
    for (auto& p : pts) p *= s;
    return pts;
}

} // namespace lvseg::metrics
