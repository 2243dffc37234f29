#pragma once

// Translational registration of a-priori cine contours onto LGE slices by
// maximizing pattern intensity over an ROI around the cine epicardium.

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "lvseg/contour.hpp"
#include "lvseg/error.hpp"
#include "lvseg/geometry.hpp"
#include "lvseg/parallel.hpp"

namespace lvseg::reg {

struct PatternIntensityParams {
    int r = 5;
    double delta = 0.1;

    void validate() const {
        if (r < 1) throw ValidationError("pattern intensity radius must be >= 1");
        if (!(delta > 0.0)) throw ValidationError("pattern intensity delta must be positive");
    }
};

/// Pixel rectangle covering centers u0..u0+width-1, v0..v0+height-1.
struct Roi {
    int u0 = 0;
    int v0 = 0;
    int width = 0;
    int height = 0;

    int u1() const { return u0 + width - 1; }
    int v1() const { return v0 + height - 1; }
};

/// Copy of the pixels of `img` under `roi` displaced by (du, dv).
inline Image2D window(const Image2D& img, const Roi& roi, int du = 0, int dv = 0) {
    Image2D out(roi.width, roi.height);
    for (int y = 0; y < roi.height; ++y)
        for (int x = 0; x < roi.width; ++x) out.at(x, y) = img.at(roi.u0 + du + x, roi.v0 + dv + y);
    return out;
}

/// Min-max rescale to [0, 1]; a constant window maps to zeros.
inline Image2D normalized01(Image2D img) {
    if (img.data.empty()) return img;
    const auto [lo, hi] = std::minmax_element(img.data.begin(), img.data.end());
    const double a = *lo, range = *hi - *lo;
    for (double& v : img.data) v = range > 0.0 ? (v - a) / range : 0.0;
    return img;
}

/// Pattern intensity of the difference image i1 - i2: the mean over pixels of
/// the mean over in-window neighbors within radius r (the pixel itself
/// excluded) of delta^2 / (delta^2 + (d(p) - d(q))^2).
namespace detail {

// Number of in-window neighbors of every pixel; depends only on the shape.
inline std::vector<double> pi_counts(int W, int H, int r) {
    std::vector<double> count(static_cast<std::size_t>(W) * H, 0.0);
    for (int y = 0; y < H; ++y)
        for (int x = 0; x < W; ++x) {
            int c = 0;
            for (int dy = -r; dy <= r; ++dy)
                for (int dx = -r; dx <= r; ++dx) {
                    if ((dx == 0 && dy == 0) || dx * dx + dy * dy > r * r) continue;
                    if (x + dx >= 0 && x + dx < W && y + dy >= 0 && y + dy < H) ++c;
                }
            count[static_cast<std::size_t>(y) * W + x] = c;
        }
    return count;
}

inline double pattern_intensity(const Image2D& i1, const Image2D& i2, const PatternIntensityParams& p,
                                const std::vector<double>& count) {
    const int W = i1.width, H = i1.height;
    std::vector<double> diff(i1.data.size());
    for (std::size_t k = 0; k < diff.size(); ++k) diff[k] = i1.data[k] - i2.data[k];
    std::vector<double> acc(diff.size(), 0.0);
    const double d2 = p.delta * p.delta;
    const int r2 = p.r * p.r;
    // Each unordered neighbor pair is visited once through the half set of
    // offsets {dy > 0} U {dy == 0, dx > 0}; the term is credited to both ends.
    for (int dy = 0; dy <= p.r; ++dy) {
        for (int dx = -p.r; dx <= p.r; ++dx) {
            if (dy == 0 && dx <= 0) continue;
            if (dx * dx + dy * dy > r2) continue;
            const int x_lo = std::max(0, -dx), x_hi = std::min(W, W - dx);
            if (x_hi <= x_lo) continue;
            for (int y = 0; y + dy < H; ++y) {
                const double* a = diff.data() + static_cast<std::size_t>(y) * W;
                const double* b = diff.data() + static_cast<std::size_t>(y + dy) * W + dx;
                double* acc_a = acc.data() + static_cast<std::size_t>(y) * W;
                double* acc_b = acc.data() + static_cast<std::size_t>(y + dy) * W + dx;
                for (int x = x_lo; x < x_hi; ++x) {
                    const double e = a[x] - b[x];
                    const double term = d2 / (d2 + e * e);
                    acc_a[x] += term;
                    acc_b[x] += term;
                }
            }
        }
    }
    double total = 0.0;
    std::size_t n = 0;
    for (std::size_t k = 0; k < acc.size(); ++k) {
        if (count[k] > 0.0) {
            total += acc[k] / count[k];
            ++n;
        }
    }
    return n == 0 ? 1.0 : total / static_cast<double>(n);
}

} // namespace detail

inline double pattern_intensity(const Image2D& i1, const Image2D& i2, const PatternIntensityParams& p = {}) {
    p.validate();
    if (i1.width != i2.width || i1.height != i2.height)
        throw ValidationError("pattern_intensity: window dimensions differ");
    if (i1.width == 0 || i1.height == 0) throw ValidationError("pattern_intensity: empty window");
    return detail::pattern_intensity(i1, i2, p, detail::pi_counts(i1.width, i1.height, p.r));
}

/// Bounding box of the contour doubled about its center, clipped to the image.
inline Roi define_roi(const std::vector<Vec2>& epi, const SlicePlane& image) {
    if (epi.empty()) throw ValidationError("define_roi: empty contour");
    double x0 = epi[0].x(), x1 = x0, y0 = epi[0].y(), y1 = y0;
    for (const auto& q : epi) {
        x0 = std::min(x0, q.x());
        x1 = std::max(x1, q.x());
        y0 = std::min(y0, q.y());
        y1 = std::max(y1, q.y());
    }
    const int u0 = std::max(0, static_cast<int>(std::floor(1.5 * x0 - 0.5 * x1)));
    const int u1 = std::min(image.width() - 1, static_cast<int>(std::ceil(1.5 * x1 - 0.5 * x0)));
    const int v0 = std::max(0, static_cast<int>(std::floor(1.5 * y0 - 0.5 * y1)));
    const int v1 = std::min(image.height() - 1, static_cast<int>(std::ceil(1.5 * y1 - 0.5 * y0)));
    if (u1 < u0 || v1 < v0) throw ValidationError("define_roi: contour lies outside the image");
    return {u0, v0, u1 - u0 + 1, v1 - v0 + 1};
}

struct RegistrationResult {
    Shift shift;
    double score = 0.0;
    int candidates_evaluated = 0;
};

/// Exhaustive integer search: the cine ROI window is compared with the LGE
/// window displaced by (du, dv); the best shift maps cine pixel positions to
/// LGE pixel positions (x_lge = x_cine + shift). Both images must share the
/// pixel grid (resample the cine first).
inline RegistrationResult register_translation(const SlicePlane& cine, const SlicePlane& lge, const Roi& roi,
                                               int search_radius_px, const PatternIntensityParams& p = {},
                                               unsigned threads = 1) {
    p.validate();
    if (search_radius_px < 0) throw ValidationError("search radius must be non-negative");
    if (roi.width <= 0 || roi.height <= 0) throw ValidationError("empty ROI");
    if (roi.u0 < 0 || roi.v0 < 0 || roi.u1() >= cine.width() || roi.v1() >= cine.height())
        throw ValidationError("ROI exceeds the cine image");
    const Image2D ref = normalized01(window(cine.pixels, roi));
    const std::vector<double> count = detail::pi_counts(roi.width, roi.height, p.r);

    std::vector<Shift> cands;
    for (int du = -search_radius_px; du <= search_radius_px; ++du)
        for (int dv = -search_radius_px; dv <= search_radius_px; ++dv) cands.push_back({du, dv});
    std::vector<double> score(cands.size(), -1.0);
    std::vector<std::uint8_t> ok(cands.size(), 0);
    parallel_for(cands.size(), threads, [&](std::size_t c) {
        const Shift s = cands[c];
        if (roi.u0 + s.du < 0 || roi.v0 + s.dv < 0 || roi.u1() + s.du >= lge.width() ||
            roi.v1() + s.dv >= lge.height())
            return;
        score[c] = detail::pattern_intensity(ref, normalized01(window(lge.pixels, roi, s.du, s.dv)), p, count);
        ok[c] = 1;
    });

    RegistrationResult out;
    bool found = false;
    for (std::size_t c = 0; c < cands.size(); ++c) {
        if (!ok[c]) continue;
        ++out.candidates_evaluated;
        if (!found || score[c] > out.score || (score[c] == out.score && shift_preferred(cands[c], out.shift))) {
            out.shift = cands[c];
            out.score = score[c];
            found = true;
        }
    }
    if (!found) throw RegistrationError("no admissible shift: ROI leaves the LGE image for every candidate");
    return out;
}

inline std::vector<Vec2> propagate_contour(const std::vector<Vec2>& pts, const Shift& s) {
    std::vector<Vec2> out;
    out.reserve(pts.size());
    for (const auto& q : pts) out.push_back(q + Vec2(s.du, s.dv));
    return out;
}

inline PolarContour propagate_contour(PolarContour pc, const Shift& s) {
    pc.center += Vec2(s.du, s.dv);
    return pc;
}

} // namespace lvseg::reg
