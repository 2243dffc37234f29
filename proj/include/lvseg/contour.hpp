#pragma once

#include <cmath>
#include <numbers>
#include <vector>

#include "lvseg/error.hpp"
#include "lvseg/geometry.hpp"

namespace lvseg {

/// Coupled endo/epi contours in radial form about a center: the endocardium
/// sits at center + n(theta) * w and the epicardium at center + n(theta) *
/// (w + t), with n(theta) = (cos theta, sin theta) in pixel axes.
struct PolarContour {
    Vec2 center = Vec2::Zero();
    std::vector<double> theta;
    std::vector<double> w;
    std::vector<double> t;
    // enhancement thickness and offset per ray; empty unless produced by detection
    std::vector<int> s;
    std::vector<int> d;

    std::size_t size() const { return theta.size(); }
    Vec2 direction(std::size_t k) const { return {std::cos(theta[k]), std::sin(theta[k])}; }
    Vec2 endo_point(std::size_t k) const { return center + direction(k) * w[k]; }
    Vec2 epi_point(std::size_t k) const { return center + direction(k) * (w[k] + t[k]); }

    std::vector<Vec2> endo_points() const {
        std::vector<Vec2> out;
        for (std::size_t k = 0; k < size(); ++k) out.push_back(endo_point(k));
        return out;
    }
    std::vector<Vec2> epi_points() const {
        std::vector<Vec2> out;
        for (std::size_t k = 0; k < size(); ++k) out.push_back(epi_point(k));
        return out;
    }
};

inline std::vector<double> even_angles(int n) {
    std::vector<double> a(static_cast<std::size_t>(n));
    for (int k = 0; k < n; ++k) a[k] = 2.0 * std::numbers::pi * k / n;
    return a;
}

/// Mean of all endo and epi contour points.
inline Vec2 joint_center(const std::vector<Vec2>& endo, const std::vector<Vec2>& epi) {
    Vec2 c = Vec2::Zero();
    for (const auto& p : endo) c += p;
    for (const auto& p : epi) c += p;
    return c / static_cast<double>(endo.size() + epi.size());
}

/// Radial parameterization of a pair of closed contours (pixel coordinates)
/// at n_theta even angles about `center`. With `strict`, each ray must cross
/// each contour exactly once; otherwise the farthest crossing is used.
inline PolarContour polar_from_contours(const Vec2& center, const std::vector<Vec2>& endo,
                                        const std::vector<Vec2>& epi, int n_theta, bool strict = false) {
    if (n_theta < 3) throw ValidationError("n_theta must be at least 3");
    if (endo.size() < 3 || epi.size() < 3) throw ValidationError("contours need at least 3 points");
    PolarContour pc;
    pc.center = center;
    pc.theta = even_angles(n_theta);
    pc.w.resize(n_theta);
    pc.t.resize(n_theta);
    for (int k = 0; k < n_theta; ++k) {
        const Vec2 dir(std::cos(pc.theta[k]), std::sin(pc.theta[k]));
        const auto he = ray_polygon_hits(endo, center, dir);
        const auto hp = ray_polygon_hits(epi, center, dir);
        if (he.empty() || hp.empty()) throw ParameterizationError("ray misses contour; center is outside");
        if (strict && (he.size() != 1 || hp.size() != 1))
            throw ParameterizationError("contour is not star-shaped about its centroid");
        pc.w[k] = he.back();
        pc.t[k] = hp.back() - he.back();
        if (strict && !(pc.t[k] > 0.0)) throw ParameterizationError("endocardium not inside epicardium");
    }
    return pc;
}

} // namespace lvseg
