#pragma once

// Parametric LV profile model. Every ray from the LV center crosses blood
// pool, myocardium (optionally enhanced) and then outer tissue; a template of
// that sequence is matched against the sampled intensities, and a chain
// energy couples neighboring rays. Produces weighted edge points for the mesh.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "lvseg/contour.hpp"
#include "lvseg/error.hpp"
#include "lvseg/geometry.hpp"

namespace lvseg::profile {

struct IntensityModel {
    double i_norm = 0.0;
    double i_blood = 0.0;
    double i_enhan = 0.0;
    double i_thres = 0.0;
    bool degenerate = false; // no second bright class was found

    void validate() const {
        if (!(i_norm < i_thres && i_thres < i_blood && i_blood <= i_enhan))
            throw ValidationError("intensity model must satisfy i_norm < i_thres < i_blood <= i_enhan");
    }
};

// ---------------------------------------------------------------------------
// intensity estimation

using Histogram256 = std::array<double, 256>;

/// Otsu split of a 256-bin histogram. Returns k in [1, 255]: bins >= k form
/// the upper class. Ties resolve to the lowest k.
inline int otsu_threshold(const Histogram256& hist) {
    int nonempty = 0;
    double total = 0.0, moment = 0.0;
    for (int i = 0; i < 256; ++i) {
        if (hist[i] < 0.0) throw ValidationError("histogram counts must be non-negative");
        if (hist[i] > 0.0) ++nonempty;
        total += hist[i];
        moment += i * hist[i];
    }
    if (nonempty < 2) throw DegenerateError("histogram has fewer than two nonempty bins");
    double w0 = 0.0, m0 = 0.0, best = -1.0;
    int best_k = 1;
    for (int k = 1; k < 256; ++k) {
        w0 += hist[k - 1];
        m0 += (k - 1) * hist[k - 1];
        const double w1 = total - w0;
        if (w0 <= 0.0 || w1 <= 0.0) continue;
        const double mu0 = m0 / w0, mu1 = (moment - m0) / w1;
        const double between = w0 * w1 * (mu0 - mu1) * (mu0 - mu1);
        if (between > best) {
            best = between;
            best_k = k;
        }
    }
    return best_k;
}

struct HistogramRange {
    double lo = 0.0;
    double hi = 1.0;
    double bin_width() const { return (hi - lo) / 256.0; }
    int bin(double v) const {
        if (!(hi > lo)) return 0;
        return std::clamp(static_cast<int>(std::floor((v - lo) / bin_width())), 0, 255);
    }
};

/// Two-class 1D k-means solved exactly: in 1D the optimal clusters are
/// contiguous in sorted order, so scan every split between distinct values
/// and keep the one with the largest between-class scatter (the first on
/// ties). Lloyd iterations from the extremes stall when a partial-volume
/// shoulder sits below the bright classes. Returns (lower, upper).
inline std::pair<double, double> two_means(std::vector<double> values) {
    if (values.empty()) throw ValidationError("two_means: empty input");
    std::sort(values.begin(), values.end());
    const std::size_t n = values.size();
    if (values.front() == values.back()) return {values.front(), values.front()};
    const double total = std::accumulate(values.begin(), values.end(), 0.0);
    double left = 0.0, best = -1.0, c0 = 0.0, c1 = 0.0;
    for (std::size_t i = 1; i < n; ++i) {
        left += values[i - 1];
        if (values[i - 1] == values[i]) continue;
        const double n0 = static_cast<double>(i), n1 = static_cast<double>(n - i);
        const double m0 = left / n0, m1 = (total - left) / n1;
        const double between = n0 * n1 * (m1 - m0) * (m1 - m0);
        if (between > best) {
            best = between;
            c0 = m0;
            c1 = m1;
        }
    }
    return {c0, c1};
}

/// Model from a pool of myocardium + blood pool intensities.
inline IntensityModel estimate_from_pool(const std::vector<double>& pool) {
    if (pool.empty()) throw ValidationError("estimate_intensities: empty pixel pool");
    const auto [lo_it, hi_it] = std::minmax_element(pool.begin(), pool.end());
    const HistogramRange range{*lo_it, *hi_it};
    if (!(range.hi > range.lo)) throw DegenerateError("estimate_intensities: all pooled pixels are identical");
    Histogram256 hist{};
    for (double v : pool) hist[range.bin(v)] += 1.0;
    const int k = otsu_threshold(hist);

    IntensityModel m;
    m.i_thres = range.lo + k * range.bin_width();
    std::vector<double> upper;
    double sum_low = 0.0;
    std::size_t n_low = 0;
    for (double v : pool) {
        if (range.bin(v) < k) {
            sum_low += v;
            ++n_low;
        } else {
            upper.push_back(v);
        }
    }
    m.i_norm = sum_low / static_cast<double>(n_low);
    std::vector<double> distinct = upper;
    std::sort(distinct.begin(), distinct.end());
    distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
    if (distinct.size() < 2) {
        m.i_blood = m.i_enhan = distinct.front();
        m.degenerate = true;
    } else {
        std::tie(m.i_blood, m.i_enhan) = two_means(upper);
    }
    return m;
}

/// Pixels whose centers fall inside a closed contour (pixel coordinates).
inline std::vector<double> pixels_inside(const SlicePlane& img, const std::vector<Vec2>& contour) {
    std::vector<double> out;
    if (contour.size() < 3) return out;
    double x0 = contour[0].x(), x1 = x0, y0 = contour[0].y(), y1 = y0;
    for (const auto& q : contour) {
        x0 = std::min(x0, q.x());
        x1 = std::max(x1, q.x());
        y0 = std::min(y0, q.y());
        y1 = std::max(y1, q.y());
    }
    const int u0 = std::max(0, static_cast<int>(std::ceil(x0))), u1 = std::min(img.width() - 1, static_cast<int>(std::floor(x1)));
    const int v0 = std::max(0, static_cast<int>(std::ceil(y0))), v1 = std::min(img.height() - 1, static_cast<int>(std::floor(y1)));
    for (int v = v0; v <= v1; ++v)
        for (int u = u0; u <= u1; ++u)
            if (point_in_polygon(contour, Vec2(u, v))) out.push_back(img.pixels.at(u, v));
    return out;
}

/// Pool the pixels inside each slice's epicardial contour and classify them.
inline IntensityModel estimate_intensities(const std::vector<SlicePlane>& sa_stack,
                                           const std::vector<std::vector<Vec2>>& epi_contours) {
    if (sa_stack.empty()) throw ValidationError("estimate_intensities: no slices");
    if (sa_stack.size() != epi_contours.size()) throw ValidationError("estimate_intensities: one contour per slice required");
    std::vector<double> pool;
    for (std::size_t k = 0; k < sa_stack.size(); ++k) {
        const auto px = pixels_inside(sa_stack[k], epi_contours[k]);
        pool.insert(pool.end(), px.begin(), px.end());
    }
    if (pool.size() < 100) throw ValidationError("estimate_intensities: contours enclose fewer than 100 pixels");
    return estimate_from_pool(pool);
}

// ---------------------------------------------------------------------------
// templates

struct TemplateParams {
    int w = 1;
    int t = 1;
    int s = 0;
    int d = 0;

    void validate() const {
        if (w < 1 || t < 1) throw ValidationError("template requires w >= 1 and t >= 1");
        if (s < 0 || d < 0 || s > t || d + s > t) throw ValidationError("template requires 0 <= s, d and d + s <= t");
    }
    friend bool operator==(const TemplateParams&, const TemplateParams&) = default;
};

namespace detail {

// Fill out[0, w+t) with the blood / myocardium runs.
inline void fill_wall(const TemplateParams& p, const IntensityModel& m, double* out) {
    struct Run {
        double value;
        int len;
        bool bright;
    };
    const Run runs[4] = {{m.i_blood, p.w, true}, {m.i_norm, p.d, false}, {m.i_enhan, p.s, true}, {m.i_norm, p.t - p.d - p.s, false}};
    int pos = 0;
    bool prev_bright = false, have_prev = false;
    for (const auto& r : runs) {
        if (r.len == 0) continue;
        for (int k = 0; k < r.len; ++k) out[pos + k] = r.value;
        if (have_prev && prev_bright && !r.bright) out[pos] = m.i_thres;
        pos += r.len;
        prev_bright = r.bright;
        have_prev = true;
    }
}

} // namespace detail

/// Template over total_len pixels: w blood, d normal, s enhanced, and the
/// rest of the wall normal; the first pixel of a dark run that follows a
/// bright run takes i_thres. Pixels past w + t are filled with i_norm.
inline std::vector<double> build_template(const TemplateParams& p, const IntensityModel& m, int total_len) {
    p.validate();
    if (total_len < p.w + p.t) throw ValidationError("template length shorter than w + t");
    std::vector<double> out(static_cast<std::size_t>(total_len), m.i_norm);
    detail::fill_wall(p, m, out.data());
    return out;
}

/// Template extended past the wall with the outer-tissue level. All
/// candidates on a ray are compared over this same fixed window.
inline std::vector<double> build_window_template(const TemplateParams& p, const IntensityModel& m, double i_outer,
                                                 int total_len) {
    p.validate();
    if (total_len < p.w + p.t) throw ValidationError("template length shorter than w + t");
    std::vector<double> out(static_cast<std::size_t>(total_len), i_outer);
    detail::fill_wall(p, m, out.data());
    return out;
}

/// Mean squared difference over the first w + t positions.
inline double match_error(const std::vector<double>& tmpl, const std::vector<double>& sample, int w, int t) {
    const std::size_t n = static_cast<std::size_t>(w + t);
    if (w < 0 || t < 0 || n == 0) throw ValidationError("match_error: w + t must be positive");
    if (sample.size() < n || tmpl.size() < n) throw ValidationError("match_error: sample shorter than w + t");
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) acc += (tmpl[i] - sample[i]) * (tmpl[i] - sample[i]);
    return acc / static_cast<double>(n);
}

/// Mean squared difference over the valid positions of the first `len`
/// samples; nullopt when none are valid.
inline std::optional<double> window_error(const std::vector<double>& tmpl, const Profile& sample, std::size_t len) {
    double acc = 0.0;
    std::size_t n = 0;
    for (std::size_t i = 0; i < len && i < sample.size() && i < tmpl.size(); ++i) {
        if (!sample.ok(i)) continue;
        const double e = tmpl[i] - sample.values[i];
        acc += e * e;
        ++n;
    }
    if (n == 0) return std::nullopt;
    return acc / static_cast<double>(n);
}

// ---------------------------------------------------------------------------
// per-ray match tables

/// E_match(w, t) over a band, minimized over (s, d) for each cell.
struct RayTable {
    int w_lo = 1, t_lo = 1, nw = 0, nt = 0;
    std::vector<double> cost;
    std::vector<int> best_s, best_d;
    bool valid = false;

    bool contains(int w, int t) const { return w >= w_lo && w < w_lo + nw && t >= t_lo && t < t_lo + nt; }
    std::size_t index(int w, int t) const { return static_cast<std::size_t>(w - w_lo) * nt + (t - t_lo); }
    double at(int w, int t) const { return valid ? cost[index(w, t)] : 0.0; }
};

/// Band of candidate values: [max(1, c - half), c + half].
inline std::pair<int, int> band_range(int center, int half) { return {std::max(1, center - half), center + half}; }

/// Fixed comparison window for a ray centered at (w0, t0): long enough to
/// hold the largest candidate wall plus two outer pixels.
inline int window_length(int w0, int t0, int half) { return w0 + t0 + 2 * half + 2; }

inline RayTable build_ray_table(const Profile& sample, const IntensityModel& m, double i_outer, int w0, int t0,
                                int half) {
    RayTable tab;
    const auto [wl, wh] = band_range(w0, half);
    const auto [tl, th] = band_range(t0, half);
    tab.w_lo = wl;
    tab.t_lo = tl;
    tab.nw = wh - wl + 1;
    tab.nt = th - tl + 1;
    const int len = window_length(w0, t0, half);
    if (sample.size() < static_cast<std::size_t>(len)) throw ValidationError("ray sample shorter than comparison window");
    tab.cost.assign(static_cast<std::size_t>(tab.nw) * tab.nt, 0.0);
    tab.best_s.assign(tab.cost.size(), 0);
    tab.best_d.assign(tab.cost.size(), 0);
    bool any_valid = false;
    for (int i = 0; i < len; ++i) any_valid = any_valid || sample.ok(i);
    if (!any_valid) return tab;
    tab.valid = true;
    std::vector<double> tmpl(static_cast<std::size_t>(len));
    for (int w = wl; w <= wh; ++w) {
        for (int t = tl; t <= th; ++t) {
            double best = std::numeric_limits<double>::infinity();
            int bs = 0, bd = 0;
            for (int s = 0; s <= t; ++s) {
                const int d_max = s == 0 ? 0 : t - s;
                for (int d = 0; d <= d_max; ++d) {
                    std::fill(tmpl.begin(), tmpl.end(), i_outer);
                    detail::fill_wall({w, t, s, d}, m, tmpl.data());
                    const double e = *window_error(tmpl, sample, static_cast<std::size_t>(len));
                    if (e < best) {
                        best = e;
                        bs = s;
                        bd = d;
                    }
                }
            }
            const auto k = tab.index(w, t);
            tab.cost[k] = best;
            tab.best_s[k] = bs;
            tab.best_d[k] = bd;
        }
    }
    return tab;
}

// ---------------------------------------------------------------------------
// chain energy and ICM

enum class ChainKind { Cyclic, Open };

struct ChainSolution {
    std::vector<int> w, t;
    std::vector<double> energy_trace; // entry 0: initial energy, then one per sweep
    int sweeps = 0;
    double energy = 0.0;
};

namespace detail {

inline int wrap(int i, int n) { return ((i % n) + n) % n; }

// Smoothness terms of the chain that involve index i, with (wi, ti) in place.
// Cyclic: first and second differences of w and t. Open: second differences
// of w, first and second differences of t.
inline double local_smooth(const std::vector<int>& w, const std::vector<int>& t, int i, int wi, int ti,
                           ChainKind kind) {
    const int n = static_cast<int>(w.size());
    auto W = [&](int k) { return wrap(k, n) == i ? wi : w[wrap(k, n)]; };
    auto T = [&](int k) { return wrap(k, n) == i ? ti : t[wrap(k, n)]; };
    auto in = [&](int k) { return kind == ChainKind::Cyclic || (k >= 0 && k < n); };
    double e = 0.0;
    // first differences on edges (i-1, i) and (i, i+1)
    for (int a : {i - 1, i}) {
        if (!in(a) || !in(a + 1)) continue;
        const double dt = T(a + 1) - T(a);
        e += dt * dt;
        if (kind == ChainKind::Cyclic) {
            const double dw = W(a + 1) - W(a);
            e += dw * dw;
        }
    }
    // second differences centered at i-1, i, i+1
    for (int c : {i - 1, i, i + 1}) {
        if (!in(c - 1) || !in(c) || !in(c + 1)) continue;
        if (kind == ChainKind::Cyclic && n < 3) continue;
        const double dw = W(c + 1) - 2.0 * W(c) + W(c - 1);
        const double dt = T(c + 1) - 2.0 * T(c) + T(c - 1);
        e += dw * dw + dt * dt;
    }
    return e;
}

} // namespace detail

inline double smoothness(const std::vector<int>& w, const std::vector<int>& t, ChainKind kind) {
    const int n = static_cast<int>(w.size());
    double e = 0.0;
    if (kind == ChainKind::Cyclic) {
        for (int i = 0; i < n; ++i) {
            const int j = (i + 1) % n, h = (i + n - 1) % n;
            const double dw = w[j] - w[i], dt = t[j] - t[i];
            e += dw * dw + dt * dt;
            if (n >= 3) {
                const double ww = w[j] - 2.0 * w[i] + w[h], tt = t[j] - 2.0 * t[i] + t[h];
                e += ww * ww + tt * tt;
            }
        }
    } else {
        for (int i = 0; i + 1 < n; ++i) {
            const double dt = t[i + 1] - t[i];
            e += dt * dt;
        }
        for (int i = 1; i + 1 < n; ++i) {
            const double ww = w[i + 1] - 2.0 * w[i] + w[i - 1], tt = t[i + 1] - 2.0 * t[i] + t[i - 1];
            e += ww * ww + tt * tt;
        }
    }
    return e;
}

inline double chain_energy(const std::vector<RayTable>& tables, const std::vector<int>& w, const std::vector<int>& t,
                           double lambda, ChainKind kind) {
    double e = 0.0;
    for (std::size_t i = 0; i < tables.size(); ++i) e += tables[i].at(w[i], t[i]);
    return e + lambda * smoothness(w, t, kind);
}

/// Iterated conditional modes: sweep the rays in order, moving each to the
/// band cell minimizing its local energy given its neighbors. Equal local
/// energies resolve toward smaller (w, t), so sweeps cannot cycle.
inline ChainSolution icm(const std::vector<RayTable>& tables, const std::vector<int>& w0, const std::vector<int>& t0,
                         double lambda, ChainKind kind, int max_sweeps = 50) {
    const int n = static_cast<int>(tables.size());
    if (w0.size() != tables.size() || t0.size() != tables.size()) throw ValidationError("icm: init size mismatch");
    if (lambda < 0.0) throw ValidationError("icm: lambda must be non-negative");
    if (kind == ChainKind::Cyclic && n < 3 && n > 0) throw ValidationError("icm: cyclic chain needs at least 3 rays");
    ChainSolution sol;
    sol.w = w0;
    sol.t = t0;
    for (int i = 0; i < n; ++i)
        if (tables[i].valid && !tables[i].contains(w0[i], t0[i])) throw ValidationError("icm: initial state outside band");
    sol.energy_trace.push_back(chain_energy(tables, sol.w, sol.t, lambda, kind));
    for (int sweep = 0; sweep < max_sweeps; ++sweep) {
        bool changed = false;
        for (int i = 0; i < n; ++i) {
            const RayTable& tab = tables[i];
            if (!tab.valid) continue;
            auto local = [&](int w, int t) {
                return tab.cost[tab.index(w, t)] + lambda * detail::local_smooth(sol.w, sol.t, i, w, t, kind);
            };
            int bw = sol.w[i], bt = sol.t[i];
            double best = local(bw, bt);
            for (int w = tab.w_lo; w < tab.w_lo + tab.nw; ++w) {
                for (int t = tab.t_lo; t < tab.t_lo + tab.nt; ++t) {
                    const double e = local(w, t);
                    if (e < best || (e == best && std::pair{w, t} < std::pair{bw, bt})) {
                        best = e;
                        bw = w;
                        bt = t;
                    }
                }
            }
            if (bw != sol.w[i] || bt != sol.t[i]) {
                sol.w[i] = bw;
                sol.t[i] = bt;
                changed = true;
            }
        }
        ++sol.sweeps;
        const double e = chain_energy(tables, sol.w, sol.t, lambda, kind);
        const double prev = sol.energy_trace.back();
        if (e > prev + 1e-9 * (1.0 + std::abs(prev)))
            throw NumericError("icm: chain energy increased during a sweep");
        sol.energy_trace.push_back(e);
        if (!changed) break;
    }
    sol.energy = sol.energy_trace.back();
    return sol;
}

// ---------------------------------------------------------------------------
// edge points and weights

enum class EdgeKind { Endo, Epi };

struct EdgePoint {
    Vec3 position = Vec3::Zero(); // world, mm
    EdgeKind kind = EdgeKind::Endo;
    SliceLabel source = SliceLabel::SA;
    double strength = 0.0; // S_i before normalization
    double weight = 0.0;   // omega_i in [0, 1]
    bool valid = true;     // false for rays without usable samples (weight stays 0)
};

using EdgePointSet = std::vector<EdgePoint>;

/// Sum of first- and second-order absolute differences at index j.
inline double edge_strength(const Profile& p, int j) {
    if (j < 1 || static_cast<std::size_t>(j) + 1 >= p.size())
        throw ValidationError("edge_strength: index needs a neighbor on both sides");
    if (!p.ok(j - 1) || !p.ok(j) || !p.ok(j + 1)) return 0.0;
    const double a = p.values[j - 1], b = p.values[j], c = p.values[j + 1];
    return std::abs(b - a) + std::abs(b - c) + 0.5 * std::abs(c - a);
}

/// Min-max normalization of one set of strengths; a flat set maps to all 1.
inline std::vector<double> normalize_strengths(const std::vector<double>& s) {
    std::vector<double> out(s.size(), 1.0);
    if (s.empty()) return out;
    const auto [lo, hi] = std::minmax_element(s.begin(), s.end());
    if (!(*hi > *lo)) return out;
    for (std::size_t i = 0; i < s.size(); ++i) out[i] = (s[i] - *lo) / (*hi - *lo);
    return out;
}

/// Normalize weights per (source image type, kind): SA endo, SA epi, and
/// each LA view's endo and epi separately. Invalid points get weight 0.
inline void assign_weights(EdgePointSet& pts) {
    for (SliceLabel src : {SliceLabel::SA, SliceLabel::LA4C, SliceLabel::LA2C}) {
        for (EdgeKind kind : {EdgeKind::Endo, EdgeKind::Epi}) {
            std::vector<std::size_t> idx;
            std::vector<double> s;
            for (std::size_t i = 0; i < pts.size(); ++i) {
                if (pts[i].source == src && pts[i].kind == kind && pts[i].valid) {
                    idx.push_back(i);
                    s.push_back(pts[i].strength);
                }
            }
            const auto w = normalize_strengths(s);
            for (std::size_t k = 0; k < idx.size(); ++k) pts[idx[k]].weight = w[k];
        }
    }
    for (auto& p : pts)
        if (!p.valid) p.weight = 0.0;
}

// ---------------------------------------------------------------------------
// detection

struct DetectConfig {
    double lambda = 0.005;
    int band = 7; // full band width; candidates lie within +-band/2 of the start
    int max_sweeps = 50;
    int outer_samples = 5; // pixels past the window used to estimate the outer level
    int n_interp = 4;      // LA only: l sub-steps per SA gap
};

struct RayResult {
    Profile sample;
    RayTable table;
    double i_outer = 0.0;
    int w0 = 1, t0 = 1;
};

namespace detail {

inline double median(std::vector<double> v) {
    if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

// Sample one ray and tabulate its band. The outer-tissue level is the median
// of the samples just past the comparison window.
inline RayResult analyze_ray(const SlicePlane& img, const Vec3& start, const Vec3& dir, int w0, int t0, int half,
                             const IntensityModel& m, int outer_samples) {
    RayResult r;
    r.w0 = std::max(1, w0);
    r.t0 = std::max(1, t0);
    const int len = window_length(r.w0, r.t0, half);
    r.sample = sample_along(img, Ray{start, dir, img.pixel_spacing, len + outer_samples});
    std::vector<double> outer;
    for (int i = len; i < len + outer_samples; ++i)
        if (r.sample.ok(i)) outer.push_back(r.sample.values[i]);
    // no outer pixels in view: assume the dark myocardial level continues
    r.i_outer = outer.empty() ? m.i_norm : median(outer);
    r.table = build_ray_table(r.sample, m, r.i_outer, r.w0, r.t0, half);
    return r;
}

inline void validate_config(const DetectConfig& cfg) {
    if (cfg.band < 1) throw ValidationError("band must be >= 1");
    if (cfg.lambda < 0.0) throw ValidationError("lambda must be non-negative");
    if (cfg.max_sweeps < 1) throw ValidationError("max_sweeps must be >= 1");
    if (cfg.outer_samples < 1) throw ValidationError("outer_samples must be >= 1");
    if (cfg.n_interp < 1) throw ValidationError("n_interp must be >= 1");
}

} // namespace detail

struct SaDetection {
    PolarContour contour; // center O_LV and per-ray (w, t, s, d), pixels
    EdgePointSet edges;   // endo then epi point per ray, ray order
    ChainSolution chain;
    std::vector<std::uint8_t> ray_valid;
};

/// Edge detection on one SA slice starting from a coarse radial contour
/// (w, t rounded to whole pixels to seed the band).
inline SaDetection detect_edges_sa(const SlicePlane& lge, const PolarContour& coarse, const IntensityModel& m,
                                   const DetectConfig& cfg = {}) {
    detail::validate_config(cfg);
    lge.validate();
    const int n = static_cast<int>(coarse.size());
    if (n < 3) throw ValidationError("detect_edges_sa: need at least 3 rays");
    const int half = cfg.band / 2;
    const Vec3 start = image_to_world(coarse.center, lge);

    std::vector<RayResult> rays(static_cast<std::size_t>(n));
    std::vector<RayTable> tables(static_cast<std::size_t>(n));
    std::vector<int> w0(n), t0(n);
    for (int k = 0; k < n; ++k) {
        const Vec2 d2 = coarse.direction(k);
        const Vec3 dir = (d2.x() * lge.row_dir + d2.y() * lge.col_dir).normalized();
        w0[k] = std::max(1, static_cast<int>(std::lround(coarse.w[k])));
        t0[k] = std::max(1, static_cast<int>(std::lround(coarse.t[k])));
        rays[k] = detail::analyze_ray(lge, start, dir, w0[k], t0[k], half, m, cfg.outer_samples);
        tables[k] = rays[k].table;
    }

    SaDetection out;
    out.chain = icm(tables, w0, t0, cfg.lambda, ChainKind::Cyclic, cfg.max_sweeps);
    out.contour.center = coarse.center;
    out.contour.theta = coarse.theta;
    out.contour.w.resize(n);
    out.contour.t.resize(n);
    out.contour.s.resize(n);
    out.contour.d.resize(n);
    out.ray_valid.resize(n);
    for (int k = 0; k < n; ++k) {
        const int w = out.chain.w[k], t = out.chain.t[k];
        const RayTable& tab = tables[k];
        out.contour.w[k] = w;
        out.contour.t[k] = t;
        out.contour.s[k] = tab.valid ? tab.best_s[tab.index(w, t)] : 0;
        out.contour.d[k] = tab.valid ? tab.best_d[tab.index(w, t)] : 0;
        out.ray_valid[k] = tab.valid ? 1 : 0;
        EdgePoint endo, epi;
        endo.kind = EdgeKind::Endo;
        epi.kind = EdgeKind::Epi;
        endo.source = epi.source = SliceLabel::SA;
        endo.position = image_to_world(out.contour.endo_point(k), lge);
        epi.position = image_to_world(out.contour.epi_point(k), lge);
        endo.valid = epi.valid = tab.valid;
        if (tab.valid) {
            endo.strength = edge_strength(rays[k].sample, w);
            epi.strength = edge_strength(rays[k].sample, w + t);
        }
        out.edges.push_back(endo);
        out.edges.push_back(epi);
    }
    return out;
}

/// Convenience: seed from rigid contours (pixel coordinates). O_LV is the
/// mean of all endo and epi points.
inline SaDetection detect_edges_sa(const SlicePlane& lge, const std::vector<Vec2>& endo, const std::vector<Vec2>& epi,
                                   const IntensityModel& m, int n_theta, const DetectConfig& cfg = {}) {
    const PolarContour coarse = polar_from_contours(joint_center(endo, epi), endo, epi, n_theta, false);
    return detect_edges_sa(lge, coarse, m, cfg);
}

// ---------------------------------------------------------------------------
// long-axis detection

struct AxialContour {
    std::vector<double> l;       // position along the SA normal, mm, increasing
    std::vector<Vec3> axis;      // central-axis point per l (world)
    std::vector<Vec3> direction; // ray direction per l (world, in the LA plane)
    std::vector<int> w, t, s, d; // pixels along the ray
    ChainSolution chain;
};

struct LaDetection {
    SliceLabel label = SliceLabel::LA4C;
    bool skipped = false;
    std::string warning;
    std::array<AxialContour, 2> sides;
    EdgePointSet edges;
};

/// Crossings of a closed planar 3D polygon with a plane.
inline std::vector<Vec3> polygon_plane_crossings(const std::vector<Vec3>& poly, const SlicePlane& plane) {
    std::vector<Vec3> out;
    const Vec3 n = plane.normal();
    const std::size_t m = poly.size();
    for (std::size_t i = 0; i < m; ++i) {
        const Vec3& a = poly[i];
        const Vec3& b = poly[(i + 1) % m];
        const double sa = (a - plane.origin).dot(n), sb = (b - plane.origin).dot(n);
        if ((sa > 0.0) == (sb > 0.0)) continue;
        out.push_back(a + (sa / (sa - sb)) * (b - a));
    }
    return out;
}

/// Edge detection on one LA image. The rigid SA contours (world) are cut by
/// the LA plane; per SA slice the four crossings give the central-axis point
/// and the initial wall on each side. Rays run perpendicular to the axis.
inline LaDetection detect_edges_la(const SlicePlane& la, const std::vector<SlicePlane>& sa_planes,
                                   const std::vector<std::vector<Vec3>>& endo_world,
                                   const std::vector<std::vector<Vec3>>& epi_world, const IntensityModel& m,
                                   const DetectConfig& cfg = {}) {
    detail::validate_config(cfg);
    la.validate();
    if (sa_planes.size() != endo_world.size() || sa_planes.size() != epi_world.size())
        throw ValidationError("detect_edges_la: one contour pair per SA slice required");
    LaDetection out;
    out.label = la.label;
    if (sa_planes.empty()) {
        out.skipped = true;
        out.warning = "no SA slices";
        return out;
    }
    const Vec3 axis_dir = sa_planes.front().normal().normalized();
    const Vec3 n_la = la.normal();
    const Vec3 lateral_raw = n_la.cross(axis_dir);
    if (lateral_raw.norm() < 1e-9) {
        out.skipped = true;
        out.warning = "LA plane parallel to SA slices";
        return out;
    }
    const Vec3 lateral = lateral_raw.normalized();

    struct Node {
        double l;
        Vec3 c;
        double w0[2], t0[2];
    };
    std::vector<Node> nodes;
    for (std::size_t k = 0; k < sa_planes.size(); ++k) {
        const auto en = polygon_plane_crossings(endo_world[k], la);
        const auto ep = polygon_plane_crossings(epi_world[k], la);
        if (en.size() != 2 || ep.size() != 2) continue;
        const Vec3 c = (en[0] + en[1] + ep[0] + ep[1]) / 4.0;
        Node nd{c.dot(axis_dir), c, {0, 0}, {0, 0}};
        bool ok = true;
        for (int side = 0; side < 2 && ok; ++side) {
            const double sign = side == 0 ? 1.0 : -1.0;
            double we = -1, wp = -1;
            for (const auto& p : en)
                if (sign * (p - c).dot(lateral) > 0) we = sign * (p - c).dot(lateral);
            for (const auto& p : ep)
                if (sign * (p - c).dot(lateral) > 0) wp = sign * (p - c).dot(lateral);
            if (we <= 0 || wp <= we) ok = false;
            nd.w0[side] = we / la.pixel_spacing;
            nd.t0[side] = (wp - we) / la.pixel_spacing;
        }
        if (ok) nodes.push_back(nd);
    }
    if (nodes.size() < 3) {
        out.skipped = true;
        out.warning = "fewer than 3 SA slices intersect " + to_string(la.label);
        return out;
    }
    std::sort(nodes.begin(), nodes.end(), [](const Node& a, const Node& b) { return a.l < b.l; });

    // densify between neighboring slices
    std::vector<Node> dense;
    for (std::size_t k = 0; k + 1 < nodes.size(); ++k) {
        for (int q = 0; q < cfg.n_interp; ++q) {
            const double f = static_cast<double>(q) / cfg.n_interp;
            Node nd;
            nd.l = nodes[k].l + f * (nodes[k + 1].l - nodes[k].l);
            nd.c = nodes[k].c + f * (nodes[k + 1].c - nodes[k].c);
            for (int s = 0; s < 2; ++s) {
                nd.w0[s] = nodes[k].w0[s] + f * (nodes[k + 1].w0[s] - nodes[k].w0[s]);
                nd.t0[s] = nodes[k].t0[s] + f * (nodes[k + 1].t0[s] - nodes[k].t0[s]);
            }
            dense.push_back(nd);
        }
    }
    dense.push_back(nodes.back());
    const int n = static_cast<int>(dense.size());
    const int half = cfg.band / 2;

    for (int side = 0; side < 2; ++side) {
        AxialContour& ax = out.sides[side];
        const double sign = side == 0 ? 1.0 : -1.0;
        std::vector<RayResult> rays(n);
        std::vector<RayTable> tables(n);
        std::vector<int> w0(n), t0(n);
        for (int i = 0; i < n; ++i) {
            const Vec3 tangent = (dense[std::min(i + 1, n - 1)].c - dense[std::max(i - 1, 0)].c).normalized();
            Vec3 dir = n_la.cross(tangent).normalized();
            if (sign * dir.dot(lateral) < 0) dir = -dir;
            w0[i] = std::max(1, static_cast<int>(std::lround(dense[i].w0[side])));
            t0[i] = std::max(1, static_cast<int>(std::lround(dense[i].t0[side])));
            rays[i] = detail::analyze_ray(la, dense[i].c, dir, w0[i], t0[i], half, m, cfg.outer_samples);
            tables[i] = rays[i].table;
            ax.l.push_back(dense[i].l);
            ax.axis.push_back(dense[i].c);
            ax.direction.push_back(dir);
        }
        ax.chain = icm(tables, w0, t0, cfg.lambda, ChainKind::Open, cfg.max_sweeps);
        for (int i = 0; i < n; ++i) {
            const int w = ax.chain.w[i], t = ax.chain.t[i];
            const RayTable& tab = tables[i];
            ax.w.push_back(w);
            ax.t.push_back(t);
            ax.s.push_back(tab.valid ? tab.best_s[tab.index(w, t)] : 0);
            ax.d.push_back(tab.valid ? tab.best_d[tab.index(w, t)] : 0);
            EdgePoint endo, epi;
            endo.kind = EdgeKind::Endo;
            epi.kind = EdgeKind::Epi;
            endo.source = epi.source = la.label;
            endo.position = ax.axis[i] + (w * la.pixel_spacing) * ax.direction[i];
            epi.position = ax.axis[i] + ((w + t) * la.pixel_spacing) * ax.direction[i];
            endo.valid = epi.valid = tab.valid;
            if (tab.valid) {
                endo.strength = edge_strength(rays[i].sample, w);
                epi.strength = edge_strength(rays[i].sample, w + t);
            }
            out.edges.push_back(endo);
            out.edges.push_back(epi);
        }
    }
    return out;
}

} // namespace lvseg::profile
