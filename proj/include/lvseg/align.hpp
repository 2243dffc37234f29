#pragma once

// In-plane realignment of SA slices against LA slices. Each SA/LA pair is
// compared along the line where their planes meet; slices are translated by
// integer pixels to minimize the normalized MSSD of the two intensity tracks.

#include <cmath>
#include <limits>
#include <optional>
#include <vector>

#include "lvseg/error.hpp"
#include "lvseg/geometry.hpp"
#include "lvseg/parallel.hpp"

namespace lvseg::align {

inline constexpr std::size_t kMinSegmentSamples = 8;
// Worst possible normalized MSSD of two standardized vectors; charged for a
// pair that yields no usable samples at a candidate shift.
inline constexpr double kUnusablePenalty = 4.0;

namespace detail {

inline std::optional<double> try_normalized_mssd(const std::vector<double>& a, const std::vector<double>& b) {
    const std::size_t n = a.size();
    auto stats = [n](const std::vector<double>& x) {
        double mean = 0.0;
        for (double v : x) mean += v;
        mean /= static_cast<double>(n);
        double var = 0.0;
        for (double v : x) var += (v - mean) * (v - mean);
        return std::pair{mean, std::sqrt(var / static_cast<double>(n))};
    };
    const auto [ma, sa] = stats(a);
    const auto [mb, sb] = stats(b);
    // relative guard: a sample track that is flat up to rounding has no shape
    const double scale_a = std::max(std::abs(ma), 1.0), scale_b = std::max(std::abs(mb), 1.0);
    if (!(sa > 1e-12 * scale_a) || !(sb > 1e-12 * scale_b)) return std::nullopt;
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double d = (a[i] - ma) / sa - (b[i] - mb) / sb;
        acc += d * d;
    }
    return acc / static_cast<double>(n);
}

} // namespace detail

/// Mean squared difference of two vectors after standardizing each to zero
/// mean and unit standard deviation.
inline double normalized_mssd(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() != b.size()) throw ValidationError("normalized_mssd: length mismatch");
    if (a.size() < kMinSegmentSamples) throw ValidationError("normalized_mssd: fewer than 8 samples");
    if (auto v = detail::try_normalized_mssd(a, b)) return *v;
    throw DegenerateError("normalized_mssd: sample vector has zero standard deviation");
}

/// Same as above for sampled profiles; positions invalid in either are dropped.
inline double normalized_mssd(const Profile& a, const Profile& b) {
    if (a.size() != b.size()) throw ValidationError("normalized_mssd: length mismatch");
    std::vector<double> x, y;
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (a.ok(i) && b.ok(i)) {
            x.push_back(a.values[i]);
            y.push_back(b.values[i]);
        }
    }
    return normalized_mssd(x, y);
}

struct AlignOptions {
    int search_radius_px = 10;
    int max_passes = 3;
    bool realign_la = true; // LA sweep after each SA sweep
    unsigned threads = 1;
};

struct AlignmentResult {
    std::vector<Shift> sa_shifts;
    std::vector<bool> sa_alignable;
    std::vector<Shift> la_shifts;
    std::vector<double> residual_per_pass; // entry 0 is the residual before any move
    double residual = 0.0;
    int iterations = 0;
};

/// Two posed images whose in-plane offsets are varied without copying pixels.
class PairSampler {
public:
    PairSampler(const SlicePlane& sa, const SlicePlane& la) : sa_(&sa), la_(&la) {
        const auto line = plane_intersection_line(sa, la);
        if (!line) return;
        x0_ = line->first;
        dir_ = line->second;
        valid_ = true;
    }

    bool intersects() const { return valid_; }

    /// Normalized MSSD along the intersection at the given shifts; nullopt
    /// when the segment is too short or a track is flat.
    std::optional<double> residual(const Shift& sa_shift, const Shift& la_shift) const {
        if (!valid_) return std::nullopt;
        double lo = -1e300, hi = 1e300;
        if (!clip(*sa_, sa_shift, lo, hi) || !clip(*la_, la_shift, lo, hi)) return std::nullopt;
        // sample positions lie on a grid anchored on the line itself, so the
        // same world points are compared regardless of the clipping
        const double step = sa_->pixel_spacing;
        const long k0 = static_cast<long>(std::ceil(lo / step - 1e-9));
        const long k1 = static_cast<long>(std::floor(hi / step + 1e-9));
        if (k1 < k0) return std::nullopt;
        std::vector<double> a, b;
        a.reserve(static_cast<std::size_t>(k1 - k0 + 1));
        b.reserve(a.capacity());
        for (long k = k0; k <= k1; ++k) {
            const Vec3 p = x0_ + (k * step) * dir_;
            const Vec2 ua = world_to_image(p, *sa_) - Vec2(sa_shift.du, sa_shift.dv);
            const Vec2 ub = world_to_image(p, *la_) - Vec2(la_shift.du, la_shift.dv);
            const auto va = bilinear(sa_->pixels, ua.x(), ua.y());
            const auto vb = bilinear(la_->pixels, ub.x(), ub.y());
            if (va && vb) {
                a.push_back(*va);
                b.push_back(*vb);
            }
        }
        if (a.size() < kMinSegmentSamples) return std::nullopt;
        return detail::try_normalized_mssd(a, b);
    }

private:
    bool clip(const SlicePlane& img, const Shift& s, double& lo, double& hi) const {
        const Vec2 f0 = world_to_image(x0_, img) - Vec2(s.du, s.dv);
        const Vec2 df(dir_.dot(img.row_dir) / img.pixel_spacing, dir_.dot(img.col_dir) / img.pixel_spacing);
        return lvseg::detail::clip_parameter(f0.x(), df.x(), img.width() - 1, lo, hi) &&
               lvseg::detail::clip_parameter(f0.y(), df.y(), img.height() - 1, lo, hi);
    }

    const SlicePlane* sa_;
    const SlicePlane* la_;
    Vec3 x0_ = Vec3::Zero();
    Vec3 dir_ = Vec3::UnitX();
    bool valid_ = false;
};

namespace detail {

inline double pair_cost(const PairSampler& ps, const Shift& s, const Shift& l) {
    return ps.residual(s, l).value_or(kUnusablePenalty);
}

inline std::vector<Shift> candidate_shifts(int radius) {
    std::vector<Shift> out;
    for (int du = -radius; du <= radius; ++du)
        for (int dv = -radius; dv <= radius; ++dv) out.push_back({du, dv});
    return out;
}

// Pick the best candidate; the current shift is kept unless a candidate is
// strictly better or equally good and preferred by the tie rule.
inline Shift pick(const std::vector<Shift>& cands, const std::vector<double>& cost, const Shift& current,
                  double current_cost) {
    Shift best = current;
    double best_cost = current_cost;
    for (std::size_t i = 0; i < cands.size(); ++i) {
        if (cost[i] < best_cost || (cost[i] == best_cost && shift_preferred(cands[i], best))) {
            best = cands[i];
            best_cost = cost[i];
        }
    }
    return best;
}

} // namespace detail

/// Greedy coordinate descent over integer in-plane shifts. Each pass sweeps
/// the SA slices against the (fixed) LA slices, then optionally the LA slices
/// against the corrected SA stack. Shifts are absolute with respect to the
/// input poses and bounded by the search radius.
inline AlignmentResult realign(const std::vector<SlicePlane>& sa, const std::vector<SlicePlane>& la,
                               const AlignOptions& opt = {}) {
    if (opt.search_radius_px < 0) throw ValidationError("search radius must be non-negative");
    if (opt.max_passes < 0) throw ValidationError("max_passes must be non-negative");
    for (const auto& s : sa) s.validate();
    for (const auto& s : la) s.validate();

    AlignmentResult res;
    res.sa_shifts.assign(sa.size(), Shift{});
    res.la_shifts.assign(la.size(), Shift{});
    res.sa_alignable.assign(sa.size(), false);

    // samplers[i][j]: SA slice i against LA slice j
    std::vector<std::vector<PairSampler>> samplers(sa.size());
    for (std::size_t i = 0; i < sa.size(); ++i) {
        for (const auto& l : la) samplers[i].emplace_back(sa[i], l);
        for (const auto& ps : samplers[i])
            if (ps.residual({}, {})) res.sa_alignable[i] = true;
    }

    // only pairs that were usable at the input pose enter the objective
    std::vector<std::vector<bool>> active(sa.size(), std::vector<bool>(la.size(), false));
    for (std::size_t i = 0; i < sa.size(); ++i)
        for (std::size_t j = 0; j < la.size(); ++j) active[i][j] = samplers[i][j].residual({}, {}).has_value();

    auto total = [&] {
        double t = 0.0;
        for (std::size_t i = 0; i < sa.size(); ++i)
            for (std::size_t j = 0; j < la.size(); ++j)
                if (active[i][j]) t += detail::pair_cost(samplers[i][j], res.sa_shifts[i], res.la_shifts[j]);
        return t;
    };

    const auto cands = detail::candidate_shifts(opt.search_radius_px);
    std::vector<double> cost(cands.size());
    res.residual_per_pass.push_back(total());

    for (int pass = 0; pass < opt.max_passes; ++pass) {
        bool moved = false;
        for (std::size_t i = 0; i < sa.size(); ++i) {
            if (!res.sa_alignable[i]) continue;
            auto slice_cost = [&](const Shift& s) {
                double c = 0.0;
                for (std::size_t j = 0; j < la.size(); ++j)
                    if (active[i][j]) c += detail::pair_cost(samplers[i][j], s, res.la_shifts[j]);
                return c;
            };
            parallel_for(cands.size(), opt.threads, [&](std::size_t c) { cost[c] = slice_cost(cands[c]); });
            const Shift next = detail::pick(cands, cost, res.sa_shifts[i], slice_cost(res.sa_shifts[i]));
            if (!(next == res.sa_shifts[i])) {
                res.sa_shifts[i] = next;
                moved = true;
            }
        }
        if (opt.realign_la) {
            for (std::size_t j = 0; j < la.size(); ++j) {
                auto slice_cost = [&](const Shift& l) {
                    double c = 0.0;
                    for (std::size_t i = 0; i < sa.size(); ++i)
                        if (active[i][j]) c += detail::pair_cost(samplers[i][j], res.sa_shifts[i], l);
                    return c;
                };
                parallel_for(cands.size(), opt.threads, [&](std::size_t c) { cost[c] = slice_cost(cands[c]); });
                const Shift next = detail::pick(cands, cost, res.la_shifts[j], slice_cost(res.la_shifts[j]));
                if (!(next == res.la_shifts[j])) {
                    res.la_shifts[j] = next;
                    moved = true;
                }
            }
        }
        ++res.iterations;
        res.residual_per_pass.push_back(total());
        if (!moved) break;
    }
    res.residual = res.residual_per_pass.back();
    return res;
}

/// Apply the shifts of an alignment result to the slice poses.
inline std::vector<SlicePlane> apply_shifts(const std::vector<SlicePlane>& slices, const std::vector<Shift>& shifts) {
    if (slices.size() != shifts.size()) throw ValidationError("apply_shifts: size mismatch");
    std::vector<SlicePlane> out;
    out.reserve(slices.size());
    for (std::size_t i = 0; i < slices.size(); ++i) out.push_back(translated(slices[i], shifts[i]));
    return out;
}

} // namespace lvseg::align
