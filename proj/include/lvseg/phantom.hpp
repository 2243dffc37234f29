#pragma once

// Procedural left-ventricle phantom: a tapered shell with elliptical cross
// sections, a transmural infarct wedge, and a matching cine volume acquired
// at a different cardiac/respiratory phase. Every contour is known
// analytically, which makes the phantom the ground truth for the pipeline.

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <vector>

#include "lvseg/contour.hpp"
#include "lvseg/error.hpp"
#include "lvseg/geometry.hpp"

namespace lvseg::phantom {

struct InfarctSpec {
    bool enabled = true;
    double azimuth_center_deg = 100.0;
    double azimuth_span_deg = 100.0;
    double long_extent_mm = 50.0;
    double transmurality = 1.0;
};

struct TissueIntensities {
    double blood = 180.0;
    double myo = 60.0;
    double infarct = 220.0;
    double background = 110.0;
};

struct PhantomSpec {
    double voxel_mm = 1.34;
    int n_sa_slices = 8;
    double slice_thickness_mm = 7.0;
    double slice_gap_mm = 3.0;
    double first_slice_mm = 5.0;   // center of the most basal SA slice below the base plane
    double lv_long_axis_mm = 80.0; // base plane (z = 0) to the apical cap
    double endo_radius_base_mm = 25.0;
    double endo_radius_apex_mm = 10.0;
    double wall_thickness_mm = 10.0;
    double ellipticity = 0.05; // semi-axes r*(1+e), r*(1-e)
    InfarctSpec infarct;
    TissueIntensities intensities;
    double noise_sigma = 0.05; // fraction of the blood mean
    std::uint64_t seed = 1;
    int image_size_px = 160;
    double la2c_azimuth_deg = 0.0;
    double la4c_azimuth_deg = 60.0;
    // cine phase: wall thickened, cavity shrunk, whole heart translated in-plane
    double cine_wall_scale = 1.15;
    double cine_endo_scale = 0.95;
    Vec2 cine_offset_mm = Vec2(4.0, 0.0);

    double slice_pitch_mm() const { return slice_thickness_mm + slice_gap_mm; }
    double slice_center_mm(int k) const { return first_slice_mm + k * slice_pitch_mm(); }

    void validate() const {
        auto fail = [](const char* m) { throw ValidationError(std::string("phantom spec: ") + m); };
        if (!(voxel_mm > 0.0)) fail("voxel_mm must be positive");
        if (n_sa_slices < 3) fail("need at least 3 SA slices");
        if (!(slice_thickness_mm > 0.0) || slice_gap_mm < 0.0) fail("invalid slice thickness/gap");
        if (!(lv_long_axis_mm > 0.0)) fail("lv_long_axis_mm must be positive");
        if (!(endo_radius_base_mm > 0.0) || !(endo_radius_apex_mm > 0.0)) fail("radii must be positive");
        if (!(wall_thickness_mm > 0.0)) fail("wall thickness must be positive");
        if (!(wall_thickness_mm < endo_radius_base_mm)) fail("wall thickness must be below the basal endo radius");
        if (!(ellipticity >= 0.0 && ellipticity < 0.5)) fail("ellipticity must lie in [0, 0.5)");
        if (!(infarct.azimuth_span_deg > 0.0 && infarct.azimuth_span_deg <= 360.0))
            fail("infarct azimuth span must lie in (0, 360]");
        if (!(infarct.transmurality > 0.0 && infarct.transmurality <= 1.0))
            fail("infarct transmurality must lie in (0, 1]");
        if (infarct.long_extent_mm < 0.0) fail("infarct extent must be non-negative");
        if (noise_sigma < 0.0) fail("noise_sigma must be non-negative");
        if (image_size_px < 16) fail("image too small");
        if (!(cine_wall_scale > 0.0) || !(cine_endo_scale > 0.0)) fail("cine scales must be positive");
        if (slice_center_mm(n_sa_slices - 1) + slice_thickness_mm / 2 > lv_long_axis_mm)
            fail("SA stack extends past the apex");
    }
};

enum class Tissue : std::uint8_t { Background = 0, Blood = 1, Myocardium = 2, Infarct = 3 };

/// Analytic shell geometry for one acquisition phase.
struct ShellModel {
    const PhantomSpec* spec = nullptr;
    double endo_scale = 1.0;
    double wall_scale = 1.0;
    Vec2 center = Vec2::Zero(); // world (x, y) of the long axis
    bool with_infarct = true;

    double endo_radius(double z) const {
        const double zc = std::clamp(z, 0.0, spec->lv_long_axis_mm);
        const double f = zc / spec->lv_long_axis_mm;
        return endo_scale * (spec->endo_radius_base_mm + f * (spec->endo_radius_apex_mm - spec->endo_radius_base_mm));
    }
    double wall() const { return wall_scale * spec->wall_thickness_mm; }

    // semi-axes (a along x, b along y)
    Vec2 endo_axes(double z) const {
        const double r = endo_radius(z);
        return {r * (1.0 + spec->ellipticity), r * (1.0 - spec->ellipticity)};
    }
    Vec2 epi_axes(double z) const { return endo_axes(z) + Vec2::Constant(wall()); }

    static double ellipse_radius(const Vec2& ax, double phi) {
        const double c = std::cos(phi), s = std::sin(phi);
        return ax.x() * ax.y() / std::sqrt((ax.y() * c) * (ax.y() * c) + (ax.x() * s) * (ax.x() * s));
    }
    static double ellipse_level(const Vec2& ax, const Vec2& p) {
        return (p.x() / ax.x()) * (p.x() / ax.x()) + (p.y() / ax.y()) * (p.y() / ax.y());
    }

    double infarct_center_z() const {
        return 0.5 * (spec->slice_center_mm(0) + spec->slice_center_mm(spec->n_sa_slices - 1));
    }

    bool in_infarct_wedge(const Vec2& rel, double z) const {
        const auto& inf = spec->infarct;
        if (!with_infarct || !inf.enabled) return false;
        if (std::abs(z - infarct_center_z()) > inf.long_extent_mm / 2) return false;
        const double phi = std::atan2(rel.y(), rel.x()) * 180.0 / std::numbers::pi;
        double delta = std::fmod(phi - inf.azimuth_center_deg, 360.0);
        if (delta > 180.0) delta -= 360.0;
        if (delta < -180.0) delta += 360.0;
        if (std::abs(delta) > inf.azimuth_span_deg / 2) return false;
        const double ang = std::atan2(rel.y(), rel.x());
        const double r_in = ellipse_radius(endo_axes(z), ang);
        const double r_out = ellipse_radius(epi_axes(z), ang);
        const double depth = (rel.norm() - r_in) / (r_out - r_in);
        return depth <= inf.transmurality;
    }

    Tissue label(const Vec3& p) const {
        const Vec2 rel(p.x() - center.x(), p.y() - center.y());
        const double z = p.z();
        const double L = spec->lv_long_axis_mm;
        if (z < 0.0) return Tissue::Background;
        if (z <= L) {
            if (ellipse_level(endo_axes(z), rel) < 1.0) return Tissue::Blood;
            if (ellipse_level(epi_axes(z), rel) < 1.0)
                return in_infarct_wedge(rel, z) ? Tissue::Infarct : Tissue::Myocardium;
            return Tissue::Background;
        }
        if (z <= L + wall() && ellipse_level(epi_axes(L), rel) < 1.0) return Tissue::Myocardium;
        return Tissue::Background;
    }

    std::vector<Vec3> endo_contour(double z, int n = 720) const { return ring(endo_axes(z), z, n); }
    std::vector<Vec3> epi_contour(double z, int n = 720) const { return ring(epi_axes(z), z, n); }

private:
    std::vector<Vec3> ring(const Vec2& ax, double z, int n) const {
        std::vector<Vec3> out;
        out.reserve(n);
        for (int k = 0; k < n; ++k) {
            const double a = 2.0 * std::numbers::pi * k / n;
            out.emplace_back(center.x() + ax.x() * std::cos(a), center.y() + ax.y() * std::sin(a), z);
        }
        return out;
    }
};

struct SliceTruth {
    std::vector<Vec3> endo; // world mm, closed
    std::vector<Vec3> epi;
    Image2D infarct;        // 1 where the slice center plane is infarcted
};

struct LongAxisTruth {
    SliceLabel label = SliceLabel::LA4C;
    std::vector<Vec3> endo_left, endo_right, epi_left, epi_right; // base -> apex
};

struct GroundTruth {
    std::vector<SliceTruth> sa;
    std::vector<LongAxisTruth> la;
};

struct Phantom {
    std::vector<SlicePlane> lge_sa;
    SlicePlane lge_la4c;
    SlicePlane lge_la2c;
    std::vector<SlicePlane> cine_sa;
    GroundTruth truth_lge;
    GroundTruth truth_cine;
    Vec2 cine_offset_mm = Vec2::Zero();
};

/// Voxel volume on a grid aligned with the SA slices.
struct Volume {
    int nx = 0, ny = 0, nz = 0;
    double vx = 1.0;      // in-plane voxel size
    double vz = 1.0;      // through-plane voxel size
    Vec3 origin;          // world position of voxel (0,0,0)
    std::vector<double> data;

    double at(int i, int j, int k) const {
        return data[(static_cast<std::size_t>(k) * ny + j) * nx + i];
    }
    double& at(int i, int j, int k) { return data[(static_cast<std::size_t>(k) * ny + j) * nx + i]; }

    /// Trilinear interpolation; coordinates outside the grid clamp to the border.
    double trilinear(const Vec3& p) const {
        const double fx = std::clamp((p.x() - origin.x()) / vx, 0.0, nx - 1.0);
        const double fy = std::clamp((p.y() - origin.y()) / vx, 0.0, ny - 1.0);
        const double fz = std::clamp((p.z() - origin.z()) / vz, 0.0, nz - 1.0);
        const int i0 = std::min(static_cast<int>(fx), nx - 2), j0 = std::min(static_cast<int>(fy), ny - 2),
                  k0 = std::min(static_cast<int>(fz), nz - 2);
        const double a = fx - i0, b = fy - j0, c = fz - k0;
        double acc = 0.0;
        double base = at(i0, j0, k0);
        // accumulate deviations from one corner so uniform regions stay exact
        for (int dk = 0; dk <= 1; ++dk)
            for (int dj = 0; dj <= 1; ++dj)
                for (int di = 0; di <= 1; ++di) {
                    const double wgt = (di ? a : 1 - a) * (dj ? b : 1 - b) * (dk ? c : 1 - c);
                    acc += wgt * (at(i0 + di, j0 + dj, k0 + dk) - base);
                }
        return base + acc;
    }
};

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

inline double tissue_value(Tissue t, const TissueIntensities& m) {
    switch (t) {
        case Tissue::Blood: return m.blood;
        case Tissue::Myocardium: return m.myo;
        case Tissue::Infarct: return m.infarct;
        case Tissue::Background: return m.background;
    }
    return m.background;
}

inline constexpr double kZMin = -20.0;
inline double z_max(const PhantomSpec& s) { return s.lv_long_axis_mm + s.wall_thickness_mm * 1.5 + 20.0; }

// Sample a labeled volume; each z layer draws its noise from an independent
// stream keyed by (seed, volume id, layer) so layers can be filled in any order.
inline Volume render_volume(const PhantomSpec& spec, const ShellModel& shell, std::uint64_t volume_id) {
    Volume vol;
    vol.nx = vol.ny = spec.image_size_px;
    vol.vx = vol.vz = spec.voxel_mm;
    const double zlo = kZMin;
    vol.nz = static_cast<int>(std::ceil((z_max(spec) - zlo) / spec.voxel_mm)) + 1;
    const double half = spec.image_size_px / 2;
    vol.origin = Vec3(-half * spec.voxel_mm, -half * spec.voxel_mm, zlo);
    vol.data.assign(static_cast<std::size_t>(vol.nx) * vol.ny * vol.nz, 0.0);
    const double sigma = spec.noise_sigma * spec.intensities.blood;
    for (int k = 0; k < vol.nz; ++k) {
        std::mt19937_64 rng(splitmix64(spec.seed ^ splitmix64((volume_id << 32) ^ static_cast<std::uint64_t>(k))));
        std::normal_distribution<double> noise(0.0, sigma > 0 ? sigma : 1.0);
        const double z = vol.origin.z() + k * vol.vz;
        for (int j = 0; j < vol.ny; ++j) {
            for (int i = 0; i < vol.nx; ++i) {
                const Vec3 p(vol.origin.x() + i * vol.vx, vol.origin.y() + j * vol.vx, z);
                double v = tissue_value(shell.label(p), spec.intensities);
                if (sigma > 0) v += noise(rng);
                vol.at(i, j, k) = v;
            }
        }
    }
    return vol;
}

inline SlicePlane sa_geometry(const PhantomSpec& spec, int k) {
    SlicePlane s;
    const double half = spec.image_size_px / 2;
    s.origin = Vec3(-half * spec.voxel_mm, -half * spec.voxel_mm, spec.slice_center_mm(k));
    s.row_dir = Vec3::UnitX();
    s.col_dir = Vec3::UnitY();
    s.pixel_spacing = spec.voxel_mm;
    s.thickness = spec.slice_thickness_mm;
    s.label = SliceLabel::SA;
    s.pixels = Image2D(spec.image_size_px, spec.image_size_px);
    return s;
}

// SA slice = overlap-weighted average of the voxel layers inside its slab.
inline SlicePlane render_sa(const PhantomSpec& spec, const Volume& vol, int k) {
    SlicePlane s = sa_geometry(spec, k);
    const double zc = spec.slice_center_mm(k);
    const double lo = zc - spec.slice_thickness_mm / 2, hi = zc + spec.slice_thickness_mm / 2;
    std::vector<std::pair<int, double>> layers;
    double wsum = 0.0;
    for (int l = 0; l < vol.nz; ++l) {
        const double z = vol.origin.z() + l * vol.vz;
        const double ov = std::min(hi, z + vol.vz / 2) - std::max(lo, z - vol.vz / 2);
        if (ov > 0) {
            layers.emplace_back(l, ov);
            wsum += ov;
        }
    }
    for (auto& [l, w] : layers) w /= wsum;
    for (int j = 0; j < vol.ny; ++j) {
        for (int i = 0; i < vol.nx; ++i) {
            const double base = vol.at(i, j, layers.front().first);
            double acc = 0.0;
            for (const auto& [l, w] : layers) acc += w * (vol.at(i, j, l) - base);
            s.pixels.at(i, j) = base + acc;
        }
    }
    return s;
}

inline SlicePlane la_geometry(const PhantomSpec& spec, double azimuth_deg, SliceLabel label) {
    SlicePlane s;
    const double a = deg2rad(azimuth_deg);
    s.row_dir = Vec3(std::cos(a), std::sin(a), 0.0);
    s.col_dir = Vec3::UnitZ();
    s.pixel_spacing = spec.voxel_mm;
    s.thickness = spec.slice_thickness_mm;
    s.label = label;
    const int w = spec.image_size_px;
    const int h = static_cast<int>(std::ceil((z_max(spec) - kZMin) / spec.voxel_mm)) + 1;
    s.origin = -(w / 2) * spec.voxel_mm * s.row_dir + Vec3(0, 0, kZMin);
    s.pixels = Image2D(w, h);
    return s;
}

// LA slice = average over the slab thickness of trilinear volume samples.
inline SlicePlane render_la(const PhantomSpec& spec, const Volume& vol, double azimuth_deg, SliceLabel label) {
    SlicePlane s = la_geometry(spec, azimuth_deg, label);
    const Vec3 n = s.normal();
    constexpr int kSub = 11;
    for (int v = 0; v < s.height(); ++v) {
        for (int u = 0; u < s.width(); ++u) {
            const Vec3 p = image_to_world(Vec2(u, v), s);
            double base = 0.0, acc = 0.0;
            for (int m = 0; m < kSub; ++m) {
                const double off = -spec.slice_thickness_mm / 2 + (m + 0.5) * spec.slice_thickness_mm / kSub;
                const double val = vol.trilinear(p + off * n);
                if (m == 0) base = val;
                acc += (val - base) / kSub;
            }
            s.pixels.at(u, v) = base + acc;
        }
    }
    return s;
}

inline GroundTruth make_truth(const PhantomSpec& spec, const ShellModel& shell,
                              const std::vector<SlicePlane>& sa, bool la_curves) {
    GroundTruth gt;
    for (int k = 0; k < spec.n_sa_slices; ++k) {
        SliceTruth st;
        const double z = spec.slice_center_mm(k);
        st.endo = shell.endo_contour(z);
        st.epi = shell.epi_contour(z);
        st.infarct = Image2D(sa[k].width(), sa[k].height());
        for (int v = 0; v < sa[k].height(); ++v)
            for (int u = 0; u < sa[k].width(); ++u)
                st.infarct.at(u, v) = shell.label(image_to_world(Vec2(u, v), sa[k])) == Tissue::Infarct ? 1.0 : 0.0;
        gt.sa.push_back(std::move(st));
    }
    if (la_curves) {
        for (auto [label, az] : {std::pair{SliceLabel::LA4C, spec.la4c_azimuth_deg},
                                 std::pair{SliceLabel::LA2C, spec.la2c_azimuth_deg}}) {
            LongAxisTruth lt;
            lt.label = label;
            const double right = deg2rad(az), left = right + std::numbers::pi;
            const Vec3 c(shell.center.x(), shell.center.y(), 0.0);
            auto at = [&](const Vec2& ax, double phi, double z) {
                const double r = ShellModel::ellipse_radius(ax, phi);
                return Vec3(c.x() + r * std::cos(phi), c.y() + r * std::sin(phi), z);
            };
            for (double z = 0.0; z <= spec.lv_long_axis_mm + 1e-9; z += spec.voxel_mm / 2) {
                lt.endo_right.push_back(at(shell.endo_axes(z), right, z));
                lt.endo_left.push_back(at(shell.endo_axes(z), left, z));
                lt.epi_right.push_back(at(shell.epi_axes(z), right, z));
                lt.epi_left.push_back(at(shell.epi_axes(z), left, z));
            }
            gt.la.push_back(std::move(lt));
        }
    }
    return gt;
}

} // namespace detail

/// Synthesize LGE (SA stack + 4C + 2C) and cine SA images with ground truth.
inline Phantom generate(const PhantomSpec& spec) {
    spec.validate();
    Phantom ph;
    ph.cine_offset_mm = spec.cine_offset_mm;

    ShellModel lge{&spec, 1.0, 1.0, Vec2::Zero(), true};
    {
        const Volume vol = detail::render_volume(spec, lge, 0);
        for (int k = 0; k < spec.n_sa_slices; ++k) ph.lge_sa.push_back(detail::render_sa(spec, vol, k));
        ph.lge_la4c = detail::render_la(spec, vol, spec.la4c_azimuth_deg, SliceLabel::LA4C);
        ph.lge_la2c = detail::render_la(spec, vol, spec.la2c_azimuth_deg, SliceLabel::LA2C);
    }
    ph.truth_lge = detail::make_truth(spec, lge, ph.lge_sa, true);

    ShellModel cine{&spec, spec.cine_endo_scale, spec.cine_wall_scale, spec.cine_offset_mm, false};
    {
        const Volume vol = detail::render_volume(spec, cine, 1);
        for (int k = 0; k < spec.n_sa_slices; ++k) ph.cine_sa.push_back(detail::render_sa(spec, vol, k));
    }
    ph.truth_cine = detail::make_truth(spec, cine, ph.cine_sa, false);
    return ph;
}

struct Misalignment {
    std::vector<SlicePlane> slices;
    std::vector<Shift> shifts; // applied origin displacement per slice, pixels
};

/// Displace each slice origin in-plane by an independent uniform integer
/// shift in [-max_shift_px, max_shift_px]^2. Pixel content is unchanged.
inline Misalignment inject_misalignment(const std::vector<SlicePlane>& slices, int max_shift_px, std::uint64_t seed) {
    if (max_shift_px < 0) throw ValidationError("max_shift_px must be non-negative");
    Misalignment out;
    std::mt19937_64 rng(detail::splitmix64(seed ^ 0x5eed5eedULL));
    std::uniform_int_distribution<int> dist(-max_shift_px, max_shift_px);
    for (const auto& s : slices) {
        Shift sh;
        if (max_shift_px > 0) {
            sh.du = dist(rng);
            sh.dv = dist(rng);
        }
        out.slices.push_back(translated(s, sh));
        out.shifts.push_back(sh);
    }
    return out;
}

/// World contour -> pixel coordinates of a slice.
inline std::vector<Vec2> to_pixels(const std::vector<Vec3>& pts, const SlicePlane& img) {
    std::vector<Vec2> out;
    out.reserve(pts.size());
    for (const auto& p : pts) out.push_back(world_to_image(p, img));
    return out;
}

/// Radial (w, t) form of a truth slice about its centroid, in pixels.
inline PolarContour truth_polar(const SliceTruth& truth, const SlicePlane& img, int n_theta) {
    const auto endo = to_pixels(truth.endo, img);
    const auto epi = to_pixels(truth.epi, img);
    return polar_from_contours(joint_center(endo, epi), endo, epi, n_theta, true);
}

} // namespace lvseg::phantom
