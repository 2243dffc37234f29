#pragma once

// End-to-end orchestration: align -> register -> detect (SA + LA) -> mesh ->
// deform -> slice -> evaluate, plus the on-disk study bundle.

#include <chrono>
#include <filesystem>
#include <functional>
#include <initializer_list>
#include <optional>
#include <string>
#include <vector>

#include "lvseg/align.hpp"
#include "lvseg/contour.hpp"
#include "lvseg/error.hpp"
#include "lvseg/geometry.hpp"
#include "lvseg/io.hpp"
#include "lvseg/mesh.hpp"
#include "lvseg/metrics.hpp"
#include "lvseg/parallel.hpp"
#include "lvseg/phantom.hpp"
#include "lvseg/profile.hpp"
#include "lvseg/registration.hpp"

namespace lvseg {

using json = nlohmann::json;

struct PipelineConfig {
    // registration
    int pi_r = 5;
    double pi_delta = 0.1;
    int search_radius = 15;
    // alignment
    int align_radius = 10;
    int align_passes = 3;
    bool realign_la = true;
    bool skip_align = false;
    // profile model
    int band_sa = 7;
    int band_la = 9;
    double lambda = 0.005;
    int n_theta = 79;
    int n_interp = 4;
    int icm_max_sweeps = 50;
    // mesh
    double gamma = 0.7;
    double alpha = 0.3;
    double beta = 0.3;
    double mu = 0.1;
    double d_cutoff = 3.0;
    int max_iters = 30;
    double min_move = 0.1;
    int n_ring_vertices = 80;
    int n_interp_rings = 3;

    void validate() const {
        auto need = [](bool ok, const char* what) {
            if (!ok) throw ValidationError(std::string("config: ") + what);
        };
        need(pi_r >= 1, "pi_r must be >= 1");
        need(pi_delta > 0.0, "pi_delta must be positive");
        need(search_radius >= 0, "search_radius must be >= 0");
        need(align_radius >= 0, "align_radius must be >= 0");
        need(align_passes >= 0, "align_passes must be >= 0");
        need(band_sa >= 1 && band_la >= 1, "bands must be >= 1");
        need(lambda >= 0.0, "lambda must be >= 0");
        need(n_theta >= 3, "n_theta must be >= 3");
        need(n_interp >= 1, "n_interp must be >= 1");
        need(icm_max_sweeps >= 1, "icm_max_sweeps must be >= 1");
        need(gamma > 0.0 && gamma <= 1.0, "gamma must lie in (0, 1]");
        need(alpha >= 0.0 && beta >= 0.0 && mu >= 0.0, "force weights must be >= 0");
        need(d_cutoff > 0.0, "d_cutoff must be positive");
        need(max_iters >= 0, "max_iters must be >= 0");
        need(min_move >= 0.0, "min_move must be >= 0");
        need(n_ring_vertices >= 4 && n_ring_vertices % 2 == 0, "n_ring_vertices must be even and >= 4");
        need(n_interp_rings >= 0, "n_interp_rings must be >= 0");
    }

    mesh::DeformParams deform_params() const { return {gamma, alpha, beta, mu, d_cutoff, max_iters, min_move}; }
    reg::PatternIntensityParams pi_params() const { return {pi_r, pi_delta}; }
    profile::DetectConfig detect_sa() const { return {lambda, band_sa, icm_max_sweeps, 5, n_interp}; }
    profile::DetectConfig detect_la() const { return {lambda, band_la, icm_max_sweeps, 5, n_interp}; }
};

#define LVSEG_CONFIG_FIELDS(X)                                                                                      \
    X(pi_r) X(pi_delta) X(search_radius) X(align_radius) X(align_passes) X(realign_la) X(skip_align) X(band_sa)   \
        X(band_la) X(lambda) X(n_theta) X(n_interp) X(icm_max_sweeps) X(gamma) X(alpha) X(beta) X(mu) X(d_cutoff) \
            X(max_iters) X(min_move) X(n_ring_vertices) X(n_interp_rings)

inline json to_json(const PipelineConfig& c) {
    json j;
#define X(f) j[#f] = c.f;
    LVSEG_CONFIG_FIELDS(X)
#undef X
    return j;
}

/// Fields missing from `j` keep their defaults; unknown keys are rejected.
inline PipelineConfig config_from_json(const json& j) {
    if (!j.is_object()) throw ValidationError("config must be a JSON object");
    PipelineConfig c;
    for (auto it = j.begin(); it != j.end(); ++it) {
        bool known = false;
#define X(f) known = known || it.key() == #f;
        LVSEG_CONFIG_FIELDS(X)
#undef X
        if (!known) throw ValidationError("config: unknown key '" + it.key() + "'");
    }
    try {
#define X(f) \
    if (j.contains(#f)) j.at(#f).get_to(c.f);
        LVSEG_CONFIG_FIELDS(X)
#undef X
    } catch (const json::exception& e) {
        throw ValidationError(std::string("config: ") + e.what());
    }
    c.validate();
    return c;
}

#undef LVSEG_CONFIG_FIELDS

// ---------------------------------------------------------------------------
// phantom spec serialization

namespace detail {

inline void reject_unknown(const json& j, std::initializer_list<const char*> keys, const std::string& where) {
    if (!j.is_object()) throw ValidationError(where + " must be a JSON object");
    for (auto it = j.begin(); it != j.end(); ++it) {
        bool known = false;
        for (const char* k : keys) known = known || it.key() == k;
        if (!known) throw ValidationError(where + ": unknown key '" + it.key() + "'");
    }
}

template <typename T>
void read_field(const json& j, const char* key, T& out) {
    if (j.contains(key)) j.at(key).get_to(out);
}

} // namespace detail

inline json to_json(const phantom::PhantomSpec& s) {
    return json{{"voxel_mm", s.voxel_mm},
                {"n_sa_slices", s.n_sa_slices},
                {"slice_thickness_mm", s.slice_thickness_mm},
                {"slice_gap_mm", s.slice_gap_mm},
                {"first_slice_mm", s.first_slice_mm},
                {"lv_long_axis_mm", s.lv_long_axis_mm},
                {"endo_radius_base_mm", s.endo_radius_base_mm},
                {"endo_radius_apex_mm", s.endo_radius_apex_mm},
                {"wall_thickness_mm", s.wall_thickness_mm},
                {"ellipticity", s.ellipticity},
                {"infarct",
                 {{"enabled", s.infarct.enabled},
                  {"azimuth_center_deg", s.infarct.azimuth_center_deg},
                  {"azimuth_span_deg", s.infarct.azimuth_span_deg},
                  {"long_extent_mm", s.infarct.long_extent_mm},
                  {"transmurality", s.infarct.transmurality}}},
                {"intensities",
                 {{"blood", s.intensities.blood},
                  {"myo", s.intensities.myo},
                  {"infarct", s.intensities.infarct},
                  {"background", s.intensities.background}}},
                {"noise_sigma", s.noise_sigma},
                {"seed", s.seed},
                {"image_size_px", s.image_size_px},
                {"la2c_azimuth_deg", s.la2c_azimuth_deg},
                {"la4c_azimuth_deg", s.la4c_azimuth_deg},
                {"cine_wall_scale", s.cine_wall_scale},
                {"cine_endo_scale", s.cine_endo_scale},
                {"cine_offset_mm", {s.cine_offset_mm.x(), s.cine_offset_mm.y()}}};
}

/// Missing fields keep their defaults; unknown keys are rejected.
inline phantom::PhantomSpec phantom_spec_from_json(const json& j) {
    phantom::PhantomSpec s;
    detail::reject_unknown(j,
                           {"voxel_mm", "n_sa_slices", "slice_thickness_mm", "slice_gap_mm", "first_slice_mm",
                            "lv_long_axis_mm", "endo_radius_base_mm", "endo_radius_apex_mm", "wall_thickness_mm",
                            "ellipticity", "infarct", "intensities", "noise_sigma", "seed", "image_size_px",
                            "la2c_azimuth_deg", "la4c_azimuth_deg", "cine_wall_scale", "cine_endo_scale",
                            "cine_offset_mm"},
                           "phantom spec");
    try {
        using detail::read_field;
        read_field(j, "voxel_mm", s.voxel_mm);
        read_field(j, "n_sa_slices", s.n_sa_slices);
        read_field(j, "slice_thickness_mm", s.slice_thickness_mm);
        read_field(j, "slice_gap_mm", s.slice_gap_mm);
        read_field(j, "first_slice_mm", s.first_slice_mm);
        read_field(j, "lv_long_axis_mm", s.lv_long_axis_mm);
        read_field(j, "endo_radius_base_mm", s.endo_radius_base_mm);
        read_field(j, "endo_radius_apex_mm", s.endo_radius_apex_mm);
        read_field(j, "wall_thickness_mm", s.wall_thickness_mm);
        read_field(j, "ellipticity", s.ellipticity);
        if (j.contains("infarct")) {
            const json& i = j["infarct"];
            detail::reject_unknown(
                i, {"enabled", "azimuth_center_deg", "azimuth_span_deg", "long_extent_mm", "transmurality"},
                "phantom spec infarct");
            read_field(i, "enabled", s.infarct.enabled);
            read_field(i, "azimuth_center_deg", s.infarct.azimuth_center_deg);
            read_field(i, "azimuth_span_deg", s.infarct.azimuth_span_deg);
            read_field(i, "long_extent_mm", s.infarct.long_extent_mm);
            read_field(i, "transmurality", s.infarct.transmurality);
        }
        if (j.contains("intensities")) {
            const json& i = j["intensities"];
            detail::reject_unknown(i, {"blood", "myo", "infarct", "background"}, "phantom spec intensities");
            read_field(i, "blood", s.intensities.blood);
            read_field(i, "myo", s.intensities.myo);
            read_field(i, "infarct", s.intensities.infarct);
            read_field(i, "background", s.intensities.background);
        }
        read_field(j, "noise_sigma", s.noise_sigma);
        read_field(j, "seed", s.seed);
        read_field(j, "image_size_px", s.image_size_px);
        read_field(j, "la2c_azimuth_deg", s.la2c_azimuth_deg);
        read_field(j, "la4c_azimuth_deg", s.la4c_azimuth_deg);
        read_field(j, "cine_wall_scale", s.cine_wall_scale);
        read_field(j, "cine_endo_scale", s.cine_endo_scale);
        if (j.contains("cine_offset_mm")) {
            const auto v = j["cine_offset_mm"].get<std::vector<double>>();
            if (v.size() != 2) throw ValidationError("phantom spec: cine_offset_mm needs 2 values");
            s.cine_offset_mm = Vec2(v[0], v[1]);
        }
    } catch (const json::exception& e) {
        throw ValidationError(std::string("phantom spec: ") + e.what());
    }
    s.validate();
    return s;
}

// ---------------------------------------------------------------------------
// study bundle

struct StudyBundle {
    std::vector<SlicePlane> lge_sa;
    std::vector<SlicePlane> cine_sa;
    std::vector<SlicePlane> la; // 0-2 long-axis LGE slices
    std::vector<std::vector<Vec2>> apriori_endo; // cine pixel coordinates, per SA slice
    std::vector<std::vector<Vec2>> apriori_epi;
    // optional ground truth, LGE pixel coordinates
    std::vector<std::vector<Vec2>> truth_endo;
    std::vector<std::vector<Vec2>> truth_epi;
    json meta = json::object();

    bool has_truth() const { return !truth_endo.empty(); }
};

/// Bundle from a phantom. SA LGE origins may be displaced to simulate
/// breath-hold misalignment; truth stays attached to the pixel content.
inline StudyBundle bundle_from_phantom(const phantom::PhantomSpec& spec, int misalign_px = 0,
                                       std::uint64_t misalign_seed = 0, int contour_points = 180) {
    const phantom::Phantom ph = phantom::generate(spec);
    StudyBundle b;
    const auto mis = phantom::inject_misalignment(ph.lge_sa, misalign_px, misalign_seed);
    b.lge_sa = mis.slices;
    b.cine_sa = ph.cine_sa;
    b.la = {ph.lge_la4c, ph.lge_la2c};
    const int stride = std::max(1, 720 / contour_points);
    auto thin = [stride](const std::vector<Vec2>& v) {
        std::vector<Vec2> out;
        for (std::size_t i = 0; i < v.size(); i += stride) out.push_back(v[i]);
        return out;
    };
    json shifts = json::array();
    for (std::size_t k = 0; k < ph.lge_sa.size(); ++k) {
        b.apriori_endo.push_back(thin(phantom::to_pixels(ph.truth_cine.sa[k].endo, ph.cine_sa[k])));
        b.apriori_epi.push_back(thin(phantom::to_pixels(ph.truth_cine.sa[k].epi, ph.cine_sa[k])));
        b.truth_endo.push_back(thin(phantom::to_pixels(ph.truth_lge.sa[k].endo, ph.lge_sa[k])));
        b.truth_epi.push_back(thin(phantom::to_pixels(ph.truth_lge.sa[k].epi, ph.lge_sa[k])));
        shifts.push_back({mis.shifts[k].du, mis.shifts[k].dv});
    }
    b.meta = {{"source", "phantom"},
              {"seed", spec.seed},
              {"pixel_spacing", spec.voxel_mm},
              {"misalign_px", misalign_px},
              {"misalign_seed", misalign_seed},
              {"injected_shifts", shifts},
              {"phantom", to_json(spec)}};
    return b;
}

namespace detail {

inline std::vector<int> indexed_stems(const std::filesystem::path& dir) {
    std::vector<int> idx;
    if (!std::filesystem::is_directory(dir)) return idx;
    for (const auto& e : std::filesystem::directory_iterator(dir)) {
        if (e.path().extension() != ".json") continue;
        const std::string stem = e.path().stem().string();
        if (stem.size() == 4 && std::all_of(stem.begin(), stem.end(), ::isdigit)) idx.push_back(std::stoi(stem));
    }
    std::sort(idx.begin(), idx.end());
    return idx;
}

} // namespace detail

inline void save_bundle(const std::filesystem::path& dir, const StudyBundle& b) {
    namespace fs = std::filesystem;
    fs::create_directories(dir);
    for (std::size_t k = 0; k < b.lge_sa.size(); ++k) {
        const std::string n = io::index_name(static_cast<int>(k));
        io::write_slice(dir / "sa" / n, b.lge_sa[k]);
        io::write_slice(dir / "cine" / n, b.cine_sa[k]);
        io::write_contour(dir / "apriori" / ("endo_" + n + ".csv"), b.apriori_endo[k]);
        io::write_contour(dir / "apriori" / ("epi_" + n + ".csv"), b.apriori_epi[k]);
        if (b.has_truth()) {
            io::write_contour(dir / "truth" / ("endo_" + n + ".csv"), b.truth_endo[k]);
            io::write_contour(dir / "truth" / ("epi_" + n + ".csv"), b.truth_epi[k]);
        }
    }
    for (const auto& l : b.la) io::write_slice(dir / (l.label == SliceLabel::LA4C ? "la4c" : "la2c"), l);
    io::write_json(dir / "meta.json", b.meta);
}

/// Load a bundle; any missing or malformed piece raises a "load" stage error.
inline StudyBundle load_bundle(const std::filesystem::path& dir) {
    namespace fs = std::filesystem;
    try {
        if (!fs::is_directory(dir)) throw ValidationError("bundle directory not found: " + dir.string());
        StudyBundle b;
        const auto idx = detail::indexed_stems(dir / "sa");
        if (idx.empty()) throw ValidationError("no SA slices under " + (dir / "sa").string());
        for (std::size_t k = 0; k < idx.size(); ++k)
            if (idx[k] != static_cast<int>(k)) throw ValidationError("SA slice indices must run 0000, 0001, ...");
        for (int k : idx) {
            const std::string n = io::index_name(k);
            b.lge_sa.push_back(io::read_slice(dir / "sa" / n));
            b.cine_sa.push_back(io::read_slice(dir / "cine" / n));
            for (const char* kind : {"endo_", "epi_"}) {
                const fs::path p = dir / "apriori" / (kind + n + ".csv");
                if (!fs::exists(p)) throw ValidationError("missing a-priori contour " + p.string());
                (std::string(kind) == "endo_" ? b.apriori_endo : b.apriori_epi).push_back(io::read_contour(p));
            }
        }
        for (const char* name : {"la4c", "la2c"})
            if (fs::exists(dir / (std::string(name) + ".json"))) b.la.push_back(io::read_slice(dir / name));
        if (fs::is_directory(dir / "truth")) {
            for (int k : idx) {
                const std::string n = io::index_name(k);
                b.truth_endo.push_back(io::read_contour(dir / "truth" / ("endo_" + n + ".csv")));
                b.truth_epi.push_back(io::read_contour(dir / "truth" / ("epi_" + n + ".csv")));
            }
        }
        if (fs::exists(dir / "meta.json")) b.meta = io::read_json(dir / "meta.json");
        return b;
    } catch (const StageError&) {
        throw;
    } catch (const Error& e) {
        throw StageError("load", e.what());
    }
}

// ---------------------------------------------------------------------------
// evaluation

struct StackEvaluation {
    std::vector<double> dice_myo, dice_bp, dice_lv;
    std::vector<double> mcd_endo_mm, mcd_epi_mm;
    double vol_dice_myo = 0.0, vol_dice_bp = 0.0, vol_dice_lv = 0.0;
    double mean_mcd_mm = 0.0; // over endo and epi of every slice

    json to_json() const {
        return json{{"per_slice",
                     {{"dice_myo", dice_myo},
                      {"dice_bp", dice_bp},
                      {"dice_lv", dice_lv},
                      {"mcd_endo_mm", mcd_endo_mm},
                      {"mcd_epi_mm", mcd_epi_mm}}},
                    {"volumetric_dice_myo", vol_dice_myo},
                    {"volumetric_dice_bp", vol_dice_bp},
                    {"volumetric_dice_lv", vol_dice_lv},
                    {"mean_contour_distance_mm", mean_mcd_mm}};
    }
};

/// Compare two contour stacks (pixel coordinates on grids of the given size).
inline StackEvaluation evaluate_stacks(const std::vector<std::vector<Vec2>>& a_endo,
                                       const std::vector<std::vector<Vec2>>& a_epi,
                                       const std::vector<std::vector<Vec2>>& b_endo,
                                       const std::vector<std::vector<Vec2>>& b_epi, int width, int height,
                                       double spacing_mm) {
    const std::size_t n = a_endo.size();
    if (n == 0) throw ValidationError("evaluate: empty contour stack");
    if (a_epi.size() != n || b_endo.size() != n || b_epi.size() != n)
        throw ValidationError("evaluate: slice counts differ");
    StackEvaluation ev;
    std::vector<metrics::Mask> am, bm, ab, bb, al, bl;
    double mcd_sum = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
        const auto ma = metrics::masks_from_contours(a_endo[k], a_epi[k], width, height);
        const auto mb = metrics::masks_from_contours(b_endo[k], b_epi[k], width, height);
        ev.dice_myo.push_back(metrics::dice(ma.myo, mb.myo));
        ev.dice_bp.push_back(metrics::dice(ma.bp, mb.bp));
        ev.dice_lv.push_back(metrics::dice(ma.lv, mb.lv));
        ev.mcd_endo_mm.push_back(metrics::mean_contour_distance(a_endo[k], b_endo[k]) * spacing_mm);
        ev.mcd_epi_mm.push_back(metrics::mean_contour_distance(a_epi[k], b_epi[k]) * spacing_mm);
        mcd_sum += ev.mcd_endo_mm.back() + ev.mcd_epi_mm.back();
        am.push_back(ma.myo);
        bm.push_back(mb.myo);
        ab.push_back(ma.bp);
        bb.push_back(mb.bp);
        al.push_back(ma.lv);
        bl.push_back(mb.lv);
    }
    ev.vol_dice_myo = metrics::volumetric_dice(am, bm);
    ev.vol_dice_bp = metrics::volumetric_dice(ab, bb);
    ev.vol_dice_lv = metrics::volumetric_dice(al, bl);
    ev.mean_mcd_mm = mcd_sum / (2.0 * static_cast<double>(n));
    return ev;
}

// ---------------------------------------------------------------------------
// pipeline

struct PipelineResult {
    align::AlignmentResult alignment;
    std::vector<SlicePlane> sa;  // aligned LGE SA slices
    std::vector<SlicePlane> la;  // aligned LGE LA slices
    std::vector<reg::RegistrationResult> registration;
    std::vector<std::vector<Vec2>> rigid_endo, rigid_epi; // LGE pixels
    std::optional<profile::IntensityModel> model;
    std::vector<profile::SaDetection> sa_detections;
    std::vector<profile::LaDetection> la_detections;
    profile::EdgePointSet edges;
    mesh::Frame frame;
    std::optional<mesh::MeshPair> initial;
    std::optional<mesh::DeformResult> deformed;
    std::vector<std::vector<Vec2>> final_endo, final_epi; // LGE pixels
    std::optional<StackEvaluation> evaluation;
    json log = json::object();
    std::vector<std::string> warnings;
};

struct RunOptions {
    unsigned threads = 1;
    std::string stop_after; // empty: run every stage
};

namespace detail {

template <typename Fn>
void stage(PipelineResult& r, const char* name, Fn&& fn) {
    const auto t0 = std::chrono::steady_clock::now();
    try {
        fn();
    } catch (const StageError&) {
        throw;
    } catch (const Error& e) {
        throw StageError(name, e.what());
    }
    const double sec = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    r.log["timings_s"][name] = sec;
}

inline json shifts_json(const std::vector<Shift>& s) {
    json a = json::array();
    for (const auto& x : s) a.push_back({x.du, x.dv});
    return a;
}

} // namespace detail

/// Run the pipeline on a bundle, filling `out` stage by stage so that a
/// failure leaves every earlier result in place. Returns false when stopped
/// early on request.
inline bool run_pipeline(const StudyBundle& b, const PipelineConfig& cfg, PipelineResult& out,
                         const RunOptions& opt = {}) {
    cfg.validate();
    const std::size_t n = b.lge_sa.size();
    out.log["config"] = to_json(cfg);
    auto stop = [&](const char* name) { return opt.stop_after == name; };

    detail::stage(out, "validate", [&] {
        if (n < 3) throw ValidationError("need at least 3 SA slices");
        if (b.cine_sa.size() != n) throw ValidationError("cine slice count differs from LGE");
        if (b.apriori_endo.size() != n || b.apriori_epi.size() != n)
            throw ValidationError("every SA slice needs a-priori endo and epi contours");
        for (const auto& s : b.lge_sa) s.validate();
        for (std::size_t k = 1; k < n; ++k)
            if (b.lge_sa[k].normal().cross(b.lge_sa[0].normal()).norm() > 1e-6)
                throw ValidationError("SA slices are not parallel");
    });

    detail::stage(out, "align", [&] {
        if (cfg.skip_align || b.la.empty()) {
            out.alignment.sa_shifts.assign(n, Shift{});
            out.alignment.sa_alignable.assign(n, false);
            out.alignment.la_shifts.assign(b.la.size(), Shift{});
            if (!cfg.skip_align) out.warnings.push_back("align: no LA slices, alignment skipped");
        } else {
            out.alignment = align::realign(b.lge_sa, b.la,
                                           {cfg.align_radius, cfg.align_passes, cfg.realign_la, opt.threads});
            for (std::size_t k = 0; k < n; ++k)
                if (!out.alignment.sa_alignable[k])
                    out.warnings.push_back("align: SA slice " + std::to_string(k) + " has no usable intersection");
        }
        out.sa = align::apply_shifts(b.lge_sa, out.alignment.sa_shifts);
        out.la = align::apply_shifts(b.la, out.alignment.la_shifts);
        out.log["alignment"] = {{"skipped", cfg.skip_align},
                                {"sa_shifts", detail::shifts_json(out.alignment.sa_shifts)},
                                {"la_shifts", detail::shifts_json(out.alignment.la_shifts)},
                                {"residual_per_pass", out.alignment.residual_per_pass},
                                {"passes", out.alignment.iterations}};
    });
    if (stop("align")) return false;

    detail::stage(out, "register", [&] {
        out.registration.assign(n, {});
        out.rigid_endo.assign(n, {});
        out.rigid_epi.assign(n, {});
        std::vector<std::vector<Vec2>> prior_endo(n), prior_epi(n);
        std::vector<SlicePlane> cine_on_lge(n);
        for (std::size_t k = 0; k < n; ++k) {
            // cine contours: cine pixels -> world -> LGE pixels
            for (const auto& p : b.apriori_endo[k])
                prior_endo[k].push_back(world_to_image(image_to_world(p, b.cine_sa[k]), out.sa[k]));
            for (const auto& p : b.apriori_epi[k])
                prior_epi[k].push_back(world_to_image(image_to_world(p, b.cine_sa[k]), out.sa[k]));
            cine_on_lge[k] = resample_onto(b.cine_sa[k], out.sa[k]);
        }
        parallel_for(n, opt.threads, [&](std::size_t k) {
            const auto roi = reg::define_roi(prior_epi[k], out.sa[k]);
            out.registration[k] = reg::register_translation(cine_on_lge[k], out.sa[k], roi, cfg.search_radius,
                                                            cfg.pi_params(), 1);
            out.rigid_endo[k] = reg::propagate_contour(prior_endo[k], out.registration[k].shift);
            out.rigid_epi[k] = reg::propagate_contour(prior_epi[k], out.registration[k].shift);
        });
        json regs = json::array();
        for (const auto& r : out.registration) regs.push_back({{"shift", {r.shift.du, r.shift.dv}}, {"score", r.score}});
        out.log["registration"] = regs;
    });
    if (stop("register")) return false;

    detail::stage(out, "intensity", [&] {
        out.model = profile::estimate_intensities(out.sa, out.rigid_epi);
        out.log["intensity_model"] = {{"i_norm", out.model->i_norm},
                                      {"i_blood", out.model->i_blood},
                                      {"i_enhan", out.model->i_enhan},
                                      {"i_thres", out.model->i_thres},
                                      {"degenerate", out.model->degenerate}};
    });

    detail::stage(out, "detect_sa", [&] {
        out.sa_detections.assign(n, {});
        parallel_for(n, opt.threads, [&](std::size_t k) {
            out.sa_detections[k] =
                profile::detect_edges_sa(out.sa[k], out.rigid_endo[k], out.rigid_epi[k], *out.model, cfg.n_theta,
                                         cfg.detect_sa());
        });
        json d = json::array();
        for (const auto& s : out.sa_detections)
            d.push_back({{"icm_sweeps", s.chain.sweeps}, {"energy", s.chain.energy}});
        out.log["detect_sa"] = d;
    });

    detail::stage(out, "detect_la", [&] {
        std::vector<std::vector<Vec3>> endo_w(n), epi_w(n);
        for (std::size_t k = 0; k < n; ++k) {
            for (const auto& p : out.rigid_endo[k]) endo_w[k].push_back(image_to_world(p, out.sa[k]));
            for (const auto& p : out.rigid_epi[k]) epi_w[k].push_back(image_to_world(p, out.sa[k]));
        }
        out.la_detections.assign(out.la.size(), {});
        parallel_for(out.la.size(), opt.threads, [&](std::size_t j) {
            out.la_detections[j] = profile::detect_edges_la(out.la[j], out.sa, endo_w, epi_w, *out.model, cfg.detect_la());
        });
        json d = json::array();
        for (const auto& l : out.la_detections) {
            if (l.skipped) out.warnings.push_back("detect_la: " + l.warning);
            d.push_back({{"label", to_string(l.label)},
                         {"skipped", l.skipped},
                         {"icm_sweeps", {l.sides[0].chain.sweeps, l.sides[1].chain.sweeps}},
                         {"nodes", l.sides[0].l.size()}});
        }
        out.log["detect_la"] = d;
        out.edges.clear();
        for (const auto& s : out.sa_detections) out.edges.insert(out.edges.end(), s.edges.begin(), s.edges.end());
        for (const auto& l : out.la_detections) out.edges.insert(out.edges.end(), l.edges.begin(), l.edges.end());
        profile::assign_weights(out.edges);
    });
    if (stop("detect")) return false;

    detail::stage(out, "mesh", [&] {
        out.frame = mesh::Frame::of(out.sa.back());
        std::vector<std::vector<Vec3>> en(n), ep(n);
        for (std::size_t k = 0; k < n; ++k) {
            for (const auto& p : out.rigid_endo[k]) en[k].push_back(out.frame.to_frame(image_to_world(p, out.sa[k])));
            for (const auto& p : out.rigid_epi[k]) ep[k].push_back(out.frame.to_frame(image_to_world(p, out.sa[k])));
        }
        out.initial = mesh::build_meshes(en, ep, cfg.n_ring_vertices, cfg.n_interp_rings);
        out.log["mesh"] = {{"rings", out.initial->endo.n_rings}, {"ring_vertices", out.initial->endo.ring_size}};
    });

    detail::stage(out, "deform", [&] {
        const auto endo_t = mesh::edge_targets(out.edges, profile::EdgeKind::Endo, out.frame);
        const auto epi_t = mesh::edge_targets(out.edges, profile::EdgeKind::Epi, out.frame);
        out.deformed = mesh::deform(out.initial->endo, out.initial->epi, out.initial->pairing, endo_t, epi_t,
                                    cfg.deform_params(), opt.threads);
        out.log["deform"] = {{"iterations", out.deformed->iterations},
                             {"converged", out.deformed->converged},
                             {"max_move", out.deformed->max_move}};
    });
    if (stop("deform")) return false;

    detail::stage(out, "slice", [&] {
        out.final_endo.assign(n, {});
        out.final_epi.assign(n, {});
        for (std::size_t k = 0; k < n; ++k) {
            out.final_endo[k] = mesh::slice_mesh(out.deformed->endo, out.frame, out.sa[k]);
            out.final_epi[k] = mesh::slice_mesh(out.deformed->epi, out.frame, out.sa[k]);
            if (out.final_endo[k].empty() || out.final_epi[k].empty())
                throw Error("mesh does not cross SA slice " + std::to_string(k));
        }
    });

    if (b.has_truth()) {
        detail::stage(out, "metrics", [&] {
            out.evaluation = evaluate_stacks(out.final_endo, out.final_epi, b.truth_endo, b.truth_epi, out.sa[0].width(),
                                             out.sa[0].height(), out.sa[0].pixel_spacing);
            out.log["metrics"] = out.evaluation->to_json();
        });
    }
    out.log["warnings"] = out.warnings;
    return true;
}

} // namespace lvseg
