// lvseg command line: phantom generation, full runs, evaluation and
// single-stage entry points.

#include <algorithm>
#include <cmath>
#include <csetjmp>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <png.h>

#include "lvseg/lvseg.hpp"

namespace fs = std::filesystem;
using namespace lvseg;

namespace {

constexpr int kExitValidation = 2;
constexpr int kExitStage = 3;

// ---------------------------------------------------------------------------
// overlay images

struct Rgb {
    std::uint8_t r, g, b;
};

class RgbImage {
public:
    RgbImage(int w, int h) : w_(w), h_(h), px_(static_cast<std::size_t>(w) * h * 3, 0) {}

    void set(int u, int v, Rgb c) {
        if (u < 0 || v < 0 || u >= w_ || v >= h_) return;
        auto* p = &px_[(static_cast<std::size_t>(v) * w_ + u) * 3];
        p[0] = c.r;
        p[1] = c.g;
        p[2] = c.b;
    }

    void line(Vec2 a, Vec2 b, Rgb c) {
        const int steps = std::max(1, static_cast<int>(std::ceil((b - a).lpNorm<Eigen::Infinity>() * 2)));
        for (int i = 0; i <= steps; ++i) {
            const Vec2 p = a + (b - a) * (static_cast<double>(i) / steps);
            set(static_cast<int>(std::lround(p.x())), static_cast<int>(std::lround(p.y())), c);
        }
    }

    void polyline(const std::vector<Vec2>& pts, Rgb c) {
        for (std::size_t i = 0; i < pts.size(); ++i) line(pts[i], pts[(i + 1) % pts.size()], c);
    }

    void write_png(const fs::path& path) const {
        if (path.has_parent_path()) fs::create_directories(path.parent_path());
        FILE* fp = std::fopen(path.string().c_str(), "wb");
        if (!fp) throw Error("cannot write " + path.string());
        png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
        png_infop info = png ? png_create_info_struct(png) : nullptr;
        if (!png || !info || setjmp(png_jmpbuf(png))) {
            png_destroy_write_struct(&png, &info);
            std::fclose(fp);
            throw Error("PNG encoding failed: " + path.string());
        }
        png_init_io(png, fp);
        png_set_IHDR(png, info, w_, h_, 8, PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
                     PNG_FILTER_TYPE_DEFAULT);
        png_write_info(png, info);
        for (int v = 0; v < h_; ++v)
            png_write_row(png, const_cast<png_bytep>(&px_[static_cast<std::size_t>(v) * w_ * 3]));
        png_write_end(png, nullptr);
        png_destroy_write_struct(&png, &info);
        std::fclose(fp);
    }

private:
    int w_, h_;
    std::vector<std::uint8_t> px_;
};

// 8-bit min-max windowed grayscale
RgbImage grayscale(const Image2D& img) {
    const auto [lo, hi] = std::minmax_element(img.data.begin(), img.data.end());
    const double range = *hi - *lo;
    RgbImage out(img.width, img.height);
    for (int v = 0; v < img.height; ++v)
        for (int u = 0; u < img.width; ++u) {
            const double t = range > 0.0 ? (img.at(u, v) - *lo) / range : 0.0;
            const auto g = static_cast<std::uint8_t>(std::lround(255.0 * t));
            out.set(u, v, {g, g, g});
        }
    return out;
}

// ---------------------------------------------------------------------------
// outputs

void write_contour_stack(const fs::path& dir, const std::vector<std::vector<Vec2>>& endo,
                         const std::vector<std::vector<Vec2>>& epi) {
    for (std::size_t k = 0; k < endo.size(); ++k) {
        const std::string n = io::index_name(static_cast<int>(k));
        io::write_contour(dir / ("endo_" + n + ".csv"), endo[k]);
        io::write_contour(dir / ("epi_" + n + ".csv"), epi[k]);
    }
}

void write_alignment(const fs::path& out, const PipelineResult& r) {
    io::write_json(out / "alignment.json", r.log.value("alignment", json::object()));
}

void write_registration(const fs::path& out, const PipelineResult& r) {
    io::write_json(out / "registration.json", r.log.value("registration", json::array()));
    write_contour_stack(out / "rigid", r.rigid_endo, r.rigid_epi);
}

void write_edges(const fs::path& out, const PipelineResult& r) {
    std::string csv = "index,kind,source,x,y,z,strength,weight\n";
    for (std::size_t i = 0; i < r.edges.size(); ++i) {
        const auto& e = r.edges[i];
        if (!e.valid) continue;
        csv += std::to_string(i) + "," + (e.kind == profile::EdgeKind::Endo ? "endo" : "epi") + "," +
               to_string(e.source) + "," + io::fmt(e.position.x()) + "," + io::fmt(e.position.y()) + "," +
               io::fmt(e.position.z()) + "," + io::fmt(e.strength) + "," + io::fmt(e.weight) + "\n";
    }
    io::write_text(out / "edges.csv", csv);
}

void write_meshes(const fs::path& out, const PipelineResult& r) {
    if (r.initial) {
        io::write_text(out / "mesh_initial_endo.obj", io::mesh_obj(r.initial->endo, r.frame));
        io::write_text(out / "mesh_initial_epi.obj", io::mesh_obj(r.initial->epi, r.frame));
    }
    if (r.deformed) {
        io::write_text(out / "mesh_endo.obj", io::mesh_obj(r.deformed->endo, r.frame));
        io::write_text(out / "mesh_epi.obj", io::mesh_obj(r.deformed->epi, r.frame));
    }
}

void write_overlays(const fs::path& out, const PipelineResult& r) {
    for (std::size_t k = 0; k < r.final_endo.size(); ++k) {
        RgbImage img = grayscale(r.sa[k].pixels);
        img.polyline(r.final_endo[k], {255, 40, 40});
        img.polyline(r.final_epi[k], {40, 220, 40});
        img.write_png(out / "overlay" / (io::index_name(static_cast<int>(k)) + ".png"));
    }
}

// Persist whatever the pipeline produced; safe to call after a failure.
void write_partial(const fs::path& out, const PipelineResult& r) {
    fs::create_directories(out);
    if (r.log.contains("alignment")) write_alignment(out, r);
    if (!r.rigid_endo.empty()) write_registration(out, r);
    if (!r.edges.empty()) write_edges(out, r);
    write_meshes(out, r);
    if (!r.final_endo.empty()) {
        write_contour_stack(out / "contours", r.final_endo, r.final_epi);
        write_overlays(out, r);
    }
    if (r.evaluation) io::write_json(out / "metrics.json", r.evaluation->to_json());
    json log = r.log;
    log["warnings"] = r.warnings;
    io::write_json(out / "run_log.json", log);
}

std::vector<std::vector<Vec2>> read_stack(const fs::path& dir, const char* kind) {
    std::vector<std::vector<Vec2>> out;
    for (int k = 0;; ++k) {
        const fs::path p = dir / (std::string(kind) + "_" + io::index_name(k) + ".csv");
        if (!fs::exists(p)) break;
        out.push_back(io::read_contour(p));
    }
    return out;
}

// ---------------------------------------------------------------------------
// commands

struct RunArgs {
    std::string bundle, out, config;
    unsigned threads = 1;
    // command-line overrides
    bool skip_align = false;
    std::optional<int> align_radius, align_passes, pi_r, search_radius, band_sa, band_la, n_theta, n_interp;
    std::optional<double> pi_delta, lambda;
};

PipelineConfig make_config(const RunArgs& a) {
    PipelineConfig c = a.config.empty() ? PipelineConfig{} : config_from_json(io::read_json(a.config));
    if (a.skip_align) c.skip_align = true;
    if (a.align_radius) c.align_radius = *a.align_radius;
    if (a.align_passes) c.align_passes = *a.align_passes;
    if (a.pi_r) c.pi_r = *a.pi_r;
    if (a.pi_delta) c.pi_delta = *a.pi_delta;
    if (a.search_radius) c.search_radius = *a.search_radius;
    if (a.lambda) c.lambda = *a.lambda;
    if (a.band_sa) c.band_sa = *a.band_sa;
    if (a.band_la) c.band_la = *a.band_la;
    if (a.n_theta) c.n_theta = *a.n_theta;
    if (a.n_interp) c.n_interp = *a.n_interp;
    c.validate();
    return c;
}

void add_run_options(CLI::App* cmd, RunArgs& a) {
    cmd->add_option("bundle", a.bundle, "study bundle directory")->required();
    cmd->add_option("-o,--out", a.out, "output directory")->required();
    cmd->add_option("-c,--config", a.config, "pipeline config (JSON)");
    cmd->add_option("--threads", a.threads, "worker threads (results do not depend on it)")->check(CLI::Range(1u, 256u));
    cmd->add_flag("--skip-align", a.skip_align, "skip slice misalignment correction");
    cmd->add_option("--align-radius", a.align_radius);
    cmd->add_option("--align-passes", a.align_passes);
    cmd->add_option("--pi-r", a.pi_r);
    cmd->add_option("--pi-delta", a.pi_delta);
    cmd->add_option("--search-radius", a.search_radius);
    cmd->add_option("--lambda", a.lambda);
    cmd->add_option("--band-sa", a.band_sa);
    cmd->add_option("--band-la", a.band_la);
    cmd->add_option("--n-theta", a.n_theta);
    cmd->add_option("--n-interp", a.n_interp);
}

int run_stage(const RunArgs& a, const std::string& stop_after) {
    const PipelineConfig cfg = make_config(a);
    const StudyBundle b = load_bundle(a.bundle);
    PipelineResult r;
    const fs::path out(a.out);
    try {
        run_pipeline(b, cfg, r, {a.threads, stop_after});
    } catch (const StageError&) {
        write_partial(out, r);
        throw;
    }
    write_partial(out, r);
    if (r.evaluation)
        std::cout << "myocardium volumetric Dice " << io::fmt(r.evaluation->vol_dice_myo) << ", mean contour distance "
                  << io::fmt(r.evaluation->mean_mcd_mm) << " mm\n";
    for (const auto& w : r.warnings) std::cerr << "warning: " << w << "\n";
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Left-ventricle myocardium segmentation for LGE cardiac MR"};
    app.require_subcommand(1);

    std::string spec_file, phantom_out;
    std::uint64_t seed = 1;
    int misalign = 0;
    std::uint64_t misalign_seed = 0;
    auto* ph = app.add_subcommand("phantom", "generate a synthetic study bundle with ground truth");
    ph->add_option("-o,--out", phantom_out, "output bundle directory")->required();
    ph->add_option("--spec", spec_file, "phantom spec (JSON); defaults otherwise");
    auto* seed_opt = ph->add_option("--seed", seed, "noise seed (overrides the spec)");
    ph->add_option("--misalign", misalign, "max injected SA slice shift in pixels")->check(CLI::NonNegativeNumber);
    ph->add_option("--misalign-seed", misalign_seed);

    RunArgs run_args;
    auto* run = app.add_subcommand("run", "full pipeline");
    add_run_options(run, run_args);
    const std::pair<const char*, const char*> stages[] = {{"align", "slice misalignment correction only"},
                                                          {"register", "align + cine-to-LGE registration"},
                                                          {"detect", "up to edge detection (SA + LA)"},
                                                          {"deform", "up to mesh deformation"}};
    std::vector<std::pair<CLI::App*, std::string>> stage_cmds;
    for (const auto& [name, help] : stages) {
        auto* c = app.add_subcommand(name, help);
        add_run_options(c, run_args);
        stage_cmds.emplace_back(c, name);
    }

    std::string eval_a, eval_b, eval_out;
    int eval_w = 0, eval_h = 0;
    double eval_spacing = 1.0;
    auto* ev = app.add_subcommand("eval", "compare two contour directories (endo_####.csv, epi_####.csv)");
    ev->add_option("a", eval_a)->required();
    ev->add_option("b", eval_b)->required();
    ev->add_option("-o,--out", eval_out, "write the report here instead of stdout");
    ev->add_option("--width", eval_w, "raster width (default: fit both sets)");
    ev->add_option("--height", eval_h, "raster height (default: fit both sets)");
    ev->add_option("--spacing", eval_spacing, "pixel spacing in mm")->check(CLI::PositiveNumber);

    CLI11_PARSE(app, argc, argv);

    try {
        if (*ph) {
            phantom::PhantomSpec spec = spec_file.empty() ? phantom::PhantomSpec{}
                                                          : phantom_spec_from_json(io::read_json(spec_file));
            if (seed_opt->count() > 0) spec.seed = seed;
            spec.validate();
            save_bundle(phantom_out, bundle_from_phantom(spec, misalign, misalign_seed));
            return 0;
        }
        if (*run) return run_stage(run_args, "");
        for (const auto& [c, name] : stage_cmds)
            if (*c) return run_stage(run_args, name);
        if (*ev) {
            const auto a_endo = read_stack(eval_a, "endo"), a_epi = read_stack(eval_a, "epi");
            const auto b_endo = read_stack(eval_b, "endo"), b_epi = read_stack(eval_b, "epi");
            if (a_endo.empty() || b_endo.empty()) throw ValidationError("eval: no contours found");
            if (a_endo.size() != b_endo.size() || a_epi.size() != a_endo.size() || b_epi.size() != b_endo.size())
                throw ValidationError("eval: slice indices differ between the two sets");
            int w = eval_w, h = eval_h;
            if (w <= 0 || h <= 0) {
                double mx = 0.0, my = 0.0;
                for (const auto* stack : {&a_endo, &a_epi, &b_endo, &b_epi})
                    for (const auto& c : *stack)
                        for (const auto& p : c) {
                            mx = std::max(mx, p.x());
                            my = std::max(my, p.y());
                        }
                if (w <= 0) w = static_cast<int>(std::ceil(mx)) + 2;
                if (h <= 0) h = static_cast<int>(std::ceil(my)) + 2;
            }
            const auto report = evaluate_stacks(a_endo, a_epi, b_endo, b_epi, w, h, eval_spacing).to_json();
            if (eval_out.empty())
                std::cout << report.dump(2) << "\n";
            else
                io::write_json(eval_out, report);
            return 0;
        }
    } catch (const StageError& e) {
        std::cerr << "error in stage " << e.what() << "\n";
        // input problems found while loading or checking the bundle are validation failures
        return e.stage() == "load" || e.stage() == "validate" ? kExitValidation : kExitStage;
    } catch (const ValidationError& e) {
        std::cerr << "invalid input: " << e.what() << "\n";
        return kExitValidation;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitStage;
    }
    return 0;
}
