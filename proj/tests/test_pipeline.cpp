#include <gtest/gtest.h>

#include "support.hpp"

using namespace lvseg;
using lvseg::testing::scratch_dir;

namespace {

phantom::PhantomSpec small_spec() {
    phantom::PhantomSpec s;
    s.image_size_px = 112;
    s.n_sa_slices = 5;
    return s;
}

} // namespace

TEST(Config, DefaultsAndRoundTrip) {
    const PipelineConfig c;
    EXPECT_EQ(c.pi_r, 5);
    EXPECT_EQ(c.pi_delta, 0.1);
    EXPECT_EQ(c.band_sa, 7);
    EXPECT_EQ(c.band_la, 9);
    EXPECT_EQ(c.lambda, 0.005);
    EXPECT_EQ(c.n_theta, 79);
    EXPECT_EQ(c.search_radius, 15);
    PipelineConfig d;
    d.lambda = 0.1 + 0.2; // not representable as a short decimal
    d.skip_align = true;
    d.n_theta = 64;
    const json j = json::parse(to_json(d).dump());
    const PipelineConfig e = config_from_json(j);
    EXPECT_EQ(e.lambda, d.lambda);
    EXPECT_EQ(e.skip_align, true);
    EXPECT_EQ(e.n_theta, 64);
    EXPECT_EQ(to_json(e), to_json(d));
}

TEST(Config, RejectsUnknownKeysAndBadValues) {
    EXPECT_THROW(config_from_json(json{{"lamda", 0.1}}), ValidationError);
    EXPECT_THROW(config_from_json(json{{"pi_r", 0}}), ValidationError);
    EXPECT_THROW(config_from_json(json{{"pi_r", "five"}}), ValidationError);
    EXPECT_THROW(config_from_json(json::array()), ValidationError);
    EXPECT_NO_THROW(config_from_json(json::object()));
}

TEST(PhantomSpecJson, RoundTripAndValidation) {
    phantom::PhantomSpec s;
    s.seed = 42;
    s.infarct.transmurality = 0.5;
    const auto back = phantom_spec_from_json(json::parse(to_json(s).dump()));
    EXPECT_EQ(to_json(back), to_json(s));
    EXPECT_THROW(phantom_spec_from_json(json{{"infarct", {{"transmurality", 0.0}}}}), ValidationError);
    EXPECT_THROW(phantom_spec_from_json(json{{"size", 3}}), ValidationError);
}

TEST(Io, SliceRoundTrip) {
    const auto dir = scratch_dir("slice_io");
    SlicePlane s = lvseg::testing::flat_slice(7, 5);
    for (std::size_t i = 0; i < s.pixels.data.size(); ++i) s.pixels.data[i] = 0.25 * static_cast<double>(i);
    s.origin = Vec3(1.5, -2.25, 3.0);
    s.label = SliceLabel::LA2C;
    io::write_slice(dir / "x", s);
    const SlicePlane r = io::read_slice(dir / "x");
    EXPECT_EQ(r.pixels.data, s.pixels.data); // multiples of 1/64 survive quantization
    EXPECT_EQ(r.origin, s.origin);
    EXPECT_EQ(r.label, SliceLabel::LA2C);
    EXPECT_THROW(io::read_slice(dir / "missing"), ValidationError);
}

TEST(Io, ContourRoundTripIsExact) {
    const auto dir = scratch_dir("contour_io");
    const std::vector<Vec2> c{{0.1, 1.0 / 3.0}, {1e-17, -2.5}, {123.456, 7.0}};
    io::write_contour(dir / "c.csv", c);
    EXPECT_EQ(io::read_contour(dir / "c.csv"), c);
    io::write_text(dir / "bad.csv", "index,u,v\n0,1\n");
    EXPECT_THROW(io::read_contour(dir / "bad.csv"), ValidationError);
}

TEST(Bundle, SaveLoadRoundTrip) {
    const auto dir = scratch_dir("bundle");
    const StudyBundle b = bundle_from_phantom(small_spec(), 3, 1);
    save_bundle(dir, b);
    const StudyBundle r = load_bundle(dir);
    ASSERT_EQ(r.lge_sa.size(), b.lge_sa.size());
    ASSERT_EQ(r.la.size(), 2u);
    EXPECT_TRUE(r.has_truth());
    EXPECT_EQ(r.apriori_endo, b.apriori_endo);
    for (std::size_t k = 0; k < b.lge_sa.size(); ++k) EXPECT_EQ(r.lge_sa[k].origin, b.lge_sa[k].origin);
    EXPECT_EQ(r.meta, b.meta);
}

TEST(Bundle, MissingAprioriIsLoadError) {
    const auto dir = scratch_dir("bundle_missing");
    save_bundle(dir, bundle_from_phantom(small_spec()));
    std::filesystem::remove(dir / "apriori" / "epi_0002.csv");
    try {
        load_bundle(dir);
        FAIL() << "expected a stage error";
    } catch (const StageError& e) {
        EXPECT_EQ(e.stage(), "load");
    }
}

TEST(Pipeline, RunsEndToEndOnSmallPhantom) {
    const StudyBundle b = bundle_from_phantom(small_spec(), 2, 4);
    PipelineResult r;
    ASSERT_TRUE(run_pipeline(b, PipelineConfig{}, r));
    ASSERT_TRUE(r.evaluation);
    EXPECT_GT(r.evaluation->vol_dice_myo, 0.85);
    EXPECT_EQ(r.final_endo.size(), b.lge_sa.size());
    for (const char* key : {"config", "alignment", "registration", "intensity_model", "detect_sa", "detect_la",
                            "deform", "timings_s", "metrics"})
        EXPECT_TRUE(r.log.contains(key)) << key;
    EXPECT_EQ(r.log["config"], to_json(PipelineConfig{}));
}

TEST(Pipeline, StopAfterStage) {
    const StudyBundle b = bundle_from_phantom(small_spec());
    PipelineResult r;
    EXPECT_FALSE(run_pipeline(b, PipelineConfig{}, r, {1, "register"}));
    EXPECT_EQ(r.rigid_endo.size(), b.lge_sa.size());
    EXPECT_FALSE(r.initial);
}

TEST(Pipeline, StageErrorsNameTheStage) {
    StudyBundle b = bundle_from_phantom(small_spec());
    b.apriori_epi.pop_back();
    PipelineResult r;
    try {
        run_pipeline(b, PipelineConfig{}, r);
        FAIL() << "expected a stage error";
    } catch (const StageError& e) {
        EXPECT_EQ(e.stage(), "validate");
    }
    // a-priori contours far outside the image break registration; earlier results survive
    b = bundle_from_phantom(small_spec());
    for (auto& c : b.apriori_epi)
        for (auto& p : c) p += Vec2(500, 500);
    r = {};
    try {
        run_pipeline(b, PipelineConfig{}, r);
        FAIL() << "expected a stage error";
    } catch (const StageError& e) {
        EXPECT_EQ(e.stage(), "register");
        EXPECT_EQ(r.sa.size(), b.lge_sa.size());
    }
}

TEST(Pipeline, SkipAlignOnAlignedBundleMatchesFullRun) {
    const StudyBundle b = bundle_from_phantom(small_spec());
    PipelineResult full, skip;
    run_pipeline(b, PipelineConfig{}, full);
    PipelineConfig cfg;
    cfg.skip_align = true;
    run_pipeline(b, cfg, skip);
    // realigning an aligned bundle may nudge a slice by a pixel
    EXPECT_NEAR(skip.evaluation->vol_dice_myo, full.evaluation->vol_dice_myo, 0.02);
    for (const auto& s : full.alignment.sa_shifts) EXPECT_LE(std::abs(s.du) + std::abs(s.dv), 1);
}
