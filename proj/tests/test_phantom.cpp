#include <gtest/gtest.h>

#include "support.hpp"

using namespace lvseg;
using lvseg::testing::default_phantom;

TEST(Phantom, DefaultGeometry) {
    const auto& ph = default_phantom();
    const phantom::PhantomSpec spec;
    ASSERT_EQ(ph.lge_sa.size(), 8u);
    ASSERT_EQ(ph.cine_sa.size(), 8u);
    EXPECT_EQ(ph.lge_la4c.label, SliceLabel::LA4C);
    EXPECT_EQ(ph.lge_la2c.label, SliceLabel::LA2C);
    for (std::size_t k = 0; k < ph.lge_sa.size(); ++k) {
        const auto& s = ph.lge_sa[k];
        EXPECT_NO_THROW(s.validate());
        EXPECT_EQ(s.width(), spec.image_size_px);
        EXPECT_DOUBLE_EQ(s.pixel_spacing, spec.voxel_mm);
        EXPECT_DOUBLE_EQ(s.thickness, spec.slice_thickness_mm);
        if (k > 0) {
            EXPECT_NEAR((s.origin - ph.lge_sa[k - 1].origin).norm(), spec.slice_pitch_mm(), 1e-9);
        }
    }
}

TEST(Phantom, SameSeedIsBitIdenticalOtherSeedIsNot) {
    phantom::PhantomSpec spec;
    spec.image_size_px = 96;
    const auto a = phantom::generate(spec);
    const auto b = phantom::generate(spec);
    spec.seed = 2;
    const auto c = phantom::generate(spec);
    for (std::size_t k = 0; k < a.lge_sa.size(); ++k) {
        EXPECT_EQ(a.lge_sa[k].pixels.data, b.lge_sa[k].pixels.data);
        EXPECT_NE(a.lge_sa[k].pixels.data, c.lge_sa[k].pixels.data);
    }
    EXPECT_EQ(a.lge_la4c.pixels.data, b.lge_la4c.pixels.data);
}

TEST(Phantom, TruthContoursFollowTheShell) {
    const auto& ph = default_phantom();
    const phantom::PhantomSpec spec;
    for (std::size_t k = 0; k < ph.lge_sa.size(); ++k) {
        const auto pc = phantom::truth_polar(ph.truth_lge.sa[k], ph.lge_sa[k], 72);
        for (std::size_t i = 0; i < pc.size(); ++i) {
            // wall thickness in pixels, within the ellipticity spread
            EXPECT_GT(pc.t[i] * spec.voxel_mm, 0.8 * spec.wall_thickness_mm);
            EXPECT_LT(pc.t[i] * spec.voxel_mm, 1.2 * spec.wall_thickness_mm);
        }
        // truth endo lies in the SA plane
        for (const auto& p : ph.truth_lge.sa[k].endo)
            EXPECT_NEAR((p - ph.lge_sa[k].origin).dot(ph.lge_sa[k].normal()), 0.0, 1e-9);
    }
}

TEST(Phantom, IntensitiesMatchTissueLabels) {
    phantom::PhantomSpec spec;
    spec.noise_sigma = 0.0;
    spec.infarct.enabled = false;
    const auto ph = phantom::generate(spec);
    const int k = 3;
    const auto& s = ph.lge_sa[k];
    const auto endo = phantom::to_pixels(ph.truth_lge.sa[k].endo, s);
    const auto epi = phantom::to_pixels(ph.truth_lge.sa[k].epi, s);
    const Vec2 c = joint_center(endo, epi);
    // blood at the center, myocardium mid-wall, background far out
    EXPECT_NEAR(s.pixels.at(static_cast<int>(std::lround(c.x())), static_cast<int>(std::lround(c.y()))), spec.intensities.blood, 1e-6);
    const auto pc = phantom::truth_polar(ph.truth_lge.sa[k], s, 8);
    const Vec2 mid = pc.center + pc.direction(0) * (pc.w[0] + 0.5 * pc.t[0]);
    EXPECT_NEAR(*bilinear(s.pixels, mid.x(), mid.y()), spec.intensities.myo, 1.0);
    EXPECT_NEAR(s.pixels.at(2, 2), spec.intensities.background, 1e-6);
}

TEST(Phantom, InfarctIsBrighterThanBlood) {
    const auto& ph = default_phantom();
    double sum = 0.0;
    int n = 0;
    for (std::size_t k = 0; k < ph.lge_sa.size(); ++k) {
        const auto& mask = ph.truth_lge.sa[k].infarct;
        for (std::size_t i = 0; i < mask.data.size(); ++i)
            if (mask.data[i] > 0.5) {
                sum += ph.lge_sa[k].pixels.data[i];
                ++n;
            }
    }
    ASSERT_GT(n, 50);
    EXPECT_GT(sum / n, phantom::PhantomSpec{}.intensities.blood);
}

TEST(Phantom, CineIsOffsetFromLge) {
    const auto& ph = default_phantom();
    const auto a = phantom::truth_polar(ph.truth_lge.sa[2], ph.lge_sa[2], 16).center;
    const auto b = phantom::truth_polar(ph.truth_cine.sa[2], ph.lge_sa[2], 16).center;
    const Vec2 off = (b - a) * ph.lge_sa[2].pixel_spacing;
    EXPECT_NEAR(off.x(), phantom::PhantomSpec{}.cine_offset_mm.x(), 0.3);
    EXPECT_NEAR(off.y(), phantom::PhantomSpec{}.cine_offset_mm.y(), 0.3);
}

TEST(Phantom, SpecValidation) {
    phantom::PhantomSpec s;
    s.infarct.transmurality = 0.0;
    EXPECT_THROW(s.validate(), ValidationError);
    s = {};
    s.n_sa_slices = 2;
    EXPECT_THROW(s.validate(), ValidationError);
    s = {};
    s.n_sa_slices = 20;
    EXPECT_THROW(s.validate(), ValidationError);
    s = {};
    s.wall_thickness_mm = 30;
    EXPECT_THROW(s.validate(), ValidationError);
}

TEST(Phantom, InjectMisalignmentKeepsPixels) {
    const auto& ph = default_phantom();
    const auto mis = phantom::inject_misalignment(ph.lge_sa, 5, 3);
    ASSERT_EQ(mis.shifts.size(), ph.lge_sa.size());
    bool any = false;
    for (std::size_t k = 0; k < mis.slices.size(); ++k) {
        EXPECT_LE(std::abs(mis.shifts[k].du), 5);
        EXPECT_LE(std::abs(mis.shifts[k].dv), 5);
        any = any || !(mis.shifts[k] == Shift{});
        EXPECT_EQ(mis.slices[k].pixels.data, ph.lge_sa[k].pixels.data);
    }
    EXPECT_TRUE(any);
    EXPECT_THROW(phantom::inject_misalignment(ph.lge_sa, -1, 0), ValidationError);
}
