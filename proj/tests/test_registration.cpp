#include <gtest/gtest.h>

#include <random>

#include "support.hpp"

using namespace lvseg;
using lvseg::testing::default_phantom;

namespace {

Image2D random_window(std::mt19937& rng, int w, int h) {
    std::uniform_int_distribution<int> U(0, 255);
    Image2D img(w, h);
    for (double& v : img.data) v = U(rng);
    return img;
}

// Direct transcription of the full-neighborhood sum, used as an oracle.
double pi_oracle(const Image2D& a, const Image2D& b, int r, double delta) {
    double total = 0.0;
    int n = 0;
    for (int y = 0; y < a.height; ++y)
        for (int x = 0; x < a.width; ++x) {
            double acc = 0.0;
            int cnt = 0;
            for (int dy = -r; dy <= r; ++dy)
                for (int dx = -r; dx <= r; ++dx) {
                    if ((dx == 0 && dy == 0) || dx * dx + dy * dy > r * r) continue;
                    const int u = x + dx, v = y + dy;
                    if (u < 0 || v < 0 || u >= a.width || v >= a.height) continue;
                    const double e = (a.at(x, y) - b.at(x, y)) - (a.at(u, v) - b.at(u, v));
                    acc += delta * delta / (delta * delta + e * e);
                    ++cnt;
                }
            if (cnt > 0) {
                total += acc / cnt;
                ++n;
            }
        }
    return total / n;
}

} // namespace

TEST(PatternIntensity, MatchesOracle) {
    std::mt19937 rng(5);
    for (int trial = 0; trial < 5; ++trial) {
        const Image2D a = reg::normalized01(random_window(rng, 17, 13));
        const Image2D b = reg::normalized01(random_window(rng, 17, 13));
        EXPECT_NEAR(reg::pattern_intensity(a, b, {5, 0.1}), pi_oracle(a, b, 5, 0.1), 1e-12);
        EXPECT_NEAR(reg::pattern_intensity(a, b, {2, 0.3}), pi_oracle(a, b, 2, 0.3), 1e-12);
    }
}

TEST(PatternIntensity, IdentityAndRange) {
    std::mt19937 rng(9);
    const Image2D a = random_window(rng, 20, 20);
    const Image2D b = random_window(rng, 20, 20);
    EXPECT_EQ(reg::pattern_intensity(a, a), 1.0);
    const double s = reg::pattern_intensity(reg::normalized01(a), reg::normalized01(b));
    EXPECT_GT(s, 0.0);
    EXPECT_LT(s, 1.0);
}

TEST(PatternIntensity, Validation) {
    EXPECT_THROW(reg::pattern_intensity(Image2D(4, 4), Image2D(5, 4)), ValidationError);
    EXPECT_THROW(reg::pattern_intensity(Image2D(4, 4), Image2D(4, 4), {0, 0.1}), ValidationError);
    EXPECT_THROW(reg::pattern_intensity(Image2D(4, 4), Image2D(4, 4), {3, 0.0}), ValidationError);
}

TEST(PatternIntensity, NormalizedWindowIsUnitRange) {
    Image2D img(3, 1);
    img.data = {2.0, 4.0, 6.0};
    EXPECT_EQ(reg::normalized01(img).data, (std::vector<double>{0.0, 0.5, 1.0}));
    Image2D flat(2, 2, 7.0);
    for (double v : reg::normalized01(flat).data) EXPECT_EQ(v, 0.0);
}

TEST(Registration, RoiDoublesTheBoundingBox) {
    SlicePlane s = lvseg::testing::flat_slice(100, 100);
    const std::vector<Vec2> epi{{40, 40}, {60, 40}, {60, 50}, {40, 50}};
    const auto roi = reg::define_roi(epi, s);
    EXPECT_EQ(roi.u0, 30);
    EXPECT_EQ(roi.u1(), 70);
    EXPECT_EQ(roi.v0, 35);
    EXPECT_EQ(roi.v1(), 55);
    // clipped at the border
    const auto edge = reg::define_roi({{0, 0}, {20, 0}, {20, 20}, {0, 20}}, s);
    EXPECT_EQ(edge.u0, 0);
    EXPECT_EQ(edge.v0, 0);
    EXPECT_THROW(reg::define_roi({}, s), ValidationError);
}

TEST(Registration, RecoversKnownShiftOnPhantom) {
    const auto& ph = default_phantom();
    const SlicePlane& lge = ph.lge_sa[3];
    const auto epi = phantom::to_pixels(ph.truth_lge.sa[3].epi, lge);
    const auto roi = reg::define_roi(epi, lge);
    // shift the LGE content: lge'(x) = lge(x - s), so x_lge' = x_lge + s
    const Shift truth{4, -3};
    SlicePlane moved = lge;
    for (int v = 0; v < lge.height(); ++v)
        for (int u = 0; u < lge.width(); ++u)
            moved.pixels.at(u, v) = lge.pixels.contains(u - truth.du, v - truth.dv) ? lge.pixels.at(u - truth.du, v - truth.dv) : 0.0;
    const auto r = reg::register_translation(lge, moved, roi, 6);
    EXPECT_EQ(r.shift, truth);
    EXPECT_EQ(r.candidates_evaluated, 13 * 13);
}

TEST(Registration, ThreadCountDoesNotChangeResult) {
    const auto& ph = default_phantom();
    const SlicePlane cine = resample_onto(ph.cine_sa[2], ph.lge_sa[2]);
    const auto roi = reg::define_roi(phantom::to_pixels(ph.truth_cine.sa[2].epi, ph.lge_sa[2]), ph.lge_sa[2]);
    const auto a = reg::register_translation(cine, ph.lge_sa[2], roi, 5, {}, 1);
    const auto b = reg::register_translation(cine, ph.lge_sa[2], roi, 5, {}, 3);
    EXPECT_EQ(a.shift, b.shift);
    EXPECT_EQ(a.score, b.score);
}

TEST(Registration, NoAdmissibleShift) {
    SlicePlane s = lvseg::testing::flat_slice(20, 20, 1.0);
    const reg::Roi roi{0, 0, 20, 20};
    // only the zero shift keeps the window inside
    EXPECT_EQ(reg::register_translation(s, s, roi, 3).candidates_evaluated, 1);
    SlicePlane small = lvseg::testing::flat_slice(10, 10, 1.0);
    EXPECT_THROW(reg::register_translation(s, small, roi, 2), RegistrationError);
}

TEST(Registration, PropagateContour) {
    const std::vector<Vec2> c{{1, 2}, {3, 4}};
    const auto p = reg::propagate_contour(c, {2, -1});
    EXPECT_EQ(p[0], Vec2(3, 1));
    EXPECT_EQ(p[1], Vec2(5, 3));
}
