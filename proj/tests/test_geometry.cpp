#include <gtest/gtest.h>

#include <random>

#include "support.hpp"

using namespace lvseg;
using lvseg::testing::circle;
using lvseg::testing::flat_slice;

namespace {

SlicePlane oblique_slice() {
    SlicePlane s = flat_slice(40, 30);
    s.origin = Vec3(3.0, -2.0, 7.5);
    s.row_dir = Vec3(1.0, 1.0, 0.0).normalized();
    s.col_dir = Vec3(-1.0, 1.0, 2.0).normalized();
    s.pixel_spacing = 1.25;
    return s;
}

} // namespace

TEST(Geometry, ImageWorldRoundTrip) {
    const SlicePlane s = oblique_slice();
    std::mt19937 rng(3);
    std::uniform_real_distribution<double> U(-50, 50);
    for (int i = 0; i < 100; ++i) {
        const Vec2 uv(U(rng), U(rng));
        const Vec2 back = world_to_image(image_to_world(uv, s), s);
        EXPECT_NEAR((back - uv).norm(), 0.0, 1e-12);
        const Vec3 f(U(rng), U(rng), U(rng));
        EXPECT_NEAR((world_to_frame(frame_to_world(f, s), s) - f).norm(), 0.0, 1e-12);
    }
}

TEST(Geometry, TranslatedMovesOriginInPlane) {
    const SlicePlane s = oblique_slice();
    const SlicePlane t = translated(s, {3, -2});
    const Vec3 d = t.origin - s.origin;
    EXPECT_NEAR(d.dot(s.normal()), 0.0, 1e-12);
    EXPECT_NEAR(d.dot(s.row_dir), 3 * s.pixel_spacing, 1e-12);
    EXPECT_NEAR(d.dot(s.col_dir), -2 * s.pixel_spacing, 1e-12);
    EXPECT_EQ(t.pixels.data, s.pixels.data);
}

TEST(Geometry, ShiftPreferenceOrder) {
    EXPECT_TRUE(shift_preferred({0, 0}, {1, 0}));
    EXPECT_TRUE(shift_preferred({-1, 0}, {0, 1}));
    EXPECT_TRUE(shift_preferred({0, -1}, {0, 1}));
    EXPECT_FALSE(shift_preferred({2, 0}, {1, 1}));
}

TEST(Geometry, BilinearExactOnAffineImages) {
    Image2D img(6, 5);
    for (int v = 0; v < 5; ++v)
        for (int u = 0; u < 6; ++u) img.at(u, v) = 2.0 * u - 3.0 * v + 1.0;
    EXPECT_NEAR(*bilinear(img, 2.5, 1.25), 2.0 * 2.5 - 3.0 * 1.25 + 1.0, 1e-12);
    EXPECT_NEAR(*bilinear(img, 5.0, 4.0), 2.0 * 5 - 3.0 * 4 + 1.0, 1e-12);
    EXPECT_FALSE(bilinear(img, -0.01, 1.0));
    EXPECT_FALSE(bilinear(img, 5.01, 1.0));
}

TEST(Geometry, SampleAlongRejectsOutOfPlaneRays) {
    const SlicePlane s = oblique_slice();
    Ray r{s.origin, s.row_dir, 1.0, 4};
    EXPECT_NO_THROW(sample_along(s, r));
    r.direction = (s.row_dir + 0.1 * s.normal()).normalized();
    EXPECT_THROW(sample_along(s, r), CoplanarityError);
    r.direction = s.row_dir;
    r.start = s.origin + 0.5 * s.normal();
    EXPECT_THROW(sample_along(s, r), CoplanarityError);
}

TEST(Geometry, SampleAlongMarksOutsideSamplesInvalid) {
    SlicePlane s = flat_slice(10, 10, 4.0);
    const Profile p = sample_along(s, Ray{image_to_world({5, 5}, s), Vec3::UnitX(), 1.0, 8});
    ASSERT_EQ(p.size(), 8u);
    EXPECT_EQ(p.valid_count(), 5u); // u = 5..9
    EXPECT_TRUE(p.ok(4));
    EXPECT_FALSE(p.ok(5));
    EXPECT_EQ(p.values[6], 0.0);
}

TEST(Geometry, ResampleOntoIdentityAndShift) {
    SlicePlane a = flat_slice(12, 10);
    for (std::size_t i = 0; i < a.pixels.data.size(); ++i) a.pixels.data[i] = static_cast<double>(i % 7);
    const SlicePlane same = resample_onto(a, a);
    EXPECT_EQ(same.pixels.data, a.pixels.data);
    // target displaced by one pixel along u sees the source one pixel further on
    const SlicePlane t = translated(a, {1, 0});
    const SlicePlane r = resample_onto(a, t, -1.0);
    EXPECT_EQ(r.pixels.at(0, 3), a.pixels.at(1, 3));
    EXPECT_EQ(r.pixels.at(11, 3), -1.0);
}

TEST(Geometry, IntersectPlanesOrthogonal) {
    SlicePlane sa = flat_slice(20, 20);
    SlicePlane la = flat_slice(20, 20);
    la.row_dir = Vec3::UnitX();
    la.col_dir = Vec3::UnitZ();
    la.origin = Vec3(0.0, 5.0, -10.0);
    const auto seg = intersect_planes(sa, la);
    ASSERT_TRUE(seg);
    EXPECT_NEAR(seg->length(), 19.0, 1e-9);
    EXPECT_NEAR(seg->a.y(), 5.0, 1e-9);
    EXPECT_NEAR(seg->a.z(), 0.0, 1e-9);
    // parallel planes never intersect
    SlicePlane par = sa;
    par.origin.z() = 3.0;
    EXPECT_FALSE(intersect_planes(sa, par));
    // disjoint footprints
    la.origin = Vec3(0.0, 50.0, -10.0);
    EXPECT_FALSE(intersect_planes(sa, la));
}

TEST(Geometry, PolygonHelpers) {
    const std::vector<Vec2> sq{{0, 0}, {4, 0}, {4, 4}, {0, 4}};
    EXPECT_DOUBLE_EQ(polygon_area(sq), 16.0);
    EXPECT_TRUE(point_in_polygon(sq, {1, 1}));
    EXPECT_FALSE(point_in_polygon(sq, {5, 1}));
    const auto hits = ray_polygon_hits(sq, {2, 2}, {1, 0});
    ASSERT_EQ(hits.size(), 1u);
    EXPECT_DOUBLE_EQ(hits[0], 2.0);
    const auto c = circle({0, 0}, 10.0, 64);
    const auto grown = offset_radially(c, {0, 0}, 1.5);
    for (const auto& p : grown) EXPECT_NEAR(p.norm(), 11.5, 1e-12);
}

TEST(Contour, PolarFromCircles) {
    const Vec2 c(20, 20);
    const auto pc = polar_from_contours(c, circle(c, 8.0, 360), circle(c, 14.0, 360), 36, true);
    ASSERT_EQ(pc.size(), 36u);
    for (std::size_t k = 0; k < pc.size(); ++k) {
        EXPECT_NEAR(pc.w[k], 8.0, 2e-3);
        EXPECT_NEAR(pc.t[k], 6.0, 4e-3);
    }
    EXPECT_THROW(polar_from_contours({100, 100}, circle(c, 8, 36), circle(c, 14, 36), 12), ParameterizationError);
}

TEST(Contour, StrictRejectsNonStarShapes) {
    // a C shape: rays from the centroid cross it more than once
    std::vector<Vec2> cshape{{0, 0}, {10, 0}, {10, 2}, {2, 2}, {2, 8}, {10, 8}, {10, 10}, {0, 10}};
    const Vec2 c(4, 5);
    EXPECT_THROW(polar_from_contours(c, cshape, circle(c, 30, 90), 24, true), ParameterizationError);
}
