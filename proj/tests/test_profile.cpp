#include <gtest/gtest.h>

#include <random>

#include "support.hpp"

using namespace lvseg;
using namespace lvseg::profile;
using lvseg::testing::default_phantom;

namespace {

IntensityModel toy_model() {
    IntensityModel m;
    m.i_norm = 10;
    m.i_thres = 50;
    m.i_blood = 100;
    m.i_enhan = 120;
    return m;
}

// Random tables over a band around (w0, t0).
std::vector<RayTable> random_tables(std::mt19937& rng, int n, int w0, int t0, int half) {
    std::uniform_real_distribution<double> U(0.0, 1.0);
    std::vector<RayTable> tabs(n);
    for (auto& tab : tabs) {
        const auto [wl, wh] = band_range(w0, half);
        const auto [tl, th] = band_range(t0, half);
        tab.w_lo = wl;
        tab.t_lo = tl;
        tab.nw = wh - wl + 1;
        tab.nt = th - tl + 1;
        tab.valid = true;
        tab.cost.resize(static_cast<std::size_t>(tab.nw) * tab.nt);
        for (double& c : tab.cost) c = U(rng);
        tab.best_s.assign(tab.cost.size(), 0);
        tab.best_d.assign(tab.cost.size(), 0);
    }
    return tabs;
}

} // namespace

TEST(Otsu, BimodalSplitsBetweenModes) {
    Histogram256 h{};
    h[10] = 50;
    h[200] = 50;
    // every k in (10, 200] separates equally well; ties go to the lowest k
    EXPECT_EQ(otsu_threshold(h), 11);
    h[12] = 10;
    EXPECT_EQ(otsu_threshold(h), 13);
}

TEST(Otsu, Degenerate) {
    Histogram256 h{};
    h[40] = 7;
    EXPECT_THROW(otsu_threshold(h), DegenerateError);
    h[40] = -1;
    h[41] = 2;
    EXPECT_THROW(otsu_threshold(h), ValidationError);
}

TEST(TwoMeans, SeparatesClusters) {
    const auto [lo, hi] = two_means({1, 2, 3, 10, 11, 12});
    EXPECT_DOUBLE_EQ(lo, 2.0);
    EXPECT_DOUBLE_EQ(hi, 11.0);
    const auto [a, b] = two_means({5, 5, 5});
    EXPECT_EQ(a, 5.0);
    EXPECT_EQ(b, 5.0);
}

TEST(TwoMeans, MatchesExhaustiveSplitOracle) {
    std::mt19937 rng(21);
    std::normal_distribution<double> N(0, 1);
    for (int trial = 0; trial < 30; ++trial) {
        std::vector<double> v;
        const int n = 5 + trial;
        for (int i = 0; i < n; ++i) v.push_back(std::round(8.0 * N(rng)) + (i % 3 == 0 ? 30.0 : 0.0));
        auto u = v;
        std::sort(u.begin(), u.end());
        // direct within-class sum of squares for every split
        double best = std::numeric_limits<double>::infinity(), b0 = 0, b1 = 0;
        for (std::size_t i = 1; i < u.size(); ++i) {
            if (u[i - 1] == u[i]) continue;
            double m0 = 0, m1 = 0;
            for (std::size_t k = 0; k < i; ++k) m0 += u[k] / i;
            for (std::size_t k = i; k < u.size(); ++k) m1 += u[k] / (u.size() - i);
            double sse = 0;
            for (std::size_t k = 0; k < u.size(); ++k) sse += std::pow(u[k] - (k < i ? m0 : m1), 2);
            if (sse < best - 1e-9) {
                best = sse;
                b0 = m0;
                b1 = m1;
            }
        }
        const auto [lo, hi] = two_means(v);
        EXPECT_NEAR(lo, b0, 1e-9);
        EXPECT_NEAR(hi, b1, 1e-9);
    }
}

TEST(TwoMeans, ShoulderDoesNotTrapTheSplit) {
    // a thin low shoulder plus two dominant bright classes; Lloyd seeded at
    // the extremes would settle on {shoulder, everything else}
    std::vector<double> v;
    for (int i = 0; i < 650; ++i) v.push_back(123.0 + 42.0 * i / 650.0);
    v.insert(v.end(), 4400, 180.0);
    v.insert(v.end(), 780, 220.0);
    const auto [lo, hi] = two_means(v);
    EXPECT_NEAR(hi, 220.0, 1e-9);
    EXPECT_GT(lo, 170.0);
}

TEST(IntensityModel, PhantomClassesAreOrdered) {
    const auto& ph = default_phantom();
    std::vector<std::vector<Vec2>> epi;
    for (std::size_t k = 0; k < ph.lge_sa.size(); ++k) epi.push_back(phantom::to_pixels(ph.truth_lge.sa[k].epi, ph.lge_sa[k]));
    const IntensityModel m = estimate_intensities(ph.lge_sa, epi);
    EXPECT_NO_THROW(m.validate());
    const auto& I = phantom::PhantomSpec{}.intensities;
    EXPECT_NEAR(m.i_norm, I.myo, 5.0);
    EXPECT_GT(m.i_thres, I.myo);
    EXPECT_LT(m.i_thres, I.blood);
    // slice averaging across the tapering wall leaves a partial-volume
    // shoulder below the blood peak that pulls i_blood down a little
    EXPECT_NEAR(m.i_blood, I.blood, 10.0);
    EXPECT_NEAR(m.i_enhan, I.infarct, 5.0);
}

TEST(IntensityModel, PureTissuePoolRecoversMeans) {
    const auto& I = phantom::PhantomSpec{}.intensities;
    std::vector<double> pool;
    pool.insert(pool.end(), 4000, I.blood);
    pool.insert(pool.end(), 3000, I.myo);
    pool.insert(pool.end(), 800, I.infarct);
    const IntensityModel m = estimate_from_pool(pool);
    EXPECT_DOUBLE_EQ(m.i_norm, I.myo);
    EXPECT_DOUBLE_EQ(m.i_blood, I.blood);
    EXPECT_DOUBLE_EQ(m.i_enhan, I.infarct);
    EXPECT_FALSE(m.degenerate);
    // healthy-only pool: a single bright value
    const IntensityModel h = estimate_from_pool(std::vector<double>(pool.begin(), pool.begin() + 7000));
    EXPECT_TRUE(h.degenerate);
    EXPECT_EQ(h.i_blood, h.i_enhan);
}

TEST(IntensityModel, IdenticalPixelsAreDegenerate) {
    EXPECT_THROW(estimate_from_pool(std::vector<double>(500, 3.0)), DegenerateError);
    SlicePlane s = lvseg::testing::flat_slice(8, 8, 1.0);
    EXPECT_THROW(estimate_intensities({s}, {lvseg::testing::circle({4, 4}, 3, 16)}), ValidationError);
}

TEST(Template, LayoutWithEnhancement) {
    const auto t = build_template({3, 4, 1, 1}, toy_model(), 9);
    EXPECT_EQ(t, (std::vector<double>{100, 100, 100, 50, 120, 50, 10, 10, 10}));
}

TEST(Template, TransmuralEnhancement) {
    // s = t: the wall is entirely enhanced and no threshold pixel appears
    const auto t = build_template({2, 3, 3, 0}, toy_model(), 6);
    EXPECT_EQ(t, (std::vector<double>{100, 100, 120, 120, 120, 10}));
    const auto wt = build_window_template({2, 3, 3, 0}, toy_model(), 30.0, 7);
    EXPECT_EQ(wt, (std::vector<double>{100, 100, 120, 120, 120, 30, 30}));
}

TEST(Template, NoEnhancement) {
    const auto t = build_template({2, 3, 0, 0}, toy_model(), 5);
    EXPECT_EQ(t, (std::vector<double>{100, 100, 50, 10, 10}));
}

TEST(Template, Validation) {
    EXPECT_THROW(build_template({0, 3, 0, 0}, toy_model(), 5), ValidationError);
    EXPECT_THROW(build_template({2, 3, 2, 2}, toy_model(), 8), ValidationError);
    EXPECT_THROW(build_template({2, 3, 0, 0}, toy_model(), 4), ValidationError);
}

TEST(Template, MatchErrorIsZeroOnItself) {
    const auto t = build_template({3, 5, 2, 1}, toy_model(), 12);
    EXPECT_EQ(match_error(t, t, 3, 5), 0.0);
    auto s = t;
    s[0] += 4.0;
    EXPECT_DOUBLE_EQ(match_error(t, s, 3, 5), 16.0 / 8.0);
    EXPECT_THROW(match_error(t, std::vector<double>(4), 3, 5), ValidationError);
}

TEST(EdgeStrength, Definition) {
    Profile p;
    p.values = {0, 10, 4};
    p.valid = {1, 1, 1};
    EXPECT_DOUBLE_EQ(edge_strength(p, 1), 10 + 6 + 2);
    p.valid[2] = 0;
    EXPECT_EQ(edge_strength(p, 1), 0.0);
    EXPECT_THROW(edge_strength(p, 0), ValidationError);
}

TEST(EdgeWeights, NormalizedPerSourceAndKind) {
    EdgePointSet pts(5);
    pts[0] = {Vec3::Zero(), EdgeKind::Endo, SliceLabel::SA, 2.0};
    pts[1] = {Vec3::Zero(), EdgeKind::Endo, SliceLabel::SA, 6.0};
    pts[2] = {Vec3::Zero(), EdgeKind::Endo, SliceLabel::SA, 4.0};
    pts[3] = {Vec3::Zero(), EdgeKind::Epi, SliceLabel::LA4C, 9.0};
    pts[4] = {Vec3::Zero(), EdgeKind::Endo, SliceLabel::SA, 100.0};
    pts[4].valid = false;
    assign_weights(pts);
    EXPECT_DOUBLE_EQ(pts[0].weight, 0.0);
    EXPECT_DOUBLE_EQ(pts[1].weight, 1.0);
    EXPECT_DOUBLE_EQ(pts[2].weight, 0.5);
    EXPECT_DOUBLE_EQ(pts[3].weight, 1.0); // singleton group
    EXPECT_DOUBLE_EQ(pts[4].weight, 0.0);
}

TEST(RayTable, TrueParametersScoreZeroOnCleanRay) {
    const IntensityModel m = toy_model();
    const TemplateParams truth{9, 6, 2, 1};
    const int half = 3, len = window_length(9, 6, half);
    Profile p;
    p.values = build_template(truth, m, len);
    p.valid.assign(p.values.size(), 1);
    const RayTable tab = build_ray_table(p, m, m.i_norm, 9, 6, half);
    ASSERT_TRUE(tab.valid);
    const auto k = tab.index(9, 6);
    EXPECT_EQ(tab.cost[k], 0.0);
    EXPECT_EQ(tab.best_s[k], 2);
    EXPECT_EQ(tab.best_d[k], 1);
    for (double c : tab.cost) EXPECT_GE(c, 0.0);
}

TEST(Icm, EnergyNeverIncreases) {
    std::mt19937 rng(21);
    for (int trial = 0; trial < 20; ++trial) {
        const auto tabs = random_tables(rng, 12, 8, 5, 2);
        const auto sol = icm(tabs, std::vector<int>(12, 8), std::vector<int>(12, 5), 0.05, ChainKind::Cyclic);
        for (std::size_t i = 1; i < sol.energy_trace.size(); ++i)
            EXPECT_LE(sol.energy_trace[i], sol.energy_trace[i - 1] + 1e-12);
        EXPECT_LE(sol.sweeps, 50);
        EXPECT_DOUBLE_EQ(sol.energy, chain_energy(tabs, sol.w, sol.t, 0.05, ChainKind::Cyclic));
    }
}

TEST(Icm, ZeroLambdaIsPerRayArgmin) {
    std::mt19937 rng(4);
    const auto tabs = random_tables(rng, 10, 6, 6, 2);
    const auto sol = icm(tabs, std::vector<int>(10, 6), std::vector<int>(10, 6), 0.0, ChainKind::Open);
    for (std::size_t i = 0; i < tabs.size(); ++i) {
        const auto& tab = tabs[i];
        const auto it = std::min_element(tab.cost.begin(), tab.cost.end());
        const auto k = static_cast<std::size_t>(it - tab.cost.begin());
        EXPECT_EQ(sol.w[i], tab.w_lo + static_cast<int>(k) / tab.nt);
        EXPECT_EQ(sol.t[i], tab.t_lo + static_cast<int>(k) % tab.nt);
    }
}

TEST(Icm, LocalEnergyConsistentWithChainEnergy) {
    // Changing one ray changes the chain energy by exactly the change in its
    // local terms; checks the cyclic wrap bookkeeping.
    std::mt19937 rng(8);
    std::uniform_int_distribution<int> U(1, 9);
    for (auto kind : {ChainKind::Cyclic, ChainKind::Open}) {
        for (int trial = 0; trial < 50; ++trial) {
            const int n = 3 + trial % 6;
            std::vector<int> w(n), t(n);
            for (int i = 0; i < n; ++i) {
                w[i] = U(rng);
                t[i] = U(rng);
            }
            const int i = trial % n, wi = U(rng), ti = U(rng);
            auto w2 = w, t2 = t;
            w2[i] = wi;
            t2[i] = ti;
            const double d_full = smoothness(w2, t2, kind) - smoothness(w, t, kind);
            const double d_local = profile::detail::local_smooth(w, t, i, wi, ti, kind) - profile::detail::local_smooth(w, t, i, w[i], t[i], kind);
            EXPECT_NEAR(d_full, d_local, 1e-9);
        }
    }
}

TEST(Icm, Validation) {
    std::mt19937 rng(1);
    const auto tabs = random_tables(rng, 4, 5, 5, 1);
    EXPECT_THROW(icm(tabs, {5, 5, 5}, {5, 5, 5, 5}, 0.1, ChainKind::Cyclic), ValidationError);
    EXPECT_THROW(icm(tabs, {5, 5, 5, 5}, {5, 5, 5, 5}, -1.0, ChainKind::Cyclic), ValidationError);
    EXPECT_THROW(icm(tabs, {9, 5, 5, 5}, {5, 5, 5, 5}, 0.1, ChainKind::Cyclic), ValidationError);
}

TEST(DetectSa, RecoversPhantomWall) {
    const auto& ph = default_phantom();
    const int k = 3;
    const SlicePlane& lge = ph.lge_sa[k];
    const auto truth = phantom::truth_polar(ph.truth_lge.sa[k], lge, 79);
    std::vector<std::vector<Vec2>> epi;
    for (std::size_t i = 0; i < ph.lge_sa.size(); ++i) epi.push_back(phantom::to_pixels(ph.truth_lge.sa[i].epi, ph.lge_sa[i]));
    const IntensityModel m = estimate_intensities(ph.lge_sa, epi);
    // start 2 px off in both w and t
    PolarContour coarse = truth;
    for (auto& w : coarse.w) w += 2.0;
    for (auto& t : coarse.t) t -= 2.0;
    const auto det = detect_edges_sa(lge, coarse, m);
    double err_w = 0.0, err_t = 0.0;
    for (std::size_t i = 0; i < truth.size(); ++i) {
        err_w += std::abs(det.contour.w[i] - truth.w[i]);
        err_t += std::abs(det.contour.t[i] - truth.t[i]);
    }
    EXPECT_LT(err_w / truth.size(), 1.0);
    EXPECT_LT(err_t / truth.size(), 1.0);
    EXPECT_EQ(det.edges.size(), 2 * truth.size());
}

TEST(DetectLa, ProducesEdgesOnBothSides) {
    const auto& ph = default_phantom();
    std::vector<std::vector<Vec3>> endo, epi;
    std::vector<std::vector<Vec2>> epi_px;
    for (std::size_t i = 0; i < ph.lge_sa.size(); ++i) {
        endo.push_back(ph.truth_lge.sa[i].endo);
        epi.push_back(ph.truth_lge.sa[i].epi);
        epi_px.push_back(phantom::to_pixels(ph.truth_lge.sa[i].epi, ph.lge_sa[i]));
    }
    const IntensityModel m = estimate_intensities(ph.lge_sa, epi_px);
    DetectConfig cfg;
    cfg.band = 9;
    const auto la = detect_edges_la(ph.lge_la4c, ph.lge_sa, endo, epi, m, cfg);
    ASSERT_FALSE(la.skipped) << la.warning;
    for (const auto& side : la.sides) {
        EXPECT_EQ(side.l.size(), (ph.lge_sa.size() - 1) * cfg.n_interp + 1);
        EXPECT_TRUE(std::is_sorted(side.l.begin(), side.l.end()));
    }
    for (const auto& e : la.edges) {
        EXPECT_EQ(e.source, SliceLabel::LA4C);
        // every edge point lies in the LA plane
        EXPECT_NEAR((e.position - ph.lge_la4c.origin).dot(ph.lge_la4c.normal()), 0.0, 1e-6);
    }
}

TEST(DetectLa, ParallelPlaneIsSkipped) {
    const auto& ph = default_phantom();
    std::vector<std::vector<Vec3>> endo, epi;
    for (const auto& t : ph.truth_lge.sa) {
        endo.push_back(t.endo);
        epi.push_back(t.epi);
    }
    IntensityModel m = toy_model();
    const auto la = detect_edges_la(ph.lge_sa[0], ph.lge_sa, endo, epi, m);
    EXPECT_TRUE(la.skipped);
    EXPECT_TRUE(la.edges.empty());
}
