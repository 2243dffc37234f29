#pragma once

// Coupled endo/epi simplex meshes: construction from contour stacks,
// deformation toward weighted edge points, and re-slicing into contours.
//
// All mesh coordinates live in a reference frame given by one slice pose:
// (u, v) pixels in-plane and w pixels along the slice normal.

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <string>
#include <unordered_map>
#include <vector>

#include "lvseg/error.hpp"
#include "lvseg/geometry.hpp"
#include "lvseg/parallel.hpp"
#include "lvseg/profile.hpp"

namespace lvseg::mesh {

struct Frame {
    Vec3 origin = Vec3::Zero();
    Vec3 row_dir = Vec3::UnitX();
    Vec3 col_dir = Vec3::UnitY();
    double spacing = 1.0;

    static Frame of(const SlicePlane& s) { return {s.origin, s.row_dir, s.col_dir, s.pixel_spacing}; }
    Vec3 normal() const { return row_dir.cross(col_dir); }
    Vec3 to_frame(const Vec3& world) const {
        const Vec3 d = world - origin;
        return Vec3(d.dot(row_dir), d.dot(col_dir), d.dot(normal())) / spacing;
    }
    Vec3 to_world(const Vec3& f) const {
        return origin + spacing * (f.x() * row_dir + f.y() * col_dir + f.z() * normal());
    }
};

enum class Role { Endo, Epi };

struct SimplexMesh {
    Role role = Role::Endo;
    int n_rings = 0;
    int ring_size = 0;
    std::vector<Vec3> vertices;             // ring-major: index = ring * ring_size + j
    std::vector<std::array<int, 3>> nbr;    // unused slots hold -1
    std::vector<std::uint8_t> degree;
    std::vector<std::uint8_t> boundary;

    int index(int ring, int j) const { return ring * ring_size + ((j % ring_size) + ring_size) % ring_size; }
    std::size_t size() const { return vertices.size(); }
    std::vector<int> ring(int r) const {
        std::vector<int> out(static_cast<std::size_t>(ring_size));
        for (int j = 0; j < ring_size; ++j) out[j] = index(r, j);
        return out;
    }
};

struct VertexPairing {
    std::vector<int> epi_of_endo; // identity under the shared indexing, kept explicit
    std::vector<Vec3> offset0;    // p_epi^0 - p_endo^0
};

struct MeshPair {
    SimplexMesh endo;
    SimplexMesh epi;
    VertexPairing pairing;
};

namespace detail {

// Horizontal partner of column j in ring r. Even rings pair (2m, 2m+1), odd
// rings (2m+1, 2m+2), so every vertex alternates left/right along its ring
// and the pattern flips between rings.
inline int partner(int r, int j, int n) {
    if (r % 2 == 0) return j % 2 == 0 ? j + 1 : j - 1;
    return j % 2 == 1 ? (j + 1) % n : (j - 1 + n) % n;
}

inline void connect(SimplexMesh& m) {
    const int n = m.ring_size, R = m.n_rings;
    m.nbr.assign(m.vertices.size(), {-1, -1, -1});
    m.degree.assign(m.vertices.size(), 0);
    m.boundary.assign(m.vertices.size(), 0);
    for (int r = 0; r < R; ++r) {
        for (int j = 0; j < n; ++j) {
            const int i = m.index(r, j);
            if (r == 0 || r == R - 1) {
                m.nbr[i] = {m.index(r, j - 1), m.index(r, j + 1), -1};
                m.degree[i] = 2;
                m.boundary[i] = 1;
            } else {
                m.nbr[i] = {m.index(r - 1, j), m.index(r + 1, j), m.index(r, partner(r, j, n))};
                m.degree[i] = 3;
            }
        }
    }
}

// Resample a planar contour at n even angles about center (farthest crossing).
inline std::vector<Vec3> resample_ring(const std::vector<Vec3>& contour, const Vec2& center, int n) {
    std::vector<Vec2> poly;
    double z = 0.0;
    for (const auto& p : contour) {
        poly.emplace_back(p.x(), p.y());
        z += p.z();
    }
    z /= static_cast<double>(contour.size());
    std::vector<Vec3> out;
    for (int k = 0; k < n; ++k) {
        const double a = 2.0 * std::numbers::pi * k / n;
        const Vec2 dir(std::cos(a), std::sin(a));
        const auto hits = ray_polygon_hits(poly, center, dir);
        if (hits.empty()) throw ParameterizationError("contour not star-shaped about its center");
        const Vec2 q = center + hits.back() * dir;
        out.emplace_back(q.x(), q.y(), z);
    }
    return out;
}

} // namespace detail

/// Build paired meshes from per-slice endo/epi contours given in frame
/// coordinates (one planar contour per slice, ordered along the stack).
inline MeshPair build_meshes(const std::vector<std::vector<Vec3>>& endo, const std::vector<std::vector<Vec3>>& epi,
                             int ring_size = 80, int n_interp_rings = 3) {
    if (endo.size() != epi.size()) throw ValidationError("build_meshes: endo/epi slice counts differ");
    if (endo.size() < 3) throw ValidationError("build_meshes: need at least 3 slices");
    if (ring_size < 4 || ring_size % 2 != 0) throw ValidationError("build_meshes: ring size must be even and >= 4");
    if (n_interp_rings < 0) throw ValidationError("build_meshes: n_interp_rings must be non-negative");

    std::vector<std::vector<Vec3>> en_rings, ep_rings;
    for (std::size_t k = 0; k < endo.size(); ++k) {
        if (endo[k].size() < 3 || epi[k].size() < 3) throw ValidationError("build_meshes: contour with fewer than 3 points");
        Vec2 c = Vec2::Zero();
        for (const auto& p : endo[k]) c += p.head<2>();
        for (const auto& p : epi[k]) c += p.head<2>();
        c /= static_cast<double>(endo[k].size() + epi[k].size());
        en_rings.push_back(detail::resample_ring(endo[k], c, ring_size));
        ep_rings.push_back(detail::resample_ring(epi[k], c, ring_size));
    }

    MeshPair mp;
    mp.endo.role = Role::Endo;
    mp.epi.role = Role::Epi;
    const int R = static_cast<int>(endo.size()) + (static_cast<int>(endo.size()) - 1) * n_interp_rings;
    for (auto* m : {&mp.endo, &mp.epi}) {
        m->n_rings = R;
        m->ring_size = ring_size;
        m->vertices.reserve(static_cast<std::size_t>(R) * ring_size);
    }
    for (std::size_t k = 0; k < endo.size(); ++k) {
        const int steps = k + 1 < endo.size() ? n_interp_rings + 1 : 1;
        for (int q = 0; q < steps; ++q) {
            const double f = static_cast<double>(q) / (n_interp_rings + 1);
            for (int j = 0; j < ring_size; ++j) {
                if (q == 0) {
                    mp.endo.vertices.push_back(en_rings[k][j]);
                    mp.epi.vertices.push_back(ep_rings[k][j]);
                } else {
                    mp.endo.vertices.push_back(en_rings[k][j] + f * (en_rings[k + 1][j] - en_rings[k][j]));
                    mp.epi.vertices.push_back(ep_rings[k][j] + f * (ep_rings[k + 1][j] - ep_rings[k][j]));
                }
            }
        }
    }
    detail::connect(mp.endo);
    detail::connect(mp.epi);
    for (std::size_t i = 0; i < mp.endo.size(); ++i) {
        mp.pairing.epi_of_endo.push_back(static_cast<int>(i));
        mp.pairing.offset0.push_back(mp.epi.vertices[i] - mp.endo.vertices[i]);
    }
    return mp;
}

// ---------------------------------------------------------------------------
// geometry of simplex cells

namespace detail {

inline Vec3 ring_center(const SimplexMesh& m, const std::vector<Vec3>& pos, int r) {
    Vec3 c = Vec3::Zero();
    for (int j = 0; j < m.ring_size; ++j) c += pos[m.index(r, j)];
    return c / static_cast<double>(m.ring_size);
}

inline Vec3 circumcenter(const Vec3& a, const Vec3& b, const Vec3& c) {
    const Vec3 u = a - c, v = b - c;
    const Vec3 w = u.cross(v);
    const double w2 = w.squaredNorm();
    if (w2 < 1e-300) return (a + b + c) / 3.0;
    return c + (u.squaredNorm() * v - v.squaredNorm() * u).cross(w) / (2.0 * w2);
}

struct LocalShape {
    Vec3 normal = Vec3::UnitX();
    Vec3 g = Vec3::Zero();  // neighbor barycenter
    double r = 0.0;         // circumradius of the neighbors
    double d = 0.0;         // distance from barycenter to circumcenter (in-plane)
    double h = 0.0;         // height of the vertex above the neighbors' plane
    double phi = 0.0;       // simplex angle
};

// Outward unit normal and simplex angle of vertex i at positions pos.
inline LocalShape local_shape(const SimplexMesh& m, const std::vector<Vec3>& pos, const std::vector<Vec3>& centers,
                              int i) {
    LocalShape s;
    const Vec3& p = pos[i];
    const int r = i / m.ring_size;
    const Vec3 radial = p - centers[r];
    if (m.boundary[i]) {
        Vec3 q1 = pos[m.nbr[i][0]], q2 = pos[m.nbr[i][1]];
        Vec3 pp = p;
        q1.z() = q2.z() = pp.z() = 0.0;
        Vec3 chord = q2 - q1;
        const double len = chord.norm();
        Vec3 rad2(radial.x(), radial.y(), 0.0);
        if (len < 1e-12) {
            s.normal = rad2.norm() > 0 ? Vec3(rad2.normalized()) : Vec3::UnitX();
            return s;
        }
        chord /= len;
        s.normal = Vec3(chord.y(), -chord.x(), 0.0);
        if (s.normal.dot(rad2) < 0) s.normal = -s.normal;
        s.g = 0.5 * (q1 + q2);
        s.r = 0.5 * len;
        s.d = (pp - s.g).dot(chord); // tangential offset along the chord
        s.h = (pp - s.g).dot(s.normal);
        s.phi = std::atan2(2.0 * s.r * s.h, s.r * s.r - s.d * s.d - s.h * s.h);
        return s;
    }
    const Vec3& q1 = pos[m.nbr[i][0]];
    const Vec3& q2 = pos[m.nbr[i][1]];
    const Vec3& q3 = pos[m.nbr[i][2]];
    Vec3 n = (q2 - q1).cross(q3 - q1);
    if (n.norm() < 1e-12) {
        n = Vec3(radial.x(), radial.y(), 0.0);
        if (n.norm() < 1e-12) n = Vec3::UnitX();
    }
    n.normalize();
    if (n.dot(radial) < 0) n = -n;
    s.normal = n;
    s.g = (q1 + q2 + q3) / 3.0;
    const Vec3 c = circumcenter(q1, q2, q3);
    s.r = (q1 - c).norm();
    const double h = (p - q1).dot(n);
    const Vec3 proj = p - h * n;
    const double dp = (proj - c).norm();
    s.h = h;
    s.d = (s.g - c).norm();
    s.phi = std::atan2(2.0 * s.r * h, s.r * s.r - dp * dp - h * h);
    return s;
}

// Height above the neighbor plane that gives simplex angle phi for a vertex
// projecting at distance d from the circumcenter (stable quadratic root).
inline double height_for_angle(double phi, double r, double d) {
    const double s = std::sin(phi), c = std::cos(phi);
    const double k = r * r - d * d;
    const double disc = std::max(0.0, r * r * c * c + s * s * k);
    const double den = r * c + (c >= 0 ? 1.0 : -1.0) * std::sqrt(disc);
    if (std::abs(den) < 1e-300) return 0.0;
    return s * k / den;
}

} // namespace detail

struct VertexFrameCache {
    std::vector<Vec3> centers;
    std::vector<detail::LocalShape> shape;
};

inline VertexFrameCache shapes(const SimplexMesh& m, const std::vector<Vec3>& pos) {
    VertexFrameCache c;
    for (int r = 0; r < m.n_rings; ++r) c.centers.push_back(detail::ring_center(m, pos, r));
    c.shape.resize(pos.size());
    for (std::size_t i = 0; i < pos.size(); ++i) c.shape[i] = detail::local_shape(m, pos, c.centers, static_cast<int>(i));
    return c;
}

/// Smoothing displacement of vertex i: the full tangential pull toward the
/// neighbor barycenter plus a normal move to the height matching the mean
/// simplex angle of its neighbors. Boundary vertices use the planar variant
/// and get no through-plane component.
inline Vec3 smooth_force(const SimplexMesh& m, const std::vector<Vec3>& pos, const VertexFrameCache& cache, int i) {
    const auto& s = cache.shape[i];
    double phi_sum = 0.0;
    int count = 0;
    for (int k = 0; k < m.degree[i]; ++k) {
        const int q = m.nbr[i][k];
        if (m.boundary[q] != m.boundary[i]) continue; // compare like with like
        phi_sum += cache.shape[q].phi;
        ++count;
    }
    const double phi_target = count ? phi_sum / count : s.phi;
    if (m.boundary[i]) {
        const double h = detail::height_for_angle(phi_target, s.r, 0.0);
        Vec3 f = s.g + h * s.normal - pos[i];
        f.z() = 0.0;
        return f;
    }
    const double h = detail::height_for_angle(phi_target, s.r, s.d);
    return s.g + h * s.normal - pos[i];
}

inline Vec3 smooth_force(const SimplexMesh& m, int i) { return smooth_force(m, m.vertices, shapes(m, m.vertices), i); }

// ---------------------------------------------------------------------------
// edge attraction

struct EdgeTarget {
    Vec3 position = Vec3::Zero(); // frame coordinates
    double weight = 0.0;
};

/// Uniform hash grid answering exact nearest-neighbor queries.
class NearestGrid {
public:
    NearestGrid(std::vector<EdgeTarget> pts, double cell) : pts_(std::move(pts)), cell_(cell) {
        if (!(cell_ > 0.0)) throw ValidationError("grid cell size must be positive");
        for (std::size_t i = 0; i < pts_.size(); ++i) {
            const auto key = cell_of(pts_[i].position);
            grid_[hash(key)].push_back(static_cast<int>(i));
            for (int a = 0; a < 3; ++a) {
                lo_[a] = std::min(lo_[a], key[a]);
                hi_[a] = std::max(hi_[a], key[a]);
            }
        }
    }

    bool empty() const { return pts_.empty(); }
    const EdgeTarget& point(int i) const { return pts_[i]; }

    /// Index of the closest point (ties: lowest index); -1 when empty.
    int nearest(const Vec3& q) const {
        if (pts_.empty()) return -1;
        const auto c = cell_of(q);
        int best = -1;
        double best_d2 = std::numeric_limits<double>::infinity();
        // the farthest shell that can still hold points
        long max_shell = 0;
        for (int a = 0; a < 3; ++a) max_shell = std::max({max_shell, std::abs(c[a] - lo_[a]), std::abs(hi_[a] - c[a])});
        for (long shell = 0; shell <= max_shell; ++shell) {
            for (long dx = -shell; dx <= shell; ++dx)
                for (long dy = -shell; dy <= shell; ++dy)
                    for (long dz = -shell; dz <= shell; ++dz) {
                        if (std::max({std::abs(dx), std::abs(dy), std::abs(dz)}) != shell) continue;
                        const auto it = grid_.find(hash({c[0] + dx, c[1] + dy, c[2] + dz}));
                        if (it == grid_.end()) continue;
                        for (int idx : it->second) {
                            const auto kc = cell_of(pts_[idx].position);
                            if (kc[0] != c[0] + dx || kc[1] != c[1] + dy || kc[2] != c[2] + dz) continue;
                            const double d2 = (pts_[idx].position - q).squaredNorm();
                            if (d2 < best_d2 || (d2 == best_d2 && idx < best)) {
                                best_d2 = d2;
                                best = idx;
                            }
                        }
                    }
            // every point outside the visited cube is farther than shell * cell
            if (best >= 0 && std::sqrt(best_d2) <= static_cast<double>(shell) * cell_) break;
        }
        return best;
    }

private:
    using Key = std::array<long, 3>;
    Key cell_of(const Vec3& p) const {
        return {static_cast<long>(std::floor(p.x() / cell_)), static_cast<long>(std::floor(p.y() / cell_)),
                static_cast<long>(std::floor(p.z() / cell_))};
    }
    static std::size_t hash(const Key& k) {
        std::size_t h = 1469598103934665603ULL;
        for (long v : k) h = (h ^ static_cast<std::size_t>(v)) * 1099511628211ULL;
        return h;
    }

    std::vector<EdgeTarget> pts_;
    double cell_;
    std::unordered_map<std::size_t, std::vector<int>> grid_;
    Key lo_{std::numeric_limits<long>::max(), std::numeric_limits<long>::max(), std::numeric_limits<long>::max()};
    Key hi_{std::numeric_limits<long>::min(), std::numeric_limits<long>::min(), std::numeric_limits<long>::min()};
};

inline double gate(double x) { return std::abs(x) <= 1.0 ? x : 0.0; }

/// Attraction toward the closest edge point along the vertex normal:
/// omega * G(((p_hat - p) . n) / d_cutoff) * n.
inline Vec3 edge_force(const Vec3& p, const Vec3& n, const NearestGrid& grid, double d_cutoff) {
    const int k = grid.nearest(p);
    if (k < 0) return Vec3::Zero();
    const auto& e = grid.point(k);
    return e.weight * gate((e.position - p).dot(n) / d_cutoff) * n;
}

inline Vec3 edge_force(const Vec3& p, const Vec3& n, const std::vector<EdgeTarget>& edges, double d_cutoff) {
    return edge_force(p, n, NearestGrid(edges, d_cutoff), d_cutoff);
}

/// Spring keeping each endo/epi pair at its initial offset.
inline void thickness_force(const VertexPairing& pairing, const std::vector<Vec3>& endo, const std::vector<Vec3>& epi,
                            std::vector<Vec3>& f_endo, std::vector<Vec3>& f_epi) {
    f_endo.assign(endo.size(), Vec3::Zero());
    f_epi.assign(epi.size(), Vec3::Zero());
    for (std::size_t i = 0; i < pairing.epi_of_endo.size(); ++i) {
        const int e = pairing.epi_of_endo[i];
        f_epi[e] = endo[i] + pairing.offset0[i] - epi[e];
        f_endo[i] = epi[e] - pairing.offset0[i] - endo[i];
    }
}

// ---------------------------------------------------------------------------
// deformation

struct DeformParams {
    double gamma = 0.7;
    double alpha = 0.3;
    double beta = 0.3;
    double mu = 0.1;
    double d_cutoff = 3.0;
    int max_iters = 30;
    double min_move = 0.1;

    void validate() const {
        if (!(gamma > 0.0 && gamma <= 1.0)) throw ValidationError("gamma must lie in (0, 1]");
        if (alpha < 0.0 || beta < 0.0 || mu < 0.0) throw ValidationError("force weights must be non-negative");
        if (!(d_cutoff > 0.0)) throw ValidationError("d_cutoff must be positive");
        if (max_iters < 0) throw ValidationError("max_iters must be non-negative");
        if (min_move < 0.0) throw ValidationError("min_move must be non-negative");
    }
};

struct DeformResult {
    SimplexMesh endo;
    SimplexMesh epi;
    std::vector<double> max_move; // per iteration, both meshes
    int iterations = 0;
    bool converged = false;
};

namespace detail {

inline void check_finite(const Vec3& v, const char* what, Role role, std::size_t i) {
    if (!std::isfinite(v.x()) || !std::isfinite(v.y()) || !std::isfinite(v.z()))
        throw NumericError(std::string("non-finite ") + what + " at " + (role == Role::Endo ? "endo" : "epi") +
                           " vertex " + std::to_string(i));
}

// One damped update of mesh m; `other` is held fixed. Returns max movement.
inline double step_mesh(const SimplexMesh& m, std::vector<Vec3>& pos, std::vector<Vec3>& prev,
                        const std::vector<Vec3>& other, const VertexPairing& pairing, const NearestGrid& grid,
                        const DeformParams& prm, unsigned threads) {
    const auto cache = shapes(m, pos);
    std::vector<Vec3> f_endo, f_epi;
    if (m.role == Role::Epi) thickness_force(pairing, other, pos, f_endo, f_epi);
    else thickness_force(pairing, pos, other, f_endo, f_epi);
    const auto& f_thick = m.role == Role::Epi ? f_epi : f_endo;

    std::vector<Vec3> next(pos.size());
    parallel_for(pos.size(), threads, [&](std::size_t i) {
        const Vec3 fs = smooth_force(m, pos, cache, static_cast<int>(i));
        const Vec3 fe = edge_force(pos[i], cache.shape[i].normal, grid, prm.d_cutoff);
        check_finite(fs, "smoothing force", m.role, i);
        check_finite(fe, "edge force", m.role, i);
        check_finite(f_thick[i], "thickness force", m.role, i);
        Vec3 p = pos[i] + (1.0 - prm.gamma) * (pos[i] - prev[i]) + prm.alpha * fs + prm.beta * fe + prm.mu * f_thick[i];
        if (m.boundary[i]) p.z() = pos[i].z();
        check_finite(p, "position", m.role, i);
        next[i] = p;
    });
    double moved = 0.0;
    for (std::size_t i = 0; i < pos.size(); ++i) moved = std::max(moved, (next[i] - pos[i]).norm());
    prev = pos;
    pos = std::move(next);
    return moved;
}

} // namespace detail

/// Damped explicit evolution of both meshes. Each iteration updates the epi
/// mesh with the endo mesh fixed, then the endo mesh against the new epi.
/// Runs in coordinates relative to the first endo vertex so that translating
/// every input translates the output exactly (given exact subtraction).
inline DeformResult deform(const SimplexMesh& endo, const SimplexMesh& epi, const VertexPairing& pairing,
                           const std::vector<EdgeTarget>& endo_edges, const std::vector<EdgeTarget>& epi_edges,
                           const DeformParams& prm = {}, unsigned threads = 1) {
    prm.validate();
    if (endo.size() != epi.size() || pairing.epi_of_endo.size() != endo.size())
        throw ValidationError("deform: meshes and pairing disagree in size");
    DeformResult out;
    out.endo = endo;
    out.epi = epi;
    if (endo.size() == 0 || prm.max_iters == 0) return out;

    const Vec3 anchor = endo.vertices[0];
    auto rel = [&](const std::vector<Vec3>& v) {
        std::vector<Vec3> o(v.size());
        for (std::size_t i = 0; i < v.size(); ++i) o[i] = v[i] - anchor;
        return o;
    };
    auto rel_edges = [&](const std::vector<EdgeTarget>& v) {
        std::vector<EdgeTarget> o(v);
        for (auto& e : o) e.position -= anchor;
        return o;
    };
    std::vector<Vec3> pn = rel(endo.vertices), pp = rel(epi.vertices);
    std::vector<Vec3> pn_prev = pn, pp_prev = pp;
    const NearestGrid g_endo(rel_edges(endo_edges), prm.d_cutoff);
    const NearestGrid g_epi(rel_edges(epi_edges), prm.d_cutoff);

    for (int it = 0; it < prm.max_iters; ++it) {
        const double m1 = detail::step_mesh(epi, pp, pp_prev, pn, pairing, g_epi, prm, threads);
        const double m2 = detail::step_mesh(endo, pn, pn_prev, pp, pairing, g_endo, prm, threads);
        out.max_move.push_back(std::max(m1, m2));
        ++out.iterations;
        if (out.max_move.back() < prm.min_move) {
            out.converged = true;
            break;
        }
    }
    for (std::size_t i = 0; i < pn.size(); ++i) {
        out.endo.vertices[i] = pn[i] + anchor;
        out.epi.vertices[i] = pp[i] + anchor;
        // boundary rings never leave their plane; keep the input bits
        if (endo.boundary[i]) out.endo.vertices[i].z() = endo.vertices[i].z();
        if (epi.boundary[i]) out.epi.vertices[i].z() = epi.vertices[i].z();
    }
    return out;
}

/// Convert detected edge points of one kind into frame-space targets.
inline std::vector<EdgeTarget> edge_targets(const profile::EdgePointSet& pts, profile::EdgeKind kind, const Frame& f) {
    std::vector<EdgeTarget> out;
    for (const auto& p : pts)
        if (p.kind == kind && p.valid) out.push_back({f.to_frame(p.position), p.weight});
    return out;
}

// ---------------------------------------------------------------------------
// slicing and export

/// Contour where the mesh crosses `plane`, in that plane's pixel
/// coordinates. Each vertex column contributes its first crossing along the
/// inter-ring edges; points are ordered by azimuth about their centroid.
/// Empty when the plane misses the mesh.
inline std::vector<Vec2> slice_mesh(const SimplexMesh& m, const Frame& ref, const SlicePlane& plane) {
    std::vector<Vec3> f(m.size());
    for (std::size_t i = 0; i < m.size(); ++i) f[i] = world_to_frame(ref.to_world(m.vertices[i]), plane);
    // vertices within this distance of the plane count as lying on it
    constexpr double kOnPlane = 1e-9;
    std::vector<Vec2> pts;
    for (int j = 0; j < m.ring_size; ++j) {
        for (int r = 0; r < m.n_rings; ++r) {
            const Vec3& a = f[m.index(r, j)];
            if (std::abs(a.z()) <= kOnPlane) {
                pts.emplace_back(a.x(), a.y());
                break;
            }
            if (r + 1 == m.n_rings) break;
            const Vec3& b = f[m.index(r + 1, j)];
            if (std::abs(b.z()) > kOnPlane && (a.z() < 0.0) != (b.z() < 0.0)) {
                const double s = a.z() / (a.z() - b.z());
                const Vec3 x = a + s * (b - a);
                pts.emplace_back(x.x(), x.y());
                break;
            }
        }
    }
    if (pts.size() < 3) return {};
    const Vec2 c = centroid(pts);
    std::vector<std::pair<double, Vec2>> keyed;
    for (const auto& p : pts) keyed.emplace_back(std::atan2(p.y() - c.y(), p.x() - c.x()), p);
    std::stable_sort(keyed.begin(), keyed.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
    std::vector<Vec2> out;
    for (const auto& [a, p] : keyed) out.push_back(p);
    return out;
}

/// Polygonal faces of the honeycomb: for every column gap, the cells between
/// consecutive rings that carry a horizontal edge across that gap.
inline std::vector<std::vector<int>> faces(const SimplexMesh& m) {
    std::vector<std::vector<int>> out;
    const int n = m.ring_size, R = m.n_rings;
    for (int j = 0; j < n; ++j) {
        const int j2 = (j + 1) % n;
        std::vector<int> edge_rings;
        for (int r = 0; r < R; ++r)
            if (r == 0 || r == R - 1 || r % 2 == j % 2) edge_rings.push_back(r);
        for (std::size_t k = 0; k + 1 < edge_rings.size(); ++k) {
            const int r1 = edge_rings[k], r2 = edge_rings[k + 1];
            std::vector<int> face;
            for (int r = r1; r <= r2; ++r) face.push_back(m.index(r, j2));
            for (int r = r2; r >= r1; --r) face.push_back(m.index(r, j));
            out.push_back(std::move(face));
        }
    }
    return out;
}

} // namespace lvseg::mesh
