#include "aniso/hd_rvd.hpp"

#include "aniso/geometry.hpp"
#include "aniso/parallel.hpp"

#include <Eigen/Dense>
#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>

namespace aniso {

namespace {

// Bisector of (xi, xj) as side(v) = n.v - c; negative on the xi side.
struct Bisector {
    PointE n;
    double c;

    Bisector(const PointE& xi, const PointE& xj)
        : n(xj - xi), c(0.5 * (xj.squaredNorm() - xi.squaredNorm())) {}
    double side(const PointE& v) const { return n.dot(v) - c; }
};

ClipPolygon clip_impl(const ClipPolygon& poly, const PointE& xi, const PointE& xj, int i, int j,
                      const EmbeddedMesh* mesh) {
    const std::size_t n = poly.vertices.size();
    if (n == 0) return poly;
    const Bisector bis(xi, xj);
    std::vector<double> side(n);
    std::vector<char> inside(n);
    bool all_in = true, all_out = true;
    for (std::size_t k = 0; k < n; ++k) {
        side[k] = bis.side(poly.vertices[k].position);
        inside[k] = side[k] < 0 || (side[k] == 0 && i < j);
        all_in = all_in && inside[k];
        all_out = all_out && !inside[k];
    }
    if (all_in) return poly;

    ClipPolygon out;
    out.face = poly.face;
    out.owner = poly.owner;
    if (all_out) return out;
    out.vertices.reserve(n + 1);
    out.edge_support.reserve(n + 1);

    auto make_cut = [&](std::size_t a, std::size_t b) {
        const ClipVertex& va = poly.vertices[a];
        const ClipVertex& vb = poly.vertices[b];
        const int support = poly.edge_support[a];
        const double t = side[a] / (side[a] - side[b]);
        ClipVertex cv;
        cv.face = poly.face;
        cv.owner = i;
        if (support >= 0) {
            cv.kind = CornerKind::C3;
            cv.bisector = {support, j};
            cv.lambda = {1 - t, t};
            cv.position = (1 - t) * va.position + t * vb.position;
        } else if (mesh != nullptr && poly.face >= 0) {
            const int local = -support - 1;
            const Face& f = mesh->surface.face(poly.face);
            const int ia = f[local], ib = f[(local + 1) % 3];
            const PointE& A = mesh->point(ia);
            const PointE& B = mesh->point(ib);
            const double sa = bis.side(A), sb = bis.side(B);
            const double tt = sa / (sa - sb);
            cv.kind = CornerKind::C2;
            cv.mesh_edge = mesh->surface.face_edge(poly.face, local);
            cv.edge_vertices = {ia, ib};
            cv.bisector = {j, -1};
            cv.lambda = {1 - tt, tt};
            cv.position = (1 - tt) * A + tt * B;
        } else {
            cv.kind = CornerKind::C2;
            cv.bisector = {j, -1};
            cv.lambda = {1 - t, t};
            cv.position = (1 - t) * va.position + t * vb.position;
        }
        return cv;
    };

    for (std::size_t a = 0; a < n; ++a) {
        const std::size_t b = (a + 1) % n;
        if (inside[a]) {
            out.vertices.push_back(poly.vertices[a]);
            out.edge_support.push_back(poly.edge_support[a]);
            if (!inside[b]) {
                out.vertices.push_back(make_cut(a, b));
                out.edge_support.push_back(j);
            }
        } else if (inside[b]) {
            out.vertices.push_back(make_cut(a, b));
            out.edge_support.push_back(poly.edge_support[a]);
        }
    }
    return out;
}

struct NeighborLists {
    int k = 0;
    std::vector<int> idx; // N x k, sorted by distance
};

// Sorted neighbors of site i (excluding i), truncated to k when k > 0.
void sorted_neighbors(const std::vector<PointE>& x, int i, int k, std::vector<int>& out,
                      std::vector<std::pair<double, int>>& scratch) {
    const int n = static_cast<int>(x.size());
    scratch.clear();
    for (int j = 0; j < n; ++j)
        if (j != i) scratch.emplace_back((x[j] - x[i]).squaredNorm(), j);
    const int keep = (k > 0 && k < static_cast<int>(scratch.size())) ? k : static_cast<int>(scratch.size());
    if (keep < static_cast<int>(scratch.size()))
        std::nth_element(scratch.begin(), scratch.begin() + keep, scratch.end());
    std::sort(scratch.begin(), scratch.begin() + keep);
    out.resize(keep);
    for (int t = 0; t < keep; ++t) out[t] = scratch[t].second;
}

NeighborLists build_neighbors(const std::vector<PointE>& x) {
    NeighborLists nl;
    const int n = static_cast<int>(x.size());
    nl.k = std::min(n - 1, 32);
    nl.idx.assign(static_cast<std::size_t>(n) * nl.k, -1);
    if (nl.k <= 0) return nl;
    parallel_for(n, [&](std::size_t i) {
        std::vector<int> out;
        std::vector<std::pair<double, int>> scratch;
        sorted_neighbors(x, static_cast<int>(i), nl.k, out, scratch);
        std::copy(out.begin(), out.end(), nl.idx.begin() + i * nl.k);
    });
    return nl;
}

double max_radius2(const ClipPolygon& poly, const PointE& xi) {
    double r = 0;
    for (const auto& v : poly.vertices) r = std::max(r, (v.position - xi).squaredNorm());
    return r;
}

// Cell of site i inside face f, clipped until the security radius is reached.
ClipPolygon clip_cell(const EmbeddedMesh& em, const std::vector<PointE>& x, const NeighborLists& nl, int f, int i) {
    ClipPolygon poly = face_polygon(em, f, i);
    const PointE& xi = x[i];
    double r2 = max_radius2(poly, xi);
    const int n = static_cast<int>(x.size());
    for (int t = 0; t < nl.k; ++t) {
        const int j = nl.idx[static_cast<std::size_t>(i) * nl.k + t];
        if ((x[j] - xi).squaredNorm() > 4 * r2) return poly;
        poly = clip_impl(poly, xi, x[j], i, j, &em);
        if (poly.empty()) return poly;
        r2 = max_radius2(poly, xi);
    }
    if (nl.k >= n - 1) return poly;
    // Security radius not reached within the cached neighbors: continue with the full list.
    std::vector<int> all;
    std::vector<std::pair<double, int>> scratch;
    sorted_neighbors(x, i, 0, all, scratch);
    for (std::size_t t = nl.k; t < all.size(); ++t) {
        const int j = all[t];
        if ((x[j] - xi).squaredNorm() > 4 * r2) break;
        poly = clip_impl(poly, xi, x[j], i, j, &em);
        if (poly.empty()) return poly;
        r2 = max_radius2(poly, xi);
    }
    return poly;
}

// Barycentric coordinates of p (assumed near the face plane) with respect to face f.
Vec3 face_barycentric(const EmbeddedMesh& em, int f, const PointE& p) {
    const Face& fc = em.surface.face(f);
    const PointE& a = em.point(fc[0]);
    const PointE e1 = em.point(fc[1]) - a, e2 = em.point(fc[2]) - a, d = p - a;
    Eigen::Matrix2d g;
    g << e1.dot(e1), e1.dot(e2), e1.dot(e2), e2.dot(e2);
    const Eigen::Vector2d rhs(e1.dot(d), e2.dot(d));
    const double det = g.determinant();
    Vec3 bary = Vec3::Constant(1.0 / 3.0);
    if (std::abs(det) > 1e-300) {
        const Eigen::Vector2d uv = g.inverse() * rhs;
        bary = Vec3(1 - uv[0] - uv[1], uv[0], uv[1]);
    }
    for (int k = 0; k < 3; ++k) bary[k] = std::max(0.0, bary[k]);
    const double s = bary.sum();
    return s > 0 ? Vec3(bary / s) : Vec3(Vec3::Constant(1.0 / 3.0));
}

} // namespace

SiteSet init_sites(const EmbeddedMesh& embedded, int n, std::uint64_t seed) {
    if (n < 4) throw InputError(fmt::format("init_sites: need at least 4 sites, got {}", n));
    if (static_cast<std::size_t>(n) > kMaxSites)
        throw InputError(fmt::format("init_sites: {} sites exceeds the cap of {}", n, kMaxSites));
    const std::size_t nf = embedded.surface.num_faces();
    if (nf == 0) throw InputError("init_sites: empty mesh");
    std::vector<double> w(nf);
    for (std::size_t f = 0; f < nf; ++f) w[f] = embedded.face_area(static_cast<int>(f));
    if (!(std::accumulate(w.begin(), w.end(), 0.0) > 0)) throw InputError("init_sites: surface has zero area");

    std::mt19937_64 rng(seed);
    std::discrete_distribution<int> pick(w.begin(), w.end());
    std::uniform_real_distribution<double> uni(0.0, 1.0);
    SiteSet s;
    s.positions.reserve(n);
    s.anchors.reserve(n);
    for (int k = 0; k < n; ++k) {
        SiteAnchor a;
        a.face = pick(rng);
        const double r1 = std::sqrt(uni(rng)), r2 = uni(rng);
        a.bary = Vec3(1 - r1, r1 * (1 - r2), r1 * r2);
        s.anchors.push_back(a);
        s.positions.push_back(anchor_point(embedded, a));
    }
    return s;
}

PointE anchor_point(const EmbeddedMesh& embedded, const SiteAnchor& anchor) {
    const Face& f = embedded.surface.face(anchor.face);
    return anchor.bary[0] * embedded.point(f[0]) + anchor.bary[1] * embedded.point(f[1]) +
           anchor.bary[2] * embedded.point(f[2]);
}

SegmentCut cut_segment(const PointE& a, const PointE& b, const PointE& xi, const PointE& xj) {
    if ((xi - xj).norm() <= 1e-12) throw InputError("cut_segment: coincident sites");
    const Bisector bis(xi, xj);
    const double nn = bis.n.norm();
    const double l1 = std::abs(bis.side(a)) / nn, l2 = std::abs(bis.side(b)) / nn;
    SegmentCut cut;
    if (l1 + l2 > 0) {
        cut.lambda_a = l2 / (l1 + l2);
        cut.lambda_b = l1 / (l1 + l2);
    }
    cut.point = cut.lambda_a * a + cut.lambda_b * b;
    return cut;
}

ClipPolygon clip_by_bisector(const ClipPolygon& polygon, const PointE& xi, const PointE& xj, int i, int j,
                             const EmbeddedMesh* mesh) {
    if ((xi - xj).norm() <= 1e-12) throw InputError("clip_by_bisector: coincident sites");
    if (polygon.edge_support.size() != polygon.vertices.size())
        throw InputError("clip_by_bisector: edge_support size mismatch");
    return clip_impl(polygon, xi, xj, i, j, mesh);
}

ClipPolygon face_polygon(const EmbeddedMesh& embedded, int face, int site) {
    ClipPolygon p;
    p.face = face;
    p.owner = site;
    const Face& f = embedded.surface.face(face);
    for (int k = 0; k < 3; ++k) {
        ClipVertex v;
        v.kind = CornerKind::C1;
        v.mesh_vertex = f[k];
        v.face = face;
        v.owner = site;
        v.position = embedded.point(f[k]);
        p.vertices.push_back(v);
        p.edge_support.push_back(-(k + 1));
    }
    return p;
}

double RestrictedVoronoiDiagram::total_mass() const {
    return std::accumulate(mass.begin(), mass.end(), 0.0);
}

RestrictedVoronoiDiagram compute_rvd(const EmbeddedMesh& embedded, const SiteSet& sites) {
    const auto& x = sites.positions;
    const int n = static_cast<int>(x.size());
    if (n == 0) throw InputError("compute_rvd: no sites");
    for (const auto& p : x)
        if (!p.allFinite()) throw InputError("compute_rvd: non-finite site coordinate");
    if (n > 1) {
        bool all_same = true;
        for (int i = 1; i < n && all_same; ++i) all_same = (x[i] - x[0]).squaredNorm() == 0;
        if (all_same) throw InputError("compute_rvd: empty cell set (all sites coincide)");
    }

    const NeighborLists nl = build_neighbors(x);
    const std::size_t nf = embedded.surface.num_faces();
    std::vector<std::vector<RvdCell>> per_face(nf);

    parallel_for(nf, [&](std::size_t fi) {
        const int f = static_cast<int>(fi);
        const Face& fc = embedded.surface.face(f);
        std::vector<int> queue, visited;
        for (int k = 0; k < 3; ++k) {
            const int s = nearest_site(embedded.point(fc[k]), x);
            if (std::find(visited.begin(), visited.end(), s) == visited.end()) {
                visited.push_back(s);
                queue.push_back(s);
            }
        }
        auto& cells = per_face[fi];
        for (std::size_t q = 0; q < queue.size(); ++q) {
            const int i = queue[q];
            ClipPolygon poly = clip_cell(embedded, x, nl, f, i);
            if (poly.empty()) continue;
            for (int s : poly.edge_support) {
                if (s >= 0 && std::find(visited.begin(), visited.end(), s) == visited.end()) {
                    visited.push_back(s);
                    queue.push_back(s);
                }
            }
            cells.push_back(RvdCell{i, f, std::move(poly)});
        }
        std::sort(cells.begin(), cells.end(), [](const RvdCell& a, const RvdCell& b) { return a.site < b.site; });
    });

    RestrictedVoronoiDiagram rvd;
    rvd.num_sites = n;
    rvd.mass.assign(n, 0.0);
    rvd.site_facets.assign(n, {});
    for (auto& cells : per_face) {
        for (auto& cell : cells) {
            const auto& vs = cell.polygon.vertices;
            for (std::size_t k = 1; k + 1 < vs.size(); ++k) {
                const double area = facet_area(vs[0].position, vs[k].position, vs[k + 1].position);
                if (!(area >= kMinFacetArea)) continue;
                rvd.site_facets[cell.site].push_back(static_cast<int>(rvd.facets.size()));
                rvd.facets.push_back(RvdFacet{cell.site, cell.face, {vs[0], vs[k], vs[k + 1]}, area});
                rvd.mass[cell.site] += area;
            }
            rvd.cells.push_back(std::move(cell));
        }
    }
    return rvd;
}

double heron_area(double a, double b, double c) {
    if (a < b) std::swap(a, b);
    if (a < c) std::swap(a, c);
    if (b < c) std::swap(b, c);
    // a >= b >= c
    const double p = (a + (b + c)) * (c - (a - b)) * (c + (a - b)) * (a + (b - c));
    return p > 0 ? 0.25 * std::sqrt(p) : 0.0;
}

double facet_area(const PointE& a, const PointE& b, const PointE& c) {
    return heron_area((b - c).norm(), (c - a).norm(), (a - b).norm());
}

PointE replay_vertex(const ClipVertex& v, const std::vector<PointE>& sites, const EmbeddedMesh& embedded) {
    switch (v.kind) {
    case CornerKind::C1:
        return embedded.point(v.mesh_vertex);
    case CornerKind::C2: {
        const PointE& A = embedded.point(v.edge_vertices[0]);
        const PointE& B = embedded.point(v.edge_vertices[1]);
        const Bisector bis(sites[v.owner], sites[v.bisector[0]]);
        const double sa = bis.side(A), sb = bis.side(B);
        if (sa == sb) throw NumericalError("replay_vertex: C2 edge parallel to its bisector (stale RVD)");
        const double t = sa / (sa - sb);
        return (1 - t) * A + t * B;
    }
    case CornerKind::C3: {
        const Face& f = embedded.surface.face(v.face);
        const PointE& p0 = embedded.point(f[0]);
        const PointE e1 = embedded.point(f[1]) - p0, e2 = embedded.point(f[2]) - p0;
        const Bisector b1(sites[v.owner], sites[v.bisector[0]]);
        const Bisector b2(sites[v.owner], sites[v.bisector[1]]);
        Eigen::Matrix2d m;
        m << b1.n.dot(e1), b1.n.dot(e2), b2.n.dot(e1), b2.n.dot(e2);
        const Eigen::Vector2d rhs(-b1.side(p0), -b2.side(p0));
        const Eigen::Vector2d ab = m.fullPivLu().solve(rhs);
        if (!ab.allFinite()) throw NumericalError("replay_vertex: C3 bisectors parallel in face (stale RVD)");
        return p0 + ab[0] * e1 + ab[1] * e2;
    }
    }
    return v.position;
}

int nearest_site(const PointE& p, const std::vector<PointE>& sites) {
    int best = -1;
    double bd = std::numeric_limits<double>::infinity();
    for (int i = 0; i < static_cast<int>(sites.size()); ++i) {
        const double d = (sites[i] - p).squaredNorm();
        if (d < bd) {
            bd = d;
            best = i;
        }
    }
    return best;
}

SiteAnchor closest_anchor(const RestrictedVoronoiDiagram& rvd, const EmbeddedMesh& embedded, int site, const PointE& p) {
    double best = std::numeric_limits<double>::infinity();
    PointE best_pt = p;
    int best_face = -1;
    std::array<double, 3> w;
    auto consider = [&](const PointE& a, const PointE& b, const PointE& c, int face) {
        const PointE q = closest_point_on_triangle(p, a, b, c, w);
        const double d = (q - p).squaredNorm();
        if (d < best) {
            best = d;
            best_pt = q;
            best_face = face;
        }
    };
    if (site >= 0 && site < static_cast<int>(rvd.site_facets.size()) && !rvd.site_facets[site].empty()) {
        for (int fi : rvd.site_facets[site]) {
            const auto& fc = rvd.facets[fi];
            consider(fc.corners[0].position, fc.corners[1].position, fc.corners[2].position, fc.face);
        }
    } else {
        for (std::size_t f = 0; f < embedded.surface.num_faces(); ++f) {
            const Face& fc = embedded.surface.face(static_cast<int>(f));
            consider(embedded.point(fc[0]), embedded.point(fc[1]), embedded.point(fc[2]), static_cast<int>(f));
        }
    }
    SiteAnchor a;
    a.face = best_face;
    if (best_face >= 0) a.bary = face_barycentric(embedded, best_face, best_pt);
    return a;
}

void reanchor_sites(SiteSet& sites, const RestrictedVoronoiDiagram& rvd, const EmbeddedMesh& embedded) {
    sites.anchors.resize(sites.positions.size());
    parallel_for(sites.positions.size(), [&](std::size_t i) {
        sites.anchors[i] = closest_anchor(rvd, embedded, static_cast<int>(i), sites.positions[i]);
    });
}

void save_rvd(const RestrictedVoronoiDiagram& rvd, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw InputError("cannot write " + path.string());
    out << "RVD1 " << rvd.facets.size() << ' ' << kEmbedDim << '\n';
    static const char* tags[] = {"C1", "C2", "C3"};
    for (const auto& f : rvd.facets) {
        out << f.site << ' ' << f.face;
        for (const auto& c : f.corners) out << ' ' << tags[static_cast<int>(c.kind)];
        for (const auto& c : f.corners)
            for (int d = 0; d < kEmbedDim; ++d) out << ' ' << fmt::format("{:.17g}", c.position[d]);
        out << '\n';
    }
}

} // namespace aniso
