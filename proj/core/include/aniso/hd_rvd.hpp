#pragma once

#include "aniso/hd_embed.hpp"

#include <cstdint>
#include <filesystem>
#include <vector>

namespace aniso {

/// Location of a site on the embedded surface: face id + barycentric coordinates.
struct SiteAnchor {
    int face = -1;
    Vec3 bary = Vec3::Constant(1.0 / 3.0);
};

struct SiteSet {
    std::vector<PointE> positions;
    std::vector<SiteAnchor> anchors;

    std::size_t size() const { return positions.size(); }
};

inline constexpr std::size_t kMaxSites = 10'000'000;

/// Samples n sites with probability proportional to the R^8 area of each face.
SiteSet init_sites(const EmbeddedMesh& embedded, int n, std::uint64_t seed);

/// Point on the embedded surface described by an anchor.
PointE anchor_point(const EmbeddedMesh& embedded, const SiteAnchor& anchor);

enum class CornerKind : std::uint8_t {
    C1, // mesh vertex
    C2, // mesh edge crossed by one bisector
    C3, // face crossed by two bisectors
};

/// Vertex of a clipped polygon together with the symbolic record of how it was made.
///
/// C2: position = lambda[0] * A + lambda[1] * B with (A, B) = edge_vertices, on the bisector
///     (owner, bisector[0]).
/// C3: intersection of `face` with bisectors (owner, bisector[0]) and (owner, bisector[1]);
///     lambda holds the weights along the clipped segment that produced it.
struct ClipVertex {
    PointE position = PointE::Zero();
    CornerKind kind = CornerKind::C1;
    int mesh_vertex = -1;
    int mesh_edge = -1;
    std::array<int, 2> edge_vertices{-1, -1};
    int face = -1;
    int owner = -1;
    std::array<int, 2> bisector{-1, -1};
    std::array<double, 2> lambda{1.0, 0.0};
};

/// Convex polygon inside one face. edge_support[k] describes edge (k, k+1): a site id >= 0
/// when the edge lies on the bisector (owner, site), or -(l + 1) for local mesh edge l.
struct ClipPolygon {
    int face = -1;
    int owner = -1;
    std::vector<ClipVertex> vertices;
    std::vector<int> edge_support;

    bool empty() const { return vertices.size() < 3; }
};

struct SegmentCut {
    PointE point;
    double lambda_a = 0.5, lambda_b = 0.5; // point = lambda_a * A + lambda_b * B
};

/// Intersection of segment AB with the bisector of (xi, xj). l1, l2 are the distances of A
/// and B to the bisector; lambda_a = l2 / (l1 + l2), lambda_b = l1 / (l1 + l2).
SegmentCut cut_segment(const PointE& a, const PointE& b, const PointE& xi, const PointE& xj);

/// Sutherland-Hodgman pass keeping the half-space closer to site i. New vertices are tagged
/// C2 (edge on a mesh edge, needs `mesh`) or C3 (edge on an earlier bisector). Ties go to the
/// smaller site index. Throws InputError for coincident sites.
ClipPolygon clip_by_bisector(const ClipPolygon& polygon, const PointE& xi, const PointE& xj, int i, int j,
                             const EmbeddedMesh* mesh = nullptr);

/// Triangle `face` as an unclipped polygon owned by `site`.
ClipPolygon face_polygon(const EmbeddedMesh& embedded, int face, int site);

struct RvdFacet {
    int site = -1;
    int face = -1;
    std::array<ClipVertex, 3> corners;
    double area = 0;
};

struct RvdCell {
    int site = -1;
    int face = -1;
    ClipPolygon polygon;
};

struct RestrictedVoronoiDiagram {
    std::vector<RvdCell> cells;    // sorted by (face, site)
    std::vector<RvdFacet> facets;  // sorted by (face, site), fan order within a cell
    std::vector<double> mass;      // per site
    std::vector<std::vector<int>> site_facets; // facet indices per site
    std::size_t num_sites = 0;

    double total_mass() const;
};

/// Facets below this area are dropped.
inline constexpr double kMinFacetArea = 1e-14;

RestrictedVoronoiDiagram compute_rvd(const EmbeddedMesh& embedded, const SiteSet& sites);

/// Heron's formula with Kahan's ordering; dimension-agnostic.
double facet_area(const PointE& a, const PointE& b, const PointE& c);
double heron_area(double a, double b, double c);

/// Recomputes a corner from its provenance at the given site positions.
PointE replay_vertex(const ClipVertex& v, const std::vector<PointE>& sites, const EmbeddedMesh& embedded);

int nearest_site(const PointE& p, const std::vector<PointE>& sites);

/// Closest point to `p` among the facets of `site`, as an anchor on the source face.
SiteAnchor closest_anchor(const RestrictedVoronoiDiagram& rvd, const EmbeddedMesh& embedded, int site, const PointE& p);
/// Re-anchors every site onto its own cell (falls back to the whole surface for empty cells).
void reanchor_sites(SiteSet& sites, const RestrictedVoronoiDiagram& rvd, const EmbeddedMesh& embedded);

/// Text dump: one facet per line, `site c1 c2 c3 | 3 x dim coordinates`.
void save_rvd(const RestrictedVoronoiDiagram& rvd, const std::filesystem::path& path);

} // namespace aniso
