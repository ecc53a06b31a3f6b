#pragma once

#include "aniso/nm_cvt.hpp"
#include "aniso/surface_query.hpp"

#include <filesystem>
#include <vector>

namespace aniso {

/// The diagram after dropping the extra channels.
struct Rvd3D {
    std::vector<Vec3> sites;                  // from the anchors on the original 3D faces
    std::vector<std::vector<Vec3>> polygons;  // one convex polygon per (face, cell)
    std::vector<int> polygon_site;
    std::vector<int> polygon_face;
};

/// Throws InputError when anchors are missing or invalid.
Rvd3D back_project(const RestrictedVoronoiDiagram& rvd, const SiteSet& sites, const EmbeddedMesh& embedded);

/// Site position in 3D from its anchor on the original face.
Vec3 site_position_3d(const SiteAnchor& anchor, const SurfaceMesh& mesh);

/// OBJ with one `g cell_<site>` group per site.
void save_rvd_obj(const Rvd3D& rvd, const std::filesystem::path& path);

struct RdtResult {
    SurfaceMesh mesh;
    std::vector<int> source_site;   // per output vertex
    int orientation_conflicts = 0;  // triples seen with both orientations
    MeshDiagnostics diagnostics;
};

/// One triangle per RVD corner shared by three cells (C3 corners), oriented like the
/// underlying faces. Only sites used by a triangle become vertices. Throws InputError when
/// fewer than 3 cells are non-empty.
RdtResult extract_rdt(const RestrictedVoronoiDiagram& rvd, const std::vector<Vec3>& site_positions);

/// Faces whose normal points against the nearest reference face normal.
std::vector<int> detect_inverted(const SurfaceMesh& rdt, const SurfaceQuery& reference);
std::vector<int> detect_inverted(const SurfaceMesh& rdt, const SurfaceMesh& reference);

struct RepairOptions {
    double budget_fraction = 0.05; // of the initial site count
    int budget = -1;               // overrides the fraction when >= 0
    int local_iters = 30;          // re-optimization iterations after each insertion round
    int max_rounds = 20;
};

struct RepairInsertion {
    int round = 0;
    std::vector<int> region_faces;
    int new_site = -1;
    Vec3 position = Vec3::Zero();
};

struct RepairLog {
    std::vector<RepairInsertion> insertions;
    int budget = 0;
    int rounds = 0;
    int initial_problems = 0;
    int final_problems = 0;
    bool budget_exhausted = false;
};

/// Appends one site per connected region of problem faces, placed at the surface point closest
/// to the mean of the region's sites, then re-optimizes for `local_iters` iterations.
/// Stops early and sets `budget_exhausted` when the budget runs out.
SiteSet repair_insert(const SiteSet& sites, const RdtResult& rdt, const std::vector<int>& problem_faces,
                      const EmbeddedMesh& embedded, const CvtOptions& cvt, const RepairOptions& opts, int round,
                      RepairLog& log);

struct RemeshResult {
    SurfaceMesh mesh;
    std::vector<int> source_site;
    SiteSet sites;
    Rvd3D rvd3d;
    RepairLog repair;
    int inverted = 0;
    int non_manifold_edges = 0;
    bool failed = false; // problems remain after repair
};

/// Extraction with the inverted/non-manifold repair loop against the original surface.
RemeshResult remesh(const EmbeddedMesh& embedded, const SiteSet& sites, const CvtOptions& cvt,
                    const RepairOptions& repair = {});

void save_repair_log(const RepairLog& log, const std::filesystem::path& path);

} // namespace aniso
