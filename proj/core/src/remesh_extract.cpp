#include "aniso/remesh_extract.hpp"

#include "aniso/log.hpp"
#include "aniso/parallel.hpp"

#include <fmt/format.h>
#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>

namespace aniso {

namespace {

std::array<int, 3> canonical(std::array<int, 3> t) {
    const int m = static_cast<int>(std::min_element(t.begin(), t.end()) - t.begin());
    std::rotate(t.begin(), t.begin() + m, t.end());
    return t;
}

std::array<int, 3> reversed(const std::array<int, 3>& t) { return canonical({t[0], t[2], t[1]}); }

void check_anchor(const SiteAnchor& a, const SurfaceMesh& mesh, std::size_t i) {
    if (a.face < 0 || a.face >= static_cast<int>(mesh.num_faces()))
        throw InputError(fmt::format("site {} has no valid anchor face", i));
    if (!(a.bary.minCoeff() >= -1e-9) || std::abs(a.bary.sum() - 1.0) > 1e-9)
        throw InputError(fmt::format("site {} has invalid barycentric coordinates", i));
}

// Problem faces: inverted, or incident to a non-manifold edge.
std::vector<int> problem_faces(const RdtResult& rdt, const SurfaceQuery& reference, int& inverted, int& non_manifold) {
    std::vector<int> bad = detect_inverted(rdt.mesh, reference);
    inverted = static_cast<int>(bad.size());
    non_manifold = 0;
    const auto& mesh = rdt.mesh;
    for (std::size_t f = 0; f < mesh.num_faces(); ++f) {
        for (int l = 0; l < 3; ++l) {
            if (mesh.edges()[mesh.face_edge(static_cast<int>(f), l)].valence > 2) {
                bad.push_back(static_cast<int>(f));
                break;
            }
        }
    }
    for (const auto& e : mesh.edges()) non_manifold += e.valence > 2;
    std::sort(bad.begin(), bad.end());
    bad.erase(std::unique(bad.begin(), bad.end()), bad.end());
    return bad;
}

} // namespace

Vec3 site_position_3d(const SiteAnchor& a, const SurfaceMesh& mesh) {
    const Face& f = mesh.face(a.face);
    return a.bary[0] * mesh.vertex(f[0]) + a.bary[1] * mesh.vertex(f[1]) + a.bary[2] * mesh.vertex(f[2]);
}

Rvd3D back_project(const RestrictedVoronoiDiagram& rvd, const SiteSet& sites, const EmbeddedMesh& embedded) {
    const auto& mesh = embedded.surface;
    if (sites.anchors.size() != sites.positions.size())
        throw InputError("back_project: sites carry no anchors");
    if (rvd.num_sites != sites.size()) throw InputError("back_project: diagram and site set disagree (stale RVD)");
    Rvd3D out;
    out.sites.resize(sites.size());
    for (std::size_t i = 0; i < sites.size(); ++i) {
        check_anchor(sites.anchors[i], mesh, i);
        out.sites[i] = site_position_3d(sites.anchors[i], mesh);
    }
    for (const auto& cell : rvd.cells) {
        std::vector<Vec3> poly;
        poly.reserve(cell.polygon.vertices.size());
        for (const auto& v : cell.polygon.vertices) poly.push_back(v.position.head<3>());
        out.polygons.push_back(std::move(poly));
        out.polygon_site.push_back(cell.site);
        out.polygon_face.push_back(cell.face);
    }
    return out;
}

void save_rvd_obj(const Rvd3D& rvd, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw InputError("cannot write " + path.string());
    std::vector<std::size_t> order(rvd.polygons.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return rvd.polygon_site[a] < rvd.polygon_site[b];
    });
    for (std::size_t k : order)
        for (const Vec3& p : rvd.polygons[k]) out << fmt::format("v {:.9g} {:.9g} {:.9g}\n", p.x(), p.y(), p.z());
    std::size_t base = 1;
    int group = -1;
    for (std::size_t k : order) {
        if (rvd.polygon_site[k] != group) {
            group = rvd.polygon_site[k];
            out << "g cell_" << group << '\n';
        }
        out << 'f';
        for (std::size_t j = 0; j < rvd.polygons[k].size(); ++j) out << ' ' << base + j;
        out << '\n';
        base += rvd.polygons[k].size();
    }
}

RdtResult extract_rdt(const RestrictedVoronoiDiagram& rvd, const std::vector<Vec3>& site_positions) {
    int nonempty = 0;
    for (double m : rvd.mass) nonempty += m > 0;
    if (nonempty < 3) throw InputError(fmt::format("extract_rdt: need at least 3 non-empty cells, got {}", nonempty));
    if (site_positions.size() != rvd.num_sites) throw InputError("extract_rdt: site count mismatch");

    std::map<std::array<int, 3>, int> seen; // canonical triple -> insertion order
    std::vector<std::array<int, 3>> tris;
    RdtResult res;
    for (const auto& cell : rvd.cells) {
        const auto& vs = cell.polygon.vertices;
        const auto& sup = cell.polygon.edge_support;
        const std::size_t n = vs.size();
        for (std::size_t k = 0; k < n; ++k) {
            if (vs[k].kind != CornerKind::C3) continue;
            const int a = sup[(k + n - 1) % n], b = sup[k];
            if (a < 0 || b < 0 || a == b || a == cell.site || b == cell.site) continue;
            const auto key = canonical({cell.site, a, b});
            if (seen.count(key)) continue;
            if (seen.count(reversed(key))) {
                ++res.orientation_conflicts;
                continue;
            }
            seen.emplace(key, static_cast<int>(tris.size()));
            tris.push_back(key);
        }
    }

    std::vector<int> remap(rvd.num_sites, -1);
    std::vector<Vec3> verts;
    for (const auto& t : tris)
        for (int s : t)
            if (remap[s] < 0) {
                remap[s] = static_cast<int>(res.source_site.size());
                res.source_site.push_back(s);
            }
    // Vertex ids follow site ids for stable output.
    std::vector<int> order = res.source_site;
    std::sort(order.begin(), order.end());
    for (std::size_t k = 0; k < order.size(); ++k) remap[order[k]] = static_cast<int>(k);
    res.source_site = order;
    for (int s : order) verts.push_back(site_positions[s]);
    std::vector<Face> faces;
    faces.reserve(tris.size());
    for (const auto& t : tris) faces.push_back({remap[t[0]], remap[t[1]], remap[t[2]]});
    res.mesh = SurfaceMesh(std::move(verts), std::move(faces));
    res.diagnostics = validate(res.mesh);
    return res;
}

std::vector<int> detect_inverted(const SurfaceMesh& rdt, const SurfaceQuery& reference) {
    const std::size_t nf = rdt.num_faces();
    std::vector<char> flag(nf, 0);
    parallel_for(nf, [&](std::size_t f) {
        const Vec3 n = rdt.face_cross(static_cast<int>(f));
        const SurfacePoint sp = reference.closest(rdt.face_centroid(static_cast<int>(f)));
        flag[f] = n.dot(reference.mesh().face_cross(sp.face)) < 0;
    });
    std::vector<int> out;
    for (std::size_t f = 0; f < nf; ++f)
        if (flag[f]) out.push_back(static_cast<int>(f));
    return out;
}

std::vector<int> detect_inverted(const SurfaceMesh& rdt, const SurfaceMesh& reference) {
    return detect_inverted(rdt, SurfaceQuery(reference));
}

SiteSet repair_insert(const SiteSet& sites, const RdtResult& rdt, const std::vector<int>& problem,
                      const EmbeddedMesh& embedded, const CvtOptions& cvt, const RepairOptions& opts, int round,
                      RepairLog& log) {
    if (problem.empty()) return sites;
    const auto& mesh = rdt.mesh;

    // Regions: problem faces connected through shared edges.
    std::vector<int> region(mesh.num_faces(), -1);
    std::vector<char> is_bad(mesh.num_faces(), 0);
    for (int f : problem) is_bad[f] = 1;
    std::vector<std::vector<int>> regions;
    for (int f0 : problem) {
        if (region[f0] >= 0) continue;
        const int id = static_cast<int>(regions.size());
        regions.emplace_back();
        std::vector<int> stack{f0};
        region[f0] = id;
        while (!stack.empty()) {
            const int f = stack.back();
            stack.pop_back();
            regions[id].push_back(f);
            for (int l = 0; l < 3; ++l) {
                const Edge& e = mesh.edges()[mesh.face_edge(f, l)];
                for (int g : e.faces)
                    if (g >= 0 && is_bad[g] && region[g] < 0) {
                        region[g] = id;
                        stack.push_back(g);
                    }
            }
        }
    }

    SiteSet out = sites;
    const RestrictedVoronoiDiagram rvd = compute_rvd(embedded, sites);
    bool inserted = false;
    for (auto& faces : regions) {
        if (static_cast<int>(log.insertions.size()) >= log.budget) {
            log.budget_exhausted = true;
            break;
        }
        std::sort(faces.begin(), faces.end());
        std::vector<int> involved;
        for (int f : faces)
            for (int v : mesh.face(f)) involved.push_back(rdt.source_site[v]);
        std::sort(involved.begin(), involved.end());
        involved.erase(std::unique(involved.begin(), involved.end()), involved.end());
        PointE mean = PointE::Zero();
        for (int s : involved) mean += sites.positions[s];
        mean /= static_cast<double>(involved.size());

        // Closest point on the involved cells, falling back to the whole surface.
        SiteAnchor best;
        double best_d = std::numeric_limits<double>::infinity();
        for (int s : involved) {
            const SiteAnchor a = closest_anchor(rvd, embedded, s, mean);
            if (a.face < 0) continue;
            const double d = (anchor_point(embedded, a) - mean).squaredNorm();
            if (d < best_d) {
                best_d = d;
                best = a;
            }
        }
        if (best.face < 0) best = closest_anchor(rvd, embedded, -1, mean);
        RepairInsertion ins;
        ins.round = round;
        ins.region_faces = faces;
        ins.new_site = static_cast<int>(out.positions.size());
        ins.position = site_position_3d(best, embedded.surface);
        out.positions.push_back(anchor_point(embedded, best));
        out.anchors.push_back(best);
        log.insertions.push_back(ins);
        inserted = true;
    }
    if (!inserted) return out;
    if (opts.local_iters > 0) {
        CvtOptions local = cvt;
        local.max_iters = opts.local_iters;
        return optimize(embedded, out, local).sites;
    }
    const auto fresh = compute_rvd(embedded, out);
    reanchor_sites(out, fresh, embedded);
    return out;
}

RemeshResult remesh(const EmbeddedMesh& embedded, const SiteSet& sites0, const CvtOptions& cvt,
                    const RepairOptions& opts) {
    const SurfaceQuery reference(embedded.surface);
    RemeshResult res;
    res.sites = sites0;
    res.repair.budget = opts.budget >= 0 ? opts.budget
                                         : static_cast<int>(std::floor(opts.budget_fraction * static_cast<double>(sites0.size())));
    for (int round = 0;; ++round) {
        RestrictedVoronoiDiagram rvd = compute_rvd(embedded, res.sites);
        if (res.sites.anchors.size() != res.sites.size()) reanchor_sites(res.sites, rvd, embedded);
        res.rvd3d = back_project(rvd, res.sites, embedded);
        RdtResult rdt = extract_rdt(rvd, res.rvd3d.sites);
        const std::vector<int> problem = problem_faces(rdt, reference, res.inverted, res.non_manifold_edges);
        if (round == 0) res.repair.initial_problems = static_cast<int>(problem.size());
        res.repair.final_problems = static_cast<int>(problem.size());
        res.repair.rounds = round;
        res.mesh = std::move(rdt.mesh);
        res.source_site = std::move(rdt.source_site);
        if (problem.empty()) break;
        if (round >= opts.max_rounds || static_cast<int>(res.repair.insertions.size()) >= res.repair.budget) {
            res.repair.budget_exhausted = true;
            break;
        }
        rdt.mesh = res.mesh;
        rdt.source_site = res.source_site;
        const std::size_t before = res.repair.insertions.size();
        res.sites = repair_insert(res.sites, rdt, problem, embedded, cvt, opts, round + 1, res.repair);
        if (res.repair.insertions.size() == before) break;
    }
    res.failed = res.repair.final_problems > 0;
    if (res.failed)
        log::warn("remesh_extract", fmt::format("{} problem faces remain ({} inverted, {} non-manifold edges)",
                                                res.repair.final_problems, res.inverted, res.non_manifold_edges));
    return res;
}

void save_repair_log(const RepairLog& log, const std::filesystem::path& path) {
    nlohmann::json j;
    j["budget"] = log.budget;
    j["rounds"] = log.rounds;
    j["initial_problems"] = log.initial_problems;
    j["final_problems"] = log.final_problems;
    j["budget_exhausted"] = log.budget_exhausted;
    auto& arr = j["insertions"] = nlohmann::json::array();
    for (const auto& ins : log.insertions)
        arr.push_back({{"round", ins.round},
                       {"site", ins.new_site},
                       {"faces", ins.region_faces},
                       {"position", {ins.position.x(), ins.position.y(), ins.position.z()}}});
    std::ofstream out(path);
    if (!out) throw InputError("cannot write " + path.string());
    out << j.dump(2) << '\n';
}

} // namespace aniso
