#include "aniso/nm_cvt.hpp"

#include "aniso/lbfgs.hpp"
#include "aniso/log.hpp"
#include "aniso/parallel.hpp"

#include <fmt/format.h>

#include <cmath>
#include <fstream>

namespace aniso {

namespace {

// Rank-one pass: C moves along line direction `dir` while the bisector (x0, x1) moves.
// Adds (g.dir) * dt/dx0 and (g.dir) * dt/dx1 with t measured from C itself.
void line_pass(const PointE& c, const PointE& dir, const PointE& x0, const PointE& x1, double gdir,
               PointE& out0, PointE& out1) {
    const PointE n = x1 - x0;
    const double denom = dir.dot(n);
    if (denom == 0 || !std::isfinite(denom)) return;
    const PointE mc = 0.5 * (x0 + x1) - c;
    out0 += gdir * (0.5 * n - mc) / denom;
    out1 += gdir * (0.5 * n + mc) / denom;
}

struct C3Frame {
    PointE u1, u2; // u2 is orthogonal to the second bisector normal, u1 to the first
};

C3Frame c3_frame(const ClipVertex& v, const std::vector<PointE>& x, const EmbeddedMesh& em) {
    const Face& f = em.surface.face(v.face);
    const PointE e1 = em.point(f[1]) - em.point(f[0]);
    const PointE e2 = em.point(f[2]) - em.point(f[0]);
    const PointE n1 = x[v.bisector[0]] - x[v.owner];
    const PointE n2 = x[v.bisector[1]] - x[v.owner];
    return {e2.dot(n1) * e1 - e1.dot(n1) * e2, e2.dot(n2) * e1 - e1.dot(n2) * e2};
}

void check_provenance(const ClipVertex& v, std::size_t n) {
    auto bad = [n](int id) { return id < 0 || static_cast<std::size_t>(id) >= n; };
    if (v.kind == CornerKind::C1) return;
    if (bad(v.owner) || bad(v.bisector[0]) || (v.kind == CornerKind::C3 && bad(v.bisector[1])))
        throw InputError("clip vertex provenance refers to missing sites (stale RVD)");
}

} // namespace

NormalMetric normal_metric(const Vec3& face_normal, double s, int dim) {
    if (dim != kEmbedDim) throw InputError(fmt::format("normal_metric: dimension {} unsupported", dim));
    if (std::abs(face_normal.norm() - 1.0) > 1e-9) throw InputError("normal_metric: normal is not unit length");
    if (!(s >= 1.0)) throw InputError("normal_metric: s must be >= 1");
    NormalMetric m;
    m.s = s;
    m.normal = face_normal;
    m.block = (s - 1.0) * face_normal * face_normal.transpose() + Mat3::Identity();
    m.matrix.setIdentity();
    m.matrix.topLeftCorner<3, 3>() = m.block;
    return m;
}

double facet_energy(const Corners& c, const PointE& site, const NormalMetric& metric) {
    const double area = facet_area(c[0], c[1], c[2]);
    if (area == 0) return 0;
    PointE sum = PointE::Zero();
    double sq = 0;
    for (int i = 0; i < 3; ++i) {
        const PointE u = metric.apply(c[i] - site);
        sq += u.squaredNorm();
        sum += u;
    }
    // sum_{i<=j} U_i.U_j = (|sum U|^2 + sum |U_i|^2) / 2
    return area * (sq + sum.squaredNorm()) / 12.0;
}

double facet_energy(const RvdFacet& facet, const PointE& site, const NormalMetric& metric) {
    return facet_energy(Corners{facet.corners[0].position, facet.corners[1].position, facet.corners[2].position},
                        site, metric);
}

FacetGradient facet_gradient(const Corners& c, const PointE& site, const NormalMetric& metric) {
    FacetGradient g;
    const double l[3] = {(c[1] - c[2]).norm(), (c[2] - c[0]).norm(), (c[0] - c[1]).norm()};
    const double area = heron_area(l[0], l[1], l[2]);
    if (!(area > 0)) return g;

    std::array<PointE, 3> u;
    PointE sum = PointE::Zero();
    double sq = 0;
    for (int i = 0; i < 3; ++i) {
        u[i] = metric.apply(c[i] - site);
        sq += u[i].squaredNorm();
        sum += u[i];
    }
    const double F = (sq + sum.squaredNorm()) / 12.0;

    for (int i = 0; i < 3; ++i) g.d_corner[i] = metric.apply((u[i] + sum) / 6.0) * area;

    // Heron: dA/dl_k = l_k (l_{k+1}^2 + l_{k+2}^2 - l_k^2) / (8A); l_k is opposite corner k.
    for (int k = 0; k < 3; ++k) {
        if (l[k] == 0) continue;
        const double a = l[k], b = l[(k + 1) % 3], cc = l[(k + 2) % 3];
        const double dA = a * (b * b + cc * cc - a * a) / (8.0 * area);
        const int p = (k + 1) % 3, q = (k + 2) % 3; // l_k = |C_p - C_q|
        const PointE dir = (c[p] - c[q]) / a;
        g.d_corner[p] += F * dA * dir;
        g.d_corner[q] -= F * dA * dir;
    }
    g.d_site = -(g.d_corner[0] + g.d_corner[1] + g.d_corner[2]);
    return g;
}

MatE CornerJacobian::block(int site) const {
    MatE m = MatE::Zero();
    for (const auto& [s, b] : blocks)
        if (s == site) m += b;
    return m;
}

CornerJacobian clip_vertex_jacobian(const ClipVertex& v, const SiteSet& sites, const EmbeddedMesh& embedded) {
    CornerJacobian jac;
    if (v.kind == CornerKind::C1) return jac;
    const auto& x = sites.positions;
    check_provenance(v, x.size());
    const PointE replayed = replay_vertex(v, x, embedded);
    if ((replayed - v.position).norm() > 1e-8 * (1.0 + v.position.norm()))
        throw InputError("clip_vertex_jacobian: provenance replay does not reproduce the vertex (stale RVD)");

    // dC/dx_a = dir * (dt/dx_a)^t for each pass; build the blocks from unit covectors.
    auto add_pass = [&](const PointE& dir, int i0, int i1) {
        PointE d0 = PointE::Zero(), d1 = PointE::Zero();
        line_pass(v.position, dir, x[i0], x[i1], 1.0, d0, d1);
        jac.blocks.emplace_back(i0, dir * d0.transpose());
        jac.blocks.emplace_back(i1, dir * d1.transpose());
    };
    if (v.kind == CornerKind::C2) {
        add_pass(embedded.point(v.edge_vertices[1]) - embedded.point(v.edge_vertices[0]), v.owner, v.bisector[0]);
    } else {
        const C3Frame fr = c3_frame(v, x, embedded);
        add_pass(fr.u2, v.owner, v.bisector[0]);
        add_pass(fr.u1, v.owner, v.bisector[1]);
    }
    return jac;
}

void accumulate_corner_gradient(const ClipVertex& v, const PointE& g, const std::vector<PointE>& x,
                                const EmbeddedMesh& embedded, std::vector<PointE>& grad) {
    if (v.kind == CornerKind::C1) return;
    if (v.kind == CornerKind::C2) {
        const PointE dir = embedded.point(v.edge_vertices[1]) - embedded.point(v.edge_vertices[0]);
        line_pass(v.position, dir, x[v.owner], x[v.bisector[0]], g.dot(dir), grad[v.owner], grad[v.bisector[0]]);
        return;
    }
    const C3Frame fr = c3_frame(v, x, embedded);
    line_pass(v.position, fr.u2, x[v.owner], x[v.bisector[0]], g.dot(fr.u2), grad[v.owner], grad[v.bisector[0]]);
    line_pass(v.position, fr.u1, x[v.owner], x[v.bisector[1]], g.dot(fr.u1), grad[v.owner], grad[v.bisector[1]]);
}

std::vector<NormalMetric> face_metrics(const EmbeddedMesh& embedded, double s) {
    const auto& mesh = embedded.surface;
    std::vector<NormalMetric> out(mesh.num_faces());
    if (s == 1.0) return out;
    for (std::size_t f = 0; f < mesh.num_faces(); ++f) {
        const Vec3 cr = mesh.face_cross(static_cast<int>(f));
        const double len = cr.norm();
        if (len > 0 && std::isfinite(len)) out[f] = normal_metric(cr / len, s);
    }
    return out;
}

EnergyReport energy_on_rvd(const RestrictedVoronoiDiagram& rvd, const EmbeddedMesh& embedded,
                           const std::vector<PointE>& x, const std::vector<NormalMetric>& metrics, bool replay) {
    const std::size_t nf = rvd.facets.size();
    struct Local {
        double energy = 0;
        double area = 0;
        FacetGradient grad;
        std::array<ClipVertex, 3> corners;
    };
    std::vector<Local> local(nf);
    parallel_for(nf, [&](std::size_t k) {
        const RvdFacet& fc = rvd.facets[k];
        Local& L = local[k];
        L.corners = fc.corners;
        if (replay)
            for (auto& c : L.corners)
                if (c.kind != CornerKind::C1) c.position = replay_vertex(c, x, embedded);
        const Corners pts{L.corners[0].position, L.corners[1].position, L.corners[2].position};
        const NormalMetric& m = metrics[fc.face];
        L.area = facet_area(pts[0], pts[1], pts[2]);
        L.energy = facet_energy(pts, x[fc.site], m);
        L.grad = facet_gradient(pts, x[fc.site], m);
    });

    EnergyReport rep;
    rep.gradient.assign(x.size(), PointE::Zero());
    rep.mass.assign(x.size(), 0.0);
    rep.facets = nf;
    for (std::size_t k = 0; k < nf; ++k) {
        const int site = rvd.facets[k].site;
        const Local& L = local[k];
        rep.energy += L.energy;
        rep.mass[site] += L.area;
        rep.gradient[site] += L.grad.d_site;
        for (int c = 0; c < 3; ++c)
            accumulate_corner_gradient(L.corners[c], L.grad.d_corner[c], x, embedded, rep.gradient);
    }
    double g2 = 0;
    for (const auto& g : rep.gradient) g2 += g.squaredNorm();
    rep.grad_norm = std::sqrt(g2);
    if (!std::isfinite(rep.energy) || !std::isfinite(rep.grad_norm))
        throw NumericalError("energy evaluation produced non-finite values");
    return rep;
}

EnergyReport total_energy_grad(const EmbeddedMesh& embedded, const SiteSet& sites, double s) {
    const RestrictedVoronoiDiagram rvd = compute_rvd(embedded, sites);
    return energy_on_rvd(rvd, embedded, sites.positions, face_metrics(embedded, s));
}

CvtResult optimize(const EmbeddedMesh& embedded, const SiteSet& sites0, const CvtOptions& opts) {
    if (opts.max_iters < 1) throw InputError("optimize: max_iters must be >= 1");
    if (!(opts.grad_tol >= 0)) throw InputError("optimize: grad_tol must be >= 0");
    const std::size_t n = sites0.size();
    if (n == 0) throw InputError("optimize: no sites");
    const auto metrics = face_metrics(embedded, opts.effective_s());

    auto unpack = [n](const Eigen::VectorXd& v) {
        std::vector<PointE> x(n);
        for (std::size_t i = 0; i < n; ++i) x[i] = v.segment<kEmbedDim>(static_cast<Eigen::Index>(i) * kEmbedDim);
        return x;
    };
    Eigen::VectorXd x0(static_cast<Eigen::Index>(n) * kEmbedDim);
    for (std::size_t i = 0; i < n; ++i) x0.segment<kEmbedDim>(static_cast<Eigen::Index>(i) * kEmbedDim) = sites0.positions[i];

    Objective fn = [&](const Eigen::VectorXd& v, Eigen::VectorXd& g) {
        SiteSet s;
        s.positions = unpack(v);
        const auto rvd = compute_rvd(embedded, s);
        const EnergyReport rep = energy_on_rvd(rvd, embedded, s.positions, metrics);
        for (std::size_t i = 0; i < n; ++i) g.segment<kEmbedDim>(static_cast<Eigen::Index>(i) * kEmbedDim) = rep.gradient[i];
        return rep.energy;
    };

    LbfgsOptions lo;
    lo.max_iters = opts.max_iters;
    lo.grad_tol = opts.grad_tol;
    lo.memory = opts.memory;
    lo.max_line_search = opts.max_line_search;
    // Lloyd-sized first step: the gradient of a site is about 2 * mass * (x - centroid).
    const double area = embedded.total_area();
    if (area > 0) lo.initial_alpha = static_cast<double>(n) / (2.0 * area);

    const LbfgsResult r = minimize_lbfgs(fn, x0, lo);

    CvtResult res;
    res.sites.positions = unpack(r.x);
    const auto rvd = compute_rvd(embedded, res.sites);
    reanchor_sites(res.sites, rvd, embedded);
    for (const auto& it : r.trace) res.trace.push_back({it.iter, it.f, it.grad_norm, it.step});
    res.converged = r.converged;
    res.line_search_failed = r.line_search_failed;
    res.iterations = r.iterations;
    res.energy = r.f;
    res.initial_grad_norm = r.initial_grad_norm;
    res.final_grad_norm = r.grad_norm;
    log::info("nm_cvt", fmt::format("iterations={} energy={:.6g} grad={:.3g}/{:.3g} converged={} ls_failed={}",
                                    r.iterations, r.f, r.grad_norm, r.initial_grad_norm, r.converged,
                                    r.line_search_failed));
    return res;
}

void save_trace_csv(const std::vector<TraceRow>& trace, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw InputError("cannot write " + path.string());
    out << "iter,E,grad_norm,step\n";
    for (const auto& r : trace) out << fmt::format("{},{:.17g},{:.17g},{:.17g}\n", r.iter, r.energy, r.grad_norm, r.step);
}

} // namespace aniso
