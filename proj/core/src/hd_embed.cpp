#include "aniso/hd_embed.hpp"

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>
#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

namespace aniso {
namespace {

double triangle_area_e(const PointE& a, const PointE& b, const PointE& c) {
    const PointE u = b - a, v = c - a;
    const double g = u.squaredNorm() * v.squaredNorm() - std::pow(u.dot(v), 2);
    return 0.5 * std::sqrt(std::max(g, 0.0));
}

double median_of(std::vector<double> v) {
    if (v.empty()) return 0;
    auto mid = v.begin() + v.size() / 2;
    std::nth_element(v.begin(), mid, v.end());
    if (v.size() % 2) return *mid;
    double hi = *mid;
    double lo = *std::max_element(v.begin(), mid);
    return 0.5 * (lo + hi);
}

void require_same_connectivity(const EmbeddedMesh& e, const SurfaceMesh& mesh) {
    if (e.points.size() != mesh.num_vertices() || e.surface.faces() != mesh.faces())
        throw InputError("embedding connectivity does not match the mesh");
}

/// 8x2 residual W_bar - [I; K; 0] W for face f.
Eigen::Matrix<double, kEmbedDim, 2> face_residual(const EmbeddedMesh& e, const SurfaceMesh& mesh, int f,
                                                  const Mat3& K, double& target_norm) {
    const Face& t = mesh.face(f);
    Eigen::Matrix<double, 3, 2> W;
    W << mesh.vertex(t[1]) - mesh.vertex(t[0]), mesh.vertex(t[2]) - mesh.vertex(t[0]);
    Eigen::Matrix<double, kEmbedDim, 2> target = Eigen::Matrix<double, kEmbedDim, 2>::Zero();
    target.topRows<3>() = W;
    target.middleRows<3>(3) = K * W;
    Eigen::Matrix<double, kEmbedDim, 2> Wbar;
    Wbar << e.point(t[1]) - e.point(t[0]), e.point(t[2]) - e.point(t[0]);
    target_norm = target.norm();
    return Wbar - target;
}

} // namespace

std::string to_string(EmbedProvenance p) { return p == EmbedProvenance::Neural ? "neural" : "deterministic"; }

EmbedProvenance parse_provenance(const std::string& s) {
    if (s == "deterministic") return EmbedProvenance::Deterministic;
    if (s == "neural") return EmbedProvenance::Neural;
    throw InputError("unknown embedding provenance '" + s + "'");
}

double EmbeddedMesh::face_area(int f) const {
    const Face& t = surface.face(f);
    return triangle_area_e(points[t[0]], points[t[1]], points[t[2]]);
}

double EmbeddedMesh::total_area() const {
    double a = 0;
    for (int f = 0; f < static_cast<int>(surface.num_faces()); ++f) a += face_area(f);
    return a;
}

EmbeddedMesh trivial_embedding(const SurfaceMesh& mesh) {
    EmbeddedMesh e;
    e.surface = mesh;
    e.points.reserve(mesh.num_vertices());
    for (const Vec3& p : mesh.vertices()) e.points.push_back(lift(p));
    return e;
}

Vec3 fourth_vertex(const Vec3& vi, const Vec3& vj, const Vec3& vk) {
    const Vec3 c = (vj - vi).cross(vk - vi);
    const double len = c.norm();
    if (!(len > 1e-12)) throw InputError("fourth_vertex: degenerate triangle");
    return vi + c / std::sqrt(len);
}

Mat3 face_jacobian(const Mat3& metric) { return metric_sqrt(metric); }

Mat3 extra_channel_jacobian(const Mat3& metric) {
    Eigen::SelfAdjointEigenSolver<Mat3> es(0.5 * (metric + metric.transpose()));
    const Vec3 excess = (es.eigenvalues().array() - 1.0).max(0.0).sqrt();
    return es.eigenvectors() * excess.asDiagonal() * es.eigenvectors().transpose();
}

TriangleBasis triangle_basis(const SurfaceMesh& mesh, int face, const Mat3& metric) {
    const Face& t = mesh.face(face);
    const Vec3& vi = mesh.vertex(t[0]);
    TriangleBasis b;
    b.source << mesh.vertex(t[1]) - vi, mesh.vertex(t[2]) - vi, fourth_vertex(vi, mesh.vertex(t[1]), mesh.vertex(t[2])) - vi;
    b.jacobian = face_jacobian(metric);
    return b;
}

EmbeddedMesh solve_embedding(const SurfaceMesh& mesh, const MetricField& field, const EmbedOptions& opts) {
    if (field.size() != mesh.num_vertices()) throw InputError("metric field size does not match the mesh");
    const int nv = static_cast<int>(mesh.num_vertices());
    const int nf = static_cast<int>(mesh.num_faces());

    // Gauge: one pinned vertex per face component.
    const auto& comp = mesh.face_components();
    std::vector<int> pin_of_component(mesh.num_components(), -1);
    std::vector<int> vertex_component(nv, -1);
    for (int f = 0; f < nf; ++f)
        for (int c : mesh.face(f)) vertex_component[c] = comp[f];
    for (int v : opts.pins) {
        if (v < 0 || v >= nv || vertex_component[v] < 0) throw InputError(fmt::format("invalid pin vertex {}", v));
        pin_of_component[vertex_component[v]] = v;
    }
    for (int v = 0; v < nv; ++v) {
        int c = vertex_component[v];
        if (c >= 0 && pin_of_component[c] < 0) pin_of_component[c] = v;
    }
    std::vector<int> unknown(nv, -1);
    int n_unknowns = 0;
    for (int v = 0; v < nv; ++v) {
        int c = vertex_component[v];
        if (c >= 0 && pin_of_component[c] != v) unknown[v] = n_unknowns++;
    }

    std::vector<Eigen::Triplet<double>> triplets;
    triplets.reserve(static_cast<std::size_t>(nf) * 18);
    Eigen::MatrixXd rhs = Eigen::MatrixXd::Zero(n_unknowns, 3);
    for (int f = 0; f < nf; ++f) {
        const Face& t = mesh.face(f);
        const double area = mesh.face_area(f);
        if (!(area > 0)) continue;
        const Mat3 K = extra_channel_jacobian(face_metric(field, mesh, f));
        for (int col = 1; col <= 2; ++col) {
            // residual = u[t[col]] - u[t[0]] - K (v_col - v_0)
            const int a = t[col], b = t[0];
            const Vec3 target = K * (mesh.vertex(a) - mesh.vertex(b));
            const int ia = unknown[a], ib = unknown[b];
            if (ia >= 0) {
                triplets.emplace_back(ia, ia, area);
                rhs.row(ia) += area * target.transpose();
            }
            if (ib >= 0) {
                triplets.emplace_back(ib, ib, area);
                rhs.row(ib) -= area * target.transpose();
            }
            if (ia >= 0 && ib >= 0) {
                triplets.emplace_back(ia, ib, -area);
                triplets.emplace_back(ib, ia, -area);
            }
        }
    }

    EmbeddedMesh out = trivial_embedding(mesh);
    if (n_unknowns > 0) {
        Eigen::SparseMatrix<double> L(n_unknowns, n_unknowns);
        L.setFromTriplets(triplets.begin(), triplets.end());
        Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> solver(L);
        if (solver.info() != Eigen::Success) throw NumericalError("embedding system factorization failed");
        const Eigen::MatrixXd sol = solver.solve(rhs);
        if (solver.info() != Eigen::Success || !sol.allFinite()) {
            for (int v = 0; v < nv; ++v)
                if (unknown[v] >= 0 && !sol.row(unknown[v]).allFinite())
                    throw NumericalError(fmt::format("singular embedding system in component {}", vertex_component[v]));
            throw NumericalError("embedding solve produced non-finite values");
        }
        for (int v = 0; v < nv; ++v)
            if (unknown[v] >= 0) out.points[v].segment<3>(3) = sol.row(unknown[v]).transpose();
    }
    return out;
}

ResidualReport embed_residual(const EmbeddedMesh& embedded, const SurfaceMesh& mesh, const MetricField& field) {
    require_same_connectivity(embedded, mesh);
    if (field.size() != mesh.num_vertices()) throw InputError("metric field size does not match the mesh");
    ResidualReport r;
    const int nf = static_cast<int>(mesh.num_faces());
    r.per_face.resize(nf);
    r.relative.resize(nf);
    for (int f = 0; f < nf; ++f) {
        double target_norm = 0;
        const auto res = face_residual(embedded, mesh, f, extra_channel_jacobian(face_metric(field, mesh, f)), target_norm);
        r.per_face[f] = res.norm();
        r.relative[f] = target_norm > 0 ? r.per_face[f] / target_norm : 0.0;
        r.objective += mesh.face_area(f) * res.squaredNorm();
    }
    if (nf > 0) {
        r.min = *std::min_element(r.per_face.begin(), r.per_face.end());
        r.max = *std::max_element(r.per_face.begin(), r.per_face.end());
        r.median = median_of(r.per_face);
        r.median_relative = median_of(r.relative);
    }
    return r;
}

DistortionReport edge_length_distortion(const EmbeddedMesh& embedded, const MetricField& field) {
    const SurfaceMesh& mesh = embedded.surface;
    if (field.size() != embedded.num_vertices()) throw InputError("metric field size does not match the embedding");
    DistortionReport d;
    d.histogram.assign(20, 0);
    double sq = 0;
    for (const Edge& e : mesh.edges()) {
        const Vec3 v = mesh.vertex(e.v[1]) - mesh.vertex(e.v[0]);
        const Mat3 M = 0.5 * (field.tensors[e.v[0]] + field.tensors[e.v[1]]);
        const double metric_len = std::sqrt(std::max(0.0, v.dot(M * v)));
        if (!(metric_len > 0)) throw InputError(fmt::format("edge ({}, {}) has zero metric length", e.v[0], e.v[1]));
        const double ratio = (embedded.point(e.v[1]) - embedded.point(e.v[0])).norm() / metric_len;
        d.ratios.push_back(ratio);
        d.mean += ratio;
        sq += (ratio - 1) * (ratio - 1);
        int bin = std::min(19, static_cast<int>(ratio / 0.1));
        ++d.histogram[bin];
    }
    if (!d.ratios.empty()) {
        d.mean /= static_cast<double>(d.ratios.size());
        d.rms_error = std::sqrt(sq / static_cast<double>(d.ratios.size()));
        d.median = median_of(d.ratios);
    }
    return d;
}

std::string format_hde(const EmbeddedMesh& embedded) {
    std::string out = fmt::format("HDE1\n{} {} {}\n", embedded.points.size(), kEmbedDim, to_string(embedded.provenance));
    for (const PointE& p : embedded.points) {
        for (int k = 0; k < kEmbedDim; ++k) out += (k ? " " : "") + fmt::format("{:.17g}", p[k]);
        out += '\n';
    }
    out += fmt::format("{}\n", embedded.surface.num_faces());
    for (const Face& f : embedded.surface.faces()) out += fmt::format("{} {} {}\n", f[0], f[1], f[2]);
    return out;
}

void save_hde(const EmbeddedMesh& embedded, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw InputError("cannot write " + path.string());
    out << format_hde(embedded);
}

EmbeddedMesh parse_hde(std::string_view text, const std::string& name) {
    std::istringstream in{std::string(text)};
    int line = 0;
    std::string row;
    auto next_line = [&]() -> std::istringstream {
        while (std::getline(in, row)) {
            ++line;
            if (row.find_first_not_of(" \t\r") != std::string::npos) return std::istringstream(row);
        }
        throw ParseError(name, line, "unexpected end of file");
    };
    {
        auto hdr = next_line();
        std::string magic;
        hdr >> magic;
        if (magic != "HDE1") throw ParseError(name, line, "missing HDE1 magic");
    }
    std::size_t nv = 0;
    int dim = 0;
    std::string tag;
    {
        auto hdr = next_line();
        if (!(hdr >> nv >> dim >> tag)) throw ParseError(name, line, "bad header (expected: count dim provenance)");
        if (dim != kEmbedDim) throw ParseError(name, line, fmt::format("embedding dimension {} (expected {})", dim, kEmbedDim));
    }
    EmbeddedMesh e;
    try {
        e.provenance = parse_provenance(tag);
    } catch (const InputError&) {
        throw ParseError(name, line, "unknown provenance '" + tag + "'");
    }
    e.points.resize(nv);
    for (std::size_t v = 0; v < nv; ++v) {
        auto ls = next_line();
        for (int k = 0; k < kEmbedDim; ++k)
            if (!(ls >> e.points[v][k])) throw ParseError(name, line, "bad coordinate row");
        if (!e.points[v].allFinite()) throw ParseError(name, line, "non-finite coordinate");
    }
    std::size_t nf = 0;
    {
        auto ls = next_line();
        if (!(ls >> nf)) throw ParseError(name, line, "bad face count");
    }
    std::vector<Face> faces(nf);
    for (std::size_t f = 0; f < nf; ++f) {
        auto ls = next_line();
        if (!(ls >> faces[f][0] >> faces[f][1] >> faces[f][2])) throw ParseError(name, line, "bad face row");
    }
    std::vector<Vec3> verts;
    verts.reserve(nv);
    for (const PointE& p : e.points) verts.push_back(p.head<3>());
    try {
        e.surface = SurfaceMesh(std::move(verts), std::move(faces));
    } catch (const InputError& err) {
        throw InputError(name + ": " + err.what());
    }
    return e;
}

EmbeddedMesh load_hde(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputError("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_hde(ss.str(), path.string());
}

void check_first_channels(const EmbeddedMesh& embedded, const SurfaceMesh& mesh) {
    require_same_connectivity(embedded, mesh);
    for (std::size_t v = 0; v < mesh.num_vertices(); ++v)
        if (embedded.points[v].head<3>() != mesh.vertex(static_cast<int>(v)))
            throw InputError(fmt::format("embedding channel 0..2 differs from the mesh at vertex {}", v));
}

} // namespace aniso
