#include "aniso/quality_eval.hpp"

#include "aniso/geometry.hpp"
#include "aniso/parallel.hpp"

#include <boost/geometry.hpp>
#include <boost/geometry/index/rtree.hpp>
#include <fmt/format.h>
#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <numeric>
#include <random>

namespace bg = boost::geometry;
namespace bgi = boost::geometry::index;

namespace aniso {

namespace {

using BPoint = bg::model::point<double, 3, bg::cs::cartesian>;
using BBox = bg::model::box<BPoint>;

class SegmentQuery {
public:
    explicit SegmentQuery(const std::vector<Segment>& segs) : segs_(segs) {
        std::vector<std::pair<BBox, int>> entries;
        for (std::size_t k = 0; k < segs.size(); ++k) {
            const Vec3 lo = segs[k][0].cwiseMin(segs[k][1]), hi = segs[k][0].cwiseMax(segs[k][1]);
            entries.emplace_back(BBox(BPoint(lo.x(), lo.y(), lo.z()), BPoint(hi.x(), hi.y(), hi.z())), static_cast<int>(k));
        }
        tree_ = decltype(tree_)(entries.begin(), entries.end());
    }

    double distance(const Vec3& p) const {
        const BPoint q(p.x(), p.y(), p.z());
        double best = std::numeric_limits<double>::infinity();
        for (auto it = tree_.qbegin(bgi::nearest(q, static_cast<unsigned>(tree_.size()))); it != tree_.qend(); ++it) {
            if (bg::distance(q, it->first) > best) break;
            best = std::min(best, point_segment_distance(p, segs_[it->second][0], segs_[it->second][1]));
        }
        return best;
    }

private:
    const std::vector<Segment>& segs_;
    bgi::rtree<std::pair<BBox, int>, bgi::rstar<16>> tree_;
};

std::vector<Vec3> sample_segments(const std::vector<Segment>& segs, int n, std::uint64_t seed) {
    std::vector<double> w(segs.size());
    for (std::size_t k = 0; k < segs.size(); ++k) w[k] = (segs[k][1] - segs[k][0]).norm();
    std::mt19937_64 rng(seed);
    std::discrete_distribution<int> pick(w.begin(), w.end());
    std::uniform_real_distribution<double> uni(0.0, 1.0);
    std::vector<Vec3> out(n);
    for (int i = 0; i < n; ++i) {
        const Segment& s = segs[pick(rng)];
        const double t = uni(rng);
        out[i] = (1 - t) * s[0] + t * s[1];
    }
    return out;
}

// Normal at a closest point. On an edge or vertex the closest face is a tie, so the incident
// face normals are averaged to keep the result independent of which face won.
Vec3 feature_normal(const SurfaceMesh& m, const SurfacePoint& sp) {
    constexpr double tol = 1e-9;
    int zeros = 0, zero = -1, top = 0;
    for (int k = 0; k < 3; ++k) {
        if (sp.bary[k] < tol) {
            ++zeros;
            zero = k;
        }
        if (sp.bary[k] > sp.bary[top]) top = k;
    }
    const Vec3 own = m.face_normal(sp.face);
    Vec3 n = Vec3::Zero();
    if (zeros == 1) {
        const int g = m.face_neighbor(sp.face, (zero + 1) % 3);
        if (g < 0) return own;
        n = own + m.face_normal(g);
    } else if (zeros >= 2) {
        for (int g : m.vertex_faces(m.face(sp.face)[top])) n += m.face_cross(g);
    } else {
        return own;
    }
    const double len = n.norm();
    return len > 0 ? Vec3(n / len) : own;
}

double f1_score(double precision, double recall) {
    return precision + recall > 0 ? 2 * precision * recall / (precision + recall) : 0.0;
}

double bbox_diagonal(const SurfaceMesh& a, const SurfaceMesh& b) {
    Vec3 lo = Vec3::Constant(std::numeric_limits<double>::infinity()), hi = -lo;
    for (const auto* m : {&a, &b})
        for (const Vec3& v : m->vertices()) {
            lo = lo.cwiseMin(v);
            hi = hi.cwiseMax(v);
        }
    return (hi - lo).norm();
}

double bbox_extent(const SurfaceMesh& m) {
    Vec3 lo = Vec3::Constant(std::numeric_limits<double>::infinity()), hi = -lo;
    for (const Vec3& v : m.vertices()) {
        lo = lo.cwiseMin(v);
        hi = hi.cwiseMax(v);
    }
    return m.num_vertices() ? (hi - lo).maxCoeff() : 0.0;
}

} // namespace

double triangle_quality(const Vec3& a, const Vec3& b, const Vec3& c, const Mat3& Q) {
    const Vec3 qa = Q * a, qb = Q * b, qc = Q * c;
    const double l0 = (qb - qc).norm(), l1 = (qc - qa).norm(), l2 = (qa - qb).norm();
    const double area = 0.5 * (qb - qa).cross(qc - qa).norm();
    const double p = 0.5 * (l0 + l1 + l2);
    const double h = std::max({l0, l1, l2});
    if (!(area > 0) || !(p * h > 0)) return 0.0;
    return std::clamp(2.0 * std::sqrt(3.0) * area / (p * h), 0.0, 1.0);
}

MetricField sample_metric(const MetricField& field, const SurfaceQuery& input, const std::vector<Vec3>& points) {
    const SurfaceMesh& mesh = input.mesh();
    if (field.size() != mesh.num_vertices()) throw InputError("sample_metric: field does not match the input mesh");
    MetricField out;
    out.tensors.resize(points.size());
    out.ratio.resize(points.size());
    parallel_for(points.size(), [&](std::size_t i) {
        const SurfacePoint sp = input.closest(points[i]);
        const Face& f = mesh.face(sp.face);
        Mat3 m = Mat3::Zero();
        double r = 0;
        for (int k = 0; k < 3; ++k) {
            m += sp.bary[k] * field.tensors[f[k]];
            r += sp.bary[k] * (field.ratio.empty() ? 1.0 : field.ratio[f[k]]);
        }
        out.tensors[i] = 0.5 * (m + m.transpose());
        out.ratio[i] = r;
    });
    return out;
}

MeshQuality mesh_quality(const SurfaceMesh& mesh, const MetricField& field) {
    if (field.size() != mesh.num_vertices()) throw InputError("mesh_quality: field size does not match vertex count");
    std::vector<Mat3> q(mesh.num_vertices());
    for (std::size_t v = 0; v < q.size(); ++v) q[v] = metric_sqrt(field.tensors[v]);
    MeshQuality out;
    out.histogram.assign(10, 0);
    out.per_face.resize(mesh.num_faces());
    for (std::size_t f = 0; f < mesh.num_faces(); ++f) {
        const Face& t = mesh.face(static_cast<int>(f));
        const Mat3 Q = (q[t[0]] + q[t[1]] + q[t[2]]) / 3.0;
        out.per_face[f] = triangle_quality(mesh.vertex(t[0]), mesh.vertex(t[1]), mesh.vertex(t[2]), Q);
    }
    if (!out.per_face.empty()) {
        out.g_avg = std::accumulate(out.per_face.begin(), out.per_face.end(), 0.0) / static_cast<double>(out.per_face.size());
        out.g_min = *std::min_element(out.per_face.begin(), out.per_face.end());
        for (double g : out.per_face) ++out.histogram[std::min(9, static_cast<int>(g * 10))];
    }
    return out;
}

SurfaceSamples sample_surface(const SurfaceMesh& mesh, int n, std::uint64_t seed) {
    if (mesh.empty()) throw InputError("sample_surface: empty mesh");
    std::vector<double> w(mesh.num_faces());
    for (std::size_t f = 0; f < w.size(); ++f) w[f] = mesh.face_area(static_cast<int>(f));
    if (!(std::accumulate(w.begin(), w.end(), 0.0) > 0)) throw InputError("sample_surface: zero-area mesh");
    std::mt19937_64 rng(seed);
    std::discrete_distribution<int> pick(w.begin(), w.end());
    std::uniform_real_distribution<double> uni(0.0, 1.0);
    SurfaceSamples s;
    s.points.resize(n);
    s.normals.resize(n);
    for (int i = 0; i < n; ++i) {
        const int f = pick(rng);
        const double r1 = std::sqrt(uni(rng)), r2 = uni(rng);
        const Face& t = mesh.face(f);
        s.points[i] = (1 - r1) * mesh.vertex(t[0]) + r1 * (1 - r2) * mesh.vertex(t[1]) + r1 * r2 * mesh.vertex(t[2]);
        s.normals[i] = mesh.face_normal(f);
    }
    return s;
}

DistanceMetrics surface_distances(const SurfaceMesh& result, const SurfaceMesh& reference, int n_samples,
                                  double f1_tau, std::uint64_t seed) {
    if (result.empty() || reference.empty()) throw InputError("surface_distances: empty mesh");
    if (n_samples < 1) throw InputError("surface_distances: need at least one sample");
    struct Directed {
        double mean = 0, max = 0, within = 0, nc = 0;
    };
    auto directed = [&](const SurfaceMesh& from, const SurfaceMesh& to, std::uint64_t s) {
        const SurfaceSamples smp = sample_surface(from, n_samples, s);
        const SurfaceQuery q(to);
        std::vector<double> d(n_samples), c(n_samples);
        parallel_for(n_samples, [&](std::size_t i) {
            const SurfacePoint sp = q.closest(smp.points[i]);
            d[i] = sp.distance;
            c[i] = std::abs(smp.normals[i].dot(feature_normal(to, sp)));
        });
        Directed r;
        for (int i = 0; i < n_samples; ++i) {
            r.mean += d[i];
            r.max = std::max(r.max, d[i]);
            r.within += d[i] < f1_tau;
            r.nc += c[i];
        }
        r.mean /= n_samples;
        r.within /= n_samples;
        r.nc /= n_samples;
        return r;
    };
    // same seed both ways so swapping the meshes swaps the halves exactly
    const Directed ab = directed(result, reference, seed);
    const Directed ba = directed(reference, result, seed);
    DistanceMetrics m;
    m.cd = 0.5 * (ab.mean + ba.mean);
    m.hd = std::max(ab.max, ba.max);
    m.f1 = f1_score(ab.within, ba.within);
    m.nc = 0.5 * (ab.nc + ba.nc);
    return m;
}

std::vector<Segment> sharp_edges(const SurfaceMesh& mesh, double dihedral_deg) {
    if (!(dihedral_deg > 0 && dihedral_deg < 180)) throw InputError("sharp_edges: dihedral angle must lie in (0, 180)");
    const double cos_t = std::cos(dihedral_deg * std::numbers::pi / 180.0);
    std::vector<Segment> out;
    for (const Edge& e : mesh.edges()) {
        if (e.valence != 2) continue;
        const Vec3 n0 = mesh.face_normal(e.faces[0]), n1 = mesh.face_normal(e.faces[1]);
        if (n0.squaredNorm() == 0 || n1.squaredNorm() == 0) continue;
        if (n0.dot(n1) < cos_t) out.push_back({mesh.vertex(e.v[0]), mesh.vertex(e.v[1])});
    }
    return out;
}

EdgeMetrics edge_metrics(const SurfaceMesh& result, const SurfaceMesh& reference, double dihedral_deg, int n_samples,
                         double f1_tau, std::uint64_t seed) {
    EdgeMetrics m;
    const auto ea = sharp_edges(result, dihedral_deg);
    const auto eb = sharp_edges(reference, dihedral_deg);
    m.result_edges = ea.size();
    m.reference_edges = eb.size();
    if (ea.empty() && eb.empty()) return m;
    if (ea.empty() || eb.empty()) {
        m.one_sided = true;
        m.ecd = bbox_diagonal(result, reference);
        m.ef1 = 0;
        return m;
    }
    auto directed = [&](const std::vector<Segment>& from, const std::vector<Segment>& to, std::uint64_t s,
                        double& mean, double& within) {
        const auto pts = sample_segments(from, n_samples, s);
        const SegmentQuery q(to);
        std::vector<double> d(pts.size());
        parallel_for(pts.size(), [&](std::size_t i) { d[i] = q.distance(pts[i]); });
        mean = within = 0;
        for (double x : d) {
            mean += x;
            within += x < f1_tau;
        }
        mean /= static_cast<double>(d.size());
        within /= static_cast<double>(d.size());
    };
    double ma, wa, mb, wb;
    directed(ea, eb, seed + 1, ma, wa);
    directed(eb, ea, seed + 1, mb, wb);
    m.ecd = 0.5 * (ma + mb);
    m.ef1 = f1_score(wa, wb);
    return m;
}

QualityReport evaluate(const SurfaceMesh& result, const SurfaceMesh& reference, const MetricField& input_field,
                       const EvalOptions& opts) {
    QualityReport r;
    r.v_in = static_cast<int>(reference.num_vertices());
    r.v_out = static_cast<int>(result.num_vertices());
    r.stretch = input_field.size() ? input_field.mean_ratio() : 1.0;
    const double ea = bbox_extent(result), eb = bbox_extent(reference);
    r.units_mismatch = ea > 0 && eb > 0 && std::max(ea / eb, eb / ea) > 10.0;
    if (opts.distances) {
        const DistanceMetrics d = surface_distances(result, reference, opts.samples, opts.f1_tau, opts.seed);
        r.cd = d.cd * kCdScale;
        r.f1 = d.f1;
        r.nc = d.nc;
        r.hd = d.hd * kHdScale;
    }
    if (opts.edges) {
        const EdgeMetrics e = edge_metrics(result, reference, opts.dihedral_deg, opts.samples, opts.f1_tau, opts.seed);
        r.ecd = e.ecd * kEcdScale;
        r.ef1 = e.ef1;
        r.edge_one_sided = e.one_sided;
    }
    if (opts.quality) {
        const SurfaceQuery q(reference);
        const MetricField at_out = sample_metric(input_field, q, result.vertices());
        const MeshQuality mq = mesh_quality(result, at_out);
        r.g_avg = mq.g_avg;
        r.g_min = mq.g_min;
    }
    return r;
}

std::string report_json(const QualityReport& r) {
    nlohmann::json j;
    j["Method"] = r.method;
    j["V_in"] = r.v_in;
    j["V_out"] = r.v_out;
    j["Stretch"] = r.stretch;
    j["CD"] = r.cd;
    j["F1"] = r.f1;
    j["NC"] = r.nc;
    j["HD"] = r.hd;
    j["ECD"] = r.ecd;
    j["EF1"] = r.ef1;
    j["T_em"] = r.t_em ? nlohmann::json(*r.t_em) : nlohmann::json(nullptr);
    j["G_avg"] = r.g_avg;
    j["T_me"] = r.t_me ? nlohmann::json(*r.t_me) : nlohmann::json(nullptr);
    j["G_min"] = r.g_min;
    j["edge_one_sided"] = r.edge_one_sided;
    j["units_mismatch"] = r.units_mismatch;
    return j.dump(2);
}

QualityReport parse_report_json(std::string_view text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw InputError(std::string("report: ") + e.what());
    }
    QualityReport r;
    try {
        r.method = j.at("Method").get<std::string>();
        r.v_in = j.at("V_in").get<int>();
        r.v_out = j.at("V_out").get<int>();
        r.stretch = j.at("Stretch").get<double>();
        r.cd = j.at("CD").get<double>();
        r.f1 = j.at("F1").get<double>();
        r.nc = j.at("NC").get<double>();
        r.hd = j.at("HD").get<double>();
        r.ecd = j.at("ECD").get<double>();
        r.ef1 = j.at("EF1").get<double>();
        if (!j.at("T_em").is_null()) r.t_em = j["T_em"].get<double>();
        r.g_avg = j.at("G_avg").get<double>();
        if (!j.at("T_me").is_null()) r.t_me = j["T_me"].get<double>();
        r.g_min = j.value("G_min", 0.0);
        r.edge_one_sided = j.value("edge_one_sided", false);
        r.units_mismatch = j.value("units_mismatch", false);
    } catch (const nlohmann::json::exception& e) {
        throw InputError(std::string("report: ") + e.what());
    }
    return r;
}

void emit_report(const QualityReport& r, const std::filesystem::path& json_path) {
    std::ofstream out(json_path);
    if (!out) throw InputError("cannot write " + json_path.string());
    out << report_json(r) << '\n';
    if (!out) throw InputError("write failed: " + json_path.string());
}

std::string csv_header() { return "Method,V_in,V_out,Stretch,CD,F1,NC,HD,ECD,EF1,T_em,G_avg,T_me"; }

std::string csv_row(const QualityReport& r) {
    auto opt = [](const std::optional<double>& v) { return v ? fmt::format("{:.6g}", *v) : std::string(); };
    return fmt::format("{},{},{},{:.6g},{:.6g},{:.6g},{:.6g},{:.6g},{:.6g},{:.6g},{},{:.6g},{}", r.method, r.v_in, r.v_out,
                       r.stretch, r.cd, r.f1, r.nc, r.hd, r.ecd, r.ef1, opt(r.t_em), r.g_avg, opt(r.t_me));
}

void write_csv(const std::vector<QualityReport>& rows, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw InputError("cannot write " + path.string());
    out << csv_header() << '\n';
    for (const auto& r : rows) out << csv_row(r) << '\n';
}

} // namespace aniso
