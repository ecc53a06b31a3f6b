#include "aniso/metric_field.hpp"

#include <Eigen/Dense>
#include <fmt/format.h>
#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>

namespace aniso {
namespace {

void tangent_basis(const Vec3& n, Vec3& t1, Vec3& t2) {
    Vec3 helper = std::abs(n.x()) < 0.9 ? Vec3::UnitX() : Vec3::UnitY();
    t1 = (helper - helper.dot(n) * n).normalized();
    t2 = n.cross(t1);
}

std::vector<int> k_ring(const SurfaceMesh& mesh, int v, int rings, std::vector<int>& stamp, int tag) {
    std::vector<int> frontier{v}, out;
    stamp[v] = tag;
    for (int r = 0; r < rings; ++r) {
        std::vector<int> next;
        for (int u : frontier)
            for (int w : mesh.vertex_neighbors(u))
                if (stamp[w] != tag) {
                    stamp[w] = tag;
                    next.push_back(w);
                    out.push_back(w);
                }
        frontier.swap(next);
    }
    return out;
}

CurvatureFrame fallback_frame(const Vec3& n) {
    CurvatureFrame fr;
    fr.fallback = true;
    if (n.squaredNorm() > 0) {
        fr.normal = n;
        tangent_basis(n, fr.v_max, fr.v_min);
        fr.v_min = fr.v_max.cross(fr.normal);
    }
    return fr;
}

bool is_orthonormal(const CurvatureFrame& f, double tol) {
    Mat3 B;
    B << f.v_min, f.v_max, f.normal;
    return (B.transpose() * B - Mat3::Identity()).cwiseAbs().maxCoeff() <= tol && B.determinant() > 0;
}

void write_pod(std::ofstream& out, const void* data, std::size_t n) {
    out.write(static_cast<const char*>(data), static_cast<std::streamsize>(n));
}

} // namespace

MetricField MetricField::identity(std::size_t n) {
    MetricField f;
    f.tensors.assign(n, Mat3::Identity());
    f.ratio.assign(n, 1.0);
    return f;
}

double MetricField::mean_ratio() const {
    if (ratio.empty()) return 1.0;
    double s = 0;
    for (double r : ratio) s += r;
    return s / static_cast<double>(ratio.size());
}

std::vector<CurvatureFrame> principal_curvatures(const SurfaceMesh& mesh, int radius_rings) {
    if (radius_rings < 1) throw InputError("radius_rings must be >= 1");
    const int nv = static_cast<int>(mesh.num_vertices());
    const VertexNormals normals = vertex_normals(mesh);
    std::vector<char> on_boundary(nv, 0);
    for (const Edge& e : mesh.edges())
        if (e.boundary()) on_boundary[e.v[0]] = on_boundary[e.v[1]] = 1;

    std::vector<CurvatureFrame> frames(nv);
    std::vector<int> stamp(nv, -1);
    for (int v = 0; v < nv; ++v) {
        const Vec3 n = normals.normals[v];
        const std::vector<int> ring = k_ring(mesh, v, radius_rings, stamp, v);
        if (n.squaredNorm() == 0 || ring.size() < 5) {
            frames[v] = fallback_frame(n);
            frames[v].boundary = on_boundary[v];
            continue;
        }
        Vec3 t1, t2;
        tangent_basis(n, t1, t2);
        const Vec3& p0 = mesh.vertex(v);
        double scale = 0;
        for (int u : ring) scale += (mesh.vertex(u) - p0).norm();
        scale /= static_cast<double>(ring.size());

        // h = a u^2 + b u w + c w^2 + d u + e w in units scaled by the mean ring radius.
        Eigen::MatrixXd A(ring.size(), 5);
        Eigen::VectorXd h(ring.size());
        for (std::size_t k = 0; k < ring.size(); ++k) {
            const Vec3 d = (mesh.vertex(ring[k]) - p0) / scale;
            const double u = d.dot(t1), w = d.dot(t2);
            A.row(k) << u * u, u * w, w * w, u, w;
            h[k] = d.dot(n);
        }
        Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(A);
        if (qr.rank() < 5) {
            frames[v] = fallback_frame(n);
            frames[v].boundary = on_boundary[v];
            continue;
        }
        const Eigen::VectorXd c = qr.solve(h);
        const double fu = c[3], fw = c[4];
        const double denom = std::sqrt(1 + fu * fu + fw * fw);
        Eigen::Matrix2d first, second;
        first << 1 + fu * fu, fu * fw, fu * fw, 1 + fw * fw;
        // Positive curvature for surfaces bending away from the normal (outward sphere).
        second << -2 * c[0], -c[1], -c[1], -2 * c[2];
        second /= denom * scale;
        Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::Matrix2d> es(second, first);
        Eigen::Vector2d k = es.eigenvalues();
        Eigen::Matrix2d dirs = es.eigenvectors();
        int imax = std::abs(k[1]) >= std::abs(k[0]) ? 1 : 0;
        int imin = 1 - imax;
        Vec3 dmax = dirs(0, imax) * (t1 + fu * n) + dirs(1, imax) * (t2 + fw * n);
        dmax -= dmax.dot(n) * n;
        if (dmax.squaredNorm() < 1e-30) {
            frames[v] = fallback_frame(n);
            frames[v].boundary = on_boundary[v];
            continue;
        }
        CurvatureFrame fr;
        fr.normal = n;
        fr.v_max = dmax.normalized();
        fr.v_min = fr.v_max.cross(n);
        fr.k_min = k[imin];
        fr.k_max = k[imax];
        fr.boundary = on_boundary[v];
        frames[v] = fr;
    }
    return frames;
}

Mat3 curvature_tensor(const CurvatureFrame& frame, double ratio) {
    Mat3 B;
    B << frame.v_min, frame.v_max, frame.normal;
    return B * Eigen::Vector3d(1.0, ratio * ratio, 1.0).asDiagonal() * B.transpose();
}

MetricField build_metric(const std::vector<CurvatureFrame>& frames, double floor, double ceil) {
    if (!(floor > 0) || !(ceil > 0) || !(floor < ceil)) throw InputError("metric floor/ceil must satisfy 0 < floor < ceil");
    MetricField field;
    field.frames = frames;
    field.tensors.reserve(frames.size());
    field.ratio.reserve(frames.size());
    for (std::size_t v = 0; v < frames.size(); ++v) {
        const CurvatureFrame& f = frames[v];
        if (!is_orthonormal(f, 1e-6)) throw InputError(fmt::format("curvature frame at vertex {} is not orthonormal", v));
        const double s1 = std::sqrt(std::max(std::abs(f.k_min), floor));
        const double s2 = std::sqrt(std::max(std::abs(f.k_max), floor));
        const double r = std::clamp(s2 / s1, 1.0, ceil);
        field.ratio.push_back(r);
        field.tensors.push_back(curvature_tensor(f, r));
    }
    return field;
}

MetricField smooth_stretch(const MetricField& field, const SurfaceMesh& mesh, int iterations) {
    if (iterations < 0) throw InputError("smoothing iterations must be >= 0");
    if (field.size() != mesh.num_vertices()) throw InputError("metric field size does not match the mesh");
    if (iterations == 0) return field;
    const int nv = static_cast<int>(mesh.num_vertices());
    std::vector<double> area(nv);
    for (int v = 0; v < nv; ++v) area[v] = mesh.vertex_area(v);

    std::vector<double> r = field.ratio, next(nv);
    for (int it = 0; it < iterations; ++it) {
        for (int v = 0; v < nv; ++v) {
            double wsum = area[v], acc = area[v] * r[v];
            for (int u : mesh.vertex_neighbors(v)) {
                wsum += area[u];
                acc += area[u] * r[u];
            }
            next[v] = wsum > 0 ? acc / wsum : r[v];
        }
        r.swap(next);
    }

    MetricField out = field;
    out.ratio = r;
    for (int v = 0; v < nv; ++v) {
        if (!field.frames.empty()) {
            out.tensors[v] = curvature_tensor(field.frames[v], r[v]);
        } else {
            // No frames: rescale the dominant eigen-direction only.
            Eigen::SelfAdjointEigenSolver<Mat3> es(field.tensors[v]);
            const Vec3 d = es.eigenvectors().col(2);
            out.tensors[v] = field.tensors[v] + (r[v] * r[v] - es.eigenvalues()[2]) * d * d.transpose();
        }
    }
    return out;
}

MetricField curvature_metric(const SurfaceMesh& mesh, const MetricOptions& opts) {
    return smooth_stretch(build_metric(principal_curvatures(mesh, opts.radius_rings), opts.floor, opts.ceil), mesh,
                          opts.smooth_iterations);
}

Mat3 face_metric(const MetricField& field, const SurfaceMesh& mesh, int face) {
    const Face& t = mesh.face(face);
    return (field.tensors[t[0]] + field.tensors[t[1]] + field.tensors[t[2]]) / 3.0;
}

Mat3 metric_sqrt(const Mat3& m) {
    const double scale = m.cwiseAbs().maxCoeff();
    if (!m.allFinite() || !(scale > 0) || (m - m.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale)
        throw InputError("metric_sqrt: tensor is not symmetric");
    Eigen::SelfAdjointEigenSolver<Mat3> es(0.5 * (m + m.transpose()));
    if (!(es.eigenvalues().minCoeff() > 0)) throw InputError("metric_sqrt: tensor is not positive definite");
    return es.eigenvectors() * es.eigenvalues().cwiseSqrt().asDiagonal() * es.eigenvectors().transpose();
}

void check_metric(const MetricField& field) {
    if (field.ratio.size() != field.tensors.size()) throw InputError("metric ratio/tensor count mismatch");
    for (std::size_t v = 0; v < field.tensors.size(); ++v) {
        const Mat3& m = field.tensors[v];
        const double scale = m.cwiseAbs().maxCoeff();
        if (!m.allFinite() || (m - m.transpose()).cwiseAbs().maxCoeff() > 1e-12 * std::max(scale, 1.0))
            throw InputError(fmt::format("metric tensor {} is not symmetric", v));
        Eigen::SelfAdjointEigenSolver<Mat3> es(m);
        const auto ev = es.eigenvalues();
        if (ev.minCoeff() < kMetricEigenFloor || ev.maxCoeff() > 1.0 / kMetricEigenFloor)
            throw InputError(fmt::format("metric tensor {} has eigenvalues outside [1e-8, 1e8]", v));
    }
}

namespace {

constexpr char kMetMagic[4] = {'M', 'E', 'T', '1'};
constexpr std::uint32_t kMetVersion = 1;

std::array<double, 7> pack(const Mat3& m, double r) {
    return {m(0, 0), m(0, 1), m(0, 2), m(1, 1), m(1, 2), m(2, 2), r};
}

Mat3 unpack(const double* p) {
    Mat3 m;
    m << p[0], p[1], p[2], p[1], p[3], p[4], p[2], p[4], p[5];
    return m;
}

bool is_json(const std::filesystem::path& path) { return path.extension() == ".json"; }

} // namespace

void save_metric(const MetricField& field, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw InputError("cannot write " + path.string());
    if (is_json(path)) {
        nlohmann::json j;
        j["format"] = "aniso-metric";
        j["version"] = kMetVersion;
        j["vertex_count"] = field.size();
        auto& tensors = j["tensors"] = nlohmann::json::array();
        for (std::size_t v = 0; v < field.size(); ++v) {
            auto p = pack(field.tensors[v], field.ratio[v]);
            tensors.push_back(std::vector<double>(p.begin(), p.begin() + 6));
        }
        j["ratio"] = field.ratio;
        out << j.dump();
        return;
    }
    const std::uint64_t n = field.size();
    write_pod(out, kMetMagic, 4);
    write_pod(out, &kMetVersion, sizeof kMetVersion);
    write_pod(out, &n, sizeof n);
    for (std::size_t v = 0; v < field.size(); ++v) {
        auto p = pack(field.tensors[v], field.ratio[v]);
        write_pod(out, p.data(), sizeof(double) * p.size());
    }
}

MetricField load_metric(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputError("cannot open metric file " + path.string());
    MetricField field;
    if (is_json(path)) {
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(in);
            if (j.at("format") != "aniso-metric") throw InputError("not an aniso-metric file");
            const std::size_t n = j.at("vertex_count").get<std::size_t>();
            const auto& tensors = j.at("tensors");
            const auto ratio = j.at("ratio").get<std::vector<double>>();
            if (tensors.size() != n || ratio.size() != n) throw InputError("metric vertex count mismatch");
            for (std::size_t v = 0; v < n; ++v) {
                auto t = tensors[v].get<std::vector<double>>();
                if (t.size() != 6) throw InputError("metric tensor needs 6 entries");
                field.tensors.push_back(unpack(t.data()));
            }
            field.ratio = ratio;
        } catch (const nlohmann::json::exception& e) {
            throw InputError(path.string() + ": " + e.what());
        }
    } else {
        char magic[4];
        std::uint32_t version = 0;
        std::uint64_t n = 0;
        in.read(magic, 4);
        in.read(reinterpret_cast<char*>(&version), sizeof version);
        in.read(reinterpret_cast<char*>(&n), sizeof n);
        if (!in || std::memcmp(magic, kMetMagic, 4) != 0) throw InputError(path.string() + ": bad .met header");
        if (version != kMetVersion) throw InputError(path.string() + ": unsupported .met version");
        if (n > (1ull << 32)) throw InputError(path.string() + ": implausible vertex count");
        std::array<double, 7> p;
        for (std::uint64_t v = 0; v < n; ++v) {
            in.read(reinterpret_cast<char*>(p.data()), sizeof(double) * 7);
            if (!in) throw InputError(path.string() + ": truncated .met file");
            field.tensors.push_back(unpack(p.data()));
            field.ratio.push_back(p[6]);
        }
    }
    check_metric(field);
    return field;
}

} // namespace aniso
