#include "aniso/mesh_io.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>
#include <unordered_map>

namespace aniso {
namespace {

std::uint64_t edge_key(int a, int b) {
    if (a > b) std::swap(a, b);
    return (static_cast<std::uint64_t>(a) << 32) | static_cast<std::uint32_t>(b);
}

struct UnionFind {
    std::vector<int> parent;
    explicit UnionFind(std::size_t n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
    int find(int x) {
        while (parent[x] != x) x = parent[x] = parent[parent[x]];
        return x;
    }
    void unite(int a, int b) {
        a = find(a);
        b = find(b);
        if (a != b) parent[std::max(a, b)] = std::min(a, b);
    }
};

std::string lower_ext(const std::filesystem::path& p) {
    std::string ext = p.extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
    return ext;
}

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputError("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

/// Splits on whitespace, dropping trailing '#' comments.
std::vector<std::string_view> tokenize(std::string_view line) {
    if (auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    std::vector<std::string_view> out;
    std::size_t i = 0;
    while (i < line.size()) {
        while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
        std::size_t j = i;
        while (j < line.size() && !std::isspace(static_cast<unsigned char>(line[j]))) ++j;
        if (j > i) out.push_back(line.substr(i, j - i));
        i = j;
    }
    return out;
}

template <typename T>
bool parse_number(std::string_view tok, T& out) {
    auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), out);
    return ec == std::errc() && ptr == tok.data() + tok.size();
}

void fan_triangulate(const std::vector<int>& poly, std::vector<Face>& faces) {
    for (std::size_t k = 1; k + 1 < poly.size(); ++k) faces.push_back({poly[0], poly[k], poly[k + 1]});
}

template <typename Fn>
void for_each_line(std::string_view text, Fn&& fn) {
    int line_no = 0;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        std::size_t end = text.find('\n', pos);
        if (end == std::string_view::npos) end = text.size();
        std::string_view line = text.substr(pos, end - pos);
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        ++line_no;
        if (!fn(line_no, line)) return;
        if (end == text.size()) break;
        pos = end + 1;
    }
}

} // namespace

SurfaceMesh::SurfaceMesh(std::vector<Vec3> vertices, std::vector<Face> faces)
    : vertices_(std::move(vertices)), faces_(std::move(faces)) {
    const int nv = static_cast<int>(vertices_.size());
    for (std::size_t f = 0; f < faces_.size(); ++f) {
        const Face& t = faces_[f];
        for (int c = 0; c < 3; ++c) {
            if (t[c] < 0 || t[c] >= nv)
                throw InputError(fmt::format("face {} references vertex {} (mesh has {})", f, t[c], nv));
        }
        if (t[0] == t[1] || t[1] == t[2] || t[0] == t[2])
            throw InputError(fmt::format("face {} repeats a vertex", f));
    }
    build_adjacency();
}

void SurfaceMesh::build_adjacency() {
    const int nv = static_cast<int>(vertices_.size());
    const int nf = static_cast<int>(faces_.size());
    std::unordered_map<std::uint64_t, int> index;
    index.reserve(faces_.size() * 2);
    face_edges_.assign(nf, {-1, -1, -1});
    UnionFind uf(nf);
    for (int f = 0; f < nf; ++f) {
        for (int l = 0; l < 3; ++l) {
            int a = faces_[f][l], b = faces_[f][(l + 1) % 3];
            auto [it, inserted] = index.try_emplace(edge_key(a, b), static_cast<int>(edges_.size()));
            if (inserted) {
                Edge e;
                e.v = {a, b};
                e.faces = {f, -1};
                e.valence = 1;
                edges_.push_back(e);
            } else {
                Edge& e = edges_[it->second];
                if (e.valence == 1) e.faces[1] = f;
                ++e.valence;
                uf.unite(e.faces[0], f);
            }
            face_edges_[f][l] = it->second;
        }
    }

    std::vector<std::vector<int>> nbrs(nv);
    for (const Edge& e : edges_) {
        nbrs[e.v[0]].push_back(e.v[1]);
        nbrs[e.v[1]].push_back(e.v[0]);
    }
    neighbor_offsets_.assign(nv + 1, 0);
    for (int v = 0; v < nv; ++v) {
        std::sort(nbrs[v].begin(), nbrs[v].end());
        neighbor_offsets_[v + 1] = neighbor_offsets_[v] + static_cast<int>(nbrs[v].size());
    }
    neighbor_list_.reserve(neighbor_offsets_.back());
    for (auto& n : nbrs) neighbor_list_.insert(neighbor_list_.end(), n.begin(), n.end());

    vface_offsets_.assign(nv + 1, 0);
    for (const Face& t : faces_)
        for (int c : t) ++vface_offsets_[c + 1];
    for (int v = 0; v < nv; ++v) vface_offsets_[v + 1] += vface_offsets_[v];
    vface_list_.assign(vface_offsets_.back(), -1);
    std::vector<int> fill(vface_offsets_.begin(), vface_offsets_.end() - 1);
    for (int f = 0; f < nf; ++f)
        for (int c : faces_[f]) vface_list_[fill[c]++] = f;

    face_component_.assign(nf, -1);
    std::unordered_map<int, int> root_to_id;
    for (int f = 0; f < nf; ++f) {
        int r = uf.find(f);
        auto [it, inserted] = root_to_id.try_emplace(r, static_cast<int>(root_to_id.size()));
        face_component_[f] = it->second;
    }
    num_components_ = static_cast<int>(root_to_id.size());
}

int SurfaceMesh::face_neighbor(int f, int local) const {
    const Edge& e = edges_[face_edges_[f][local]];
    if (e.valence != 2) return -1;
    return e.faces[0] == f ? e.faces[1] : e.faces[0];
}

std::span<const int> SurfaceMesh::vertex_neighbors(int v) const {
    return {neighbor_list_.data() + neighbor_offsets_[v],
            static_cast<std::size_t>(neighbor_offsets_[v + 1] - neighbor_offsets_[v])};
}

std::span<const int> SurfaceMesh::vertex_faces(int v) const {
    return {vface_list_.data() + vface_offsets_[v],
            static_cast<std::size_t>(vface_offsets_[v + 1] - vface_offsets_[v])};
}

Vec3 SurfaceMesh::face_cross(int f) const {
    const Face& t = faces_[f];
    return (vertices_[t[1]] - vertices_[t[0]]).cross(vertices_[t[2]] - vertices_[t[0]]);
}

Vec3 SurfaceMesh::face_normal(int f) const {
    Vec3 n = face_cross(f);
    double len = n.norm();
    return len > 0 ? Vec3(n / len) : Vec3::Zero();
}

double SurfaceMesh::face_area(int f) const { return 0.5 * face_cross(f).norm(); }

Vec3 SurfaceMesh::face_centroid(int f) const {
    const Face& t = faces_[f];
    return (vertices_[t[0]] + vertices_[t[1]] + vertices_[t[2]]) / 3.0;
}

double SurfaceMesh::total_area() const {
    double a = 0;
    for (int f = 0; f < static_cast<int>(faces_.size()); ++f) a += face_area(f);
    return a;
}

double SurfaceMesh::vertex_area(int v) const {
    double a = 0;
    for (int f : vertex_faces(v)) a += face_area(f);
    return a / 3.0;
}

SurfaceMesh parse_obj(std::string_view text, const std::string& name) {
    std::vector<Vec3> verts;
    std::vector<Face> faces;
    for_each_line(text, [&](int line_no, std::string_view line) {
        auto tok = tokenize(line);
        if (tok.empty()) return true;
        if (tok[0] == "v") {
            if (tok.size() < 4) throw ParseError(name, line_no, "vertex needs 3 coordinates");
            Vec3 p;
            for (int k = 0; k < 3; ++k)
                if (!parse_number(tok[k + 1], p[k]) || !std::isfinite(p[k]))
                    throw ParseError(name, line_no, "bad coordinate '" + std::string(tok[k + 1]) + "'");
            verts.push_back(p);
        } else if (tok[0] == "f") {
            if (tok.size() < 4) throw ParseError(name, line_no, "face needs at least 3 vertices");
            std::vector<int> poly;
            for (std::size_t k = 1; k < tok.size(); ++k) {
                std::string_view idx = tok[k].substr(0, tok[k].find('/'));
                long i = 0;
                if (!parse_number(idx, i)) throw ParseError(name, line_no, "bad face index '" + std::string(idx) + "'");
                if (i == 0) throw ParseError(name, line_no, "face index 0 (OBJ indices are 1-based)");
                long resolved = i > 0 ? i - 1 : static_cast<long>(verts.size()) + i;
                if (resolved < 0 || resolved >= static_cast<long>(verts.size()))
                    throw ParseError(name, line_no, "face index " + std::to_string(i) + " out of range");
                poly.push_back(static_cast<int>(resolved));
            }
            fan_triangulate(poly, faces);
        }
        return true;
    });
    try {
        return SurfaceMesh(std::move(verts), std::move(faces));
    } catch (const InputError& e) {
        throw InputError(name + ": " + e.what());
    }
}

SurfaceMesh parse_off(std::string_view text, const std::string& name) {
    std::vector<std::pair<int, std::vector<std::string_view>>> lines;
    for_each_line(text, [&](int line_no, std::string_view line) {
        auto tok = tokenize(line);
        if (!tok.empty()) lines.emplace_back(line_no, std::move(tok));
        return true;
    });
    if (lines.empty()) throw ParseError(name, 1, "empty OFF file");
    std::size_t cursor = 0;
    auto header = lines[cursor].second;
    if (header[0] != "OFF") throw ParseError(name, lines[cursor].first, "missing OFF header");
    std::vector<std::string_view> counts(header.begin() + 1, header.end());
    int count_line = lines[cursor].first;
    ++cursor;
    if (counts.empty()) {
        if (cursor >= lines.size()) throw ParseError(name, count_line, "missing counts");
        counts = lines[cursor].second;
        count_line = lines[cursor].first;
        ++cursor;
    }
    long nv = 0, nf = 0;
    if (counts.size() < 2 || !parse_number(counts[0], nv) || !parse_number(counts[1], nf) || nv < 0 || nf < 0)
        throw ParseError(name, count_line, "bad vertex/face counts");
    std::vector<Vec3> verts;
    verts.reserve(nv);
    for (long i = 0; i < nv; ++i, ++cursor) {
        if (cursor >= lines.size()) throw ParseError(name, count_line, "truncated vertex list");
        const auto& [ln, tok] = lines[cursor];
        Vec3 p;
        if (tok.size() < 3) throw ParseError(name, ln, "vertex needs 3 coordinates");
        for (int k = 0; k < 3; ++k)
            if (!parse_number(tok[k], p[k]) || !std::isfinite(p[k])) throw ParseError(name, ln, "bad coordinate");
        verts.push_back(p);
    }
    std::vector<Face> faces;
    for (long i = 0; i < nf; ++i, ++cursor) {
        if (cursor >= lines.size()) throw ParseError(name, count_line, "truncated face list");
        const auto& [ln, tok] = lines[cursor];
        long k = 0;
        if (!parse_number(tok[0], k) || k < 3 || tok.size() < static_cast<std::size_t>(k + 1))
            throw ParseError(name, ln, "bad face record");
        std::vector<int> poly;
        for (long j = 1; j <= k; ++j) {
            long idx = 0;
            if (!parse_number(tok[j], idx) || idx < 0 || idx >= nv)
                throw ParseError(name, ln, "face index out of range");
            poly.push_back(static_cast<int>(idx));
        }
        fan_triangulate(poly, faces);
    }
    try {
        return SurfaceMesh(std::move(verts), std::move(faces));
    } catch (const InputError& e) {
        throw InputError(name + ": " + e.what());
    }
}

SurfaceMesh load_mesh(const std::filesystem::path& path) {
    if (!std::filesystem::exists(path)) throw InputError("no such file: " + path.string());
    const std::string ext = lower_ext(path);
    if (ext == ".obj") return parse_obj(read_file(path), path.string());
    if (ext == ".off") return parse_off(read_file(path), path.string());
    throw InputError("unsupported mesh format '" + ext + "' (expected .obj or .off)");
}

std::string format_obj(const SurfaceMesh& mesh) {
    std::string out;
    for (const Vec3& p : mesh.vertices()) out += fmt::format("v {:.9g} {:.9g} {:.9g}\n", p.x(), p.y(), p.z());
    for (const Face& f : mesh.faces()) out += fmt::format("f {} {} {}\n", f[0] + 1, f[1] + 1, f[2] + 1);
    return out;
}

std::string format_off(const SurfaceMesh& mesh) {
    std::string out = fmt::format("OFF\n{} {} 0\n", mesh.num_vertices(), mesh.num_faces());
    for (const Vec3& p : mesh.vertices()) out += fmt::format("{:.9g} {:.9g} {:.9g}\n", p.x(), p.y(), p.z());
    for (const Face& f : mesh.faces()) out += fmt::format("3 {} {} {}\n", f[0], f[1], f[2]);
    return out;
}

void save_mesh(const SurfaceMesh& mesh, const std::filesystem::path& path) {
    const std::string ext = lower_ext(path);
    std::string text;
    if (ext == ".obj")
        text = format_obj(mesh);
    else if (ext == ".off")
        text = format_off(mesh);
    else
        throw InputError("unsupported mesh format '" + ext + "' (expected .obj or .off)");
    std::ofstream out(path, std::ios::binary);
    if (!out) throw InputError("cannot write " + path.string());
    out << text;
}

NormalizedMesh normalize_unit_box(const SurfaceMesh& mesh) {
    if (mesh.num_vertices() == 0) throw InputError("cannot normalize an empty mesh");
    Vec3 lo = mesh.vertex(0), hi = mesh.vertex(0);
    for (const Vec3& p : mesh.vertices()) {
        lo = lo.cwiseMin(p);
        hi = hi.cwiseMax(p);
    }
    const double extent = (hi - lo).maxCoeff();
    if (!(extent > 0)) throw InputError("zero-extent bounding box");
    UnitBoxTransform t;
    t.center = 0.5 * (lo + hi);
    t.scale = 2.0 / extent;
    return {apply_transform(mesh, t), t};
}

SurfaceMesh apply_transform(const SurfaceMesh& mesh, const UnitBoxTransform& t, bool inverse) {
    std::vector<Vec3> v;
    v.reserve(mesh.num_vertices());
    for (const Vec3& p : mesh.vertices()) {
        Vec3 q = inverse ? t.inverse(p) : t.apply(p);
        if (!inverse) q = q.cwiseMax(Vec3::Constant(-1.0)).cwiseMin(Vec3::Constant(1.0));
        v.push_back(q);
    }
    return SurfaceMesh(std::move(v), mesh.faces());
}

VertexNormals vertex_normals(const SurfaceMesh& mesh) {
    VertexNormals out;
    out.normals.assign(mesh.num_vertices(), Vec3::Zero());
    for (int f = 0; f < static_cast<int>(mesh.num_faces()); ++f) {
        const Vec3 n = mesh.face_cross(f); // |n| = 2 * area
        for (int c : mesh.face(f)) out.normals[c] += n;
    }
    for (int v = 0; v < static_cast<int>(mesh.num_vertices()); ++v) {
        double len = out.normals[v].norm();
        if (mesh.vertex_faces(v).empty() || !(len > 0)) {
            out.normals[v].setZero();
            out.isolated.push_back(v);
        } else {
            out.normals[v] /= len;
        }
    }
    return out;
}

MeshDiagnostics validate(const SurfaceMesh& mesh) {
    MeshDiagnostics d;
    for (const Edge& e : mesh.edges()) {
        if (e.valence > 2) ++d.non_manifold_edges;
        if (e.valence == 1) ++d.boundary_edges;
        if (e.valence == 2) {
            // Consistent orientation: the second face traverses the edge opposite to the first.
            auto runs_forward = [&](int f) {
                const Face& t = mesh.face(f);
                for (int l = 0; l < 3; ++l)
                    if (t[l] == e.v[0] && t[(l + 1) % 3] == e.v[1]) return true;
                return false;
            };
            if (runs_forward(e.faces[0]) == runs_forward(e.faces[1])) ++d.orientation_inconsistent_edges;
        }
    }
    for (int f = 0; f < static_cast<int>(mesh.num_faces()); ++f)
        if (mesh.face_area(f) < kDegenerateFaceArea) ++d.degenerate_faces;

    std::vector<int> order(mesh.num_vertices());
    std::iota(order.begin(), order.end(), 0);
    const auto& V = mesh.vertices();
    auto less = [&](int a, int b) {
        return std::lexicographical_compare(V[a].data(), V[a].data() + 3, V[b].data(), V[b].data() + 3);
    };
    std::sort(order.begin(), order.end(), less);
    for (std::size_t k = 1; k < order.size(); ++k)
        if (V[order[k]] == V[order[k - 1]]) ++d.duplicate_vertices;

    for (int v = 0; v < static_cast<int>(mesh.num_vertices()); ++v)
        if (mesh.vertex_faces(v).empty()) ++d.isolated_vertices;
    d.connected_components = mesh.num_components() + d.isolated_vertices;
    d.euler_characteristic = mesh.euler_characteristic();
    return d;
}

} // namespace aniso
