#pragma once

#include "aniso/types.hpp"

#include <filesystem>
#include <span>
#include <vector>

namespace aniso {

/// Undirected mesh edge with up to two incident faces recorded (faces[1] == -1 on a
/// boundary). `valence` counts all incident faces, so valence > 2 marks a non-manifold edge.
struct Edge {
    std::array<int, 2> v{-1, -1};
    std::array<int, 2> faces{-1, -1};
    int valence = 0;

    bool boundary() const { return valence == 1; }
};

/// Indexed triangle mesh with adjacency. Immutable after construction.
///
/// Local edge `l` of face `f` joins corners `l` and `(l + 1) % 3`.
class SurfaceMesh {
public:
    SurfaceMesh() = default;
    /// Throws InputError on out-of-range or repeated face indices.
    SurfaceMesh(std::vector<Vec3> vertices, std::vector<Face> faces);

    const std::vector<Vec3>& vertices() const { return vertices_; }
    const std::vector<Face>& faces() const { return faces_; }
    const std::vector<Edge>& edges() const { return edges_; }

    std::size_t num_vertices() const { return vertices_.size(); }
    std::size_t num_faces() const { return faces_.size(); }
    std::size_t num_edges() const { return edges_.size(); }
    bool empty() const { return faces_.empty(); }

    const Vec3& vertex(int v) const { return vertices_[v]; }
    const Face& face(int f) const { return faces_[f]; }

    int face_edge(int f, int local) const { return face_edges_[f][local]; }
    /// Face across local edge `local` of `f`, or -1.
    int face_neighbor(int f, int local) const;

    std::span<const int> vertex_neighbors(int v) const;
    std::span<const int> vertex_faces(int v) const;

    /// Unnormalized normal: cross product of the two edges leaving corner 0.
    Vec3 face_cross(int f) const;
    Vec3 face_normal(int f) const;
    double face_area(int f) const;
    Vec3 face_centroid(int f) const;
    double total_area() const;
    /// One third of the incident face areas.
    double vertex_area(int v) const;

    /// Connected component id per face (faces linked through shared edges).
    const std::vector<int>& face_components() const { return face_component_; }
    int num_components() const { return num_components_; }

    int euler_characteristic() const {
        return static_cast<int>(num_vertices()) - static_cast<int>(num_edges()) +
               static_cast<int>(num_faces());
    }

private:
    void build_adjacency();

    std::vector<Vec3> vertices_;
    std::vector<Face> faces_;
    std::vector<Edge> edges_;
    std::vector<std::array<int, 3>> face_edges_;
    std::vector<int> neighbor_offsets_, neighbor_list_;
    std::vector<int> vface_offsets_, vface_list_;
    std::vector<int> face_component_;
    int num_components_ = 0;
};

struct MeshDiagnostics {
    int non_manifold_edges = 0;
    int boundary_edges = 0;
    int degenerate_faces = 0;
    int duplicate_vertices = 0;
    int isolated_vertices = 0;
    int connected_components = 0;
    /// Interior edges traversed in the same direction by both faces.
    int orientation_inconsistent_edges = 0;
    int euler_characteristic = 0;

    bool clean() const {
        return non_manifold_edges == 0 && degenerate_faces == 0 && orientation_inconsistent_edges == 0;
    }
};

/// Faces with area below this are degenerate (normalized units).
inline constexpr double kDegenerateFaceArea = 1e-12;

/// Loads OBJ or OFF (chosen by extension). Polygons are fan-triangulated.
SurfaceMesh load_mesh(const std::filesystem::path& path);
SurfaceMesh parse_obj(std::string_view text, const std::string& name = "<obj>");
SurfaceMesh parse_off(std::string_view text, const std::string& name = "<off>");

/// Writes OBJ or OFF with 9 significant digits.
void save_mesh(const SurfaceMesh& mesh, const std::filesystem::path& path);
std::string format_obj(const SurfaceMesh& mesh);
std::string format_off(const SurfaceMesh& mesh);

/// Uniform scale + translation: normalized = (x - center) * scale.
struct UnitBoxTransform {
    Vec3 center = Vec3::Zero();
    double scale = 1.0;

    Vec3 apply(const Vec3& x) const { return (x - center) * scale; }
    Vec3 inverse(const Vec3& y) const { return y / scale + center; }
};

struct NormalizedMesh {
    SurfaceMesh mesh;
    UnitBoxTransform transform;
};

/// Centers the bounding box and scales the longest axis to [-1, 1].
NormalizedMesh normalize_unit_box(const SurfaceMesh& mesh);
SurfaceMesh apply_transform(const SurfaceMesh& mesh, const UnitBoxTransform& t, bool inverse = false);

struct VertexNormals {
    std::vector<Vec3> normals;
    std::vector<int> isolated; // vertices with no incident face; their normal is zero
};

/// Area-weighted average of incident face normals.
VertexNormals vertex_normals(const SurfaceMesh& mesh);

MeshDiagnostics validate(const SurfaceMesh& mesh);

} // namespace aniso
