#pragma once

#include "aniso/metric_field.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace aniso {

enum class EmbedProvenance { Deterministic, Neural };

std::string to_string(EmbedProvenance p);
EmbedProvenance parse_provenance(const std::string& s);

/// Source connectivity with per-vertex coordinates in R^8. Channels 0..2 are the source
/// 3D coordinates copied verbatim; channels 3..7 carry the metric.
struct EmbeddedMesh {
    SurfaceMesh surface;
    std::vector<PointE> points;
    EmbedProvenance provenance = EmbedProvenance::Deterministic;

    std::size_t num_vertices() const { return points.size(); }
    const PointE& point(int v) const { return points[v]; }
    /// Area of face `f` measured in R^8.
    double face_area(int f) const;
    double total_area() const;
};

/// Embedding with all extra channels zero.
EmbeddedMesh trivial_embedding(const SurfaceMesh& mesh);

/// Source-side tangent basis of one face: W' = [vj - vi, vk - vi, vl - vi] where vl is the
/// hypothetical fourth vertex along the face normal.
struct TriangleBasis {
    Mat3 source;   // W'
    Mat3 jacobian; // J, symmetric with J^t J = M_F
};

/// Fourth vertex vi + (e1 x e2) / sqrt(|e1 x e2|). Throws for degenerate triangles.
Vec3 fourth_vertex(const Vec3& vi, const Vec3& vj, const Vec3& vk);

/// Symmetric principal square root of M_F, so J^t J = M_F.
Mat3 face_jacobian(const Mat3& metric);

/// Lift of J into the extra channels: K with K^t K = max(M_F - I, 0). Stacking [I; K] gives
/// an 8x3 Jacobian whose pullback is M_F whenever M_F >= I.
Mat3 extra_channel_jacobian(const Mat3& metric);

TriangleBasis triangle_basis(const SurfaceMesh& mesh, int face, const Mat3& metric);

struct EmbedOptions {
    /// One gauge vertex per connected component; empty picks the lowest vertex id of each.
    std::vector<int> pins;
};

/// Area-weighted least squares over the 5 extra channels (first 3 channels fixed).
EmbeddedMesh solve_embedding(const SurfaceMesh& mesh, const MetricField& field, const EmbedOptions& opts = {});

struct ResidualReport {
    std::vector<double> per_face;    // ||W_bar - J W||_F
    std::vector<double> relative;    // per_face / ||J W||_F (0 when the target is 0)
    double objective = 0;            // sum of area * per_face^2
    double min = 0, median = 0, max = 0;
    double median_relative = 0;
};

ResidualReport embed_residual(const EmbeddedMesh& embedded, const SurfaceMesh& mesh, const MetricField& field);

struct DistortionReport {
    std::vector<double> ratios; // per edge: embedded length / metric length
    double median = 0, mean = 0, rms_error = 0; // rms of (ratio - 1)
    std::vector<int> histogram; // 20 bins over [0, 2], last bin includes overflow
};

DistortionReport edge_length_distortion(const EmbeddedMesh& embedded, const MetricField& field);

/// `.hde` text format:
///   HDE1
///   <vertex_count> <dim> <deterministic|neural>
///   <dim floats per vertex line>
///   <face_count>
///   <i j k per line, 0-based>
void save_hde(const EmbeddedMesh& embedded, const std::filesystem::path& path);
EmbeddedMesh load_hde(const std::filesystem::path& path);
EmbeddedMesh parse_hde(std::string_view text, const std::string& name = "<hde>");
std::string format_hde(const EmbeddedMesh& embedded);

/// Throws InputError unless channels 0..2 equal `mesh` coordinates exactly and the
/// connectivity matches.
void check_first_channels(const EmbeddedMesh& embedded, const SurfaceMesh& mesh);

} // namespace aniso
