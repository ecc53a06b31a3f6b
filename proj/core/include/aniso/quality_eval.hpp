#pragma once

#include "aniso/metric_field.hpp"
#include "aniso/surface_query.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace aniso {

/// G = 2 sqrt(3) S / (p h) of the triangle mapped by Q (p half-perimeter, h longest edge).
/// Returns 0 for degenerate images.
double triangle_quality(const Vec3& a, const Vec3& b, const Vec3& c, const Mat3& Q);

/// Metric at arbitrary points, blended barycentrically from the closest input face.
MetricField sample_metric(const MetricField& field, const SurfaceQuery& input, const std::vector<Vec3>& points);

struct MeshQuality {
    double g_avg = 0;
    double g_min = 0;
    std::vector<double> per_face;
    std::vector<int> histogram; // 10 bins over [0, 1]
};

/// Per-face Q is the mean of sqrt(M) at its three vertices; `field` is indexed by mesh vertex.
MeshQuality mesh_quality(const SurfaceMesh& mesh, const MetricField& field);

struct SurfaceSamples {
    std::vector<Vec3> points;
    std::vector<Vec3> normals;
};

/// Area-proportional random samples; deterministic for a fixed seed.
SurfaceSamples sample_surface(const SurfaceMesh& mesh, int n, std::uint64_t seed);

inline constexpr double kDefaultF1Tau = 0.005;
inline constexpr int kDefaultSamples = 100'000;
inline constexpr double kDefaultDihedralDeg = 30.0;

/// Raw (unscaled) distance metrics. Distances are point-to-surface.
struct DistanceMetrics {
    double cd = 0; // mean of the two directed mean distances
    double f1 = 0;
    double nc = 0;
    double hd = 0;
};

DistanceMetrics surface_distances(const SurfaceMesh& result, const SurfaceMesh& reference,
                                  int n_samples = kDefaultSamples, double f1_tau = kDefaultF1Tau,
                                  std::uint64_t seed = 0);

using Segment = std::array<Vec3, 2>;

/// Interior edges whose face normals differ by more than `dihedral_deg`.
std::vector<Segment> sharp_edges(const SurfaceMesh& mesh, double dihedral_deg = kDefaultDihedralDeg);

struct EdgeMetrics {
    double ecd = 0; // raw
    double ef1 = 1;
    bool one_sided = false; // sharp edges on exactly one mesh: worst-case values reported
    std::size_t result_edges = 0, reference_edges = 0;
};

EdgeMetrics edge_metrics(const SurfaceMesh& result, const SurfaceMesh& reference,
                         double dihedral_deg = kDefaultDihedralDeg, int n_samples = kDefaultSamples,
                         double f1_tau = kDefaultF1Tau, std::uint64_t seed = 0);

/// One row of the results table. Distances use the table's scales:
/// CD x 1e5, HD x 1e2, ECD x 1e2.
struct QualityReport {
    std::string method = "NASM";
    int v_in = 0;
    int v_out = 0;
    double stretch = 1;
    double cd = 0, f1 = 0, nc = 0, hd = 0;
    double ecd = 0, ef1 = 1;
    std::optional<double> t_em, t_me; // seconds
    double g_avg = 0, g_min = 0;
    bool edge_one_sided = false;
    bool units_mismatch = false; // bounding boxes differ by more than 10x

    bool operator==(const QualityReport&) const = default;
};

inline constexpr double kCdScale = 1e5;
inline constexpr double kHdScale = 1e2;
inline constexpr double kEcdScale = 1e2;

struct EvalOptions {
    int samples = kDefaultSamples;
    double f1_tau = kDefaultF1Tau;
    double dihedral_deg = kDefaultDihedralDeg;
    std::uint64_t seed = 0;
    bool distances = true;
    bool edges = true;
    bool quality = true;
};

/// `input_field` is the metric on `reference` vertices; it is resampled at the result vertices.
QualityReport evaluate(const SurfaceMesh& result, const SurfaceMesh& reference, const MetricField& input_field,
                       const EvalOptions& opts = {});

std::string report_json(const QualityReport& r);
QualityReport parse_report_json(std::string_view text);
void emit_report(const QualityReport& r, const std::filesystem::path& json_path);

std::string csv_header();
std::string csv_row(const QualityReport& r);
void write_csv(const std::vector<QualityReport>& rows, const std::filesystem::path& path);

} // namespace aniso
