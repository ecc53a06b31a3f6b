#pragma once

#include "aniso/mesh_io.hpp"

#include <filesystem>
#include <optional>
#include <vector>

namespace aniso {

/// Principal curvature frame at a vertex. {v_min, v_max, normal} is right-handed
/// orthonormal and |k_min| <= |k_max|.
struct CurvatureFrame {
    Vec3 v_min = Vec3::UnitX();
    Vec3 v_max = Vec3::UnitY();
    Vec3 normal = Vec3::UnitZ();
    double k_min = 0;
    double k_max = 0;
    bool boundary = false;
    bool fallback = false; // too few neighbors for a quadric fit
};

/// Quadric fit of the height field over the `radius_rings`-ring neighborhood of each vertex,
/// expressed in the tangent frame of the area-weighted vertex normal.
std::vector<CurvatureFrame> principal_curvatures(const SurfaceMesh& mesh, int radius_rings = 2);

struct MetricOptions {
    double floor = 1e-3;   // lower bound on |K| before taking square roots
    double ceil = 100.0;   // upper bound on the stretch ratio s2/s1
    int smooth_iterations = 1;
    int radius_rings = 2;
};

/// Per-vertex SPD tensors plus the stretch ratios and frames they were built from.
struct MetricField {
    std::vector<Mat3> tensors;
    std::vector<double> ratio;
    /// Present when the field was built from curvature; absent for loaded fields.
    std::vector<CurvatureFrame> frames;

    std::size_t size() const { return tensors.size(); }
    static MetricField identity(std::size_t n);
    /// Mean stretch ratio (the report's "Stretch" column).
    double mean_ratio() const;
};

/// Eigenvalue envelope [eps, 1/eps] every tensor must respect.
inline constexpr double kMetricEigenFloor = 1e-8;

/// M = [v_min v_max n] diag(1, r^2, 1) [v_min v_max n]^t with r = s2 / s1.
Mat3 curvature_tensor(const CurvatureFrame& frame, double ratio);

MetricField build_metric(const std::vector<CurvatureFrame>& frames, double floor, double ceil);
MetricField smooth_stretch(const MetricField& field, const SurfaceMesh& mesh, int iterations);
/// Convenience: curvature -> build -> smooth.
MetricField curvature_metric(const SurfaceMesh& mesh, const MetricOptions& opts = {});

/// Arithmetic mean of the three vertex tensors.
Mat3 face_metric(const MetricField& field, const SurfaceMesh& mesh, int face);

/// Symmetric principal square root. Throws InputError for non-SPD input.
Mat3 metric_sqrt(const Mat3& m);

/// Throws InputError if any tensor is non-symmetric or outside the eigenvalue envelope.
void check_metric(const MetricField& field);

/// `.met` is binary, anything ending in `.json` is JSON.
void save_metric(const MetricField& field, const std::filesystem::path& path);
MetricField load_metric(const std::filesystem::path& path);

} // namespace aniso
