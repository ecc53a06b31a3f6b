#pragma once

#include "aniso/hd_rvd.hpp"

#include <filesystem>
#include <utility>
#include <vector>

namespace aniso {

inline constexpr double kDefaultNormalEmphasis = 7.0;

/// Block-diagonal metric: (s - 1) N N^t + I on the first three channels, identity elsewhere.
struct NormalMetric {
    MatE matrix = MatE::Identity();
    Mat3 block = Mat3::Identity();
    Vec3 normal = Vec3::UnitZ();
    double s = 1.0;

    /// matrix * d without forming the full product.
    PointE apply(const PointE& d) const {
        PointE u = d;
        u.head<3>() = block * d.head<3>();
        return u;
    }
};

/// Throws InputError for a non-unit normal, s < 1, or dim != kEmbedDim.
NormalMetric normal_metric(const Vec3& face_normal, double s, int dim = kEmbedDim);

using Corners = std::array<PointE, 3>;

/// |T| * F with F = (1/6)(sum |U_i|^2 + sum_{i<j} U_i.U_j), U_i = M (C_i - x0), |T| Euclidean.
double facet_energy(const Corners& corners, const PointE& site, const NormalMetric& metric);
double facet_energy(const RvdFacet& facet, const PointE& site, const NormalMetric& metric);

struct FacetGradient {
    PointE d_site = PointE::Zero();
    std::array<PointE, 3> d_corner{PointE::Zero(), PointE::Zero(), PointE::Zero()};
};

/// d_site is assembled as -(sum of d_corner). Facets with zero area give zero.
FacetGradient facet_gradient(const Corners& corners, const PointE& site, const NormalMetric& metric);

/// Sparse dC/dx: one 8x8 block per site the corner depends on.
struct CornerJacobian {
    std::vector<std::pair<int, MatE>> blocks;

    MatE block(int site) const;
};

CornerJacobian clip_vertex_jacobian(const ClipVertex& vertex, const SiteSet& sites, const EmbeddedMesh& embedded);

/// Adds g^t dC/dx into grad (one row per site), using the rank-one structure of each pass.
void accumulate_corner_gradient(const ClipVertex& vertex, const PointE& g, const std::vector<PointE>& sites,
                                const EmbeddedMesh& embedded, std::vector<PointE>& grad);

struct EnergyReport {
    double energy = 0;
    std::vector<PointE> gradient;
    std::vector<double> mass;
    std::size_t facets = 0;
    double grad_norm = 0;
};

/// Per-face metrics from the original 3D normals (identity where s == 1 or the face is degenerate).
std::vector<NormalMetric> face_metrics(const EmbeddedMesh& embedded, double s);

/// Energy and gradient on a fixed diagram. With replay, corners are recomputed from their
/// provenance at `sites` (frozen combinatorics); otherwise stored positions are used.
EnergyReport energy_on_rvd(const RestrictedVoronoiDiagram& rvd, const EmbeddedMesh& embedded,
                           const std::vector<PointE>& sites, const std::vector<NormalMetric>& metrics,
                           bool replay = false);

/// Fresh diagram at `sites`, then energy and gradient.
EnergyReport total_energy_grad(const EmbeddedMesh& embedded, const SiteSet& sites, double s);

struct CvtOptions {
    double s = kDefaultNormalEmphasis;
    bool normal_metric = true; // false runs the plain CVT ablation (s = 1)
    int max_iters = 500;
    double grad_tol = 1e-3;
    int memory = 7;
    int max_line_search = 30;

    double effective_s() const { return normal_metric ? s : 1.0; }
};

struct TraceRow {
    int iter = 0;
    double energy = 0;
    double grad_norm = 0;
    double step = 0;
};

struct CvtResult {
    SiteSet sites; // anchored onto their own cells
    std::vector<TraceRow> trace;
    bool converged = false;
    bool line_search_failed = false;
    int iterations = 0;
    double energy = 0;
    double initial_grad_norm = 0;
    double final_grad_norm = 0;
};

CvtResult optimize(const EmbeddedMesh& embedded, const SiteSet& sites0, const CvtOptions& opts = {});

/// CSV with header `iter,E,grad_norm,step`.
void save_trace_csv(const std::vector<TraceRow>& trace, const std::filesystem::path& path);

} // namespace aniso
