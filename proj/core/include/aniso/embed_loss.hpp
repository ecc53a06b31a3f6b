#pragma once

#include "aniso/hd_embed.hpp"

#include <span>
#include <vector>

namespace aniso {

struct LossBreakdown {
    double l_dot = 0;
    double l_lap = 0;
    double total = 0; // l_dot + w_lap * l_lap
    double w_lap = 0.1;
};

inline constexpr double kDefaultLaplacianWeight = 0.1;

/// Mean over all 3|F| face corners of the squared difference between predicted and true
/// corner dot products <e_ij, e_ik>.
double dot_product_loss(const EmbeddedMesh& pred, const EmbeddedMesh& truth);

/// Sum over vertices of the squared difference of uniform one-ring Laplacians.
double laplacian_loss(const EmbeddedMesh& pred, const EmbeddedMesh& truth);

/// Same, over an explicit adjacency list (used for graphs that are not meshes).
double laplacian_loss(std::span<const PointE> pred, std::span<const PointE> truth,
                      const std::vector<std::vector<int>>& neighbors);

LossBreakdown total_loss(const EmbeddedMesh& pred, const EmbeddedMesh& truth, double w_lap = kDefaultLaplacianWeight);

/// Ablation variants: mean squared per-vertex coordinate error ("l2") and mean absolute
/// difference of corner-angle cosines ("cos").
double l2_loss(const EmbeddedMesh& pred, const EmbeddedMesh& truth);
double cosine_loss(const EmbeddedMesh& pred, const EmbeddedMesh& truth);

} // namespace aniso
