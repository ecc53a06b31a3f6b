#pragma once

// Independent recomputations used as test oracles. Nothing here calls the library code
// it is meant to check.

#include "aniso/hd_embed.hpp"
#include "aniso/hd_rvd.hpp"

#include <random>
#include <vector>

namespace oracles {

using aniso::EmbeddedMesh;
using aniso::PointE;

PointE random_point(std::mt19937_64& rng, double scale = 1.0);

/// Triangle area from the Gram determinant.
double gram_area(const PointE& a, const PointE& b, const PointE& c);

/// Plain CVT energy by brute force: every face clipped against every bisector, then
/// integrated with the second-moment identity |T| (|g - x|^2 + (a^2 + b^2 + c^2) / 36).
struct PlainCvt {
    double energy = 0;
    std::vector<double> mass;
    std::vector<PointE> moment; // integral of y over the cell
};
PlainCvt plain_cvt(const EmbeddedMesh& em, const std::vector<PointE>& x);

/// Mean squared corner dot-product difference over all face corners.
double brute_dot(const EmbeddedMesh& pred, const EmbeddedMesh& truth);
/// Sum of squared differences of uniform Laplacians.
double brute_lap(const std::vector<PointE>& pred, const std::vector<PointE>& truth,
                 const std::vector<std::vector<int>>& neighbors);
std::vector<std::vector<int>> one_rings(const aniso::SurfaceMesh& m);

/// Area-uniform samples on the embedded surface, each checked against the RVD cell that
/// contains it versus the nearest site found by linear scan. Near ties are skipped.
struct Agreement {
    int agree = 0, total = 0;
};
Agreement dense_nearest_site(const EmbeddedMesh& em, const aniso::SiteSet& sites, int samples, std::uint64_t seed);

/// Spearman rank correlation with average ranks for ties.
double spearman(const std::vector<double>& x, const std::vector<double>& y);

} // namespace oracles
