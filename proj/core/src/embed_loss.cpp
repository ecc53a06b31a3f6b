#include "aniso/embed_loss.hpp"

#include <fmt/format.h>

#include <cmath>

namespace aniso {
namespace {

void require_compatible(const EmbeddedMesh& pred, const EmbeddedMesh& truth) {
    if (pred.points.size() != truth.points.size() || pred.surface.faces() != truth.surface.faces())
        throw InputError("prediction and ground truth have different connectivity");
}

double corner_dot(std::span<const PointE> p, int i, int j, int k) { return (p[j] - p[i]).dot(p[k] - p[i]); }

} // namespace

double dot_product_loss(const EmbeddedMesh& pred, const EmbeddedMesh& truth) {
    require_compatible(pred, truth);
    const auto& faces = truth.surface.faces();
    if (faces.empty()) return 0;
    double sum = 0;
    for (const Face& f : faces) {
        for (int c = 0; c < 3; ++c) {
            const int i = f[c], j = f[(c + 1) % 3], k = f[(c + 2) % 3];
            const double d = corner_dot(pred.points, i, j, k) - corner_dot(truth.points, i, j, k);
            sum += d * d;
        }
    }
    return sum / (3.0 * static_cast<double>(faces.size()));
}

double laplacian_loss(std::span<const PointE> pred, std::span<const PointE> truth,
                      const std::vector<std::vector<int>>& neighbors) {
    if (pred.size() != truth.size() || neighbors.size() != pred.size())
        throw InputError("laplacian_loss: size mismatch");
    double sum = 0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        const auto& nb = neighbors[i];
        if (nb.empty()) throw InputError(fmt::format("vertex {} has an empty one-ring", i));
        PointE lp = PointE::Zero(), lt = PointE::Zero();
        for (int j : nb) {
            lp += pred[i] - pred[j];
            lt += truth[i] - truth[j];
        }
        sum += ((lp - lt) / static_cast<double>(nb.size())).squaredNorm();
    }
    return sum;
}

double laplacian_loss(const EmbeddedMesh& pred, const EmbeddedMesh& truth) {
    require_compatible(pred, truth);
    std::vector<std::vector<int>> nb(truth.points.size());
    for (std::size_t v = 0; v < nb.size(); ++v) {
        auto span = truth.surface.vertex_neighbors(static_cast<int>(v));
        nb[v].assign(span.begin(), span.end());
    }
    return laplacian_loss(pred.points, truth.points, nb);
}

LossBreakdown total_loss(const EmbeddedMesh& pred, const EmbeddedMesh& truth, double w_lap) {
    if (!(w_lap >= 0)) throw InputError("w_lap must be >= 0");
    LossBreakdown b;
    b.w_lap = w_lap;
    b.l_dot = dot_product_loss(pred, truth);
    b.l_lap = laplacian_loss(pred, truth);
    b.total = b.l_dot + w_lap * b.l_lap;
    if (!std::isfinite(b.total)) throw NumericalError("loss is not finite");
    return b;
}

double l2_loss(const EmbeddedMesh& pred, const EmbeddedMesh& truth) {
    require_compatible(pred, truth);
    if (pred.points.empty()) return 0;
    double sum = 0;
    for (std::size_t v = 0; v < pred.points.size(); ++v) sum += (pred.points[v] - truth.points[v]).squaredNorm();
    return sum / static_cast<double>(pred.points.size());
}

double cosine_loss(const EmbeddedMesh& pred, const EmbeddedMesh& truth) {
    require_compatible(pred, truth);
    const auto& faces = truth.surface.faces();
    if (faces.empty()) return 0;
    auto cosine = [](std::span<const PointE> p, int i, int j, int k) {
        const PointE a = p[j] - p[i], b = p[k] - p[i];
        const double n = a.norm() * b.norm();
        return n > 0 ? a.dot(b) / n : 1.0;
    };
    double sum = 0;
    for (const Face& f : faces)
        for (int c = 0; c < 3; ++c) {
            const int i = f[c], j = f[(c + 1) % 3], k = f[(c + 2) % 3];
            sum += std::abs(cosine(pred.points, i, j, k) - cosine(truth.points, i, j, k));
        }
    return sum / (3.0 * static_cast<double>(faces.size()));
}

} // namespace aniso
