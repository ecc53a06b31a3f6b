#include "aniso/surface_query.hpp"

#include "aniso/geometry.hpp"

#include <boost/geometry.hpp>
#include <boost/geometry/index/rtree.hpp>

#include <limits>

namespace bg = boost::geometry;
namespace bgi = boost::geometry::index;

namespace aniso {

using BPoint = bg::model::point<double, 3, bg::cs::cartesian>;
using BBox = bg::model::box<BPoint>;
using Entry = std::pair<BBox, int>;

struct SurfaceQuery::Impl {
    bgi::rtree<Entry, bgi::rstar<16>> tree;
};

SurfaceQuery::SurfaceQuery(const SurfaceMesh& mesh) : mesh_(&mesh), impl_(std::make_unique<Impl>()) {
    std::vector<Entry> entries;
    entries.reserve(mesh.num_faces());
    for (std::size_t f = 0; f < mesh.num_faces(); ++f) {
        const Face& t = mesh.face(static_cast<int>(f));
        Vec3 lo = mesh.vertex(t[0]), hi = lo;
        for (int k = 1; k < 3; ++k) {
            lo = lo.cwiseMin(mesh.vertex(t[k]));
            hi = hi.cwiseMax(mesh.vertex(t[k]));
        }
        entries.emplace_back(BBox(BPoint(lo.x(), lo.y(), lo.z()), BPoint(hi.x(), hi.y(), hi.z())), static_cast<int>(f));
    }
    impl_->tree = bgi::rtree<Entry, bgi::rstar<16>>(entries.begin(), entries.end());
}

SurfaceQuery::~SurfaceQuery() = default;
SurfaceQuery::SurfaceQuery(SurfaceQuery&&) noexcept = default;
SurfaceQuery& SurfaceQuery::operator=(SurfaceQuery&&) noexcept = default;

SurfacePoint SurfaceQuery::closest(const Vec3& p) const {
    if (impl_->tree.empty()) throw InputError("closest-point query on an empty mesh");
    const BPoint q(p.x(), p.y(), p.z());
    SurfacePoint best;
    best.distance = std::numeric_limits<double>::infinity();
    std::array<double, 3> w;
    // Boxes come out in increasing box distance; stop once a box is farther than the best hit.
    for (auto it = impl_->tree.qbegin(bgi::nearest(q, static_cast<unsigned>(impl_->tree.size()))); it != impl_->tree.qend(); ++it) {
        if (bg::distance(q, it->first) > best.distance) break;
        const Face& t = mesh_->face(it->second);
        const Vec3 c = closest_point_on_triangle(p, mesh_->vertex(t[0]), mesh_->vertex(t[1]), mesh_->vertex(t[2]), w);
        const double d = (c - p).norm();
        if (d < best.distance) {
            best.distance = d;
            best.point = c;
            best.face = it->second;
            best.bary = Vec3(w[0], w[1], w[2]);
        }
    }
    return best;
}

} // namespace aniso
