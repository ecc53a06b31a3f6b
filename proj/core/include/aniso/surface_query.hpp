#pragma once

#include "aniso/mesh_io.hpp"

#include <memory>

namespace aniso {

struct SurfacePoint {
    Vec3 point = Vec3::Zero();
    int face = -1;
    Vec3 bary = Vec3::Zero();
    double distance = 0;
};

/// Closest-point queries against a fixed triangle mesh (R-tree over face boxes).
class SurfaceQuery {
public:
    explicit SurfaceQuery(const SurfaceMesh& mesh);
    ~SurfaceQuery();
    SurfaceQuery(SurfaceQuery&&) noexcept;
    SurfaceQuery& operator=(SurfaceQuery&&) noexcept;

    /// Throws InputError on an empty mesh.
    SurfacePoint closest(const Vec3& p) const;
    const SurfaceMesh& mesh() const { return *mesh_; }

private:
    struct Impl;
    const SurfaceMesh* mesh_;
    std::unique_ptr<Impl> impl_;
};

} // namespace aniso
