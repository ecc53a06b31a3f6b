#pragma once

#include "aniso/mesh_io.hpp"

#include <filesystem>
#include <random>
#include <string>

namespace fixtures {

using aniso::SurfaceMesh;

/// Regular tetrahedron inscribed in the cube [-1, 1]^3, outward oriented.
SurfaceMesh tetrahedron();
/// Unit-circumradius icosahedron.
SurfaceMesh icosahedron();
/// Icosahedron subdivided `levels` times and projected to the sphere of `radius`.
/// levels = 4 gives 2562 vertices.
SurfaceMesh icosphere(int levels, double radius = 1.0);
/// Torus with major radius R and minor radius r, nu x nv quads split into triangles.
SurfaceMesh torus(double R, double r, int nu, int nv);
/// Axis-aligned cube [-h, h]^3 with each face split into n x n quads.
SurfaceMesh cube(int n, double h = 1.0);
/// Planar grid over [0, w] x [0, h] (z = 0), nx x ny quads.
SurfaceMesh grid(int nx, int ny, double w = 1.0, double h = 1.0);

/// Random SPD matrix with eigenvalues log-uniform in [1, cond] and a random frame.
aniso::Mat3 random_spd(std::mt19937_64& rng, double cond = 1e3);
/// Uniformly random unit vector.
aniso::Vec3 random_unit(std::mt19937_64& rng);

/// Fresh empty directory under the system temp dir.
std::filesystem::path scratch_dir(const std::string& name);

std::filesystem::path data_path(const std::string& file);

} // namespace fixtures
