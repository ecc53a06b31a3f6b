#include <doctest.h>

#include "fixtures.hpp"

#include "aniso/mesh_io.hpp"

#include <fstream>

using namespace aniso;

TEST_CASE("load square obj") {
    const SurfaceMesh m = load_mesh(fixtures::data_path("square.obj"));
    CHECK(m.num_vertices() == 4);
    CHECK(m.num_faces() == 2);
    CHECK(validate(m).boundary_edges == 4);
}

TEST_CASE("obj index 0 is a parse error with a line number") {
    try {
        (void)load_mesh(fixtures::data_path("zero_index.obj"));
        FAIL("expected ParseError");
    } catch (const ParseError& e) {
        CHECK(e.line() == 4);
    }
}

TEST_CASE("off tetrahedron") {
    const SurfaceMesh m = load_mesh(fixtures::data_path("tetrahedron.off"));
    CHECK(m.num_vertices() == 4);
    CHECK(m.num_faces() == 4);
    CHECK(m.num_edges() == 6);
    const auto d = validate(m);
    CHECK(d.boundary_edges == 0);
    CHECK(d.non_manifold_edges == 0);
    CHECK(d.connected_components == 1);
    CHECK(d.orientation_inconsistent_edges == 0);
    CHECK(d.euler_characteristic == 2);
}

TEST_CASE("polygons are fan triangulated") {
    const SurfaceMesh m = load_mesh(fixtures::data_path("quad.obj"));
    CHECK(m.num_faces() == 2);
    CHECK(m.face(0) == Face{0, 1, 2});
    CHECK(m.face(1) == Face{0, 2, 3});
}

TEST_CASE("unsupported extension and missing file") {
    const auto dir = fixtures::scratch_dir("mesh_io_ext");
    std::ofstream(dir / "m.ply") << "ply\n";
    CHECK_THROWS_AS((void)load_mesh(dir / "m.ply"), InputError);
    CHECK_THROWS_AS((void)load_mesh(dir / "nope.obj"), InputError);
}

TEST_CASE("malformed input never aborts") {
    CHECK_THROWS_AS((void)parse_obj("v 0 0\nf 1 2 3\n"), ParseError);
    CHECK_THROWS_AS((void)parse_obj("v 0 0 0\nv 1 0 0\nv 0 1 0\nf 1 2 9\n"), ParseError);
    CHECK_THROWS_AS((void)parse_obj("v 0 0 0\nv 1 0 0\nv 0 1 0\nf 1 1 2\n"), InputError);
    CHECK_THROWS_AS((void)parse_off("OFF\n3 1 0\n0 0 0\n1 0 0\n"), ParseError);
    CHECK_THROWS_AS((void)parse_off("COFF?\n"), ParseError);
    CHECK_THROWS_AS((void)parse_obj("v nan 0 0\nv 1 0 0\nv 0 1 0\nf 1 2 3\n"), ParseError);
}

TEST_CASE("constructor rejects bad faces") {
    CHECK_THROWS_AS(SurfaceMesh({Vec3::Zero(), Vec3::UnitX()}, {{0, 1, 2}}), InputError);
    CHECK_THROWS_AS(SurfaceMesh({Vec3::Zero(), Vec3::UnitX(), Vec3::UnitY()}, {{0, 0, 2}}), InputError);
}

TEST_CASE("save/load round trip is idempotent") {
    const auto dir = fixtures::scratch_dir("mesh_io_rt");
    const SurfaceMesh src = fixtures::torus(1.0, 0.3, 12, 8);
    for (const char* name : {"t.obj", "t.off"}) {
        save_mesh(src, dir / name);
        const SurfaceMesh a = load_mesh(dir / name);
        save_mesh(a, dir / (std::string("b_") + name));
        const SurfaceMesh b = load_mesh(dir / (std::string("b_") + name));
        CHECK(a.faces() == src.faces());
        CHECK(b.faces() == a.faces());
        for (std::size_t v = 0; v < a.num_vertices(); ++v) {
            CHECK(a.vertex(v) == b.vertex(v));
            CHECK((a.vertex(v) - src.vertex(v)).norm() < 1e-8);
        }
        const auto ext = std::string(name).substr(1);
        CHECK((ext == ".obj" ? format_obj(a) == format_obj(b) : format_off(a) == format_off(b)));
    }
}

TEST_CASE("normalize unit box") {
    SUBCASE("cube 0..2 maps to -1..1") {
        const SurfaceMesh c = fixtures::cube(2, 1.0);
        const SurfaceMesh shifted = apply_transform(c, UnitBoxTransform{Vec3(-1, -1, -1), 1.0}, true);
        const auto n = normalize_unit_box(shifted);
        Vec3 lo = Vec3::Constant(1e9), hi = Vec3::Constant(-1e9);
        for (const auto& p : n.mesh.vertices()) {
            lo = lo.cwiseMin(p);
            hi = hi.cwiseMax(p);
        }
        CHECK((lo - Vec3(-1, -1, -1)).norm() < 1e-15);
        CHECK((hi - Vec3(1, 1, 1)).norm() < 1e-15);
    }
    SUBCASE("sphere radius 3 at (5,0,0)") {
        const SurfaceMesh s = apply_transform(fixtures::icosphere(2, 3.0), UnitBoxTransform{Vec3(-5, 0, 0), 1.0});
        const auto n = normalize_unit_box(s);
        Vec3 lo = Vec3::Constant(1e9), hi = Vec3::Constant(-1e9);
        for (const auto& p : n.mesh.vertices()) {
            lo = lo.cwiseMin(p);
            hi = hi.cwiseMax(p);
        }
        CHECK((lo + hi).norm() < 1e-12);
        CHECK(std::max(hi.maxCoeff(), -lo.minCoeff()) == doctest::Approx(1.0).epsilon(1e-14));
        const SurfaceMesh back = apply_transform(n.mesh, n.transform, true);
        for (std::size_t v = 0; v < s.num_vertices(); ++v)
            CHECK((back.vertex(v) - s.vertex(v)).norm() <= 1e-12 * s.vertex(v).norm());
    }
    SUBCASE("zero extent") {
        const SurfaceMesh p({Vec3(1, 2, 3), Vec3(1, 2, 3), Vec3(1, 2, 3)}, {{0, 1, 2}});
        CHECK_THROWS_AS((void)normalize_unit_box(p), InputError);
        CHECK_THROWS_AS((void)normalize_unit_box(SurfaceMesh{}), InputError);
    }
}

TEST_CASE("vertex normals") {
    SUBCASE("flat grid") {
        const auto n = vertex_normals(fixtures::grid(4, 3));
        for (const auto& v : n.normals) CHECK((v - Vec3::UnitZ()).norm() < 1e-12);
        CHECK(n.isolated.empty());
    }
    SUBCASE("icosahedron symmetry") {
        const SurfaceMesh m = fixtures::icosahedron();
        const auto n = vertex_normals(m);
        for (std::size_t v = 0; v < m.num_vertices(); ++v) {
            CHECK(std::abs(n.normals[v].norm() - 1) < 1e-9);
            CHECK((n.normals[v] - m.vertex(v).normalized()).norm() < 1e-9);
        }
    }
    SUBCASE("isolated vertex") {
        const SurfaceMesh m({Vec3::Zero(), Vec3::UnitX(), Vec3::UnitY(), Vec3(5, 5, 5)}, {{0, 1, 2}});
        const auto n = vertex_normals(m);
        REQUIRE(n.isolated == std::vector<int>{3});
        CHECK(n.normals[3] == Vec3::Zero());
        CHECK(validate(m).isolated_vertices == 1);
    }
}

TEST_CASE("validate") {
    SUBCASE("opposite orientations flagged") {
        const SurfaceMesh m({Vec3::Zero(), Vec3::UnitX(), Vec3::UnitY(), Vec3(1, 1, 0)}, {{0, 1, 2}, {1, 2, 3}});
        CHECK(validate(m).orientation_inconsistent_edges == 1);
        const SurfaceMesh ok({Vec3::Zero(), Vec3::UnitX(), Vec3::UnitY(), Vec3(1, 1, 0)}, {{0, 1, 2}, {2, 1, 3}});
        CHECK(validate(ok).orientation_inconsistent_edges == 0);
    }
    SUBCASE("three faces on one edge") {
        const SurfaceMesh m({Vec3::Zero(), Vec3::UnitX(), Vec3::UnitY(), -Vec3::UnitY(), Vec3::UnitZ()},
                            {{0, 1, 2}, {1, 0, 3}, {0, 1, 4}});
        const auto d = validate(m);
        CHECK(d.non_manifold_edges == 1);
        CHECK_FALSE(d.clean());
    }
    SUBCASE("degenerate and duplicate") {
        const SurfaceMesh m({Vec3::Zero(), Vec3::UnitX(), Vec3(2, 0, 0), Vec3::Zero()}, {{0, 1, 2}});
        const auto d = validate(m);
        CHECK(d.degenerate_faces == 1);
        CHECK(d.duplicate_vertices == 1);
    }
    SUBCASE("counts never negative") {
        for (const auto& m : {fixtures::tetrahedron(), fixtures::grid(2, 2), SurfaceMesh{}}) {
            const auto d = validate(m);
            CHECK(d.non_manifold_edges >= 0);
            CHECK(d.boundary_edges >= 0);
            CHECK(d.degenerate_faces >= 0);
            CHECK(d.duplicate_vertices >= 0);
            CHECK(d.connected_components >= 0);
        }
    }
}

TEST_CASE("euler characteristic of fixtures") {
    CHECK(fixtures::tetrahedron().euler_characteristic() == 2);
    CHECK(fixtures::icosphere(3).euler_characteristic() == 2);
    CHECK(fixtures::torus(1, 0.3, 20, 10).euler_characteristic() == 0);
    CHECK(fixtures::cube(3).euler_characteristic() == 2);
    CHECK(fixtures::grid(3, 3).euler_characteristic() == 1);
}

TEST_CASE("adjacency") {
    const SurfaceMesh m = fixtures::icosahedron();
    for (std::size_t v = 0; v < m.num_vertices(); ++v) {
        CHECK(m.vertex_neighbors(static_cast<int>(v)).size() == 5);
        CHECK(m.vertex_faces(static_cast<int>(v)).size() == 5);
    }
    for (std::size_t f = 0; f < m.num_faces(); ++f)
        for (int l = 0; l < 3; ++l) {
            const int g = m.face_neighbor(static_cast<int>(f), l);
            REQUIRE(g >= 0);
            CHECK(m.face_edge(static_cast<int>(f), l) >= 0);
        }
    CHECK(m.num_components() == 1);
    CHECK(m.total_area() == doctest::Approx(20 * m.face_area(0)));
}
