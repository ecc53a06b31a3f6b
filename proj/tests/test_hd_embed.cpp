#include <doctest.h>

#include "fixtures.hpp"

#include "aniso/hd_embed.hpp"

#include <algorithm>
#include <fstream>

using namespace aniso;

namespace {

// 4x stretch along x: M = diag(16, 1, 1) everywhere.
MetricField strip_field(std::size_t n) {
    MetricField f = MetricField::identity(n);
    for (auto& t : f.tensors) t(0, 0) = 16;
    for (auto& r : f.ratio) r = 4;
    return f;
}

} // namespace

TEST_CASE("fourth vertex") {
    const Vec3 o = Vec3::Zero();
    CHECK((fourth_vertex(o, Vec3::UnitX(), Vec3::UnitY()) - Vec3::UnitZ()).norm() < 1e-15);
    const Vec3 big = fourth_vertex(o, 4 * Vec3::UnitX(), 4 * Vec3::UnitY());
    CHECK(big.norm() == doctest::Approx(4.0));
    const Vec3 vi(1, 2, 3), vj(2, 2.5, 3.1), vk(0.5, 3, 2);
    const Vec3 off = fourth_vertex(vi, vj, vk) - vi;
    CHECK(off.squaredNorm() == doctest::Approx((vj - vi).cross(vk - vi).norm()));
    CHECK_THROWS_AS((void)fourth_vertex(o, Vec3::UnitX(), 2 * Vec3::UnitX()), InputError);
}

TEST_CASE("triangle basis invariants") {
    const SurfaceMesh m = fixtures::torus(1, 0.3, 16, 8);
    const auto field = curvature_metric(m);
    for (int f = 0; f < static_cast<int>(m.num_faces()); ++f) {
        const auto b = triangle_basis(m, f, face_metric(field, m, f));
        const Vec3 l = b.source.col(2);
        CHECK(std::abs(l.dot(b.source.col(0))) < 1e-10);
        CHECK(std::abs(l.dot(b.source.col(1))) < 1e-10);
        CHECK(b.source.determinant() > 0);
        CHECK((b.jacobian.transpose() * b.jacobian - face_metric(field, m, f)).norm() < 1e-10 * b.jacobian.squaredNorm());
    }
}

TEST_CASE("face jacobian") {
    CHECK((face_jacobian(Mat3::Identity()) - Mat3::Identity()).norm() < 1e-15);
    CHECK((face_jacobian(Vec3(1, 100, 1).asDiagonal()) - Mat3(Vec3(1, 10, 1).asDiagonal())).norm() < 1e-13);
    std::mt19937_64 rng(3);
    for (int k = 0; k < 200; ++k) {
        const Mat3 M = fixtures::random_spd(rng);
        const Mat3 J = face_jacobian(M);
        CHECK((J.transpose() * J - M).norm() < 1e-10 * M.norm());
    }
    Mat3 bad = Mat3::Identity();
    bad(1, 1) = -2;
    CHECK_THROWS_AS((void)face_jacobian(bad), InputError);
}

TEST_CASE("extra channel lift reproduces the metric") {
    std::mt19937_64 rng(9);
    for (int k = 0; k < 100; ++k) {
        const Mat3 M = fixtures::random_spd(rng) + Mat3::Identity();
        const Mat3 K = extra_channel_jacobian(M);
        CHECK((Mat3::Identity() + K.transpose() * K - M).norm() < 1e-10 * M.norm());
    }
    CHECK(extra_channel_jacobian(Mat3::Identity()).norm() == 0);
}

TEST_CASE("identity metric gives zero extra channels") {
    const SurfaceMesh m = fixtures::icosphere(2);
    const MetricField id = MetricField::identity(m.num_vertices());
    const EmbeddedMesh e = solve_embedding(m, id);
    for (const auto& p : e.points) CHECK(p.tail<kExtraChannels>().cwiseAbs().maxCoeff() < 1e-12);
    const auto res = embed_residual(e, m, id);
    CHECK(res.max < 1e-9);
    const auto d = edge_length_distortion(e, id);
    for (double r : d.ratios) CHECK(std::abs(r - 1) < 1e-9);
}

TEST_CASE("first three channels are copied bitwise") {
    const SurfaceMesh m = fixtures::torus(1, 0.3, 24, 12);
    const EmbeddedMesh e = solve_embedding(m, curvature_metric(m));
    for (std::size_t v = 0; v < m.num_vertices(); ++v) {
        CHECK(e.points[v][0] == m.vertex(static_cast<int>(v))[0]);
        CHECK(e.points[v][1] == m.vertex(static_cast<int>(v))[1]);
        CHECK(e.points[v][2] == m.vertex(static_cast<int>(v))[2]);
    }
    CHECK_NOTHROW(check_first_channels(e, m));
}

TEST_CASE("strip with 4x stretch") {
    const SurfaceMesh m = fixtures::grid(20, 4, 1.0, 0.2);
    const MetricField f = strip_field(m.num_vertices());
    const EmbeddedMesh e = solve_embedding(m, f);
    const auto d = edge_length_distortion(e, f);
    CHECK(d.rms_error < 0.02);
    const auto zero = edge_length_distortion(trivial_embedding(m), f);
    CHECK(std::abs(zero.median - 1) > std::abs(d.median - 1));
}

TEST_CASE("sphere residual") {
    const SurfaceMesh m = fixtures::icosphere(3);
    const auto f = curvature_metric(m);
    const auto res = embed_residual(solve_embedding(m, f), m, f);
    CHECK(res.median_relative < 0.1);
}

TEST_CASE("anisotropic distortion and optimality") {
    const SurfaceMesh m = fixtures::torus(1, 1.0 / 3.0, 48, 16);
    const auto f = curvature_metric(m);
    const EmbeddedMesh e = solve_embedding(m, f);

    const auto d = edge_length_distortion(e, f);
    CHECK(d.median >= 0.8);
    CHECK(d.median <= 1.25);
    const auto d0 = edge_length_distortion(trivial_embedding(m), f);
    CHECK(std::abs(d0.median - 1) > std::abs(d.median - 1));

    const double base = embed_residual(e, m, f).objective;
    std::mt19937_64 rng(21);
    std::uniform_int_distribution<int> pick_v(0, static_cast<int>(m.num_vertices()) - 1);
    std::uniform_int_distribution<int> pick_c(3, kEmbedDim - 1);
    for (int k = 0; k < 20; ++k) {
        const int v = pick_v(rng), c = pick_c(rng);
        for (double delta : {1e-3, -1e-3}) {
            EmbeddedMesh p = e;
            p.points[v][c] += delta;
            CHECK(embed_residual(p, m, f).objective >= base);
        }
    }

    EmbeddedMesh noisy = e;
    std::normal_distribution<double> n(0, 0.01);
    for (auto& p : noisy.points)
        for (int c = 3; c < kEmbedDim; ++c) p[c] += n(rng);
    CHECK(embed_residual(noisy, m, f).objective > base);
}

TEST_CASE("gauge invariance") {
    const SurfaceMesh m = fixtures::torus(1, 0.3, 24, 12);
    const auto f = curvature_metric(m);
    const EmbeddedMesh a = solve_embedding(m, f);
    const EmbeddedMesh b = solve_embedding(m, f, EmbedOptions{{57}});
    const double oa = embed_residual(a, m, f).objective, ob = embed_residual(b, m, f).objective;
    CHECK(std::abs(oa - ob) <= 1e-8 * std::max(oa, 1e-300));
    const PointE shift = b.points[0] - a.points[0];
    for (std::size_t v = 0; v < m.num_vertices(); ++v) CHECK((b.points[v] - a.points[v] - shift).norm() < 1e-8);
    CHECK_THROWS_AS((void)solve_embedding(m, f, EmbedOptions{{-1}}), InputError);
}

TEST_CASE("residual rejects mismatched connectivity") {
    const SurfaceMesh m = fixtures::icosahedron();
    const EmbeddedMesh e = trivial_embedding(m);
    const SurfaceMesh other = fixtures::icosphere(1);
    CHECK_THROWS_AS((void)embed_residual(e, other, MetricField::identity(other.num_vertices())), InputError);
    CHECK_THROWS_AS(check_first_channels(e, other), InputError);
}

TEST_CASE("zero metric length edge") {
    const SurfaceMesh m({Vec3::Zero(), Vec3::UnitX(), Vec3::UnitY()}, {{0, 1, 2}});
    MetricField f = MetricField::identity(3);
    EmbeddedMesh e = trivial_embedding(m);
    f.tensors[0] = f.tensors[1] = Mat3::Zero();
    CHECK_THROWS_AS((void)edge_length_distortion(e, f), InputError);
}

TEST_CASE("hde format") {
    const auto dir = fixtures::scratch_dir("hde");
    const SurfaceMesh m = fixtures::torus(1, 0.3, 12, 8);
    EmbeddedMesh e = solve_embedding(m, curvature_metric(m));
    e.provenance = EmbedProvenance::Neural;
    save_hde(e, dir / "e.hde");
    const EmbeddedMesh back = load_hde(dir / "e.hde");
    CHECK(back.provenance == EmbedProvenance::Neural);
    CHECK(back.surface.faces() == m.faces());
    for (std::size_t v = 0; v < m.num_vertices(); ++v) CHECK(back.points[v] == e.points[v]);
    CHECK_NOTHROW(check_first_channels(back, m));
    CHECK(format_hde(back) == format_hde(e));

    CHECK_THROWS_AS((void)parse_hde("HDE2\n"), ParseError);
    CHECK_THROWS_AS((void)parse_hde("HDE1\n3 6 deterministic\n"), ParseError);
    CHECK_THROWS_AS((void)parse_hde("HDE1\n3 8 magic\n"), ParseError);
    CHECK_THROWS_AS((void)parse_hde("HDE1\n1 8 neural\n0 0 0 0 0 0 0\n"), ParseError);
    CHECK_THROWS_AS((void)load_hde(dir / "missing.hde"), InputError);
    CHECK(parse_provenance("deterministic") == EmbedProvenance::Deterministic);
    CHECK(to_string(EmbedProvenance::Neural) == "neural");
}

TEST_CASE("embedded areas") {
    const SurfaceMesh m = fixtures::grid(4, 1, 1.0, 0.25);
    const EmbeddedMesh e = solve_embedding(m, strip_field(m.num_vertices()));
    CHECK(e.total_area() == doctest::Approx(4 * 0.25).epsilon(1e-9));
    CHECK(trivial_embedding(m).total_area() == doctest::Approx(m.total_area()));
}
