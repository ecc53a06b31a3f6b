#include <doctest.h>

#include "fixtures.hpp"
#include "oracles.hpp"

#include "aniso/hd_rvd.hpp"
#include "aniso/parallel.hpp"

#include <Eigen/QR>

#include <cmath>
#include <fstream>
#include <set>

using namespace aniso;
using oracles::gram_area;
using oracles::random_point;

namespace {

using Polygon8 = std::vector<PointE>;

ClipPolygon free_polygon(const Polygon8& pts) {
    ClipPolygon p;
    p.owner = 0;
    for (std::size_t k = 0; k < pts.size(); ++k) {
        ClipVertex v;
        v.position = pts[k];
        p.vertices.push_back(v);
        p.edge_support.push_back(-static_cast<int>(k) - 1);
    }
    return p;
}

SiteSet sites_at(const std::vector<PointE>& pts) {
    SiteSet s;
    s.positions = pts;
    s.anchors.assign(pts.size(), SiteAnchor{});
    return s;
}

} // namespace

TEST_CASE("init_sites validation and determinism") {
    const EmbeddedMesh em = trivial_embedding(fixtures::icosphere(2));
    CHECK_THROWS_AS((void)init_sites(em, 3, 1), InputError);
    CHECK_THROWS_AS((void)init_sites(em, static_cast<int>(kMaxSites) + 1, 1), InputError);
    const SiteSet a = init_sites(em, 100, 42), b = init_sites(em, 100, 42);
    REQUIRE(a.size() == 100);
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(a.positions[i] == b.positions[i]);
        CHECK(a.anchors[i].face == b.anchors[i].face);
        CHECK(a.positions[i].allFinite());
        CHECK(a.anchors[i].bary.minCoeff() >= 0);
        CHECK(std::abs(a.anchors[i].bary.sum() - 1) < 1e-9);
        CHECK((anchor_point(em, a.anchors[i]) - a.positions[i]).norm() < 1e-12);
    }
    CHECK(init_sites(em, 100, 43).positions[0] != a.positions[0]);
}

TEST_CASE("init_sites is area-proportional on a tetrahedron") {
    const EmbeddedMesh em = trivial_embedding(fixtures::tetrahedron());
    const int reps = 100'000;
    std::array<long, 4> counts{};
    for (int r = 0; r < reps; ++r) {
        const SiteSet s = init_sites(em, 4, static_cast<std::uint64_t>(r));
        for (const auto& a : s.anchors) ++counts[a.face];
    }
    const double n = 4.0 * reps, p = 0.25;
    const double sigma = std::sqrt(n * p * (1 - p));
    for (long c : counts) CHECK(std::abs(static_cast<double>(c) - n * p) < 3 * sigma);
}

TEST_CASE("cut_segment") {
    std::mt19937_64 rng(1);
    const PointE xi = random_point(rng), xj = random_point(rng);
    const SegmentCut c = cut_segment(xi, xj, xi, xj);
    CHECK((c.point - 0.5 * (xi + xj)).norm() < 1e-14);
    CHECK(c.lambda_a == doctest::Approx(0.5));
    CHECK(c.lambda_b == doctest::Approx(0.5));
    for (int k = 0; k < 100;) {
        const PointE a = random_point(rng), b = random_point(rng), yi = random_point(rng), yj = random_point(rng);
        const PointE n = yj - yi;
        const double c = 0.5 * (yj.squaredNorm() - yi.squaredNorm());
        if ((n.dot(a) - c) * (n.dot(b) - c) >= 0) continue; // segment must cross the bisector
        ++k;
        const SegmentCut cut = cut_segment(a, b, yi, yj);
        CHECK(std::abs(cut.lambda_a + cut.lambda_b - 1) < 1e-12);
        CHECK((cut.point - (cut.lambda_a * a + cut.lambda_b * b)).norm() < 1e-10 * (1 + cut.point.norm()));
        CHECK(std::abs((cut.point - yi).norm() - (cut.point - yj).norm()) < 1e-9 * (1 + cut.point.norm()));
    }
    CHECK_THROWS_AS((void)cut_segment(xi, xj, xi, xi), InputError);
}

TEST_CASE("clip_by_bisector") {
    std::mt19937_64 rng(2);
    SUBCASE("polygon on the near side is unchanged") {
        PointE xi = PointE::Zero(), xj = PointE::Zero();
        xj[0] = 10;
        const ClipPolygon p = free_polygon({PointE::Zero(), PointE::Unit(1), PointE::Unit(2)});
        const ClipPolygon q = clip_by_bisector(p, xi, xj, 0, 1);
        REQUIRE(q.vertices.size() == 3);
        for (int k = 0; k < 3; ++k) {
            CHECK(q.vertices[k].kind == CornerKind::C1);
            CHECK(q.vertices[k].position == p.vertices[k].position);
        }
        CHECK(q.edge_support == p.edge_support);
    }
    SUBCASE("half-space membership") {
        for (int t = 0; t < 1000; ++t) {
            const ClipPolygon p = free_polygon({random_point(rng), random_point(rng), random_point(rng)});
            const PointE xi = random_point(rng), xj = random_point(rng);
            const ClipPolygon q = clip_by_bisector(p, xi, xj, 0, 1);
            for (const auto& v : q.vertices) {
                CHECK((v.position - xi).norm() <= (v.position - xj).norm() + 1e-9);
                if (v.kind == CornerKind::C2) {
                    CHECK(std::abs(v.lambda[0] + v.lambda[1] - 1) < 1e-12);
                    CHECK(v.lambda[0] >= 0);
                    CHECK(v.lambda[1] >= 0);
                }
            }
            CHECK(q.edge_support.size() == q.vertices.size());
        }
    }
    SUBCASE("errors") {
        const ClipPolygon p = free_polygon({PointE::Zero(), PointE::Unit(1), PointE::Unit(2)});
        CHECK_THROWS_AS((void)clip_by_bisector(p, PointE::Zero(), PointE::Zero(), 0, 1), InputError);
        ClipPolygon bad = p;
        bad.edge_support.pop_back();
        CHECK_THROWS_AS((void)clip_by_bisector(bad, PointE::Zero(), PointE::Unit(0), 0, 1), InputError);
    }
}

TEST_CASE("single site covers everything") {
    const EmbeddedMesh em = trivial_embedding(fixtures::icosahedron());
    const auto rvd = compute_rvd(em, sites_at({PointE::Unit(3)}));
    CHECK(rvd.mass[0] == doctest::Approx(em.total_area()).epsilon(1e-12));
    CHECK(rvd.cells.size() == em.surface.num_faces());
    for (const auto& f : rvd.facets)
        for (const auto& c : f.corners) CHECK(c.kind == CornerKind::C1);
}

TEST_CASE("mirror-symmetric square") {
    const EmbeddedMesh em = trivial_embedding(fixtures::grid(3, 3));
    const auto rvd = compute_rvd(em, sites_at({lift(Vec3(0.25, 0.5, 0)), lift(Vec3(0.75, 0.5, 0))}));
    CHECK(std::abs(rvd.mass[0] - rvd.mass[1]) < 1e-9);
    CHECK(rvd.total_mass() == doctest::Approx(1.0).epsilon(1e-12));
    int cuts = 0;
    for (const auto& f : rvd.facets)
        for (const auto& c : f.corners) {
            CHECK(c.kind != CornerKind::C3);
            if (c.kind == CornerKind::C2) {
                ++cuts;
                CHECK(std::abs(c.lambda[0] - 0.5) < 1e-12);
                CHECK(std::abs(c.lambda[1] - 0.5) < 1e-12);
            }
        }
    CHECK(cuts > 0);
}

TEST_CASE("rvd invariants on embedded fixtures") {
    struct Case {
        const char* name;
        EmbeddedMesh em;
        int n;
    };
    const SurfaceMesh torus = fixtures::torus(1, 1.0 / 3.0, 32, 12);
    const SurfaceMesh sphere = fixtures::icosphere(2);
    std::vector<Case> cases;
    cases.push_back({"torus", solve_embedding(torus, curvature_metric(torus)), 60});
    cases.push_back({"sphere", solve_embedding(sphere, curvature_metric(sphere)), 40});
    cases.push_back({"cube", trivial_embedding(fixtures::cube(3)), 30});
    for (const auto& c : cases) {
        CAPTURE(c.name);
        const SiteSet sites = init_sites(c.em, c.n, 5);
        const auto rvd = compute_rvd(c.em, sites);
        CHECK(std::abs(rvd.total_mass() - c.em.total_area()) <= 1e-6 * c.em.total_area());

        double worst_replay = 0, worst_local = 0, worst_c2 = 0, worst_swap = 0, worst_gram = 0;
        for (const auto& f : rvd.facets) {
            CHECK(f.area >= 0);
            worst_gram = std::max(worst_gram, std::abs(f.area - gram_area(f.corners[0].position, f.corners[1].position,
                                                                            f.corners[2].position)) /
                                                  f.area);
            for (const auto& v : f.corners) {
                const double own = (v.position - sites.positions[f.site]).norm();
                for (std::size_t j = 0; j < sites.size(); ++j)
                    worst_local = std::max(worst_local, own - (v.position - sites.positions[j]).norm());
                worst_replay =
                    std::max(worst_replay, (replay_vertex(v, sites.positions, c.em) - v.position).norm());
                if (v.kind == CornerKind::C2) {
                    CHECK(std::abs(v.lambda[0] + v.lambda[1] - 1) < 1e-12);
                    CHECK(v.lambda[0] >= 0);
                    CHECK(v.lambda[1] >= 0);
                    const PointE re = v.lambda[0] * c.em.point(v.edge_vertices[0]) +
                                      v.lambda[1] * c.em.point(v.edge_vertices[1]);
                    worst_c2 = std::max(worst_c2, (re - v.position).norm());
                }
                if (v.kind == CornerKind::C3) {
                    ClipVertex swapped = v;
                    std::swap(swapped.bisector[0], swapped.bisector[1]);
                    worst_swap = std::max(worst_swap,
                                          (replay_vertex(swapped, sites.positions, c.em) - v.position).norm());
                }
            }
        }
        CHECK(worst_local < 1e-7);
        CHECK(worst_replay < 1e-10);
        CHECK(worst_c2 < 1e-10);
        CHECK(worst_swap < 1e-9);
        CHECK(worst_gram < 1e-9);

        std::set<std::pair<int, int>> seen;
        for (const auto& f : rvd.facets) seen.insert({f.face, f.site});
        for (std::size_t k = 1; k < rvd.cells.size(); ++k) {
            const auto& a = rvd.cells[k - 1];
            const auto& b = rvd.cells[k];
            CHECK(std::make_pair(a.face, a.site) < std::make_pair(b.face, b.site));
        }
    }
}

TEST_CASE("dense nearest-site sampling on an embedded sphere") {
    const SurfaceMesh m = fixtures::icosphere(3);
    const EmbeddedMesh em = solve_embedding(m, curvature_metric(m));
    const auto r = oracles::dense_nearest_site(em, init_sites(em, 50, 7), 100'000, 99);
    CHECK(r.total > 99'000);
    CHECK(static_cast<double>(r.agree) >= 0.999 * r.total);
}

TEST_CASE("rvd is independent of the worker count") {
    const EmbeddedMesh em = trivial_embedding(fixtures::torus(1, 0.3, 24, 10));
    const SiteSet s = init_sites(em, 40, 3);
    const int old = worker_count();
    set_worker_count(1);
    const auto a = compute_rvd(em, s);
    set_worker_count(3);
    const auto b = compute_rvd(em, s);
    set_worker_count(old);
    REQUIRE(a.facets.size() == b.facets.size());
    for (std::size_t k = 0; k < a.facets.size(); ++k)
        for (int c = 0; c < 3; ++c) CHECK(a.facets[k].corners[c].position == b.facets[k].corners[c].position);
}

TEST_CASE("heron area") {
    PointE a = PointE::Zero(), b = PointE::Zero(), c = PointE::Zero();
    b[0] = 3;
    c[1] = 4;
    CHECK(facet_area(a, b, c) == doctest::Approx(6).epsilon(1e-15));
    CHECK(facet_area(a, b, 2 * b) == 0);
    CHECK(heron_area(1, 2, 3) == 0);
    CHECK(heron_area(1, 1, 1) == doctest::Approx(std::sqrt(3.0) / 4));
    std::mt19937_64 rng(4);
    for (int t = 0; t < 10'000; ++t) {
        const PointE p = random_point(rng), q = random_point(rng), r = random_point(rng);
        const double g = gram_area(p, q, r);
        CHECK(std::abs(facet_area(p, q, r) - g) <= 1e-12 * g);
    }
    // needle: Kahan ordering keeps it accurate
    PointE n0 = PointE::Zero(), n1 = PointE::Zero(), n2 = PointE::Zero();
    n1[0] = 1;
    n2[0] = 0.5;
    n2[1] = 1e-9;
    CHECK(facet_area(n0, n1, n2) == doctest::Approx(0.5e-9).epsilon(1e-6));
}

TEST_CASE("compute_rvd errors") {
    const EmbeddedMesh em = trivial_embedding(fixtures::icosahedron());
    CHECK_THROWS_AS((void)compute_rvd(em, SiteSet{}), InputError);
    CHECK_THROWS_AS((void)compute_rvd(em, sites_at({PointE::Zero(), PointE::Zero()})), InputError);
    PointE bad = PointE::Zero();
    bad[2] = std::nan("");
    CHECK_THROWS_AS((void)compute_rvd(em, sites_at({PointE::Unit(0), bad})), InputError);
}

TEST_CASE("anchors after re-anchoring stay on the surface") {
    const SurfaceMesh m = fixtures::torus(1, 0.3, 20, 8);
    const EmbeddedMesh em = solve_embedding(m, curvature_metric(m));
    SiteSet s = init_sites(em, 30, 2);
    std::mt19937_64 rng(3);
    for (auto& p : s.positions) p += 0.01 * random_point(rng);
    const auto rvd = compute_rvd(em, s);
    reanchor_sites(s, rvd, em);
    for (std::size_t i = 0; i < s.size(); ++i) {
        CHECK(s.anchors[i].face >= 0);
        CHECK(s.anchors[i].bary.minCoeff() >= -1e-12);
        CHECK(std::abs(s.anchors[i].bary.sum() - 1) < 1e-9);
    }
    CHECK(nearest_site(s.positions[4], s.positions) == 4);
}

TEST_CASE("rvd dump") {
    const auto dir = fixtures::scratch_dir("rvd_dump");
    const EmbeddedMesh em = trivial_embedding(fixtures::icosahedron());
    const auto rvd = compute_rvd(em, init_sites(em, 6, 1));
    save_rvd(rvd, dir / "d.rvd");
    std::ifstream in(dir / "d.rvd");
    std::string magic;
    std::size_t count = 0, dim = 0;
    in >> magic >> count >> dim;
    CHECK(magic == "RVD1");
    CHECK(count == rvd.facets.size());
    CHECK(dim == kEmbedDim);
}
