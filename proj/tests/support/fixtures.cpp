#include "fixtures.hpp"

#include <cmath>
#include <map>
#include <numbers>

#include <Eigen/Geometry>

namespace fixtures {

using aniso::Face;
using aniso::Vec3;

SurfaceMesh tetrahedron() {
    std::vector<Vec3> v{{1, 1, 1}, {1, -1, -1}, {-1, 1, -1}, {-1, -1, 1}};
    std::vector<Face> f{{0, 1, 2}, {0, 3, 1}, {0, 2, 3}, {1, 3, 2}};
    return SurfaceMesh(std::move(v), std::move(f));
}

SurfaceMesh icosahedron() {
    const double t = (1 + std::sqrt(5.0)) / 2;
    std::vector<Vec3> v{{-1, t, 0}, {1, t, 0}, {-1, -t, 0}, {1, -t, 0}, {0, -1, t}, {0, 1, t},
                        {0, -1, -t}, {0, 1, -t}, {t, 0, -1}, {t, 0, 1}, {-t, 0, -1}, {-t, 0, 1}};
    for (auto& p : v) p.normalize();
    std::vector<Face> f{{0, 11, 5}, {0, 5, 1}, {0, 1, 7}, {0, 7, 10}, {0, 10, 11}, {1, 5, 9}, {5, 11, 4},
                        {11, 10, 2}, {10, 7, 6}, {7, 1, 8}, {3, 9, 4}, {3, 4, 2}, {3, 2, 6}, {3, 6, 8},
                        {3, 8, 9}, {4, 9, 5}, {2, 4, 11}, {6, 2, 10}, {8, 6, 7}, {9, 8, 1}};
    return SurfaceMesh(std::move(v), std::move(f));
}

SurfaceMesh icosphere(int levels, double radius) {
    SurfaceMesh base = icosahedron();
    std::vector<Vec3> v = base.vertices();
    std::vector<Face> f = base.faces();
    for (int l = 0; l < levels; ++l) {
        std::map<std::pair<int, int>, int> mid;
        auto midpoint = [&](int a, int b) {
            const auto key = std::minmax(a, b);
            auto it = mid.find(key);
            if (it != mid.end()) return it->second;
            v.push_back((v[a] + v[b]).normalized());
            mid.emplace(key, static_cast<int>(v.size()) - 1);
            return static_cast<int>(v.size()) - 1;
        };
        std::vector<Face> nf;
        for (const Face& t : f) {
            const int a = midpoint(t[0], t[1]), b = midpoint(t[1], t[2]), c = midpoint(t[2], t[0]);
            nf.push_back({t[0], a, c});
            nf.push_back({t[1], b, a});
            nf.push_back({t[2], c, b});
            nf.push_back({a, b, c});
        }
        f = std::move(nf);
    }
    for (auto& p : v) p *= radius;
    return SurfaceMesh(std::move(v), std::move(f));
}

SurfaceMesh torus(double R, double r, int nu, int nv) {
    std::vector<Vec3> v;
    std::vector<Face> f;
    for (int i = 0; i < nu; ++i) {
        const double u = 2 * std::numbers::pi * i / nu;
        for (int j = 0; j < nv; ++j) {
            const double w = 2 * std::numbers::pi * j / nv;
            v.emplace_back((R + r * std::cos(w)) * std::cos(u), (R + r * std::cos(w)) * std::sin(u), r * std::sin(w));
        }
    }
    auto id = [&](int i, int j) { return ((i + nu) % nu) * nv + (j + nv) % nv; };
    for (int i = 0; i < nu; ++i)
        for (int j = 0; j < nv; ++j) {
            f.push_back({id(i, j), id(i + 1, j), id(i + 1, j + 1)});
            f.push_back({id(i, j), id(i + 1, j + 1), id(i, j + 1)});
        }
    return SurfaceMesh(std::move(v), std::move(f));
}

SurfaceMesh cube(int n, double h) {
    std::vector<Vec3> v;
    std::vector<Face> f;
    std::map<std::array<long long, 3>, int> weld;
    auto vid = [&](const Vec3& p) {
        const std::array<long long, 3> key{std::llround(p.x() * 1e9), std::llround(p.y() * 1e9), std::llround(p.z() * 1e9)};
        auto it = weld.find(key);
        if (it != weld.end()) return it->second;
        v.push_back(p);
        weld.emplace(key, static_cast<int>(v.size()) - 1);
        return static_cast<int>(v.size()) - 1;
    };
    // Each face: outward normal n, tangents (a, b) with a x b = n.
    const std::array<std::array<Vec3, 3>, 6> frames{{
        {Vec3(1, 0, 0), Vec3(0, 1, 0), Vec3(0, 0, 1)},
        {Vec3(-1, 0, 0), Vec3(0, 0, 1), Vec3(0, 1, 0)},
        {Vec3(0, 1, 0), Vec3(0, 0, 1), Vec3(1, 0, 0)},
        {Vec3(0, -1, 0), Vec3(1, 0, 0), Vec3(0, 0, 1)},
        {Vec3(0, 0, 1), Vec3(1, 0, 0), Vec3(0, 1, 0)},
        {Vec3(0, 0, -1), Vec3(0, 1, 0), Vec3(1, 0, 0)},
    }};
    for (const auto& fr : frames) {
        std::vector<int> ids((n + 1) * (n + 1));
        for (int i = 0; i <= n; ++i)
            for (int j = 0; j <= n; ++j) {
                const double s = -h + 2 * h * i / n, t = -h + 2 * h * j / n;
                ids[i * (n + 1) + j] = vid(h * fr[0] + s * fr[1] + t * fr[2]);
            }
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) {
                const int a = ids[i * (n + 1) + j], b = ids[(i + 1) * (n + 1) + j];
                const int c = ids[(i + 1) * (n + 1) + j + 1], d = ids[i * (n + 1) + j + 1];
                f.push_back({a, b, c});
                f.push_back({a, c, d});
            }
    }
    return SurfaceMesh(std::move(v), std::move(f));
}

SurfaceMesh grid(int nx, int ny, double w, double h) {
    std::vector<Vec3> v;
    std::vector<Face> f;
    for (int j = 0; j <= ny; ++j)
        for (int i = 0; i <= nx; ++i) v.emplace_back(w * i / nx, h * j / ny, 0.0);
    auto id = [&](int i, int j) { return j * (nx + 1) + i; };
    for (int j = 0; j < ny; ++j)
        for (int i = 0; i < nx; ++i) {
            f.push_back({id(i, j), id(i + 1, j), id(i + 1, j + 1)});
            f.push_back({id(i, j), id(i + 1, j + 1), id(i, j + 1)});
        }
    return SurfaceMesh(std::move(v), std::move(f));
}

aniso::Mat3 random_spd(std::mt19937_64& rng, double cond) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const Eigen::Quaterniond q(Eigen::Vector4d(u(rng) - 0.5, u(rng) - 0.5, u(rng) - 0.5, u(rng) - 0.5).normalized());
    const Vec3 eig(std::pow(cond, u(rng)), std::pow(cond, u(rng)), std::pow(cond, u(rng)));
    const aniso::Mat3 r = q.toRotationMatrix();
    aniso::Mat3 m = r * eig.asDiagonal() * r.transpose();
    return 0.5 * (m + m.transpose());
}

Vec3 random_unit(std::mt19937_64& rng) {
    std::normal_distribution<double> n(0.0, 1.0);
    Vec3 v;
    do {
        v = Vec3(n(rng), n(rng), n(rng));
    } while (v.norm() < 1e-6);
    return v.normalized();
}

std::filesystem::path scratch_dir(const std::string& name) {
    const auto dir = std::filesystem::temp_directory_path() / ("aniso_test_" + name);
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

std::filesystem::path data_path(const std::string& file) { return std::filesystem::path(ANISO_TEST_DATA) / file; }

} // namespace fixtures
