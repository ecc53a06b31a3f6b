#include "aniso/log.hpp"
#include "aniso/nm_cvt.hpp"

#include <benchmark/benchmark.h>

#include <cmath>
#include <map>
#include <numbers>

using namespace aniso;

namespace {

SurfaceMesh torus(int nu, int nv) {
    std::vector<Vec3> v;
    std::vector<Face> f;
    for (int i = 0; i < nu; ++i)
        for (int j = 0; j < nv; ++j) {
            const double u = 2 * std::numbers::pi * i / nu, w = 2 * std::numbers::pi * j / nv;
            const double r = 1 + std::cos(w) / 3;
            v.emplace_back(r * std::cos(u), r * std::sin(u), std::sin(w) / 3);
        }
    auto id = [&](int i, int j) { return (i % nu) * nv + (j % nv); };
    for (int i = 0; i < nu; ++i)
        for (int j = 0; j < nv; ++j) {
            f.push_back({id(i, j), id(i + 1, j), id(i + 1, j + 1)});
            f.push_back({id(i, j), id(i + 1, j + 1), id(i, j + 1)});
        }
    return SurfaceMesh(v, f);
}

const SurfaceMesh& mesh_for(int64_t nu) {
    static std::map<int64_t, SurfaceMesh> cache;
    auto it = cache.find(nu);
    if (it == cache.end()) it = cache.emplace(nu, torus(static_cast<int>(nu), static_cast<int>(nu / 3))).first;
    return it->second;
}

void BM_Embedding(benchmark::State& state) {
    log::set_level(log::Level::Error);
    const SurfaceMesh& m = mesh_for(state.range(0));
    const MetricField f = curvature_metric(m);
    for (auto _ : state) benchmark::DoNotOptimize(solve_embedding(m, f));
    state.counters["vertices"] = static_cast<double>(m.num_vertices());
}
BENCHMARK(BM_Embedding)->Arg(48)->Arg(96)->Unit(benchmark::kMillisecond);

void BM_Rvd(benchmark::State& state) {
    log::set_level(log::Level::Error);
    const SurfaceMesh& m = mesh_for(96);
    const EmbeddedMesh em = solve_embedding(m, curvature_metric(m));
    const SiteSet s = init_sites(em, static_cast<int>(state.range(0)), 1);
    for (auto _ : state) benchmark::DoNotOptimize(compute_rvd(em, s));
    state.counters["sites"] = static_cast<double>(state.range(0));
}
BENCHMARK(BM_Rvd)->Arg(100)->Arg(500)->Arg(1000)->Unit(benchmark::kMillisecond);

void BM_EnergyGradient(benchmark::State& state) {
    log::set_level(log::Level::Error);
    const SurfaceMesh& m = mesh_for(96);
    const EmbeddedMesh em = solve_embedding(m, curvature_metric(m));
    const SiteSet s = init_sites(em, static_cast<int>(state.range(0)), 1);
    const auto rvd = compute_rvd(em, s);
    const auto metrics = face_metrics(em, kDefaultNormalEmphasis);
    for (auto _ : state) benchmark::DoNotOptimize(energy_on_rvd(rvd, em, s.positions, metrics));
}
BENCHMARK(BM_EnergyGradient)->Arg(100)->Arg(1000)->Unit(benchmark::kMillisecond);

} // namespace

BENCHMARK_MAIN();
