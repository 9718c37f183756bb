// Serial reference vs OpenMP for the per-point and per-node kernels.
// Arg 0 selects Exec::serial, 1 Exec::parallel.

#include "synthetic.hpp"

#include "eimesh/eimls.hpp"
#include "eimesh/metric.hpp"
#include "eimesh/pointcloud.hpp"

#include <benchmark/benchmark.h>

#include <random>

using namespace eimesh;

namespace {

Exec exec_of(const benchmark::State& s) { return s.range(0) ? Exec::parallel : Exec::serial; }

const OrientedPointCloud& slice() {
  static const auto c = testing::slice_cloud();
  return c;
}

void bm_sample_at(benchmark::State& s) {
  static const EimlsField f(slice(), EimlsConfig{});
  static const std::vector<Vec3> pts = [] {
    std::mt19937_64 rng(1);
    const Box b = slice().bounding_box().scaled(3.0);
    std::uniform_real_distribution<double> ux(b.lo.x(), b.hi.x()), uy(b.lo.y(), b.hi.y());
    std::vector<Vec3> p(20000);
    for (auto& x : p) x = Vec3(ux(rng), uy(rng), 0);
    return p;
  }();
  for (auto _ : s) benchmark::DoNotOptimize(sample_at(f, pts, true, exec_of(s)));
  s.SetItemsProcessed(s.iterations() * static_cast<std::int64_t>(pts.size()));
}

void bm_estimate_normals(benchmark::State& s) {
  static const OrientedPointCloud cloud = [] {
    auto c = testing::sphere_cloud(20000, 0.5);
    c.normals.clear();
    c.scan_origins = {Vec3::Zero()};
    return c;
  }();
  for (auto _ : s) benchmark::DoNotOptimize(estimate_normals(cloud, 30, exec_of(s)));
  s.SetItemsProcessed(s.iterations() * static_cast<std::int64_t>(cloud.size()));
}

void bm_target_metric(benchmark::State& s) {
  static const Box box(Vec3(-1, -1, 0), Vec3(1, 1, 0));
  static const SimplicialMesh mesh = generate_box_mesh(box, 2, 0.01);
  static const std::vector<double> u = [] {
    std::vector<double> v;
    for (const auto& x : mesh.nodes()) v.push_back(0.01 * std::tanh((x.norm() - 0.5) / 0.01));
    return v;
  }();
  const auto bounds = MetricBounds::defaults(0.01, box, 2);
  for (auto _ : s) benchmark::DoNotOptimize(target_metric(mesh, u, 4000, bounds, exec_of(s)));
  s.SetItemsProcessed(s.iterations() * static_cast<std::int64_t>(mesh.num_nodes()));
}

}  // namespace

BENCHMARK(bm_sample_at)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(bm_estimate_normals)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(bm_target_metric)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
