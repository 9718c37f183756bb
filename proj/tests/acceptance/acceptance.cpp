// Acceptance runner. `eimesh_acceptance` runs every criterion,
// `eimesh_acceptance --criterion N` runs one. Prints one PASS/FAIL line per
// criterion and exits non-zero when any fails.

#include "synthetic.hpp"

#include "eimesh/adaptation.hpp"
#include "eimesh/eimls.hpp"
#include "eimesh/isosurface.hpp"
#include "eimesh/mesh_io.hpp"
#include "eimesh/metric.hpp"
#include "eimesh/remesh.hpp"
#include "eimesh/spatial.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <map>
#include <random>
#include <sstream>

using namespace eimesh;
using Clock = std::chrono::steady_clock;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::vector<double> nodal(const SimplicialMesh& m, const std::function<double(const Vec3&)>& f) {
  std::vector<double> v;
  v.reserve(m.num_nodes());
  for (const auto& x : m.nodes()) v.push_back(f(x));
  return v;
}

SimplicialMesh jittered(const SimplicialMesh& base, double amount, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-amount, amount);
  auto nodes = base.nodes();
  for (std::size_t i = 0; i < nodes.size(); ++i)
    if (!base.on_boundary(i))
      for (int a = 0; a < base.dim(); ++a) nodes[i][a] += u(rng);
  return SimplicialMesh(base.dim(), nodes, base.elements(), base.domain());
}

double point_segment_distance(const Vec3& p, const Vec3& a, const Vec3& b) {
  const Vec3 ab = b - a;
  const double t = std::clamp((p - a).dot(ab) / ab.squaredNorm(), 0.0, 1.0);
  return (a + t * ab - p).norm();
}

double distance_to_polyline(const Vec3& p, const Polyline& pl) {
  double best = std::numeric_limits<double>::infinity();
  const std::size_t n = pl.points.size();
  const std::size_t segs = pl.closed ? n : n - 1;
  for (std::size_t k = 0; k < segs; ++k) best = std::min(best, point_segment_distance(p, pl.points[k], pl.points[(k + 1) % n]));
  return best;
}

// ---- criteria --------------------------------------------------------------

Outcome plane_exactness() {
  const auto t0 = Clock::now();
  const auto cloud = testing::plane_cloud(200, 1);
  const EimlsField f(cloud, EimlsConfig{});
  std::mt19937_64 rng(42);
  double worst = 0.0;
  for (int q = 0; q < 1000; ++q) {
    const Vec3 x = testing::random_point(rng, 3, -1.0, 1.0);
    worst = std::max(worst, std::abs(f.eval(x) - x.z()));
  }
  const double t = seconds_since(t0);
  return {worst <= 1e-12 && t < 1.0, fmt("max |f - z| = %.3e over 1000 queries, %.3f s", worst, t)};
}

Outcome totality() {
  const auto t0 = Clock::now();
  const auto cloud = testing::slice_cloud();
  const Box box = cloud.bounding_box().scaled(3.0);
  const std::array<int, 3> res{200, 200, 1};
  auto undefined = [](const ScalarGrid& g) {
    std::size_t n = 0;
    for (double v : g.values) n += !std::isfinite(v);
    return static_cast<double>(n) / g.values.size();
  };
  std::ostringstream d;
  bool ok = true;
  for (double h0 : {0.0015, 0.0001}) {
    EimlsConfig cfg;
    cfg.h0 = h0;
    const EimlsField f(cloud, cfg);
    const double u = undefined(sample_on_grid(f, box, res, GridMode::eimls)) +
                     undefined(sample_on_grid(f, box, res, GridMode::truncated));
    ok = ok && u == 0.0;
    d << fmt("EIMLS undefined at h0=%g: %.4f; ", h0, u);
  }
  std::vector<double> fractions;
  for (double h0 : {0.0001, 0.0005, 0.0015}) {
    EimlsConfig cfg;
    cfg.h0 = h0;
    const EimlsField f(cloud, cfg);
    fractions.push_back(undefined(sample_on_grid(f, box, res, GridMode::plain_imls, h0)));
    d << fmt("IMLS undefined at h0=%g: %.4f; ", h0, fractions.back());
  }
  ok = ok && fractions[0] > 0.0 && fractions[1] <= fractions[0] && fractions[2] <= fractions[1];
  const double t = seconds_since(t0);
  d << fmt("%.2f s", t);
  return {ok && t < 30.0, d.str()};
}

Outcome truncation() {
  const auto cloud = testing::slice_cloud();
  EimlsConfig cfg;
  cfg.h0 = 0.003;
  cfg.epsilon = 0.002;
  const EimlsField f(cloud, cfg);
  const Box box = cloud.bounding_box().scaled(3.0);
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> ux(box.lo.x(), box.hi.x()), uy(box.lo.y(), box.hi.y());
  std::vector<Vec3> pts(100000);
  for (auto& p : pts) p = Vec3(ux(rng), uy(rng), 0.0);
  const auto vals = sample_at(f, pts, true);
  double worst = 0.0;
  for (double v : vals) worst = std::max(worst, std::abs(v));
  bool ok = worst < cfg.epsilon;

  // Roots along the normal lines of cloud points, then d(alpha_eps)/d(alpha) there.
  double slope_dev = 0.0;
  int roots = 0;
  for (std::size_t i = 0; i < cloud.size(); i += 7) {
    const Vec3 n = cloud.normals[i];
    double a = -0.01, b = 0.01;
    auto g = [&](double s) { return f.eval(cloud.points[i] + s * n); };
    if (!(g(a) < 0.0 && g(b) > 0.0)) continue;
    for (int it = 0; it < 80; ++it) {
      const double m = 0.5 * (a + b);
      (g(m) < 0.0 ? a : b) = m;
    }
    const Vec3 x = cloud.points[i] + 0.5 * (a + b) * n;
    const double dlt = 1e-6;
    const double da = f.eval(x + dlt * n) - f.eval(x - dlt * n);
    const double dt = f.eval_truncated(x + dlt * n) - f.eval_truncated(x - dlt * n);
    slope_dev = std::max(slope_dev, std::abs(dt / da - 1.0));
    ++roots;
  }
  const double h = 1e-6 * cfg.epsilon;
  const double scalar = std::abs((truncate_tanh(h, cfg.epsilon) - truncate_tanh(-h, cfg.epsilon)) / (2 * h) - 1.0);
  ok = ok && roots > 50 && slope_dev < 1e-3 && scalar < 1e-3;
  return {ok, fmt("max |alpha_eps| = %.17g (eps %.3g); slope deviation %.2e at %d field roots, %.2e scalar", worst,
                  cfg.epsilon, slope_dev, roots, scalar)};
}

Outcome gradient_recovery() {
  double worst = 0.0;
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u(-3.0, 3.0);
  for (int dim : {2, 3}) {
    const Box b = dim == 2 ? Box(Vec3(0, 0, 0), Vec3(1, 1, 0)) : Box(Vec3(0, 0, 0), Vec3(1, 1, 1));
    const auto base = generate_box_mesh(b, dim, dim == 2 ? 0.05 : 0.2);
    for (int trial = 0; trial < 10; ++trial) {
      const auto m = trial == 0 ? base : jittered(base, dim == 2 ? 0.015 : 0.06, 100 + trial);
      const Vec3 a(u(rng), u(rng), dim == 3 ? u(rng) : 0.0);
      const double c = u(rng);
      const auto g = recover_gradient(m, nodal(m, [&](const Vec3& x) { return a.dot(x) + c; }));
      for (const auto& gi : g) worst = std::max(worst, (gi - a).norm() / std::max(1.0, a.norm()));
    }
  }
  return {worst <= 1e-10, fmt("max relative gradient error %.3e over 2 x 10 trials", worst)};
}

Outcome unit_metric_case() {
  double worst = 0.0;
  int checked = 0;
  for (double h : {0.1, 0.05, 0.02}) {
    const auto m = generate_box_mesh(Box(Vec3(0, 0, 0), Vec3(1, 1, 0)), 2, h);
    const auto um = unit_metric(m);
    for (std::size_t i = 0; i < m.num_nodes(); ++i) {
      if (m.on_boundary(i) || m.star(i).size() != 4) continue;
      const double hh = (m.node(m.star(i)[0]) - m.node(i)).norm();
      Mat3 e = Mat3::Zero();
      e(0, 0) = e(1, 1) = 1.0 / (hh * hh);
      worst = std::max(worst, (um[i] - e).cwiseAbs().maxCoeff() / e(0, 0));
      ++checked;
    }
  }
  return {checked > 0 && worst <= 1e-12, fmt("max relative deviation %.3e at %d interior valence-4 nodes", worst, checked)};
}

Outcome closure() {
  std::mt19937_64 rng(12);
  std::uniform_real_distribution<double> u(0.5, 3.0);
  double worst = 0.0;
  for (int trial = 0; trial < 5; ++trial) {
    const int dim = trial < 3 ? 2 : 3;
    const Box b = dim == 2 ? Box(Vec3(0, 0, 0), Vec3(1, 1, 0)) : Box(Vec3(0, 0, 0), Vec3(1, 1, 1));
    const auto m = jittered(generate_box_mesh(b, dim, dim == 2 ? 0.05 : 0.15), dim == 2 ? 0.01 : 0.03, trial);
    const double fx = u(rng), fy = u(rng), fz = u(rng), N = 500.0 * (trial + 1);
    const auto t = target_metric(m, nodal(m, [&](const Vec3& x) { return std::sin(fx * x.x()) * std::cos(fy * x.y() + fz * x.z()); }),
                                 N, MetricBounds::defaults(0.01, b, dim));
    double total = 0.0;
    for (double v : t.data.node_creation) total += v;
    worst = std::max(worst, std::abs(std::pow(t.data.error, -dim / 2.0) * total / N - 1.0));
  }
  return {worst <= 1e-9, fmt("max relative closure residual %.3e over 5 meshes", worst)};
}

Outcome fixed_point() {
  double worst = 0.0, e_dev = 0.0;
  for (int dim : {2, 3}) {
    const Box b = dim == 2 ? Box(Vec3(0, 0, 0), Vec3(1, 1, 0)) : Box(Vec3(0, 0, 0), Vec3(1, 1, 1));
    const auto m = jittered(generate_box_mesh(b, dim, dim == 2 ? 0.05 : 0.2), dim == 2 ? 0.01 : 0.04, 21);
    const double ebar = 2.5e-4;
    const std::vector<double> errs(m.num_edges(), ebar);
    const auto t = target_metric_from_errors(m, errs, static_cast<double>(m.num_nodes()), {1e-9, 1e9, 1e9});
    const auto um = unit_metric(m);
    for (std::size_t i = 0; i < m.num_nodes(); ++i)
      worst = std::max(worst, (t.raw[i] - um[i]).norm() / um[i].norm());
    e_dev = std::max(e_dev, std::abs(t.data.error / ebar - 1.0));
  }
  return {worst <= 1e-9, fmt("max relative |M~ - M| %.3e; |e/e_bar - 1| %.3e", worst, e_dev)};
}

Outcome kd_oracle() {
  std::mt19937_64 rng(8);
  std::vector<Vec3> pts(1000);
  for (auto& p : pts) p = testing::random_point(rng, 3, 0.0, 1.0);
  const NeighborIndex index(pts, 3);
  std::size_t mismatches = 0, queries = 0;
  std::vector<Neighbor> brute(pts.size());
  for (int q = 0; q < 10000; ++q) {
    const Vec3 x = testing::random_point(rng, 3, -0.1, 1.1);
    const std::size_t k = q % 3 == 0 ? 1 : q % 3 == 1 ? 3 : 80;
    for (std::size_t i = 0; i < pts.size(); ++i) brute[i] = {static_cast<std::uint32_t>(i), (pts[i] - x).squaredNorm()};
    std::partial_sort(brute.begin(), brute.begin() + k, brute.end(), [](const Neighbor& a, const Neighbor& b) {
      return a.dist2 < b.dist2 || (a.dist2 == b.dist2 && a.index < b.index);
    });
    const auto got = index.knn(x, k);
    for (std::size_t j = 0; j < k; ++j)
      if (got[j].index != brute[j].index || got[j].dist2 != brute[j].dist2) {
        ++mismatches;
        break;
      }
    ++queries;
  }
  return {mismatches == 0, fmt("%zu mismatches in %zu queries (k in {1, 3, 80})", mismatches, queries)};
}

LoopOptions circle_loop_options() {
  LoopOptions o;
  o.eimls.h0 = 0.01;
  o.eimls.epsilon = 0.01;
  o.domain = Box(Vec3(-1, -1, 0), Vec3(1, 1, 0));
  o.budget = 4000;
  o.iterations = 10;
  return o;
}

LoopResult circle_run(double gap) {
  const auto o = circle_loop_options();
  const EimlsField f(testing::circle_cloud(512, 0.5, 0.01, 1, gap), o.eimls);
  return adaptation_loop(f, o);
}

Outcome circle_benchmark() {
  const auto t0 = Clock::now();
  const auto r = circle_run(0.0);
  const double t = seconds_since(t0);
  const double R = 0.5, h0 = 0.01;
  const auto c = extract_contour_2d(r.mesh, r.alpha);
  const double n = static_cast<double>(r.mesh.num_nodes());
  const bool one_closed = c.size() == 1 && c[0].closed;
  const double area = enclosed_area(c);
  double haus = 0.0;
  for (const auto& pl : c)
    for (const auto& p : pl.points) haus = std::max(haus, std::abs(p.norm() - R));
  if (one_closed)
    for (int k = 0; k < 4096; ++k) {
      const double th = 2.0 * M_PI * k / 4096;
      haus = std::max(haus, distance_to_polyline(Vec3(R * std::cos(th), R * std::sin(th), 0), c[0]));
    }
  const double area_err = std::abs(area / (M_PI * R * R) - 1.0);
  const bool ok = std::abs(n / 4000.0 - 1.0) <= 0.2 && one_closed && area_err <= 0.02 && haus < 5 * h0 && t < 60.0;
  return {ok, fmt("nodes %zu (N 4000), %zu contour(s)%s, area error %.2f%%, Hausdorff %.4g (< %.3g), %.1f s",
                  r.mesh.num_nodes(), c.size(), one_closed ? " closed" : "", 100 * area_err, haus, 5 * h0, t)};
}

Outcome hole_filling() {
  const auto r = circle_run(0.2);
  const auto c = extract_contour_2d(r.mesh, r.alpha);
  const bool ok = c.size() == 1 && c[0].closed;
  return {ok, fmt("%zu contour(s), first %s, %zu nodes", c.size(), c.empty() ? "none" : c[0].closed ? "closed" : "open",
                  r.mesh.num_nodes())};
}

Outcome slice_reproduction() {
  const auto t0 = Clock::now();
  const auto cloud = testing::slice_cloud();
  LoopOptions o;
  o.eimls.h0 = 0.003;
  o.eimls.epsilon = 0.002;
  o.domain = cloud.bounding_box().scaled(3.0);
  o.budget = 5000;
  o.iterations = 30;
  const EimlsField f(cloud, o.eimls);
  const NeighborIndex& index = f.index();
  std::map<int, double> haus;
  std::map<int, std::size_t> loops;
  adaptation_loop(f, o, [&](const IterationState& s) {
    if (s.iteration != 10 && s.iteration != 15 && s.iteration != 30) return;
    const auto c = extract_contour_2d(s.mesh, s.alpha);
    double h = c.empty() ? std::numeric_limits<double>::infinity() : 0.0;
    for (const auto& pl : c)
      for (const auto& p : pl.points) h = std::max(h, std::sqrt(index.nearest(p).dist2));
    haus[s.iteration] = h;
    loops[s.iteration] = c.size();
  });
  const double t = seconds_since(t0);
  const bool ok = haus.size() == 3 && haus[15] <= haus[10] && haus[30] <= haus[15] && haus[30] < 10 * o.eimls.h0 && t < 300.0;
  return {ok, fmt("Hausdorff contour->cloud at iterations 10/15/30: %.5g / %.5g / %.5g (final < %.3g), loops %zu, %.1f s",
                  haus[10], haus[15], haus[30], 10 * o.eimls.h0, loops[30], t)};
}

Outcome epsilon_anisotropy() {
  // Fixed protocol: slice, h0 = 0.003, N = 5000, 10 iterations; in-band
  // elements have |alpha| < eps at their centroid; Euclidean aspect ratio.
  const auto cloud = testing::slice_cloud();
  std::vector<double> means;
  std::ostringstream d;
  for (double eps : {0.02, 0.005, 0.002}) {
    LoopOptions o;
    o.eimls.h0 = 0.003;
    o.eimls.epsilon = eps;
    o.domain = cloud.bounding_box().scaled(3.0);
    o.budget = 5000;
    o.iterations = 10;
    const EimlsField f(cloud, o.eimls);
    const auto r = adaptation_loop(f, o);
    double sum = 0.0;
    std::size_t n = 0;
    for (std::size_t e = 0; e < r.mesh.num_elements(); ++e) {
      Vec3 p[3];
      Vec3 c = Vec3::Zero();
      for (int k = 0; k < 3; ++k) {
        p[k] = r.mesh.node(static_cast<std::size_t>(r.mesh.element(e)[k]));
        c += p[k] / 3.0;
      }
      if (std::abs(f.eval(c)) >= eps) continue;
      sum += aspect_ratio(2, p);
      ++n;
    }
    means.push_back(n ? sum / n : 0.0);
    d << fmt("eps %.3g: mean AR %.3f over %zu elements; ", eps, means.back(), n);
  }
  const bool ok = means[1] > means[0] && means[2] > means[1];
  d << (ok ? "strictly increasing" : "not strictly increasing");
  return {ok, d.str()};
}

Outcome sphere_suite() {
  const auto t0 = Clock::now();
  LoopOptions o;
  o.eimls.h0 = 0.03;
  o.eimls.epsilon = 0.03;
  o.domain = Box(Vec3(-1, -1, -1), Vec3(1, 1, 1));
  o.budget = 30000;
  o.iterations = 5;
  o.init_h = 0.1;
  const EimlsField f(testing::sphere_cloud(2000, 0.5), o.eimls);
  const auto r = adaptation_loop(f, o);
  const double t = seconds_since(t0);
  const auto rep = audit(r.mesh);
  const auto s = extract_surface_3d(r.mesh, r.alpha);
  const double n = static_cast<double>(r.mesh.num_nodes());
  const double area_err = std::abs(s.area() / (M_PI) - 1.0);
  const bool ok = rep.ok && std::abs(n / o.budget - 1.0) <= 0.25 && s.closed() && s.euler_characteristic() == 2 &&
                  area_err <= 0.05 && t < 600.0;
  return {ok, fmt("audit %s, nodes %zu (N 30000), surface %s, chi %ld, area error %.2f%%, %.1f s", rep.ok ? "ok" : "FAILED",
                  r.mesh.num_nodes(), s.closed() ? "closed" : "open", s.euler_characteristic(), 100 * area_err, t)};
}

Outcome determinism() {
  auto once = [] {
    const auto r = circle_run(0.0);
    return to_native_json(MeshBundle{r.mesh, {NodalField{"alpha", r.alpha}}, r.metric});
  };
  const auto a = once();
  const auto b = once();
  return {a == b, fmt("native JSON %zu and %zu bytes, %s", a.size(), b.size(), a == b ? "identical" : "different")};
}

const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria = {
    {"plane exactness", plane_exactness},
    {"EIMLS totality vs IMLS", totality},
    {"tanh truncation", truncation},
    {"gradient recovery", gradient_recovery},
    {"unit metric hand case", unit_metric_case},
    {"budget equation closure", closure},
    {"metric fixed point", fixed_point},
    {"kd-tree oracle", kd_oracle},
    {"circle benchmark", circle_benchmark},
    {"hole filling", hole_filling},
    {"slice reproduction", slice_reproduction},
    {"epsilon anisotropy trend", epsilon_anisotropy},
    {"3D sphere suite", sphere_suite},
    {"determinism", determinism},
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"eimesh acceptance criteria"};
  int only = 0;
  app.add_option("--criterion", only, "run a single criterion (1-14)")->check(CLI::Range(1, 14));
  CLI11_PARSE(app, argc, argv);

  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i) + 1;
    if (only && id != only) continue;
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failures += !o.pass;
    std::cout << (o.pass ? "PASS" : "FAIL") << " criterion " << id << " (" << criteria[i].first << "): " << o.detail
              << std::endl;
  }
  return failures ? 1 : 0;
}
