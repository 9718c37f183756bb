#include "synthetic.hpp"

#include "eimesh/isosurface.hpp"
#include "eimesh/mesh_io.hpp"

#include <doctest.h>

#include <cmath>
#include <fstream>
#include <random>

using namespace eimesh;

namespace {

std::vector<double> nodal(const SimplicialMesh& m, const auto& f) {
  std::vector<double> v;
  for (const auto& x : m.nodes()) v.push_back(f(x));
  return v;
}

SimplicialMesh single_triangle() {
  return SimplicialMesh(2, {Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(0, 1, 0)}, {Element{0, 1, 2, -1}});
}

SimplicialMesh single_tet() {
  return SimplicialMesh(3, {Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(0, 1, 0), Vec3(0, 0, 1)}, {Element{0, 1, 2, 3}});
}

// Residual of the linear interpolant at a crossing: the point must lie on some
// mesh edge where the field interpolates to zero.
double crossing_residual(const SimplicialMesh& m, std::span<const double> u, const Vec3& p) {
  double best = std::numeric_limits<double>::infinity();
  for (const auto& e : m.edges()) {
    const Vec3 a = m.node(e.a), b = m.node(e.b);
    const Vec3 ab = b - a;
    const double t = (p - a).dot(ab) / ab.squaredNorm();
    if (t < 0.0 || t > 1.0) continue;
    if ((a + t * ab - p).norm() > 1e-12 * ab.norm()) continue;
    best = std::min(best, std::abs((1 - t) * u[e.a] + t * u[e.b]));
  }
  return best;
}

}  // namespace

TEST_SUITE("isosurface") {
  TEST_CASE("no crossing gives empty output") {
    const auto m = generate_box_mesh(Box(Vec3(0, 0, 0), Vec3(1, 1, 0)), 2, 0.25);
    const std::vector<double> pos(m.num_nodes(), 1.0);
    CHECK(extract_contour_2d(m, pos).empty());
    const auto m3 = generate_box_mesh(Box(Vec3(0, 0, 0), Vec3(1, 1, 1)), 3, 0.5);
    const std::vector<double> neg(m3.num_nodes(), -2.0);
    CHECK(extract_surface_3d(m3, neg).triangles.empty());
  }

  TEST_CASE("single triangle with one negative vertex") {
    const auto m = single_triangle();
    const std::vector<double> u{-1, 1, 1};
    const auto c = extract_contour_2d(m, u);
    REQUIRE(c.size() == 1);
    REQUIRE(c[0].points.size() == 2);
    CHECK_FALSE(c[0].closed);
    const Vec3 a = c[0].points[0], b = c[0].points[1];
    const bool fwd = (a - Vec3(0.5, 0, 0)).norm() < 1e-15 && (b - Vec3(0, 0.5, 0)).norm() < 1e-15;
    const bool rev = (b - Vec3(0.5, 0, 0)).norm() < 1e-15 && (a - Vec3(0, 0.5, 0)).norm() < 1e-15;
    CHECK((fwd || rev));
    CHECK(c[0].length() == doctest::Approx(std::sqrt(0.5)));
  }

  TEST_CASE("single tetrahedron: one and two negative vertices") {
    const auto m = single_tet();
    const auto one = extract_surface_3d(m, std::vector<double>{-1, 1, 1, 1});
    CHECK(one.triangles.size() == 1);
    CHECK(one.vertices.size() == 3);
    CHECK(one.area() == doctest::Approx(std::sqrt(3.0) / 8.0));
    const auto two = extract_surface_3d(m, std::vector<double>{-1, -1, 1, 1});
    CHECK(two.triangles.size() == 2);
    CHECK(two.vertices.size() == 4);
    const auto three = extract_surface_3d(m, std::vector<double>{-1, -1, -1, 1});
    CHECK(three.triangles.size() == 1);
  }

  TEST_CASE("exact zeros are nudged off the vertex") {
    const auto m = single_triangle();
    const auto c = extract_contour_2d(m, std::vector<double>{0.0, 1.0, -1.0});
    REQUIRE(c.size() == 1);
    for (const auto& p : c[0].points) CHECK(p.allFinite());
    const auto none = extract_contour_2d(m, std::vector<double>{0.0, 1.0, 1.0});
    CHECK(none.empty());
  }

  TEST_CASE("crossings interpolate to zero and are shared between elements") {
    std::mt19937_64 rng(11);
    std::normal_distribution<double> g(0.0, 1.0);
    const auto m = generate_box_mesh(Box(Vec3(0, 0, 0), Vec3(1, 1, 0)), 2, 0.1);
    for (int trial = 0; trial < 10; ++trial) {
      std::vector<double> u(m.num_nodes());
      for (auto& v : u) v = g(rng);
      const auto c = extract_contour_2d(m, u);
      std::size_t crossing_edges = 0;
      for (const auto& e : m.edges())
        if ((u[e.a] < 0) != (u[e.b] < 0)) ++crossing_edges;
      std::size_t points = 0;
      for (const auto& pl : c) {
        points += pl.points.size();
        for (const auto& p : pl.points) CHECK(crossing_residual(m, u, p) < 1e-12);
      }
      // Closed loops list each crossing once; open chains end on the boundary.
      CHECK(points == crossing_edges);
    }
    const auto m3 = generate_box_mesh(Box(Vec3(0, 0, 0), Vec3(1, 1, 1)), 3, 0.2);
    std::vector<double> u(m3.num_nodes());
    for (auto& v : u) v = g(rng);
    const auto s = extract_surface_3d(m3, u);
    std::size_t crossing_edges = 0;
    for (const auto& e : m3.edges())
      if ((u[e.a] < 0) != (u[e.b] < 0)) ++crossing_edges;
    CHECK(s.vertices.size() == crossing_edges);
    for (const auto& p : s.vertices) CHECK(crossing_residual(m3, u, p) < 1e-12);
  }

  TEST_CASE("circle contour length and area") {
    const auto m = generate_box_mesh(Box(Vec3(-1, -1, 0), Vec3(1, 1, 0)), 2, 0.02);
    const auto u = nodal(m, [](const Vec3& x) { return x.norm() - 0.5; });
    const auto c = extract_contour_2d(m, u);
    REQUIRE(c.size() == 1);
    CHECK(c[0].closed);
    CHECK(std::abs(enclosed_area(c) / (M_PI * 0.25) - 1.0) < 0.02);
    CHECK(std::abs(total_length(c) / (M_PI) - 1.0) < 0.02);
    CHECK(enclosed_area(c) > 0.0);
  }

  TEST_CASE("a hole gives two loops and the annulus area") {
    const auto m = generate_box_mesh(Box(Vec3(-1, -1, 0), Vec3(1, 1, 0)), 2, 0.02);
    const auto u = nodal(m, [](const Vec3& x) { return std::abs(x.norm() - 0.6) - 0.2; });
    const auto c = extract_contour_2d(m, u);
    CHECK(c.size() == 2);
    CHECK(std::abs(enclosed_area(c) / (M_PI * (0.64 - 0.16)) - 1.0) < 0.03);
  }

  TEST_CASE("sphere surface is closed with Euler characteristic 2") {
    const auto m = generate_box_mesh(Box(Vec3(-1, -1, -1), Vec3(1, 1, 1)), 3, 0.08);
    const auto u = nodal(m, [](const Vec3& x) { return x.norm() - 0.5; });
    const auto s = extract_surface_3d(m, u);
    CHECK(s.closed());
    CHECK(s.euler_characteristic() == 2);
    CHECK(std::abs(s.area() / (M_PI) - 1.0) < 0.05);
    CHECK(std::abs(s.enclosed_volume() / (4.0 / 3.0 * M_PI * 0.125) - 1.0) < 0.05);
    CHECK(s.enclosed_volume() > 0.0);
  }

  TEST_CASE("writers") {
    const auto dir = eimesh::testing::scratch_dir("isosurface");
    const auto m = generate_box_mesh(Box(Vec3(-1, -1, 0), Vec3(1, 1, 0)), 2, 0.2);
    const auto c = extract_contour_2d(m, nodal(m, [](const Vec3& x) { return x.norm() - 0.5; }));
    save_contour_csv(c, dir / "c.csv");
    save_contour_vtk(c, dir / "c.vtk");
    const auto csv = read_text_file(dir / "c.csv");
    CHECK(csv.rfind("polyline,closed,x,y", 0) == 0);
    std::size_t rows = 0;
    for (char ch : csv) rows += ch == '\n';
    CHECK(rows == 1 + c[0].points.size());
    const auto m3 = generate_box_mesh(Box(Vec3(-1, -1, -1), Vec3(1, 1, 1)), 3, 0.4);
    const auto s = extract_surface_3d(m3, nodal(m3, [](const Vec3& x) { return x.norm() - 0.5; }));
    save_surface_ply(s, dir / "s.ply");
    save_surface_vtk(s, dir / "s.vtk");
    const auto ply = read_text_file(dir / "s.ply");
    CHECK(ply.find("element face " + std::to_string(s.triangles.size())) != std::string::npos);
    CHECK_THROWS_AS(save_contour_csv(c, dir / "missing" / "x.csv"), IoError);
  }
}
