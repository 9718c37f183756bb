#include "synthetic.hpp"

#include "eimesh/mesh.hpp"

#include <doctest.h>

#include <cmath>
#include <random>

using namespace eimesh;

namespace {

const Box unit_square(Vec3(0, 0, 0), Vec3(1, 1, 0));
const Box unit_cube(Vec3(0, 0, 0), Vec3(1, 1, 1));

// Structured mesh with interior nodes jittered by up to `amount` cell widths.
SimplicialMesh jittered(int dim, double h, double amount, std::uint64_t seed) {
  const auto base = generate_box_mesh(dim == 2 ? unit_square : unit_cube, dim, h);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-amount * h, amount * h);
  auto nodes = base.nodes();
  for (std::size_t i = 0; i < nodes.size(); ++i)
    if (!base.on_boundary(i))
      for (int a = 0; a < dim; ++a) nodes[i][a] += u(rng);
  return SimplicialMesh(dim, nodes, base.elements(), base.domain());
}

}  // namespace

TEST_SUITE("mesh") {
  TEST_CASE("unit square at h = 0.5") {
    const auto m = generate_box_mesh(unit_square, 2, 0.5);
    CHECK(m.num_nodes() == 9);
    CHECK(m.num_elements() == 8);
    CHECK(audit(m).ok);
    for (const auto& e : m.edges()) {
      const double l = (m.node(e.b) - m.node(e.a)).norm();
      const bool ok = std::abs(l - 0.5) < 1e-15 || std::abs(l - 0.5 * std::sqrt(2.0)) < 1e-15;
      CHECK(ok);
    }
  }

  TEST_CASE("unit cube at h = 1") {
    const auto m = generate_box_mesh(unit_cube, 3, 1.0);
    CHECK(m.num_nodes() == 8);
    CHECK(m.num_elements() == 6);
    CHECK(m.total_volume() == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(audit(m).ok);
  }

  TEST_CASE("generated meshes satisfy every invariant") {
    const Box b2(Vec3(-0.3, 0.1, 0), Vec3(1.9, 0.8, 0));
    const Box b3(Vec3(-0.3, 0.1, -1), Vec3(0.9, 0.8, 0.2));
    for (double h : {0.05, 0.13, 0.31}) {
      const auto m2 = generate_box_mesh(b2, 2, h);
      const auto m3 = generate_box_mesh(b3, 3, h);
      CHECK(audit(m2).ok);
      CHECK(audit(m3).ok);
      CHECK(m2.total_volume() == doctest::Approx(2.2 * 0.7).epsilon(1e-10));
      CHECK(m3.total_volume() == doctest::Approx(1.2 * 0.7 * 1.2).epsilon(1e-10));
      for (const auto* m : {&m2, &m3})
        for (const auto& e : m->edges()) CHECK((m->node(e.b) - m->node(e.a)).norm() <= h * std::sqrt(m->dim()) + 1e-12);
    }
  }

  TEST_CASE("stars match edge adjacency") {
    const auto m = jittered(3, 0.25, 0.2, 1);
    for (std::size_t i = 0; i < m.num_nodes(); ++i) {
      const auto star = m.star(i);
      const auto ids = m.star_edges(i);
      REQUIRE(star.size() == ids.size());
      for (std::size_t k = 0; k < star.size(); ++k) {
        if (k) CHECK(star[k - 1] < star[k]);
        CHECK(m.edge_id(static_cast<std::int32_t>(i), star[k]) == ids[k]);
      }
    }
    std::size_t degree_sum = 0;
    for (std::size_t i = 0; i < m.num_nodes(); ++i) degree_sum += m.star(i).size();
    CHECK(degree_sum == 2 * m.num_edges());
  }

  TEST_CASE("edge vectors") {
    const auto m = generate_box_mesh(unit_square, 2, 1.0);
    const auto& e = m.edges()[0];
    CHECK(m.edge_vector(e.a, e.b) == -m.edge_vector(e.b, e.a));
    CHECK(m.edge_vector(e.a, e.b) == m.node(e.b) - m.node(e.a));
    const SimplicialMesh tri(2, {Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(0, 1, 0)}, {Element{0, 1, 2, -1}});
    CHECK(tri.edge_vector(0, 1) == Vec3(1, 0, 0));
    const auto big = generate_box_mesh(unit_square, 2, 0.25);
    CHECK_THROWS_AS(big.edge_vector(0, static_cast<std::int32_t>(big.num_nodes() - 1)), PreconditionError);
  }

  TEST_CASE("negative elements are repaired at construction") {
    const SimplicialMesh m(2, {Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(1, 1, 0), Vec3(0, 1, 0)},
                           {Element{0, 2, 1, -1}, Element{0, 2, 3, -1}});
    CHECK(m.orientation_repairs() == 1);
    CHECK(m.element_volume(0) == doctest::Approx(0.5));
    CHECK(m.element_volume(1) == doctest::Approx(0.5));
    CHECK(audit(m).ok);
  }

  TEST_CASE("boundary masks") {
    const auto m = generate_box_mesh(unit_square, 2, 0.5);
    for (std::size_t i = 0; i < m.num_nodes(); ++i) {
      const auto& p = m.node(i);
      const bool interior = p.x() > 0 && p.x() < 1 && p.y() > 0 && p.y() < 1;
      CHECK(m.on_boundary(i) == !interior);
    }
    CHECK(face_mask(unit_square, Vec3(0, 1, 0), 2) == ((1 << 0) | (1 << 3)));
  }

  TEST_CASE("P1 interpolation") {
    for (int dim : {2, 3}) {
      const auto m = jittered(dim, 0.2, 0.25, 7);
      std::vector<double> u(m.num_nodes());
      for (std::size_t i = 0; i < u.size(); ++i) u[i] = 2 * m.node(i).x() + 3 * m.node(i).y() - m.node(i).z() + 0.5;
      const ElementLocator loc(m);
      std::mt19937_64 rng(3);
      for (int q = 0; q < 300; ++q) {
        const Vec3 x = testing::random_point(rng, dim, 0.0, 1.0);
        const double exact = 2 * x.x() + 3 * x.y() - x.z() + 0.5;
        CHECK(std::abs(interpolate(m, u, x) - exact) < 1e-12);
        CHECK(std::abs(loc.interpolate(u, x) - exact) < 1e-12);
      }
      for (std::size_t i = 0; i < m.num_nodes(); i += 7) CHECK(interpolate(m, u, m.node(i)) == doctest::Approx(u[i]).epsilon(1e-14));
      for (const auto& e : m.edges()) {
        const Vec3 mid = 0.5 * (m.node(e.a) + m.node(e.b));
        CHECK(std::abs(interpolate(m, u, mid) - 0.5 * (u[e.a] + u[e.b])) < 1e-12);
      }
      CHECK_THROWS_AS(interpolate(m, u, Vec3(2, 2, 2)), PreconditionError);
    }
  }

  TEST_CASE("audit catches problems") {
    // Two overlapping triangles covering more than the domain.
    const SimplicialMesh m(2, {Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(0, 1, 0), Vec3(1, 1, 0)},
                           {Element{0, 1, 2, -1}, Element{0, 1, 3, -1}});
    CHECK_FALSE(audit(m).ok);
    const SimplicialMesh orphan(2, {Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(0, 1, 0), Vec3(0.1, 0.1, 0)},
                                {Element{0, 1, 2, -1}});
    CHECK_FALSE(audit(orphan).ok);
    CHECK_THROWS_AS(SimplicialMesh(2, {Vec3(0, 0, 0)}, {Element{0, 0, 1, -1}}), PreconditionError);
  }
}
