#pragma once

// Simplicial meshes over an axis-aligned box: triangles (d = 2) or
// tetrahedra (d = 3), positively oriented, with derived edges and node stars.

#include "eimesh/types.hpp"

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace eimesh {

// Node indices of one simplex; the fourth slot is -1 for triangles.
using Element = std::array<std::int32_t, 4>;

struct Edge {
  std::int32_t a = 0;  // a < b
  std::int32_t b = 0;
  friend auto operator<=>(const Edge&, const Edge&) = default;
};

// Signed d-volume of the simplex p[0..dim] (area for triangles).
double simplex_volume(int dim, const Vec3* p);

// Domain-face flags: bit 2a is the low face of axis a, bit 2a+1 the high face.
using FaceMask = std::uint8_t;

class SimplicialMesh {
 public:
  SimplicialMesh() = default;

  // Elements with negative volume are repaired by swapping two indices.
  // The domain defaults to the bounding box of the nodes.
  SimplicialMesh(int dim, std::vector<Vec3> nodes, std::vector<Element> elements,
                 std::optional<Box> domain = std::nullopt);

  int dim() const { return dim_; }
  int nodes_per_element() const { return dim_ + 1; }
  std::size_t num_nodes() const { return nodes_.size(); }
  std::size_t num_elements() const { return elements_.size(); }
  std::size_t num_edges() const { return edges_.size(); }

  const std::vector<Vec3>& nodes() const { return nodes_; }
  const Vec3& node(std::size_t i) const { return nodes_[i]; }
  const std::vector<Element>& elements() const { return elements_; }
  const Element& element(std::size_t e) const { return elements_[e]; }
  std::span<const Edge> edges() const { return edges_; }

  // Gamma(i): neighbors of node i, ascending.
  std::span<const std::int32_t> star(std::size_t i) const;
  // Edge ids matching star(i) entry by entry.
  std::span<const std::int32_t> star_edges(std::size_t i) const;
  std::span<const std::int32_t> node_elements(std::size_t i) const;

  // -1 when {i, j} is not an edge.
  std::int32_t edge_id(std::int32_t i, std::int32_t j) const;

  // X^j - X^i. Throws PreconditionError when {i, j} is not an edge.
  Vec3 edge_vector(std::int32_t i, std::int32_t j) const;

  const Box& domain() const { return domain_; }
  FaceMask boundary_mask(std::size_t i) const { return masks_[i]; }
  bool on_boundary(std::size_t i) const { return masks_[i] != 0; }

  double element_volume(std::size_t e) const;
  double total_volume() const;

  // Number of elements whose orientation was repaired at construction.
  std::size_t orientation_repairs() const { return repairs_; }

 private:
  int dim_ = 2;
  std::vector<Vec3> nodes_;
  std::vector<Element> elements_;
  Box domain_;
  std::vector<FaceMask> masks_;
  std::vector<Edge> edges_;
  std::vector<std::int32_t> star_offsets_;
  std::vector<std::int32_t> star_nodes_;
  std::vector<std::int32_t> star_edge_ids_;
  std::vector<std::int32_t> elem_offsets_;
  std::vector<std::int32_t> elem_ids_;
  std::size_t repairs_ = 0;
};

FaceMask face_mask(const Box& domain, const Vec3& p, int dim);

struct NodalField {
  std::string name;
  std::vector<double> values;
};

// Structured grid split into simplices: 2 triangles per quad, 6 tetrahedra
// per cube (Kuhn subdivision mirrored on odd cells so neighbors conform).
// Cell counts are ceil(extent / target_h) per axis, so spacing <= target_h.
SimplicialMesh generate_box_mesh(const Box& box, int dim, double target_h);

struct AuditReport {
  bool ok = true;
  std::vector<std::string> problems;
};

// Full consistency check: element volumes positive (> 1e-14 of the mean),
// edges unique, stars equal to edge adjacency, no orphans, every facet shared
// by at most two elements, exterior facets on the domain boundary, and the
// element volumes summing to the domain volume.
AuditReport audit(const SimplicialMesh& mesh);

// Point location over a fixed mesh via a uniform bucket grid.
class ElementLocator {
 public:
  explicit ElementLocator(const SimplicialMesh& mesh);

  struct Hit {
    std::int32_t element = -1;
    std::array<double, 4> bary{};
  };
  std::optional<Hit> locate(const Vec3& x) const;

  double interpolate(std::span<const double> values, const Vec3& x) const;

 private:
  const SimplicialMesh* mesh_;
  Box box_;
  std::array<int, 3> cells_{1, 1, 1};
  Vec3 cell_size_ = Vec3::Ones();
  std::vector<std::int32_t> offsets_;
  std::vector<std::int32_t> items_;
};

// Barycentric coordinates of x in element e (sum to 1).
std::array<double, 4> barycentric(const SimplicialMesh& mesh, std::size_t e, const Vec3& x);

// P1 interpolation. Throws PreconditionError when x lies outside the mesh.
double interpolate(const SimplicialMesh& mesh, std::span<const double> values, const Vec3& x);

}  // namespace eimesh
