#pragma once

// Zero level set of a P1 nodal field: polylines in 2D (marching triangles),
// an indexed triangle surface in 3D (marching tetrahedra).
//
// Nodal values that are exactly zero are nudged to +1e-12 * max|value| first,
// so every crossing lies strictly inside an edge. Crossing points are keyed by
// mesh edge and computed once per edge, which makes neighbouring elements
// share them exactly. Contours and surfaces are oriented with the negative
// side on the left / behind (counter-clockwise, outward normals for a field
// that is negative inside).

#include "eimesh/mesh.hpp"

#include <array>
#include <filesystem>
#include <span>
#include <vector>

namespace eimesh {

struct Polyline {
  std::vector<Vec3> points;  // closed polylines do not repeat the first point
  bool closed = false;

  double length() const;
  // Shoelace area; positive when counter-clockwise. Zero for open chains.
  double signed_area() const;
};

std::vector<Polyline> extract_contour_2d(const SimplicialMesh& mesh, std::span<const double> values);

double total_length(std::span<const Polyline> contour);
// Sum of signed areas of the closed polylines.
double enclosed_area(std::span<const Polyline> contour);

struct TriangleSurface {
  std::vector<Vec3> vertices;
  std::vector<std::array<std::int32_t, 3>> triangles;

  double area() const;
  double enclosed_volume() const;  // divergence theorem; meaningful when closed
  std::size_t num_edges() const;
  long euler_characteristic() const;  // V - E + F
  bool closed() const;                // every edge shared by exactly two triangles
};

TriangleSurface extract_surface_3d(const SimplicialMesh& mesh, std::span<const double> values);

// Writers. CSV: `polyline,closed,x,y` rows.
void save_contour_csv(std::span<const Polyline> contour, const std::filesystem::path& path);
void save_contour_vtk(std::span<const Polyline> contour, const std::filesystem::path& path);
void save_surface_ply(const TriangleSurface& surface, const std::filesystem::path& path);
void save_surface_vtk(const TriangleSurface& surface, const std::filesystem::path& path);

}  // namespace eimesh
