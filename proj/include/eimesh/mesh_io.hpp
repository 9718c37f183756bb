#pragma once

// Mesh files.
//
// native JSON ("eimesh-mesh", version 1): exact round trip of coordinates,
// connectivity, nodal fields and metric tensors. Layout:
//
//   { "format": "eimesh-mesh", "version": 1, "dim": 2,
//     "domain": {"lo": [..], "hi": [..]},
//     "nodes": [[x, y], ...], "elements": [[i, j, k], ...],
//     "fields": [{"name": "alpha", "values": [...]}, ...],
//     "metric": {"xx": [...], "xy": [...], "yy": [...]} }        // optional
//
// 3D metrics carry xx xy xz yy yz zz. Numbers are written in shortest
// round-trip form, so loading reproduces every double bit for bit.
//
// VTK legacy ASCII UNSTRUCTURED_GRID: triangles (cell type 5) or tetrahedra
// (10), nodal fields as POINT_DATA SCALARS, the metric as TENSORS.

#include "eimesh/eimls.hpp"
#include "eimesh/mesh.hpp"
#include "eimesh/metric.hpp"

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace eimesh {

struct MeshBundle {
  SimplicialMesh mesh;
  std::vector<NodalField> fields;
  std::optional<MetricField> metric;

  const NodalField* field(const std::string& name) const;
};

enum class MeshFormat { vtk_ascii, native_json };

// .vtk -> vtk_ascii, .json -> native_json.
MeshFormat detect_mesh_format(const std::filesystem::path& path);

std::string to_native_json(const MeshBundle& bundle);
MeshBundle from_native_json(const std::string& text);

std::string to_vtk(const MeshBundle& bundle);
MeshBundle from_vtk(const std::string& text);

void save_mesh(const MeshBundle& bundle, const std::filesystem::path& path, MeshFormat format);
void save_mesh(const MeshBundle& bundle, const std::filesystem::path& path);
MeshBundle load_mesh(const std::filesystem::path& path, MeshFormat format);
MeshBundle load_mesh(const std::filesystem::path& path);

// Legacy VTK STRUCTURED_POINTS; NaN samples are written as `nan`.
void save_grid_vtk(const ScalarGrid& grid, const std::filesystem::path& path, const std::string& name);

// Shortest decimal text that parses back to the same double.
std::string format_double(double v);

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, const std::string& text);

}  // namespace eimesh
