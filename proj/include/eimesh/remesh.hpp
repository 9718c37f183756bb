#pragma once

// Anisotropic remeshing by local modifications of an existing mesh.
//
// Each sweep runs, in order: edge splits (longest in the metric first), edge
// collapses (shortest first), edge flips (2D, or 3D behind a flag), and
// metric-Laplacian smoothing with an inversion guard. Sweeps repeat until the
// fraction of edges whose metric length lies in [collapse, split] reaches the
// target or the sweep limit is hit. Every candidate list is processed in a
// fixed order, so results are deterministic.

#include "eimesh/mesh.hpp"
#include "eimesh/metric.hpp"

#include <functional>
#include <optional>
#include <span>
#include <vector>

namespace eimesh {

struct AdaptOptions {
  double split_threshold = 1.4142135623730951;     // split edges longer than this
  double collapse_threshold = 0.7071067811865476;  // collapse edges shorter than this
  int max_sweeps = 10;
  int smoothing_passes = 1;
  double target_in_range = 0.9;  // stop once this fraction of edges is in range
  double flip_quality_floor = 0.0;  // flips never create elements below this quality
  bool flips_3d = false;         // 2-3 / 3-2 swaps in 3D

  // Bounds applied to interpolated metrics at created or moved nodes.
  std::optional<MetricBounds> bounds;

  // Optional exact re-evaluation of carried fields at created/moved nodes.
  // Receives the new position and the node's interpolated values to overwrite.
  std::function<void(const Vec3&, std::span<double>)> reevaluate;

  void validate() const;
};

struct AdaptStats {
  int sweeps = 0;
  std::size_t splits = 0;
  std::size_t collapses = 0;
  std::size_t flips = 0;
  std::size_t moves = 0;
  double in_range_fraction = 0.0;
  bool converged = false;  // target_in_range reached before the sweep limit
};

struct AdaptResult {
  SimplicialMesh mesh;
  std::vector<NodalField> fields;
  MetricField metric;
  AdaptStats stats;
};

// Mean of sqrt(X^T M_i X) and sqrt(X^T M_j X).
double metric_edge_length(const Vec3& x, const Mat3& mi, const Mat3& mj);
double metric_edge_length(const SimplicialMesh& mesh, const MetricField& metric, const Edge& edge);
std::vector<double> metric_edge_lengths(const SimplicialMesh& mesh, const MetricField& metric);

// Fraction of edges with metric length in [lo, hi].
double in_range_fraction(std::span<const double> lengths, double lo, double hi);

// Shape quality in the metric m (1 for the equilateral simplex, -> 0 when
// degenerate, negative when inverted). 2D: 4 sqrt(3) A / sum l^2;
// 3D: 12 (3 V)^(2/3) / sum l^2.
double simplex_quality(int dim, const Vec3* p, const Mat3& m);

// Euclidean aspect ratio, l_max / (2 sqrt(3) r_in) in 2D and
// l_max / (2 sqrt(6) r_in) in 3D; 1 for the regular simplex.
double aspect_ratio(int dim, const Vec3* p);

double element_quality(const SimplicialMesh& mesh, const MetricField& metric, std::size_t e);

AdaptResult adapt(const SimplicialMesh& mesh, const MetricField& metric, std::vector<NodalField> fields,
                  const AdaptOptions& options = {});

}  // namespace eimesh
