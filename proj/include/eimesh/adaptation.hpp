#pragma once

// Alternating field sampling and remeshing.
//
// Each iteration: adapt the mesh to the current target metric (carrying the
// truncated field and the metric by interpolation), then evaluate the
// truncated EIMLS field once at every node of the new mesh and compute its
// target metric once. Row 0 of the statistics describes the initial mesh.

#include "eimesh/eimls.hpp"
#include "eimesh/metric.hpp"
#include "eimesh/remesh.hpp"

#include <functional>
#include <optional>
#include <vector>

namespace eimesh {

struct LoopOptions {
  EimlsConfig eimls;
  Box domain;
  double budget = 0.0;  // N, target node count
  int iterations = 10;
  double init_h = 0.0;  // initial isotropic spacing; 0 -> longest domain axis / 40
  std::optional<MetricBounds> bounds;  // default MetricBounds::defaults(h0, domain, dim)
  AdaptOptions adapt;
  bool reevaluate = false;  // exact EIMLS at nodes created mid-iteration
  Exec exec = Exec::parallel;

  void validate(int dim) const;
};

struct IterationStats {
  int iteration = 0;
  std::size_t nodes = 0;
  std::size_t elements = 0;
  double min_length = 0.0;  // metric edge lengths in the current target metric
  double median_length = 0.0;
  double max_length = 0.0;
  double in_range = 0.0;
  double level_set_measure = 0.0;  // contour length (2D) or surface area (3D)
  double enclosed = 0.0;           // enclosed area (2D) or volume (3D)
  double error = 0.0;              // balanced error e
  int sweeps = 0;
};

struct IterationState {
  int iteration;
  const SimplicialMesh& mesh;
  const std::vector<double>& alpha;
  const MetricField& metric;
  const IterationStats& stats;
};

struct LoopResult {
  SimplicialMesh mesh;
  std::vector<double> alpha;  // truncated field sampled on the final mesh
  MetricField metric;         // target metric of the final mesh
  std::vector<IterationStats> stats;  // iterations + 1 rows
};

LoopResult adaptation_loop(const EimlsField& field, const LoopOptions& options,
                           const std::function<void(const IterationState&)>& on_iteration = {});

// Starts from a given mesh instead of the isotropic box mesh.
LoopResult adaptation_loop(const EimlsField& field, SimplicialMesh initial, const LoopOptions& options,
                           const std::function<void(const IterationState&)>& on_iteration = {});

// Default initial spacing: longest domain axis / 40.
double default_init_h(const Box& domain, int dim);

std::string stats_csv(const std::vector<IterationStats>& stats);

}  // namespace eimesh
