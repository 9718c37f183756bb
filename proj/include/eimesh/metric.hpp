#pragma once

// Edge-based a-posteriori error estimation and node-budget metric.
//
// For a nodal field U on a mesh with edge vectors X^ij = X^j - X^i:
//
//   G^i   = (sum_j X^ij (x) X^ij)^-1 sum_j U^ij X^ij        recovered gradient
//   e_ij  = |(G^j - G^i) . X^ij|                            edge error
//   M^i   = |Gamma(i)|/d (sum_j X^ij (x) X^ij)^-1            unit metric
//   n^i(1) = det[(sum_j u (x) u)^-1 (sum_j sqrt(e_ij) u (x) u)],  u = X^ij/|X^ij|
//   e     = (sum_i n^i(1) / N)^(2/d)                       balanced error
//   M~^i  = (1/e) |Gamma(i)|/d (sum_j X^ij (x) X^ij / e_ij)^-1
//
// Per-node work is independent; every kernel takes an Exec switch.

#include "eimesh/mesh.hpp"
#include "eimesh/parallel.hpp"

#include <span>
#include <vector>

namespace eimesh {

struct MetricBounds {
  double h_min = 0.0;       // smallest allowed edge length
  double h_max = 0.0;       // largest allowed edge length
  double ratio_max = 100.0; // largest allowed h_max/h_min per tensor

  void validate() const;

  // h_min = h0/4, h_max = domain diagonal / 4, ratio 100.
  static MetricBounds defaults(double h0, const Box& domain, int dim);
};

struct MetricField {
  int dim = 2;
  std::vector<Mat3> tensors;

  std::size_t size() const { return tensors.size(); }
  const Mat3& operator[](std::size_t i) const { return tensors[i]; }
  Mat3& operator[](std::size_t i) { return tensors[i]; }

  // Every tensor symmetric (1e-12 relative), eigenvalues inside
  // [1/h_max^2, 1/h_min^2] and ratio <= ratio_max^2, within rel_tol.
  bool satisfies(const MetricBounds& bounds, double rel_tol = 1e-9) const;
};

std::vector<Vec3> recover_gradient(const SimplicialMesh& mesh, std::span<const double> values,
                                   Exec exec = Exec::parallel);

// One value per mesh edge (same order as mesh.edges()).
std::vector<double> edge_errors(const SimplicialMesh& mesh, std::span<const Vec3> gradients);

// Raw unit metric (no clamping).
MetricField unit_metric(const SimplicialMesh& mesh, Exec exec = Exec::parallel);

struct EdgeErrorData {
  std::vector<double> edge_error;     // e_ij as estimated
  std::vector<double> floored_error;  // e_ij after the 1e-6 * max floor
  std::vector<double> created_edges;  // n_ij = sqrt(e_ij / e)
  std::vector<double> node_creation;  // n^i(1)
  double error = 0.0;                 // e
  double budget = 0.0;                // N
  double predicted_nodes = 0.0;       // sum_i sqrt(det(M~_i M_i^-1)) for the raw M~
  double calibration = 1.0;           // factor applied to M~ before regularization
  bool degenerate_error_field = false;
};

struct TargetMetric {
  MetricField raw;      // formula output, before calibration and clamping
  MetricField metric;   // calibrated and regularized
  EdgeErrorData data;
};

// With calibrate_count, M~ is scaled by (N / P)^(2/d) before clamping, where
// P = sum_i sqrt(det(M~_i M_i^-1)) counts the nodes M~ induces when every
// current node stands for one unit cell of its own unit metric. The balanced
// error e and the raw field are left exactly as the formulas give them.
TargetMetric target_metric(const SimplicialMesh& mesh, std::span<const double> values, double budget,
                           const MetricBounds& bounds, Exec exec = Exec::parallel, bool calibrate_count = true);

// Same as target_metric but starting from given per-edge errors.
TargetMetric target_metric_from_errors(const SimplicialMesh& mesh, std::span<const double> edge_error,
                                       double budget, const MetricBounds& bounds, Exec exec = Exec::parallel,
                                       bool calibrate_count = true);

// Clamps eigenvalues to [1/h_max^2, 1/h_min^2], then raises the smallest
// ones until lambda_max / lambda_min <= ratio_max^2.
Mat3 regularize(const Mat3& m, int dim, const MetricBounds& bounds);
MetricField regularize(const MetricField& metric, const MetricBounds& bounds, Exec exec = Exec::parallel);

// Largest metric whose unit ball fits in both inputs (simultaneous reduction).
Mat3 intersect(const Mat3& a, const Mat3& b, int dim);
MetricField intersect_metrics(const MetricField& a, const MetricField& b);

// Tensor-component linear interpolation sum_k w_k M_k.
Mat3 blend(std::span<const Mat3> tensors, std::span<const double> weights, int dim);

}  // namespace eimesh
