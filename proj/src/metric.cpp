#include "eimesh/metric.hpp"

#include "eimesh/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace eimesh {
namespace {

// sum_j X^ij (x) X^ij, regularized at boundary or ill-conditioned nodes.
Mat3 conditioned(Mat3 s, int dim, bool boundary, std::size_t node) {
  const double tr = linalg::trace(s, dim);
  const double scale = std::pow(tr / dim, dim);
  if (boundary || !(linalg::det(s, dim) > 1e-10 * scale)) {
    for (int a = 0; a < dim; ++a) s(a, a) += 1e-12 * tr;
  }
  const double d = linalg::det(s, dim);
  if (!(d > 0.0) || !std::isfinite(d) || !(tr > 0.0))
    throw PreconditionError("metric: star of node " + std::to_string(node) + " does not span the space");
  return s;
}

Mat3 star_matrix(const SimplicialMesh& mesh, std::size_t i) {
  Mat3 s = Mat3::Zero();
  const Vec3& xi = mesh.node(i);
  for (const auto j : mesh.star(i)) s += linalg::outer(mesh.node(static_cast<std::size_t>(j)) - xi);
  return s;
}

}  // namespace

void MetricBounds::validate() const {
  require(h_min > 0.0 && std::isfinite(h_min), "metric bounds: h_min must be > 0");
  require(h_max >= h_min && std::isfinite(h_max), "metric bounds: h_max must be >= h_min");
  require(ratio_max >= 1.0, "metric bounds: ratio_max must be >= 1");
}

MetricBounds MetricBounds::defaults(double h0, const Box& domain, int dim) {
  MetricBounds b;
  b.h_min = h0 / 4.0;
  b.h_max = domain.diagonal(dim) / 4.0;
  b.ratio_max = 100.0;
  b.h_max = std::max(b.h_max, b.h_min);
  return b;
}

bool MetricField::satisfies(const MetricBounds& bounds, double rel_tol) const {
  const double lo = 1.0 / (bounds.h_max * bounds.h_max);
  const double hi = 1.0 / (bounds.h_min * bounds.h_min);
  const double ratio2 = bounds.ratio_max * bounds.ratio_max;
  for (const auto& m : tensors) {
    if (!m.allFinite() || !linalg::is_symmetric(m, dim, 1e-12)) return false;
    const auto es = linalg::eigen_sym(m, dim);
    const double lmin = es.values[0];
    const double lmax = es.values[dim - 1];
    if (!(lmin > 0.0)) return false;
    if (lmin < lo * (1.0 - rel_tol) || lmax > hi * (1.0 + rel_tol)) return false;
    if (lmax / lmin > ratio2 * (1.0 + rel_tol)) return false;
  }
  return true;
}

std::vector<Vec3> recover_gradient(const SimplicialMesh& mesh, std::span<const double> values, Exec exec) {
  require(values.size() == mesh.num_nodes(), "recover_gradient: field size does not match node count");
  const int dim = mesh.dim();
  std::vector<Vec3> grads(mesh.num_nodes(), Vec3::Zero());
  for_each_index(mesh.num_nodes(), exec, [&](std::size_t i) {
    const Vec3& xi = mesh.node(i);
    Mat3 s = Mat3::Zero();
    Vec3 rhs = Vec3::Zero();
    for (const auto j : mesh.star(i)) {
      const Vec3 x = mesh.node(static_cast<std::size_t>(j)) - xi;
      s += linalg::outer(x);
      rhs += (values[static_cast<std::size_t>(j)] - values[i]) * x;
    }
    s = conditioned(s, dim, mesh.on_boundary(i), i);
    grads[i] = linalg::inverse(s, dim) * rhs;
  });
  return grads;
}

std::vector<double> edge_errors(const SimplicialMesh& mesh, std::span<const Vec3> gradients) {
  require(gradients.size() == mesh.num_nodes(), "edge_errors: gradient count does not match node count");
  const auto edges = mesh.edges();
  std::vector<double> out(edges.size());
  for (std::size_t k = 0; k < edges.size(); ++k) {
    const auto [a, b] = edges[k];
    const Vec3 x = mesh.node(static_cast<std::size_t>(b)) - mesh.node(static_cast<std::size_t>(a));
    out[k] = std::abs((gradients[static_cast<std::size_t>(b)] - gradients[static_cast<std::size_t>(a)]).dot(x));
  }
  return out;
}

MetricField unit_metric(const SimplicialMesh& mesh, Exec exec) {
  const int dim = mesh.dim();
  MetricField out;
  out.dim = dim;
  out.tensors.assign(mesh.num_nodes(), Mat3::Zero());
  for_each_index(mesh.num_nodes(), exec, [&](std::size_t i) {
    const Mat3 s = conditioned(star_matrix(mesh, i), dim, mesh.on_boundary(i), i);
    const double valence = static_cast<double>(mesh.star(i).size());
    out.tensors[i] = linalg::symmetrize((valence / dim) * linalg::inverse(s, dim));
  });
  return out;
}

TargetMetric target_metric_from_errors(const SimplicialMesh& mesh, std::span<const double> edge_error,
                                       double budget, const MetricBounds& bounds, Exec exec, bool calibrate_count) {
  const int dim = mesh.dim();
  require(edge_error.size() == mesh.num_edges(), "target_metric: one error per edge required");
  require(budget >= dim + 1, "target_metric: node budget must be >= d+1");
  bounds.validate();
  const std::size_t n = mesh.num_nodes();

  TargetMetric out;
  out.raw.dim = out.metric.dim = dim;
  out.raw.tensors.assign(n, Mat3::Zero());
  auto& data = out.data;
  data.budget = budget;
  data.edge_error.assign(edge_error.begin(), edge_error.end());

  const double max_error = edge_error.empty() ? 0.0 : *std::max_element(edge_error.begin(), edge_error.end());
  if (!(max_error >= 1e-14)) {
    // Linear field: nothing to equidistribute. Scale the unit metric so the
    // node count follows the budget.
    data.degenerate_error_field = true;
    data.floored_error = data.edge_error;
    data.error = 0.0;
    data.created_edges.assign(edge_error.size(), 1.0);
    data.node_creation.assign(n, 0.0);
    const double c = std::pow(budget / static_cast<double>(n), 2.0 / dim);
    out.raw = unit_metric(mesh, exec);
    for (auto& m : out.raw.tensors) m *= c;
    data.predicted_nodes = budget;
    out.metric = regularize(out.raw, bounds, exec);
    return out;
  }

  const double floor = 1e-6 * max_error;
  data.floored_error.resize(edge_error.size());
  for (std::size_t k = 0; k < edge_error.size(); ++k) data.floored_error[k] = std::max(edge_error[k], floor);
  const auto& ef = data.floored_error;

  data.node_creation.assign(n, 0.0);
  std::vector<Mat3> weighted(n, Mat3::Zero());
  std::vector<Mat3> plain(n, Mat3::Zero());
  for_each_index(n, exec, [&](std::size_t i) {
    const Vec3& xi = mesh.node(i);
    Mat3 unit_sum = Mat3::Zero();
    Mat3 root_sum = Mat3::Zero();
    Mat3 inv_err_sum = Mat3::Zero();
    Mat3 sum = Mat3::Zero();
    const auto star = mesh.star(i);
    const auto ids = mesh.star_edges(i);
    for (std::size_t k = 0; k < star.size(); ++k) {
      const Vec3 x = mesh.node(static_cast<std::size_t>(star[k])) - xi;
      const double e = ef[static_cast<std::size_t>(ids[k])];
      const Mat3 uu = linalg::outer(x / x.norm());
      unit_sum += uu;
      root_sum += std::sqrt(e) * uu;
      inv_err_sum += linalg::outer(x) / e;
      sum += linalg::outer(x);
    }
    unit_sum = conditioned(unit_sum, dim, mesh.on_boundary(i), i);
    const double nc = linalg::det(linalg::inverse(unit_sum, dim) * root_sum, dim);
    data.node_creation[i] = std::max(nc, 0.0);
    weighted[i] = conditioned(inv_err_sum, dim, mesh.on_boundary(i), i);
    plain[i] = conditioned(sum, dim, mesh.on_boundary(i), i);
  });

  const double total = std::accumulate(data.node_creation.begin(), data.node_creation.end(), 0.0);
  if (!(total > 0.0)) throw InternalError("target_metric: node creation sum is zero");
  data.error = std::pow(total / budget, 2.0 / dim);

  // Nodes induced by a metric field T when every current node stands for one
  // unit cell of its own unit metric: sum_i sqrt(det(T_i M_i^-1)), with
  // M_i^-1 = d/|Gamma| sum X (x) X.
  auto predicted = [&](const std::vector<Mat3>& t) {
    std::vector<double> ratio(n, 0.0);
    for_each_index(n, exec, [&](std::size_t i) {
      const double valence = static_cast<double>(mesh.star(i).size());
      const double r = linalg::det(t[i] * plain[i], dim) * std::pow(dim / valence, dim);
      ratio[i] = std::sqrt(std::max(r, 0.0));
    });
    return std::accumulate(ratio.begin(), ratio.end(), 0.0);
  };

  for_each_index(n, exec, [&](std::size_t i) {
    const double valence = static_cast<double>(mesh.star(i).size());
    out.raw.tensors[i] = linalg::symmetrize((valence / dim / data.error) * linalg::inverse(weighted[i], dim));
  });
  data.created_edges.resize(ef.size());
  for (std::size_t k = 0; k < ef.size(); ++k) data.created_edges[k] = std::sqrt(ef[k] / data.error);
  data.predicted_nodes = predicted(out.raw.tensors);

  if (!calibrate_count || !(data.predicted_nodes > 0.0)) {
    out.metric = regularize(out.raw, bounds, exec);
    return out;
  }
  // Scale so the clamped field induces N nodes. The count grows monotonically
  // with the scale; clamping makes it sublinear, hence a few corrections.
  double c = std::pow(budget / data.predicted_nodes, 2.0 / dim);
  MetricField scaled = out.raw;
  for (int pass = 0; pass < 8; ++pass) {
    for (std::size_t i = 0; i < n; ++i) scaled.tensors[i] = c * out.raw.tensors[i];
    out.metric = regularize(scaled, bounds, exec);
    const double p = predicted(out.metric.tensors);
    if (!(p > 0.0) || std::abs(p / budget - 1.0) < 1e-3) break;
    c *= std::pow(budget / p, 2.0 / dim);
  }
  data.calibration = c;
  return out;
}

TargetMetric target_metric(const SimplicialMesh& mesh, std::span<const double> values, double budget,
                           const MetricBounds& bounds, Exec exec, bool calibrate_count) {
  for (const double v : values)
    if (!std::isfinite(v)) throw PreconditionError("target_metric: non-finite nodal value");
  const auto grads = recover_gradient(mesh, values, exec);
  auto errors = edge_errors(mesh, grads);
  // A linear field leaves only rounding in e_ij (boundary stars carry a 1e-12
  // relative shift). Errors that small against the field's own variation are
  // treated as zero so the linear-field fallback applies.
  double variation = 0.0, max_error = 0.0;
  for (std::size_t k = 0; k < errors.size(); ++k) {
    const auto& e = mesh.edges()[k];
    variation = std::max(variation, std::abs(values[static_cast<std::size_t>(e.b)] - values[static_cast<std::size_t>(e.a)]));
    max_error = std::max(max_error, errors[k]);
  }
  if (max_error <= 1e-10 * variation) std::fill(errors.begin(), errors.end(), 0.0);
  return target_metric_from_errors(mesh, errors, budget, bounds, exec, calibrate_count);
}

Mat3 regularize(const Mat3& m, int dim, const MetricBounds& bounds) {
  if (!m.allFinite()) throw InvalidArgument("regularize: non-finite tensor");
  if (!linalg::is_symmetric(m, dim, 1e-9)) throw InvalidArgument("regularize: tensor is not symmetric");
  const double lo = 1.0 / (bounds.h_max * bounds.h_max);
  const double hi = 1.0 / (bounds.h_min * bounds.h_min);
  const double ratio2 = bounds.ratio_max * bounds.ratio_max;
  auto es = linalg::eigen_sym(linalg::symmetrize(m), dim);
  const double lmin0 = es.values[0];
  const double lmax0 = es.values[dim - 1];
  if (lmin0 >= lo && lmax0 <= hi && lmax0 <= ratio2 * lmin0) return linalg::leading_block(m, dim);
  double lmax = 0.0;
  for (int k = 0; k < dim; ++k) {
    es.values[k] = std::clamp(es.values[k], lo, hi);
    lmax = std::max(lmax, es.values[k]);
  }
  const double floor = lmax / ratio2;
  for (int k = 0; k < dim; ++k) es.values[k] = std::max(es.values[k], floor);
  return linalg::compose(es, dim);
}

MetricField regularize(const MetricField& metric, const MetricBounds& bounds, Exec exec) {
  bounds.validate();
  MetricField out;
  out.dim = metric.dim;
  out.tensors.resize(metric.size());
  for_each_index(metric.size(), exec,
                 [&](std::size_t i) { out.tensors[i] = regularize(metric.tensors[i], metric.dim, bounds); });
  return out;
}

Mat3 intersect(const Mat3& a, const Mat3& b, int dim) {
  const Mat3 l = linalg::cholesky(a, dim);
  const Mat3 linv = linalg::inverse(l, dim);
  const Mat3 c = linalg::symmetrize(linv * b * linv.transpose());
  auto es = linalg::eigen_sym(c, dim);
  for (int k = 0; k < dim; ++k) es.values[k] = std::max(es.values[k], 1.0);
  return linalg::leading_block(linalg::symmetrize(l * linalg::compose(es, dim) * l.transpose()), dim);
}

MetricField intersect_metrics(const MetricField& a, const MetricField& b) {
  require(a.size() == b.size() && a.dim == b.dim, "intersect_metrics: metric fields differ in size");
  MetricField out;
  out.dim = a.dim;
  out.tensors.resize(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out.tensors[i] = intersect(a.tensors[i], b.tensors[i], a.dim);
  return out;
}

Mat3 blend(std::span<const Mat3> tensors, std::span<const double> weights, int dim) {
  Mat3 r = Mat3::Zero();
  for (std::size_t k = 0; k < tensors.size(); ++k) r += weights[k] * tensors[k];
  return linalg::leading_block(linalg::symmetrize(r), dim);
}

}  // namespace eimesh
