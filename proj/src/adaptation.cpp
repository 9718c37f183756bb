#include "eimesh/adaptation.hpp"

#include "eimesh/isosurface.hpp"
#include "eimesh/mesh_io.hpp"

#include <algorithm>
#include <cmath>

namespace eimesh {

void LoopOptions::validate(int dim) const {
  eimls.validate();
  require(!domain.empty() && (domain.extent().head(dim).array() > 0.0).all(), "adaptation: empty domain box");
  require(budget >= 100.0, "adaptation: node budget must be >= 100");
  require(iterations >= 0, "adaptation: iterations must be >= 0");
  require(init_h >= 0.0, "adaptation: init_h must be >= 0");
  if (bounds) bounds->validate();
  adapt.validate();
}

double default_init_h(const Box& domain, int dim) { return domain.extent().head(dim).maxCoeff() / 40.0; }

namespace {

IterationStats measure(int iteration, const SimplicialMesh& mesh, const std::vector<double>& alpha,
                       const TargetMetric& target, const AdaptOptions& adapt) {
  IterationStats s;
  s.iteration = iteration;
  s.nodes = mesh.num_nodes();
  s.elements = mesh.num_elements();
  auto lengths = metric_edge_lengths(mesh, target.metric);
  s.in_range = in_range_fraction(lengths, adapt.collapse_threshold, adapt.split_threshold);
  if (!lengths.empty()) {
    std::sort(lengths.begin(), lengths.end());
    s.min_length = lengths.front();
    s.max_length = lengths.back();
    const std::size_t n = lengths.size();
    s.median_length = n % 2 ? lengths[n / 2] : 0.5 * (lengths[n / 2 - 1] + lengths[n / 2]);
  }
  if (mesh.dim() == 2) {
    const auto contour = extract_contour_2d(mesh, alpha);
    s.level_set_measure = total_length(contour);
    s.enclosed = enclosed_area(contour);
  } else {
    const auto surface = extract_surface_3d(mesh, alpha);
    s.level_set_measure = surface.area();
    s.enclosed = surface.enclosed_volume();
  }
  s.error = target.data.error;
  return s;
}

}  // namespace

LoopResult adaptation_loop(const EimlsField& field, const LoopOptions& options,
                           const std::function<void(const IterationState&)>& on_iteration) {
  const int dim = field.dim();
  options.validate(dim);
  const double h = options.init_h > 0.0 ? options.init_h : default_init_h(options.domain, dim);
  return adaptation_loop(field, generate_box_mesh(options.domain, dim, h), options, on_iteration);
}

LoopResult adaptation_loop(const EimlsField& field, SimplicialMesh initial, const LoopOptions& options,
                           const std::function<void(const IterationState&)>& on_iteration) {
  const int dim = field.dim();
  options.validate(dim);
  require(initial.dim() == dim, "adaptation: mesh and cloud dimensions differ");
  const MetricBounds bounds = options.bounds ? *options.bounds : MetricBounds::defaults(options.eimls.h0, options.domain, dim);

  AdaptOptions aopt = options.adapt;
  aopt.bounds = bounds;
  if (options.reevaluate) {
    aopt.reevaluate = [&field](const Vec3& x, std::span<double> values) { values[0] = field.eval_truncated(x); };
  }

  LoopResult r;
  r.mesh = std::move(initial);
  r.alpha = sample_at(field, r.mesh.nodes(), true, options.exec);
  TargetMetric target = target_metric(r.mesh, r.alpha, options.budget, bounds, options.exec);
  r.stats.push_back(measure(0, r.mesh, r.alpha, target, aopt));
  if (on_iteration) on_iteration({0, r.mesh, r.alpha, target.metric, r.stats.back()});

  for (int it = 1; it <= options.iterations; ++it) {
    auto res = adapt(r.mesh, target.metric, {NodalField{"alpha", r.alpha}}, aopt);
    r.mesh = std::move(res.mesh);
    r.alpha = sample_at(field, r.mesh.nodes(), true, options.exec);
    target = target_metric(r.mesh, r.alpha, options.budget, bounds, options.exec);
    r.stats.push_back(measure(it, r.mesh, r.alpha, target, aopt));
    r.stats.back().sweeps = res.stats.sweeps;
    if (on_iteration) on_iteration({it, r.mesh, r.alpha, target.metric, r.stats.back()});
  }
  r.metric = std::move(target.metric);
  return r;
}

std::string stats_csv(const std::vector<IterationStats>& stats) {
  std::string s =
      "iteration,nodes,elements,min_length,median_length,max_length,in_range,level_set_measure,enclosed,error,"
      "sweeps\n";
  for (const auto& r : stats) {
    s += std::to_string(r.iteration) + "," + std::to_string(r.nodes) + "," + std::to_string(r.elements) + "," +
         format_double(r.min_length) + "," + format_double(r.median_length) + "," + format_double(r.max_length) +
         "," + format_double(r.in_range) + "," + format_double(r.level_set_measure) + "," +
         format_double(r.enclosed) + "," + format_double(r.error) + "," + std::to_string(r.sweeps) + "\n";
  }
  return s;
}

}  // namespace eimesh
