#include "eimesh/pointcloud.hpp"

#include "eimesh/linalg.hpp"
#include "eimesh/spatial.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <numbers>
#include <string>

namespace eimesh {

Box OrientedPointCloud::bounding_box() const {
  Box box;
  for (const auto& p : points) box.extend(p);
  return box;
}

void OrientedPointCloud::validate() const {
  if (dim != 2 && dim != 3) throw PreconditionError("cloud: dim must be 2 or 3");
  if (!normals.empty() && normals.size() != points.size())
    throw PreconditionError("cloud: " + std::to_string(normals.size()) + " normals for " +
                            std::to_string(points.size()) + " points");
  if (!scan_origins.empty() && scan_origins.size() != 1 && scan_origins.size() != points.size())
    throw PreconditionError("cloud: scan origins must be global or one per point");
  for (std::size_t i = 0; i < points.size(); ++i) {
    if (!points[i].allFinite())
      throw PreconditionError("cloud: non-finite coordinate at point " + std::to_string(i));
    if (dim == 2 && points[i].z() != 0.0)
      throw PreconditionError("cloud: 2D point " + std::to_string(i) + " has non-zero z");
  }
  for (std::size_t i = 0; i < normals.size(); ++i) {
    if (!normals[i].allFinite() || std::abs(normals[i].norm() - 1.0) > 1e-9)
      throw PreconditionError("cloud: normal " + std::to_string(i) + " is not unit length");
  }
}

OrientedPointCloud OrientedPointCloud::select(std::span<const std::size_t> indices) const {
  OrientedPointCloud out;
  out.dim = dim;
  out.normals_oriented = normals_oriented;
  out.points.reserve(indices.size());
  for (auto i : indices) out.points.push_back(points[i]);
  if (has_normals()) {
    out.normals.reserve(indices.size());
    for (auto i : indices) out.normals.push_back(normals[i]);
  }
  if (scan_origins.size() == 1) {
    out.scan_origins = scan_origins;
  } else if (!scan_origins.empty()) {
    for (auto i : indices) out.scan_origins.push_back(scan_origins[i]);
  }
  return out;
}

FilterResult remove_outliers_density(const OrientedPointCloud& cloud, int k, double max_dist,
                                     Exec exec) {
  require(k >= 1, "remove_outliers_density: k must be >= 1");
  require(max_dist > 0.0, "remove_outliers_density: max_dist must be > 0");
  if (static_cast<std::size_t>(k) >= cloud.size())
    throw InvalidArgument("remove_outliers_density: k=" + std::to_string(k) +
                          " needs at least k+1 points, cloud has " + std::to_string(cloud.size()));

  const double limit2 = max_dist * max_dist;
  OrientedPointCloud current = cloud;
  for (;;) {
    const std::size_t n = current.size();
    std::vector<char> keep(n, 0);
    if (n > static_cast<std::size_t>(k)) {
      NeighborIndex index(current.points, current.dim);
      for_each_index(n, exec, [&](std::size_t i) {
        std::vector<Neighbor> nb;
        index.knn(current.points[i], static_cast<std::size_t>(k) + 1, nb);
        // nb[0] is the point itself (or a duplicate at distance 0).
        keep[i] = nb.back().dist2 <= limit2 ? 1 : 0;
      });
    }
    std::vector<std::size_t> survivors;
    for (std::size_t i = 0; i < n; ++i)
      if (keep[i]) survivors.push_back(i);
    if (survivors.size() == n) break;
    current = current.select(survivors);
  }
  return {current, cloud.size() - current.size()};
}

FilterResult remove_grazing(const OrientedPointCloud& cloud, double min_angle_deg) {
  if (!cloud.has_normals()) throw PreconditionError("remove_grazing: cloud has no normals");
  if (!cloud.has_origins()) throw PreconditionError("remove_grazing: cloud has no scan origins");
  require(min_angle_deg >= 0.0 && min_angle_deg <= 90.0,
          "remove_grazing: min_angle must be within [0, 90] degrees");
  const double min_angle = min_angle_deg * std::numbers::pi / 180.0;
  std::vector<std::size_t> survivors;
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const Vec3 ray = cloud.origin_of(i) - cloud.points[i];
    const double len = ray.norm();
    if (len == 0.0) continue;  // point at the scanner: no incidence defined
    const double c = std::min(1.0, std::abs(cloud.normals[i].dot(ray)) / len);
    if (std::asin(c) >= min_angle) survivors.push_back(i);
  }
  return {cloud.select(survivors), cloud.size() - survivors.size()};
}

OrientedPointCloud subsample_octree(const OrientedPointCloud& cloud, double leaf_size) {
  require(leaf_size > 0.0 && std::isfinite(leaf_size), "subsample_octree: leaf_size must be > 0");
  using Key = std::array<std::int64_t, 3>;
  struct Leaf {
    std::vector<std::size_t> members;
    Vec3 sum = Vec3::Zero();
  };
  std::map<Key, Leaf> leaves;
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    Key key{0, 0, 0};
    for (int a = 0; a < cloud.dim; ++a)
      key[a] = static_cast<std::int64_t>(std::floor(cloud.points[i][a] / leaf_size));
    Leaf& leaf = leaves[key];
    leaf.members.push_back(i);
    leaf.sum += cloud.points[i];
  }
  std::vector<std::size_t> chosen;
  chosen.reserve(leaves.size());
  for (const auto& [key, leaf] : leaves) {
    const Vec3 centroid = leaf.sum / static_cast<double>(leaf.members.size());
    std::size_t best = leaf.members.front();
    double best_d = squared_distance(cloud.points[best], centroid, cloud.dim);
    for (auto i : leaf.members) {
      const double d = squared_distance(cloud.points[i], centroid, cloud.dim);
      if (d < best_d) {  // members are ascending: ties keep the lower index
        best = i;
        best_d = d;
      }
    }
    chosen.push_back(best);
  }
  std::sort(chosen.begin(), chosen.end());
  return cloud.select(chosen);
}

OrientedPointCloud estimate_normals(const OrientedPointCloud& cloud, int k, Exec exec) {
  const int dim = cloud.dim;
  require(k >= dim + 1, "estimate_normals: k must be >= dim+1");
  if (cloud.size() < static_cast<std::size_t>(k))
    throw PreconditionError("estimate_normals: cloud has fewer than k points");

  NeighborIndex index(cloud.points, dim);
  OrientedPointCloud out = cloud;
  out.normals.assign(cloud.size(), Vec3::Zero());
  const bool orient = cloud.has_origins();

  for_each_index(cloud.size(), exec, [&](std::size_t i) {
    std::vector<Neighbor> nb;
    index.knn(cloud.points[i], static_cast<std::size_t>(k), nb);
    Vec3 mean = Vec3::Zero();
    for (const auto& n : nb) mean += cloud.points[n.index];
    mean /= static_cast<double>(nb.size());
    Mat3 cov = Mat3::Zero();
    for (const auto& n : nb) cov += linalg::outer(cloud.points[n.index] - mean);
    cov /= static_cast<double>(nb.size());
    const double scale = mean.head(dim).cwiseAbs().maxCoeff() + 1.0;
    if (linalg::trace(cov, dim) <= 1e-30 * scale * scale)
      throw PreconditionError("estimate_normals: degenerate neighborhood (zero covariance) at point " +
                              std::to_string(i) + "; increase k");
    const auto es = linalg::eigen_sym(cov, dim);
    Vec3 n = Vec3::Zero();
    n.head(dim) = es.vectors.col(0).head(dim);
    n.normalize();
    if (orient && n.dot(cloud.origin_of(i) - cloud.points[i]) < 0.0) n = -n;
    out.normals[i] = n;
  });
  out.normals_oriented = orient;
  return out;
}

}  // namespace eimesh
