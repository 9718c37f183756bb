#pragma once

#include "eimesh/parallel.hpp"
#include "eimesh/types.hpp"

#include <cstddef>
#include <span>
#include <vector>

namespace eimesh {

// Positions with optional unit normals and optional scanner origins.
// 2D clouds keep z = 0.
struct OrientedPointCloud {
  int dim = 3;
  std::vector<Vec3> points;
  std::vector<Vec3> normals;       // empty, or one per point
  std::vector<Vec3> scan_origins;  // empty, one global origin, or one per point
  bool normals_oriented = true;    // false when signs were left as produced by PCA

  std::size_t size() const { return points.size(); }
  bool empty() const { return points.empty(); }
  bool has_normals() const { return !normals.empty(); }
  bool has_origins() const { return !scan_origins.empty(); }

  const Vec3& origin_of(std::size_t i) const {
    return scan_origins.size() == 1 ? scan_origins.front() : scan_origins[i];
  }

  Box bounding_box() const;

  // Throws PreconditionError on a broken invariant: normal count or unit
  // length, origin count, non-finite coordinates, non-zero z in 2D.
  void validate() const;

  // Subset in the given index order; normals and per-point origins follow.
  OrientedPointCloud select(std::span<const std::size_t> indices) const;
};

struct FilterResult {
  OrientedPointCloud cloud;
  std::size_t removed = 0;
};

// Drops points whose k-th nearest neighbor (self excluded) is farther than
// max_dist. Re-applied on the survivors until nothing changes, so every
// survivor satisfies the bound within the output cloud.
FilterResult remove_outliers_density(const OrientedPointCloud& cloud, int k, double max_dist,
                                     Exec exec = Exec::parallel);

// Drops points seen under a grazing angle: the angle between the scan ray and
// the local tangent plane, asin(|n . u|) with u the unit vector from the point
// toward its scanner origin, is below min_angle_deg. Symmetric in normal sign.
FilterResult remove_grazing(const OrientedPointCloud& cloud, double min_angle_deg);

// Keeps at most one point per occupied leaf of an axis-aligned octree
// (quadtree in 2D) with leaves of edge leaf_size anchored at the origin.
// The representative is the input point nearest to the mean of the points in
// its leaf (lowest index on ties). Output preserves input order.
OrientedPointCloud subsample_octree(const OrientedPointCloud& cloud, double leaf_size);

// PCA normals from the k nearest neighbors (self included). Signs are flipped
// toward the scan origin when one is known; otherwise normals_oriented=false.
OrientedPointCloud estimate_normals(const OrientedPointCloud& cloud, int k,
                                    Exec exec = Exec::parallel);

}  // namespace eimesh
