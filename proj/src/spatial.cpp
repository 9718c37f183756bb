#include "eimesh/spatial.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace eimesh {

NeighborIndex::NeighborIndex(std::span<const Vec3> points, int dim, int leaf_capacity)
    : dim_(dim), leaf_capacity_(leaf_capacity), points_(points.begin(), points.end()) {
  require(dim == 2 || dim == 3, "neighbor index: dim must be 2 or 3");
  require(leaf_capacity >= 1, "neighbor index: leaf capacity must be >= 1");
  if (points_.empty()) throw PreconditionError("neighbor index: empty point set");
  if (points_.size() > std::numeric_limits<std::uint32_t>::max())
    throw InvalidArgument("neighbor index: too many points");
  order_.resize(points_.size());
  for (std::uint32_t i = 0; i < order_.size(); ++i) order_[i] = i;
  nodes_.reserve(2 * points_.size() / leaf_capacity_ + 1);
  build(0, static_cast<std::uint32_t>(order_.size()));
}

std::int32_t NeighborIndex::build(std::uint32_t begin, std::uint32_t end) {
  const auto id = static_cast<std::int32_t>(nodes_.size());
  nodes_.emplace_back();
  Box box;
  for (std::uint32_t i = begin; i < end; ++i) box.extend(points_[order_[i]]);
  nodes_[id].box = box;
  nodes_[id].begin = begin;
  nodes_[id].end = end;
  if (end - begin <= static_cast<std::uint32_t>(leaf_capacity_)) return id;

  int axis = 0;
  const Vec3 ext = box.extent();
  for (int k = 1; k < dim_; ++k)
    if (ext[k] > ext[axis]) axis = k;
  if (ext[axis] <= 0.0) return id;  // all points coincide

  const std::uint32_t mid = begin + (end - begin) / 2;
  std::nth_element(order_.begin() + begin, order_.begin() + mid, order_.begin() + end,
                   [&](std::uint32_t a, std::uint32_t b) {
                     const double pa = points_[a][axis];
                     const double pb = points_[b][axis];
                     return pa < pb || (pa == pb && a < b);
                   });
  const std::int32_t left = build(begin, mid);
  const std::int32_t right = build(mid, end);
  nodes_[id].left = left;
  nodes_[id].right = right;
  return id;
}

// Lower bound on the squared distance from x to any point inside `box`.
// Each per-axis gap is <= the gap to any contained point and the sum is
// accumulated in the same axis order as squared_distance, so the bound never
// exceeds a computed point distance in floating point.
double NeighborIndex::box_distance2(const Box& box, const Vec3& x) const {
  double s = 0.0;
  for (int k = 0; k < dim_; ++k) {
    double d = 0.0;
    if (x[k] < box.lo[k])
      d = box.lo[k] - x[k];
    else if (x[k] > box.hi[k])
      d = x[k] - box.hi[k];
    s += d * d;
  }
  return s;
}

void NeighborIndex::search(std::int32_t id, const Vec3& x, std::size_t k,
                           std::vector<Neighbor>& best) const {
  const Node& node = nodes_[id];
  if (node.leaf()) {
    for (std::uint32_t i = node.begin; i < node.end; ++i) {
      const std::uint32_t p = order_[i];
      const Neighbor cand{p, squared_distance(points_[p], x, dim_)};
      if (best.size() == k && !(cand < best.back())) continue;
      auto pos = std::upper_bound(best.begin(), best.end(), cand);
      if (best.size() == k) best.pop_back();
      best.insert(pos, cand);
    }
    return;
  }
  const double dl = box_distance2(nodes_[node.left].box, x);
  const double dr = box_distance2(nodes_[node.right].box, x);
  const bool left_first = dl <= dr;
  const std::int32_t first = left_first ? node.left : node.right;
  const std::int32_t second = left_first ? node.right : node.left;
  const double d_first = left_first ? dl : dr;
  const double d_second = left_first ? dr : dl;
  // Equal distances must still be visited: a tie may carry a lower index.
  if (best.size() < k || d_first <= best.back().dist2) search(first, x, k, best);
  if (best.size() < k || d_second <= best.back().dist2) search(second, x, k, best);
}

void NeighborIndex::knn(const Vec3& x, std::size_t k, std::vector<Neighbor>& out) const {
  if (k < 1 || k > points_.size())
    throw InvalidArgument("knn: k=" + std::to_string(k) + " outside [1, " +
                          std::to_string(points_.size()) + "]");
  for (int d = 0; d < dim_; ++d)
    if (!std::isfinite(x[d])) throw InvalidArgument("knn: non-finite query point");
  out.clear();
  out.reserve(k + 1);
  search(0, x, k, out);
}

std::vector<Neighbor> NeighborIndex::knn(const Vec3& x, std::size_t k) const {
  std::vector<Neighbor> out;
  knn(x, k, out);
  return out;
}

Neighbor NeighborIndex::nearest(const Vec3& x) const {
  std::vector<Neighbor> out;
  knn(x, 1, out);
  return out.front();
}

}  // namespace eimesh
