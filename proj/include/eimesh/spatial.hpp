#pragma once

// Exact k-nearest-neighbor search over a fixed point set.
//
// Results are identical to sorting all points by squared Euclidean distance
// with ties broken by ascending index. The index is immutable after
// construction and safe for any number of concurrent readers.

#include "eimesh/types.hpp"

#include <cstdint>
#include <span>
#include <vector>

namespace eimesh {

struct Neighbor {
  std::uint32_t index = 0;
  double dist2 = 0.0;

  friend bool operator<(const Neighbor& a, const Neighbor& b) {
    return a.dist2 < b.dist2 || (a.dist2 == b.dist2 && a.index < b.index);
  }
  friend bool operator==(const Neighbor&, const Neighbor&) = default;
};

// Squared distance evaluated in the one order used everywhere (x, y, z), so
// that the tree and brute-force scans agree to the last bit.
inline double squared_distance(const Vec3& a, const Vec3& b, int dim) {
  double s = 0.0;
  for (int k = 0; k < dim; ++k) {
    const double d = a[k] - b[k];
    s += d * d;
  }
  return s;
}

class NeighborIndex {
 public:
  static constexpr int kDefaultLeafCapacity = 16;

  NeighborIndex(std::span<const Vec3> points, int dim, int leaf_capacity = kDefaultLeafCapacity);

  std::size_t size() const { return points_.size(); }
  int dim() const { return dim_; }
  int leaf_capacity() const { return leaf_capacity_; }
  const Vec3& point(std::size_t i) const { return points_[i]; }

  // k nearest points sorted by (distance, index). Requires 1 <= k <= size().
  std::vector<Neighbor> knn(const Vec3& x, std::size_t k) const;

  // Allocation-free variant for hot loops; `out` is resized to k.
  void knn(const Vec3& x, std::size_t k, std::vector<Neighbor>& out) const;

  Neighbor nearest(const Vec3& x) const;

 private:
  struct Node {
    Box box;
    std::uint32_t begin = 0;  // range into order_ (leaves)
    std::uint32_t end = 0;
    std::int32_t left = -1;   // children (internal nodes)
    std::int32_t right = -1;
    bool leaf() const { return left < 0; }
  };

  std::int32_t build(std::uint32_t begin, std::uint32_t end);
  double box_distance2(const Box& box, const Vec3& x) const;
  void search(std::int32_t node, const Vec3& x, std::size_t k, std::vector<Neighbor>& best) const;

  int dim_;
  int leaf_capacity_;
  std::vector<Vec3> points_;
  std::vector<std::uint32_t> order_;
  std::vector<Node> nodes_;
};

}  // namespace eimesh
