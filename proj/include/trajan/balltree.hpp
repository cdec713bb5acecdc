#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "trajan/bytes.hpp"
#include "trajan/core.hpp"

namespace trajan {

// Squared-distance predicate shared by every edge-discovery path. Evaluated
// in single precision in a fixed operation order so that pairwise and tree
// searches agree on points lying exactly at the cutoff.
inline bool within_radius(const Vec3& a, const Vec3& b, float radius_sq) {
  const float dx = a[0] - b[0];
  const float dy = a[1] - b[1];
  const float dz = a[2] - b[2];
  return dx * dx + dy * dy + dz * dz <= radius_sq;
}

// Squares a cutoff for within_radius; UsageError unless cutoff > 0.
float radius_squared(double cutoff);

// Ball tree over a copy of the input points. Nodes are stored in preorder;
// each node bounds the points of its subtree by a ball around their
// centroid. Split rule: axis of widest coordinate spread, median split.
class BallTree {
 public:
  struct Node {
    std::array<double, 3> centroid{};
    double radius = 0.0;
    std::uint32_t begin = 0;  // range into permutation()
    std::uint32_t end = 0;
    std::int32_t left = -1;
    std::int32_t right = -1;

    bool leaf() const { return left < 0; }
  };

  static BallTree build(std::span<const Vec3> points, std::size_t leaf_size);

  // Indices (into the build input) of points within distance r of center,
  // boundary inclusive, sorted ascending. UsageError unless r > 0.
  std::vector<VertexId> query_radius(const Vec3& center, double r) const;
  // Unsorted variant appending to `out`; radius given pre-squared.
  void query_radius_into(const Vec3& center, float radius_sq, std::vector<VertexId>& out) const;

  std::span<const Node> nodes() const { return nodes_; }
  std::span<const VertexId> permutation() const { return perm_; }
  std::span<const Vec3> points() const { return points_; }
  std::size_t leaf_size() const { return leaf_size_; }
  std::size_t depth() const;

  Bytes serialize() const;
  static BallTree deserialize(std::span<const std::uint8_t> bytes);

 private:
  std::int32_t build_node(std::uint32_t begin, std::uint32_t end);

  std::vector<Vec3> points_;
  std::vector<VertexId> perm_;
  std::vector<Node> nodes_;
  std::size_t leaf_size_ = 1;
};

}  // namespace trajan
