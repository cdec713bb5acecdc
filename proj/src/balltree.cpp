#include "trajan/balltree.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <iterator>
#include <numeric>
#include <string>

#include "trajan/errors.hpp"

namespace trajan {

namespace {

// Relative slack applied to ball tests so that pruning never disagrees with
// the single-precision point predicate.
constexpr double kRelSlack = 1e-5;
constexpr double kAbsSlack = 1e-6;

double distance(const std::array<double, 3>& c, const Vec3& p) {
  const double dx = c[0] - p[0], dy = c[1] - p[1], dz = c[2] - p[2];
  return std::sqrt(dx * dx + dy * dy + dz * dz);
}

}  // namespace

float radius_squared(double cutoff) {
  if (!(cutoff > 0.0) || !std::isfinite(cutoff)) {
    throw UsageError("cutoff must be > 0 (got " + std::to_string(cutoff) + ")");
  }
  const float c = static_cast<float>(cutoff);
  return c * c;
}

BallTree BallTree::build(std::span<const Vec3> points, std::size_t leaf_size) {
  if (points.empty()) throw UsageError("ball tree needs at least one point");
  if (leaf_size == 0) throw UsageError("leaf_size must be >= 1");
  if (points.size() > UINT32_MAX) throw UsageError("too many points for ball tree");
  BallTree t;
  t.points_.assign(points.begin(), points.end());
  t.perm_.resize(points.size());
  std::iota(t.perm_.begin(), t.perm_.end(), VertexId{0});
  t.leaf_size_ = leaf_size;
  t.nodes_.reserve(2 * (points.size() / leaf_size + 1));
  t.build_node(0, static_cast<std::uint32_t>(points.size()));
  return t;
}

std::int32_t BallTree::build_node(std::uint32_t begin, std::uint32_t end) {
  const auto index = static_cast<std::int32_t>(nodes_.size());
  nodes_.emplace_back();
  Node node;
  node.begin = begin;
  node.end = end;

  std::array<double, 3> lo{INFINITY, INFINITY, INFINITY}, hi{-INFINITY, -INFINITY, -INFINITY};
  std::array<double, 3> sum{0, 0, 0};
  for (auto i = begin; i < end; ++i) {
    const auto& p = points_[perm_[i]];
    for (int a = 0; a < 3; ++a) {
      sum[a] += p[a];
      lo[a] = std::min(lo[a], double(p[a]));
      hi[a] = std::max(hi[a], double(p[a]));
    }
  }
  const double count = end - begin;
  for (int a = 0; a < 3; ++a) node.centroid[a] = sum[a] / count;
  double radius = 0.0;
  for (auto i = begin; i < end; ++i) radius = std::max(radius, distance(node.centroid, points_[perm_[i]]));
  node.radius = radius;

  if (end - begin > leaf_size_) {
    int axis = 0;
    for (int a = 1; a < 3; ++a) {
      if (hi[a] - lo[a] > hi[axis] - lo[axis]) axis = a;
    }
    const auto mid = begin + (end - begin) / 2;
    std::nth_element(perm_.begin() + begin, perm_.begin() + mid, perm_.begin() + end,
                     [&](VertexId x, VertexId y) {
                       const float px = points_[x][axis], py = points_[y][axis];
                       return px < py || (px == py && x < y);
                     });
    node.left = build_node(begin, mid);
    node.right = build_node(mid, end);
  }
  nodes_[index] = node;
  return index;
}

void BallTree::query_radius_into(const Vec3& center, float radius_sq,
                                 std::vector<VertexId>& out) const {
  const double r = std::sqrt(double(radius_sq));
  const double outer = r * (1 + kRelSlack) + kAbsSlack;
  const double inner = r * (1 - kRelSlack) - kAbsSlack;
  std::int32_t stack[128];
  int top = 0;
  stack[top++] = 0;
  while (top > 0) {
    const Node& node = nodes_[stack[--top]];
    const double d = distance(node.centroid, center);
    if (d - node.radius > outer) continue;
    if (d + node.radius < inner) {
      for (auto i = node.begin; i < node.end; ++i) out.push_back(perm_[i]);
      continue;
    }
    if (node.leaf()) {
      for (auto i = node.begin; i < node.end; ++i) {
        const auto p = perm_[i];
        if (within_radius(points_[p], center, radius_sq)) out.push_back(p);
      }
    } else {
      if (top + 2 > static_cast<int>(std::size(stack))) throw FormatError("ball tree too deep");
      stack[top++] = node.right;
      stack[top++] = node.left;
    }
  }
}

std::vector<VertexId> BallTree::query_radius(const Vec3& center, double r) const {
  std::vector<VertexId> out;
  query_radius_into(center, radius_squared(r), out);
  std::sort(out.begin(), out.end());
  return out;
}

std::size_t BallTree::depth() const {
  std::size_t best = 0;
  std::vector<std::pair<std::int32_t, std::size_t>> stack{{0, 1}};
  while (!stack.empty()) {
    auto [i, d] = stack.back();
    stack.pop_back();
    best = std::max(best, d);
    if (!nodes_[i].leaf()) {
      stack.push_back({nodes_[i].left, d + 1});
      stack.push_back({nodes_[i].right, d + 1});
    }
  }
  return best;
}

// Layout: u32 leaf_size | u32 n_points | u32 n_nodes | points (3 f32 each) |
// permutation (u32 each) | nodes (3 f64, f64, u32, u32, i32, i32).
Bytes BallTree::serialize() const {
  Bytes out;
  ByteWriter w(out);
  w.u32(static_cast<std::uint32_t>(leaf_size_));
  w.u32(static_cast<std::uint32_t>(points_.size()));
  w.u32(static_cast<std::uint32_t>(nodes_.size()));
  w.raw(points_.data(), points_.size() * sizeof(Vec3));
  w.raw(perm_.data(), perm_.size() * sizeof(VertexId));
  for (const auto& n : nodes_) {
    for (double c : n.centroid) w.f64(c);
    w.f64(n.radius);
    w.u32(n.begin);
    w.u32(n.end);
    w.u32(static_cast<std::uint32_t>(n.left));
    w.u32(static_cast<std::uint32_t>(n.right));
  }
  return out;
}

BallTree BallTree::deserialize(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes);
  BallTree t;
  t.leaf_size_ = r.u32();
  const auto n_points = r.u32();
  const auto n_nodes = r.u32();
  if (t.leaf_size_ == 0 || n_points == 0 || n_nodes == 0) throw FormatError("empty ball tree");
  r.expect_items(n_points, sizeof(Vec3) + sizeof(VertexId));
  t.points_.resize(n_points);
  auto pts = r.bytes(n_points * sizeof(Vec3));
  std::memcpy(t.points_.data(), pts.data(), pts.size());
  t.perm_.resize(n_points);
  auto perm = r.bytes(n_points * sizeof(VertexId));
  std::memcpy(t.perm_.data(), perm.data(), perm.size());
  r.expect_items(n_nodes, 48);
  t.nodes_.resize(n_nodes);
  for (auto& n : t.nodes_) {
    for (double& c : n.centroid) c = r.f64();
    n.radius = r.f64();
    n.begin = r.u32();
    n.end = r.u32();
    n.left = static_cast<std::int32_t>(r.u32());
    n.right = static_cast<std::int32_t>(r.u32());
  }
  r.expect_done();
  // Structural checks so a corrupted tree cannot index out of bounds.
  for (std::size_t i = 0; i < t.nodes_.size(); ++i) {
    const auto& n = t.nodes_[i];
    if (n.begin > n.end || n.end > n_points) throw FormatError("ball tree node range out of bounds");
    const bool leaf = n.left < 0;
    if (leaf != (n.right < 0)) throw FormatError("ball tree node has one child");
    if (!leaf && (n.left <= static_cast<std::int32_t>(i) || n.right <= static_cast<std::int32_t>(i) ||
                  n.left >= static_cast<std::int32_t>(n_nodes) ||
                  n.right >= static_cast<std::int32_t>(n_nodes))) {
      throw FormatError("ball tree child link out of bounds");
    }
  }
  for (auto p : t.perm_) {
    if (p >= n_points) throw FormatError("ball tree permutation out of bounds");
  }
  return t;
}

}  // namespace trajan
