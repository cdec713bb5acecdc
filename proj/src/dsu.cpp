#include "trajan/dsu.hpp"

#include <limits>
#include <numeric>
#include <string>

#include "trajan/errors.hpp"

namespace trajan {

DisjointSet::DisjointSet(std::size_t n) : parent_(n), rank_(n, 0) {
  if (n > std::numeric_limits<VertexId>::max()) {
    throw UsageError("disjoint set too large: " + std::to_string(n));
  }
  std::iota(parent_.begin(), parent_.end(), VertexId{0});
}

void DisjointSet::check(VertexId x) const {
  if (x >= parent_.size()) {
    throw UsageError("vertex " + std::to_string(x) + " out of range for set of size " +
                     std::to_string(parent_.size()));
  }
}

VertexId DisjointSet::find(VertexId x) {
  check(x);
  while (parent_[x] != x) {
    parent_[x] = parent_[parent_[x]];
    x = parent_[x];
  }
  return x;
}

bool DisjointSet::unite(VertexId a, VertexId b) {
  a = find(a);
  b = find(b);
  if (a == b) return false;
  if (rank_[a] < rank_[b]) std::swap(a, b);
  parent_[b] = a;
  if (rank_[a] == rank_[b]) ++rank_[a];
  return true;
}

ComponentSet DisjointSet::components() {
  std::vector<std::uint32_t> roots(parent_.size());
  for (std::size_t v = 0; v < parent_.size(); ++v) {
    roots[v] = find(static_cast<VertexId>(v));
  }
  return canonicalize(roots);
}

ComponentSet connected_components(const EdgeList& graph) {
  DisjointSet set(graph.n_vertices);
  for (const auto& e : graph.edges) set.unite(e.u, e.v);
  return set.components();
}

}  // namespace trajan
