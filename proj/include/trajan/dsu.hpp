#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "trajan/core.hpp"

namespace trajan {

// Union-find with union by rank and path halving. Single writer; may be
// moved between threads but not mutated concurrently.
class DisjointSet {
 public:
  explicit DisjointSet(std::size_t n);

  VertexId find(VertexId x);
  // Returns true when a and b were in different sets before the call.
  bool unite(VertexId a, VertexId b);
  ComponentSet components();

  std::size_t size() const { return parent_.size(); }

 private:
  void check(VertexId x) const;

  std::vector<VertexId> parent_;
  std::vector<std::uint8_t> rank_;
};

ComponentSet connected_components(const EdgeList& graph);

}  // namespace trajan
