#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace trajan {

// Positions are stored in single precision (nanometers).
using Vec3 = std::array<float, 3>;
using VertexId = std::uint32_t;

struct Frame {
  std::vector<Vec3> positions;

  std::size_t n_atoms() const { return positions.size(); }
  bool operator==(const Frame&) const = default;
};

struct Trajectory {
  std::string id;
  std::vector<Frame> frames;

  std::size_t n_frames() const { return frames.size(); }
  std::size_t n_atoms() const {
    return frames.empty() ? 0 : frames.front().n_atoms();
  }
  bool operator==(const Trajectory&) const = default;
};

// One snapshot of a particle system (Leaflet Finder input).
struct System {
  std::string id;
  std::vector<Vec3> positions;

  std::size_t n_atoms() const { return positions.size(); }
  bool operator==(const System&) const = default;
};

struct Edge {
  VertexId u = 0;
  VertexId v = 0;
  bool operator==(const Edge&) const = default;
  auto operator<=>(const Edge&) const = default;
};

struct EdgeList {
  std::size_t n_vertices = 0;
  std::vector<Edge> edges;
};

// Dense assignment of every vertex to a component id in 0..n_components-1.
// Ids are canonical: numbered by first appearance in vertex-index order, so
// two ComponentSets describing the same partition compare equal.
struct ComponentSet {
  std::vector<std::uint32_t> assignment;
  std::size_t n_components = 0;

  std::size_t n_vertices() const { return assignment.size(); }
  std::vector<std::size_t> sizes() const;
  std::vector<std::vector<VertexId>> groups() const;
  bool operator==(const ComponentSet&) const = default;
};

// Relabels an arbitrary vertex->label map into canonical ComponentSet form.
ComponentSet canonicalize(const std::vector<std::uint32_t>& labels);

struct BlockTask {
  std::size_t row = 0;
  std::size_t col = 0;
  bool operator==(const BlockTask&) const = default;
};

// 2-D blocking of an n_items x n_items all-pairs grid into blocks x blocks
// tasks of block x block items each. Built by partition_2d().
struct PartitionPlan {
  std::size_t n_items = 0;
  std::size_t block = 0;
  std::size_t blocks = 0;
  std::vector<BlockTask> tasks;

  std::pair<std::size_t, std::size_t> range(std::size_t block_index) const {
    return {block_index * block, (block_index + 1) * block};
  }
};

// Validation of the value-type invariants; each throws UsageError or
// DataError describing the first violation found.
void validate(const Frame& frame);
void validate(const Trajectory& trajectory);
void validate(const System& system);
void validate(const EdgeList& edges);

}  // namespace trajan
