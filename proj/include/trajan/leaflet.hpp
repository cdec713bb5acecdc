#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "trajan/bench.hpp"
#include "trajan/bytes.hpp"
#include "trajan/core.hpp"

namespace trajan {

class Engine;

// A contiguous run of atoms and the global index of its first atom.
struct PositionBlock {
  std::span<const Vec3> positions;
  VertexId offset = 0;
};

// All (u, v), u from rows and v from cols, within `cutoff` (inclusive).
// Self pairs are never emitted; when rows and cols are the same block only
// u < v is emitted. Distances are evaluated in row strips of single
// precision squared distances.
EdgeList edges_pairwise_block(PositionBlock rows, PositionBlock cols, double cutoff);

// Same edge set as edges_pairwise_block, found by radius queries of each
// row atom against a ball tree over the column block.
EdgeList edges_tree_block(PositionBlock rows, PositionBlock cols, double cutoff,
                          std::size_t leaf_size);

// Components found by one map task; vertex ids are global. Only vertices
// that touch an edge are listed.
struct PartialComponents {
  std::vector<std::vector<VertexId>> sets;
  bool operator==(const PartialComponents&) const = default;
};

// Local connected components of an edge list, sets sorted by smallest member.
PartialComponents partial_components(const EdgeList& edges);

// Joins partial results: sets sharing a vertex (transitively) merge.
// Vertices absent from every set become singletons. UsageError for any
// vertex >= n_vertices.
ComponentSet merge_partial_components(std::span<const PartialComponents> parts,
                                      std::size_t n_vertices);

Bytes encode_edges(const EdgeList& edges);
EdgeList decode_edges(std::span<const std::uint8_t> bytes, std::size_t n_vertices);
Bytes encode_partial(const PartialComponents& part);
PartialComponents decode_partial(std::span<const std::uint8_t> bytes);

enum class LeafletApproach : std::uint8_t {
  broadcast_1d = 1,  // broadcast system, 1-D row partitions, gather edges
  task_2d = 2,       // 2-D blocks passed to tasks, gather edges
  parallel_cc = 3,   // 2-D blocks, per-task components, gather partials
  tree_search = 4,   // as parallel_cc with ball-tree edge discovery
};

const char* to_string(LeafletApproach approach);
LeafletApproach parse_approach(int number);

struct LeafletOptions {
  double cutoff = 0.0;
  // Atoms per partition (rows per task for approach 1, block edge for 2-4).
  std::size_t block = 0;
  // Approach 4: build one tree over all atoms on the driver and broadcast
  // it, instead of one tree per task over its column block.
  bool shared_tree = false;
  std::size_t leaf_size = 40;
};

struct LeafletRun {
  LeafletApproach approach{};
  std::size_t n_atoms = 0;
  std::size_t block = 0;
  ComponentSet components;
  std::uint64_t bytes_shuffled = 0;
  double wall_seconds = 0.0;
  double broadcast_seconds = 0.0;
  std::size_t n_tasks = 0;
  // Edge count when edges reach the driver (approaches 1 and 2), else 0.
  std::uint64_t n_edges = 0;

  BenchRecord record(std::size_t workers, std::size_t repeat = 0) const;
};

// Shared contract: cutoff > 0, block divides the atom count. Failed tasks
// raise TaskError naming the task coordinates; memory-budget violations
// raise ResourceError naming the approach.
LeafletRun leaflet_approach1(const System& system, const LeafletOptions& options, Engine& engine);
LeafletRun leaflet_approach2(const System& system, const LeafletOptions& options, Engine& engine);
LeafletRun leaflet_approach3(const System& system, const LeafletOptions& options, Engine& engine);
LeafletRun leaflet_approach4(const System& system, const LeafletOptions& options, Engine& engine);
LeafletRun run_leaflet(const System& system, LeafletApproach approach,
                       const LeafletOptions& options, Engine& engine);

// Task handlers (TaskKind::leaflet_*).
Bytes run_leaflet_rows(std::span<const std::uint8_t> input, std::span<const std::uint8_t> system);
Bytes run_leaflet_block(std::span<const std::uint8_t> input, bool partial, bool tree);
Bytes run_leaflet_shared_tree(std::span<const std::uint8_t> input, std::span<const std::uint8_t> tree);

}  // namespace trajan
