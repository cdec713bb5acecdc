#include "trajan/leaflet.hpp"

#include <algorithm>
#include <chrono>
#include <cstring>

#include "trajan/balltree.hpp"
#include "trajan/dsu.hpp"
#include "trajan/engine.hpp"
#include "trajan/errors.hpp"
#include "trajan/psa.hpp"

namespace trajan {

namespace {

// Column block in structure-of-arrays form for the row-strip kernel.
struct ColumnStrip {
  explicit ColumnStrip(std::span<const Vec3> p) : x(p.size()), y(p.size()), z(p.size()) {
    for (std::size_t i = 0; i < p.size(); ++i) {
      x[i] = p[i][0];
      y[i] = p[i][1];
      z[i] = p[i][2];
    }
  }
  std::size_t size() const { return x.size(); }

  std::vector<float> x, y, z;
};

// Squared distances from `row` to columns [from, to) into `d2`, then emits
// every column within the radius. Operation order matches within_radius().
void scan_strip(const Vec3& row, const ColumnStrip& cols, std::size_t from, std::size_t to,
                float radius_sq, VertexId u, VertexId col_offset, std::vector<float>& d2,
                std::vector<Edge>& out) {
  const float rx = row[0], ry = row[1], rz = row[2];
  const float* __restrict xs = cols.x.data();
  const float* __restrict ys = cols.y.data();
  const float* __restrict zs = cols.z.data();
  float* __restrict buf = d2.data();
  for (std::size_t v = from; v < to; ++v) {
    const float dx = xs[v] - rx;
    const float dy = ys[v] - ry;
    const float dz = zs[v] - rz;
    buf[v] = dx * dx + dy * dy + dz * dz;
  }
  for (std::size_t v = from; v < to; ++v) {
    if (buf[v] <= radius_sq) out.push_back({u, static_cast<VertexId>(col_offset + v)});
  }
}

bool same_block(const PositionBlock& a, const PositionBlock& b) {
  return a.offset == b.offset && a.positions.size() == b.positions.size();
}

std::size_t vertex_bound(const PositionBlock& rows, const PositionBlock& cols) {
  return std::max<std::size_t>(rows.offset + rows.positions.size(),
                               cols.offset + cols.positions.size());
}

std::vector<Vec3> read_positions(ByteReader& r, std::size_t n) {
  r.expect_items(n, sizeof(Vec3));
  std::vector<Vec3> out(n);
  auto raw = r.bytes(n * sizeof(Vec3));
  std::memcpy(out.data(), raw.data(), raw.size());
  return out;
}

}  // namespace

EdgeList edges_pairwise_block(PositionBlock rows, PositionBlock cols, double cutoff) {
  const float rsq = radius_squared(cutoff);
  const bool diagonal = same_block(rows, cols);
  const ColumnStrip strip(cols.positions);
  std::vector<float> d2(strip.size());
  EdgeList out;
  out.n_vertices = vertex_bound(rows, cols);
  for (std::size_t i = 0; i < rows.positions.size(); ++i) {
    const auto u = static_cast<VertexId>(rows.offset + i);
    const std::size_t from = diagonal ? i + 1 : 0;
    const auto before = out.edges.size();
    scan_strip(rows.positions[i], strip, from, strip.size(), rsq, u, cols.offset, d2, out.edges);
    if (!diagonal) {
      // Overlapping blocks: drop self pairs.
      auto it = std::remove_if(out.edges.begin() + static_cast<std::ptrdiff_t>(before),
                               out.edges.end(), [](const Edge& e) { return e.u == e.v; });
      out.edges.erase(it, out.edges.end());
    }
  }
  return out;
}

EdgeList edges_tree_block(PositionBlock rows, PositionBlock cols, double cutoff,
                          std::size_t leaf_size) {
  const float rsq = radius_squared(cutoff);
  const bool diagonal = same_block(rows, cols);
  EdgeList out;
  out.n_vertices = vertex_bound(rows, cols);
  if (cols.positions.empty()) return out;
  const auto tree = BallTree::build(cols.positions, leaf_size);
  std::vector<VertexId> hits;
  for (std::size_t i = 0; i < rows.positions.size(); ++i) {
    const auto u = static_cast<VertexId>(rows.offset + i);
    hits.clear();
    tree.query_radius_into(rows.positions[i], rsq, hits);
    std::sort(hits.begin(), hits.end());
    for (auto local : hits) {
      const auto v = static_cast<VertexId>(cols.offset + local);
      if (v == u || (diagonal && v < u)) continue;
      out.edges.push_back({u, v});
    }
  }
  return out;
}

PartialComponents partial_components(const EdgeList& edges) {
  std::vector<VertexId> verts;
  verts.reserve(edges.edges.size() * 2);
  for (const auto& e : edges.edges) {
    verts.push_back(e.u);
    verts.push_back(e.v);
  }
  std::sort(verts.begin(), verts.end());
  verts.erase(std::unique(verts.begin(), verts.end()), verts.end());
  auto local = [&](VertexId g) {
    return static_cast<VertexId>(std::lower_bound(verts.begin(), verts.end(), g) - verts.begin());
  };
  DisjointSet set(verts.size());
  for (const auto& e : edges.edges) set.unite(local(e.u), local(e.v));
  const auto comps = set.components();
  PartialComponents out;
  out.sets.resize(comps.n_components);
  // verts is ascending and ids are canonical, so sets come out ordered by
  // their smallest member with members ascending.
  for (std::size_t i = 0; i < verts.size(); ++i) out.sets[comps.assignment[i]].push_back(verts[i]);
  return out;
}

ComponentSet merge_partial_components(std::span<const PartialComponents> parts,
                                      std::size_t n_vertices) {
  DisjointSet set(n_vertices);
  for (const auto& part : parts) {
    for (const auto& s : part.sets) {
      for (auto v : s) {
        if (v >= n_vertices) {
          throw UsageError("partial component vertex " + std::to_string(v) +
                           " out of range for " + std::to_string(n_vertices) + " vertices");
        }
      }
      for (std::size_t i = 1; i < s.size(); ++i) set.unite(s[0], s[i]);
    }
  }
  return set.components();
}

Bytes encode_edges(const EdgeList& edges) {
  Bytes out;
  out.reserve(8 + edges.edges.size() * 8);
  ByteWriter w(out);
  w.u64(edges.edges.size());
  for (const auto& e : edges.edges) {
    w.u32(e.u);
    w.u32(e.v);
  }
  return out;
}

EdgeList decode_edges(std::span<const std::uint8_t> bytes, std::size_t n_vertices) {
  ByteReader r(bytes);
  const auto count = r.u64();
  r.expect_items(count, 8);
  EdgeList out;
  out.n_vertices = n_vertices;
  out.edges.resize(count);
  for (auto& e : out.edges) {
    e.u = r.u32();
    e.v = r.u32();
    if (e.u >= n_vertices || e.v >= n_vertices) throw FormatError("edge vertex out of range");
  }
  r.expect_done();
  return out;
}

Bytes encode_partial(const PartialComponents& part) {
  Bytes out;
  ByteWriter w(out);
  w.u32(static_cast<std::uint32_t>(part.sets.size()));
  for (const auto& s : part.sets) {
    w.u32(static_cast<std::uint32_t>(s.size()));
    w.raw(s.data(), s.size() * sizeof(VertexId));
  }
  return out;
}

PartialComponents decode_partial(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes);
  const auto n_sets = r.u32();
  r.expect_items(n_sets, 4);
  PartialComponents out;
  out.sets.resize(n_sets);
  for (auto& s : out.sets) {
    const auto size = r.u32();
    r.expect_items(size, 4);
    s.resize(size);
    for (auto& v : s) v = r.u32();
  }
  r.expect_done();
  return out;
}

const char* to_string(LeafletApproach approach) {
  switch (approach) {
    case LeafletApproach::broadcast_1d: return "approach 1 (broadcast and 1-D)";
    case LeafletApproach::task_2d: return "approach 2 (task API and 2-D)";
    case LeafletApproach::parallel_cc: return "approach 3 (parallel connected components)";
    case LeafletApproach::tree_search: return "approach 4 (tree search)";
  }
  return "unknown approach";
}

LeafletApproach parse_approach(int number) {
  if (number < 1 || number > 4) {
    throw UsageError("approach must be 1, 2, 3 or 4 (got " + std::to_string(number) + ")");
  }
  return static_cast<LeafletApproach>(number);
}

BenchRecord LeafletRun::record(std::size_t workers, std::size_t repeat) const {
  BenchRecord r;
  r.op = "leaflet_approach" + std::to_string(static_cast<int>(approach));
  r.scale = "atoms=" + std::to_string(n_atoms) + ";block=" + std::to_string(block) +
            ";tasks=" + std::to_string(n_tasks);
  r.workers = workers;
  r.repeat = repeat;
  r.wall_seconds = std::max(wall_seconds, 1e-9);
  r.bytes_shuffled = bytes_shuffled;
  return r;
}

// ---------------------------------------------------------------------------
// Task payloads.
//
// rows (approach 1):   u64 handle | u32 row_begin | u32 row_end | f64 cutoff
//                      (broadcast data: n_atoms * 3 f32)
// block (2, 3, 4):     u32 row_offset | u32 n_rows | u32 col_offset | u32 n_cols |
//                      f64 cutoff | u32 leaf_size | row positions |
//                      col positions (omitted for diagonal blocks)
// shared tree (4):     u64 handle | u32 row_begin | u32 row_end | f64 cutoff
//                      (broadcast data: serialized BallTree over all atoms)

Bytes run_leaflet_rows(std::span<const std::uint8_t> input, std::span<const std::uint8_t> system) {
  ByteReader r(input);
  r.u64();
  const auto row_begin = r.u32();
  const auto row_end = r.u32();
  const double cutoff = r.f64();
  r.expect_done();
  if (system.size() % sizeof(Vec3) != 0) throw FormatError("broadcast system has a partial atom");
  std::vector<Vec3> atoms(system.size() / sizeof(Vec3));
  std::memcpy(atoms.data(), system.data(), system.size());
  if (row_begin > row_end || row_end > atoms.size()) throw FormatError("row range out of bounds");

  const float rsq = radius_squared(cutoff);
  const ColumnStrip strip(atoms);
  std::vector<float> d2(strip.size());
  EdgeList edges;
  edges.n_vertices = atoms.size();
  for (auto u = row_begin; u < row_end; ++u) {
    scan_strip(atoms[u], strip, u + 1, strip.size(), rsq, u, 0, d2, edges.edges);
  }
  return encode_edges(edges);
}

Bytes run_leaflet_block(std::span<const std::uint8_t> input, bool partial, bool tree) {
  ByteReader r(input);
  const auto row_offset = r.u32();
  const auto n_rows = r.u32();
  const auto col_offset = r.u32();
  const auto n_cols = r.u32();
  const double cutoff = r.f64();
  const auto leaf_size = r.u32();
  const bool diagonal = row_offset == col_offset;
  if (diagonal && n_rows != n_cols) throw FormatError("diagonal block must be square");
  const auto row_pos = read_positions(r, n_rows);
  const auto col_pos = diagonal ? row_pos : read_positions(r, n_cols);
  r.expect_done();

  const PositionBlock rows{row_pos, row_offset};
  const PositionBlock cols{col_pos, col_offset};
  const auto edges = tree ? edges_tree_block(rows, cols, cutoff, leaf_size)
                          : edges_pairwise_block(rows, cols, cutoff);
  return partial ? encode_partial(partial_components(edges)) : encode_edges(edges);
}

Bytes run_leaflet_shared_tree(std::span<const std::uint8_t> input,
                              std::span<const std::uint8_t> tree_bytes) {
  ByteReader r(input);
  r.u64();
  const auto row_begin = r.u32();
  const auto row_end = r.u32();
  const double cutoff = r.f64();
  r.expect_done();
  const auto tree = BallTree::deserialize(tree_bytes);
  const auto points = tree.points();
  if (row_begin > row_end || row_end > points.size()) throw FormatError("row range out of bounds");
  const float rsq = radius_squared(cutoff);
  EdgeList edges;
  edges.n_vertices = points.size();
  std::vector<VertexId> hits;
  for (auto u = row_begin; u < row_end; ++u) {
    hits.clear();
    tree.query_radius_into(points[u], rsq, hits);
    for (auto v : hits) {
      if (v > u) edges.edges.push_back({u, v});
    }
  }
  return encode_partial(partial_components(edges));
}

// ---------------------------------------------------------------------------
// Driver side.

namespace {

using Clock = std::chrono::steady_clock;

void check_common(const System& system, const LeafletOptions& options) {
  validate(system);
  radius_squared(options.cutoff);
  if (options.block == 0 || system.n_atoms() % options.block != 0) {
    throw UsageError("block size " + std::to_string(options.block) +
                     " does not divide atom count " + std::to_string(system.n_atoms()));
  }
  if (options.leaf_size == 0) throw UsageError("leaf_size must be >= 1");
}

Bytes position_bytes(std::span<const Vec3> p) {
  const auto* b = reinterpret_cast<const std::uint8_t*>(p.data());
  return Bytes(b, b + p.size() * sizeof(Vec3));
}

std::string task_name(std::uint64_t id, std::size_t blocks, bool two_d) {
  if (!two_d) return "task (" + std::to_string(id) + ")";
  return "task (" + std::to_string(id / blocks) + "," + std::to_string(id % blocks) + ")";
}

void check_results(const std::vector<TaskResult>& results, LeafletApproach approach,
                   std::size_t blocks, bool two_d) {
  for (const auto& r : results) {
    if (!r.ok()) {
      throw TaskError(std::string(to_string(approach)) + ": " + task_name(r.id, blocks, two_d) +
                      " failed: " + r.error_message());
    }
  }
}

template <typename Body>
LeafletRun timed(LeafletApproach approach, const System& system, const LeafletOptions& options,
                 Body&& body) {
  const auto t0 = Clock::now();
  LeafletRun run;
  run.approach = approach;
  run.n_atoms = system.n_atoms();
  run.block = options.block;
  try {
    body(run);
  } catch (const ResourceError& e) {
    throw ResourceError(std::string(to_string(approach)) + ": " + e.what());
  }
  run.wall_seconds = std::chrono::duration<double>(Clock::now() - t0).count();
  return run;
}

std::vector<TaskSpec> block_tasks(const System& system, const LeafletOptions& options,
                                  TaskKind kind) {
  const auto plan = partition_2d(system.n_atoms(), options.block);
  std::span<const Vec3> atoms(system.positions);
  std::vector<TaskSpec> tasks;
  for (const auto& t : plan.tasks) {
    // Blocks below the diagonal duplicate their mirror image.
    if (t.row > t.col) continue;
    const auto [rb, re] = plan.range(t.row);
    const auto [cb, ce] = plan.range(t.col);
    TaskSpec spec;
    spec.id = t.row * plan.blocks + t.col;
    spec.kind = kind;
    ByteWriter w(spec.payload);
    w.u32(static_cast<std::uint32_t>(rb));
    w.u32(static_cast<std::uint32_t>(re - rb));
    w.u32(static_cast<std::uint32_t>(cb));
    w.u32(static_cast<std::uint32_t>(ce - cb));
    w.f64(options.cutoff);
    w.u32(static_cast<std::uint32_t>(options.leaf_size));
    w.bytes(position_bytes(atoms.subspan(rb, re - rb)));
    if (t.row != t.col) w.bytes(position_bytes(atoms.subspan(cb, ce - cb)));
    tasks.push_back(std::move(spec));
  }
  return tasks;
}

std::vector<TaskSpec> row_tasks(std::uint64_t handle, std::size_t n_atoms,
                                const LeafletOptions& options, TaskKind kind) {
  std::vector<TaskSpec> tasks;
  for (std::size_t b = 0; b * options.block < n_atoms; ++b) {
    TaskSpec spec;
    spec.id = b;
    spec.kind = kind;
    ByteWriter w(spec.payload);
    w.u64(handle);
    w.u32(static_cast<std::uint32_t>(b * options.block));
    w.u32(static_cast<std::uint32_t>((b + 1) * options.block));
    w.f64(options.cutoff);
    tasks.push_back(std::move(spec));
  }
  return tasks;
}

ComponentSet components_from_edges(const std::vector<TaskResult>& results, std::size_t n,
                                   std::uint64_t& n_edges) {
  DisjointSet set(n);
  n_edges = 0;
  for (const auto& r : results) {
    const auto edges = decode_edges(r.payload, n);
    n_edges += edges.edges.size();
    for (const auto& e : edges.edges) set.unite(e.u, e.v);
  }
  return set.components();
}

ComponentSet components_from_partials(const std::vector<TaskResult>& results, std::size_t n) {
  std::vector<PartialComponents> parts;
  parts.reserve(results.size());
  for (const auto& r : results) parts.push_back(decode_partial(r.payload));
  return merge_partial_components(parts, n);
}

double last_broadcast_seconds(const Engine& engine) {
  return engine.records().empty() ? 0.0 : engine.records().back().wall_seconds;
}

}  // namespace

LeafletRun leaflet_approach1(const System& system, const LeafletOptions& options, Engine& engine) {
  check_common(system, options);
  constexpr auto approach = LeafletApproach::broadcast_1d;
  return timed(approach, system, options, [&](LeafletRun& run) {
    const auto handle = engine.broadcast(position_bytes(system.positions));
    run.broadcast_seconds = last_broadcast_seconds(engine);
    auto tasks = row_tasks(handle.id, system.n_atoms(), options, TaskKind::leaflet_rows);
    run.n_tasks = tasks.size();
    const auto results = engine.submit_map(std::move(tasks));
    check_results(results, approach, 0, false);
    run.bytes_shuffled = gathered_bytes(results);
    run.components = components_from_edges(results, system.n_atoms(), run.n_edges);
  });
}

LeafletRun leaflet_approach2(const System& system, const LeafletOptions& options, Engine& engine) {
  check_common(system, options);
  constexpr auto approach = LeafletApproach::task_2d;
  return timed(approach, system, options, [&](LeafletRun& run) {
    auto tasks = block_tasks(system, options, TaskKind::leaflet_edges);
    run.n_tasks = tasks.size();
    const auto results = engine.submit_map(std::move(tasks));
    check_results(results, approach, system.n_atoms() / options.block, true);
    run.bytes_shuffled = gathered_bytes(results);
    run.components = components_from_edges(results, system.n_atoms(), run.n_edges);
  });
}

LeafletRun leaflet_approach3(const System& system, const LeafletOptions& options, Engine& engine) {
  check_common(system, options);
  constexpr auto approach = LeafletApproach::parallel_cc;
  return timed(approach, system, options, [&](LeafletRun& run) {
    auto tasks = block_tasks(system, options, TaskKind::leaflet_partial);
    run.n_tasks = tasks.size();
    const auto results = engine.submit_map(std::move(tasks));
    check_results(results, approach, system.n_atoms() / options.block, true);
    run.bytes_shuffled = gathered_bytes(results);
    run.components = components_from_partials(results, system.n_atoms());
  });
}

LeafletRun leaflet_approach4(const System& system, const LeafletOptions& options, Engine& engine) {
  check_common(system, options);
  constexpr auto approach = LeafletApproach::tree_search;
  return timed(approach, system, options, [&](LeafletRun& run) {
    std::vector<TaskResult> results;
    if (options.shared_tree) {
      const auto tree = BallTree::build(system.positions, options.leaf_size);
      const auto handle = engine.broadcast(tree.serialize());
      run.broadcast_seconds = last_broadcast_seconds(engine);
      auto tasks = row_tasks(handle.id, system.n_atoms(), options, TaskKind::leaflet_shared_tree);
      run.n_tasks = tasks.size();
      results = engine.submit_map(std::move(tasks));
      check_results(results, approach, 0, false);
    } else {
      auto tasks = block_tasks(system, options, TaskKind::leaflet_tree);
      run.n_tasks = tasks.size();
      results = engine.submit_map(std::move(tasks));
      check_results(results, approach, system.n_atoms() / options.block, true);
    }
    run.bytes_shuffled = gathered_bytes(results);
    run.components = components_from_partials(results, system.n_atoms());
  });
}

LeafletRun run_leaflet(const System& system, LeafletApproach approach,
                       const LeafletOptions& options, Engine& engine) {
  switch (approach) {
    case LeafletApproach::broadcast_1d: return leaflet_approach1(system, options, engine);
    case LeafletApproach::task_2d: return leaflet_approach2(system, options, engine);
    case LeafletApproach::parallel_cc: return leaflet_approach3(system, options, engine);
    case LeafletApproach::tree_search: return leaflet_approach4(system, options, engine);
  }
  throw UsageError("unknown leaflet approach");
}

}  // namespace trajan
