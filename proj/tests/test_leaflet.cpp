#include <doctest.h>

#include "oracles.hpp"
#include "trajan/balltree.hpp"
#include "trajan/engine.hpp"
#include "trajan/errors.hpp"
#include "trajan/generate.hpp"
#include "trajan/leaflet.hpp"
#include "trajan/tasks.hpp"

using namespace trajan;

namespace {

using EdgeSet = std::set<std::pair<std::uint32_t, std::uint32_t>>;

EdgeSet as_set(const EdgeList& g) {
  EdgeSet s;
  for (const auto& e : g.edges) s.insert({std::min(e.u, e.v), std::max(e.u, e.v)});
  return s;
}

std::vector<Vec3> random_points(Xorshift64Star& rng, std::size_t n, double box) {
  std::vector<Vec3> p(n);
  for (auto& v : p)
    for (auto& c : v) c = static_cast<float>(rng.uniform(0.0, box));
  return p;
}

// Integer lattice: many pairs sit exactly at distance 1, sqrt(2), 2 ...
std::vector<Vec3> lattice(std::size_t side) {
  std::vector<Vec3> p;
  for (std::size_t x = 0; x < side; ++x)
    for (std::size_t y = 0; y < side; ++y)
      for (std::size_t z = 0; z < side; ++z)
        p.push_back({float(x), float(y), float(z)});
  return p;
}

}  // namespace

TEST_CASE("ball tree radius queries match brute force") {
  Xorshift64Star rng(8);
  for (int trial = 0; trial < 30; ++trial) {
    const auto pts = random_points(rng, 1 + rng.below(400), 10.0);
    const double r = 0.3 + rng.uniform() * 2.0;
    const auto tree = BallTree::build(pts, 1 + rng.below(20));
    const auto want = oracle::edges(pts, r);
    EdgeSet got;
    for (std::uint32_t u = 0; u < pts.size(); ++u) {
      const auto hits = tree.query_radius(pts[u], r);
      CHECK(std::is_sorted(hits.begin(), hits.end()));
      for (auto v : hits)
        if (v != u) got.insert({std::min(u, v), std::max(u, v)});
    }
    CHECK(got == want);
  }
}

TEST_CASE("boundary distances are inclusive") {
  const auto pts = lattice(5);
  for (double r : {1.0, 2.0, 3.0}) {
    const auto want = oracle::edges(pts, r);
    const auto tree = BallTree::build(pts, 4);
    EdgeSet got;
    for (std::uint32_t u = 0; u < pts.size(); ++u)
      for (auto v : tree.query_radius(pts[u], r))
        if (v != u) got.insert({std::min(u, v), std::max(u, v)});
    CHECK(got == want);
    CHECK(as_set(edges_pairwise_block({pts, 0}, {pts, 0}, r)) == want);
  }
  // Exactly at cutoff along a 3-4-5 triangle.
  std::vector<Vec3> two = {{0, 0, 0}, {3, 4, 0}};
  CHECK(edges_pairwise_block({two, 0}, {two, 0}, 5.0).edges.size() == 1);
  CHECK(edges_pairwise_block({two, 0}, {two, 0}, 4.999).edges.empty());
  CHECK(BallTree::build(two, 1).query_radius({0, 0, 0}, 5.0).size() == 2);
}

TEST_CASE("ball tree structure and serialization") {
  Xorshift64Star rng(2);
  const auto pts = random_points(rng, 1000, 20.0);
  const auto tree = BallTree::build(pts, 16);
  for (const auto& n : tree.nodes()) {
    if (n.leaf()) CHECK(n.end - n.begin <= 16);
    for (auto i = n.begin; i < n.end; ++i) {
      const auto& p = pts[tree.permutation()[i]];
      const double d = std::hypot(p[0] - n.centroid[0], p[1] - n.centroid[1], p[2] - n.centroid[2]);
      CHECK(d <= n.radius * (1 + 1e-9) + 1e-9);
    }
  }
  CHECK(tree.depth() <= 12);
  const auto copy = BallTree::deserialize(tree.serialize());
  CHECK(copy.query_radius(pts[5], 2.0) == tree.query_radius(pts[5], 2.0));

  auto bytes = tree.serialize();
  CHECK_THROWS_AS(BallTree::deserialize(std::span(bytes).first(bytes.size() - 1)), FormatError);
  CHECK_THROWS_AS(BallTree::deserialize({}), FormatError);
  CHECK_THROWS_AS(tree.query_radius(pts[0], 0.0), UsageError);
  CHECK_THROWS_AS(BallTree::build(pts, 0), UsageError);
}

TEST_CASE("block edge kernels agree with the oracle across partitions") {
  Xorshift64Star rng(4);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t n = 12 * (1 + rng.below(10));
    const auto pts = random_points(rng, n, 6.0);
    const double cutoff = 0.5 + rng.uniform();
    const auto want = oracle::edges(pts, cutoff);
    for (std::size_t block : {n, n / 2, n / 3, n / 4}) {
      EdgeSet pair_got, tree_got;
      std::size_t count = 0;
      for (std::size_t i = 0; i < n / block; ++i) {
        for (std::size_t j = i; j < n / block; ++j) {
          PositionBlock rows{std::span(pts).subspan(i * block, block), VertexId(i * block)};
          PositionBlock cols{std::span(pts).subspan(j * block, block), VertexId(j * block)};
          const auto p = edges_pairwise_block(rows, cols, cutoff);
          const auto t = edges_tree_block(rows, cols, cutoff, 5);
          count += p.edges.size();
          for (auto s : as_set(p)) pair_got.insert(s);
          for (auto s : as_set(t)) tree_got.insert(s);
          CHECK(as_set(p) == as_set(t));
        }
      }
      CHECK(count == want.size());  // no duplicates
      CHECK(pair_got == want);
      CHECK(tree_got == want);
    }
  }
  CHECK_THROWS_AS(edges_pairwise_block({}, {}, 0.0), UsageError);
}

TEST_CASE("partial components merge to the global components") {
  Xorshift64Star rng(6);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t n = 1 + rng.below(80);
    EdgeSet all;
    std::vector<PartialComponents> parts;
    const std::size_t chunks = 1 + rng.below(5);
    for (std::size_t c = 0; c < chunks; ++c) {
      EdgeList g;
      g.n_vertices = n;
      for (std::size_t e = rng.below(n); e > 0; --e) {
        const auto u = VertexId(rng.below(n)), v = VertexId(rng.below(n));
        if (u == v) continue;
        g.edges.push_back({u, v});
        all.insert({std::min(u, v), std::max(u, v)});
      }
      const auto part = partial_components(g);
      for (const auto& s : part.sets) CHECK(std::is_sorted(s.begin(), s.end()));
      CHECK(decode_partial(encode_partial(part)) == part);
      parts.push_back(part);
    }
    CHECK(merge_partial_components(parts, n).assignment == oracle::flood_fill(n, all));
  }
  PartialComponents bad{{{0, 9}}};
  CHECK_THROWS_AS(merge_partial_components(std::span(&bad, 1), 5), UsageError);
}

TEST_CASE("edge codec") {
  EdgeList g{10, {{1, 2}, {3, 9}}};
  const auto b = encode_edges(g);
  CHECK(b.size() == 8 + 16);
  const auto back = decode_edges(b, 10);
  CHECK(back.edges == g.edges);
  CHECK_THROWS_AS(decode_edges(b, 5), FormatError);
  CHECK_THROWS_AS(decode_edges(std::span(b).first(10), 10), FormatError);
}

TEST_CASE("all approaches recover the bilayer leaflets") {
  EngineConfig cfg;
  cfg.workers = 3;
  Engine engine(cfg, default_registry());
  Xorshift64Star rng(10);
  for (int trial = 0; trial < 6; ++trial) {
    BilayerSpec spec{60 + 12 * rng.below(20), 4.0, 1.0, 0.1 * rng.uniform(), rng.next()};
    const auto bl = generate_bilayer(spec);
    const std::size_t n = bl.system.n_atoms();
    for (auto approach : {1, 2, 3, 4}) {
      for (std::size_t block : {n, n / 2, n / 4}) {
        LeafletOptions opt{1.5, block, false, 8};
        const auto run = run_leaflet(bl.system, parse_approach(approach), opt, engine);
        CHECK(run.components == bl.truth);
        if (approach == 4) {
          opt.shared_tree = true;
          CHECK(run_leaflet(bl.system, LeafletApproach::tree_search, opt, engine).components ==
                bl.truth);
        }
      }
    }
  }
}

TEST_CASE("gathered bytes follow the payload formats") {
  EngineConfig cfg;
  cfg.workers = 2;
  Engine engine(cfg, default_registry());
  const auto bl = generate_bilayer({64, 4.0, 1.0, 0.05, 1});
  LeafletOptions opt{1.5, 32, false, 8};
  const auto r2 = leaflet_approach2(bl.system, opt, engine);
  const auto r3 = leaflet_approach3(bl.system, opt, engine);
  // Approach 2: one u64 count per task plus 8 bytes per edge.
  CHECK(r2.bytes_shuffled == 8 * r2.n_tasks + 8 * r2.n_edges);
  CHECK(r2.n_tasks == 10);
  CHECK(r3.bytes_shuffled < r2.bytes_shuffled);
  const auto rec = r3.record(2);
  CHECK(rec.op == "leaflet_approach3");
  CHECK(rec.bytes_shuffled == r3.bytes_shuffled);
}

TEST_CASE("leaflet error contract") {
  EngineConfig cfg;
  cfg.workers = 1;
  cfg.memory_budget = 100;
  Engine engine(cfg, default_registry());
  const auto bl = generate_bilayer({16, 4.0, 1.0, 0.05, 1});
  CHECK_THROWS_AS(leaflet_approach2(bl.system, {0.0, 8}, engine), UsageError);
  CHECK_THROWS_AS(leaflet_approach2(bl.system, {1.5, 5}, engine), UsageError);
  CHECK_THROWS_WITH_AS(leaflet_approach1(bl.system, {1.5, 8}, engine),
                       doctest::Contains("approach 1"), ResourceError);
  CHECK_THROWS_WITH_AS(leaflet_approach3(bl.system, {1.5, 16}, engine),
                       doctest::Contains("approach 3"), ResourceError);
  CHECK_THROWS_AS(parse_approach(5), UsageError);
}

TEST_CASE("leaflet task handlers reject malformed payloads") {
  CHECK_THROWS_AS(run_leaflet_block({}, true, false), FormatError);
  Bytes p;
  ByteWriter w(p);
  w.u32(0);
  w.u32(4);
  w.u32(0);
  w.u32(4);
  w.f64(1.0);
  w.u32(8);
  w.u32(0);  // far too few position bytes
  CHECK_THROWS_AS(run_leaflet_block(p, false, false), FormatError);
}
