#include <doctest.h>

#include <filesystem>
#include <sstream>

#include "trajan/csv.hpp"
#include "trajan/errors.hpp"
#include "trajan/generate.hpp"
#include "trajan/rng.hpp"
#include "trajan/trjb.hpp"

#include "oracles.hpp"

using namespace trajan;

TEST_CASE("splitmix64 reference outputs") {
  SplitMix64 g(1234567);
  const std::uint64_t expected[] = {6457827717110365317ULL, 3203168211198807973ULL,
                                    9817491932198370423ULL, 4593380528125082431ULL,
                                    16408922859458223821ULL};
  for (auto e : expected) CHECK(g.next() == e);
}

TEST_CASE("xorshift64* reference outputs") {
  auto g = Xorshift64Star::from_state(1234567);
  const std::uint32_t expected[] = {3540625527U, 2750739987U, 4037983143U, 1993361440U,
                                    3809424708U};
  for (auto e : expected) CHECK(static_cast<std::uint32_t>(g.next() >> 32) == e);
}

TEST_CASE("rng helpers stay in range") {
  Xorshift64Star g(0);
  for (int i = 0; i < 10000; ++i) {
    const double u = g.uniform();
    CHECK((u >= 0.0 && u < 1.0));
    CHECK(g.below(7) < 7);
  }
}

TEST_CASE("TRJB layout is bit-exact") {
  Trajectory t;
  t.id = "x";
  t.frames = {Frame{{{1.0f, 2.0f, 3.0f}}}, Frame{{{-1.0f, 0.5f, 0.0f}}}};
  const auto b = encode_trjb(t);
  REQUIRE(b.size() == trjb_size(2, 1));
  CHECK(b.size() == 14 + 24);
  const std::uint8_t header[] = {'T', 'R', 'J', 'B', 1, 0, 2, 0, 0, 0, 1, 0, 0, 0};
  CHECK(std::equal(std::begin(header), std::end(header), b.begin()));
  // 1.0f little-endian
  CHECK(b[14] == 0x00);
  CHECK(b[17] == 0x3f);
  CHECK(decode_trjb(b, "x") == t);
}

TEST_CASE("TRJB round trip over random shapes") {
  Xorshift64Star rng(5);
  for (int i = 0; i < 50; ++i) {
    auto t = oracle::random_trajectory(rng, 1 + rng.below(5), 1 + rng.below(30), 1e3);
    const auto b = encode_trjb(t);
    CHECK(decode_trjb(b, "t") == t);
    std::stringstream ss;
    CHECK(write_trjb(t, ss) == b.size());
    CHECK(read_trjb(ss, "t") == t);
  }
}

TEST_CASE("TRJB rejects malformed input") {
  Trajectory t;
  t.frames = {Frame{{{1, 2, 3}, {4, 5, 6}}}};
  const auto good = encode_trjb(t);

  auto truncated = good;
  truncated.pop_back();
  CHECK_THROWS_WITH_AS(decode_trjb(truncated, ""), doctest::Contains("expected 38 bytes, got 37"),
                       FormatError);
  auto longer = good;
  longer.push_back(0);
  CHECK_THROWS_AS(decode_trjb(longer, ""), FormatError);
  auto magic = good;
  magic[0] = 'X';
  CHECK_THROWS_AS(decode_trjb(magic, ""), FormatError);
  auto version = good;
  version[4] = 2;
  CHECK_THROWS_AS(decode_trjb(version, ""), FormatError);
  auto zero = good;
  zero[6] = 0;
  CHECK_THROWS_AS(decode_trjb(zero, ""), FormatError);
  CHECK_THROWS_AS(decode_trjb(std::span(good).first(10), ""), FormatError);
  auto nan = good;
  const float q = NAN;
  std::memcpy(nan.data() + 14, &q, 4);
  CHECK_THROWS_AS(decode_trjb(nan, ""), DataError);
  // Huge declared counts fail on length, not allocation.
  auto huge = good;
  huge[6] = huge[7] = huge[8] = huge[9] = 0xff;
  huge[10] = huge[11] = huge[12] = huge[13] = 0xff;
  CHECK_THROWS_AS(decode_trjb(huge, ""), FormatError);
}

TEST_CASE("TRJB write failure reports the offset") {
  Trajectory t;
  t.frames = {Frame{{{1, 2, 3}}}};
  std::stringstream ss;
  ss.setstate(std::ios::badbit);
  CHECK_THROWS_WITH_AS(write_trjb(t, ss), doctest::Contains("offset 0"), IoError);
}

TEST_CASE("TRJB files") {
  const auto dir = std::filesystem::temp_directory_path() / "trajan_io_test";
  std::filesystem::create_directories(dir);
  Xorshift64Star rng(9);
  auto t = oracle::random_trajectory(rng, 3, 7);
  t.id = "alpha";
  write_trjb_file(t, dir / "alpha.trjb");
  CHECK(read_trjb_file(dir / "alpha.trjb") == t);
  CHECK(read_trjb_header_file(dir / "alpha.trjb").n_atoms == 7);
  CHECK_THROWS_AS(read_trjb_file(dir / "missing.trjb"), IoError);
  CHECK_THROWS_AS(read_system_file(dir / "alpha.trjb"), FormatError);
  System s{"sys", t.frames[0].positions};
  write_system_file(s, dir / "sys.trjb");
  CHECK(read_system_file(dir / "sys.trjb") == s);
  std::filesystem::remove_all(dir);
}

TEST_CASE("ensemble generator") {
  const auto a = generate_ensemble(3, 5, 11, 42);
  const auto b = generate_ensemble(3, 5, 11, 42);
  CHECK(a == b);
  REQUIRE(a.size() == 3);
  CHECK(a[2].id == "traj_0002");
  CHECK(a[0].n_frames() == 5);
  CHECK(a[0].n_atoms() == 11);
  CHECK(generate_ensemble_member(2, 5, 11, 42) == a[2]);
  CHECK(generate_ensemble(3, 5, 11, 43) != a);
  // Random walk: per-frame displacement bounded by the step.
  for (const auto& t : a) {
    for (std::size_t f = 1; f < t.n_frames(); ++f) {
      for (std::size_t i = 0; i < t.n_atoms(); ++i) {
        for (int k = 0; k < 3; ++k) {
          CHECK(std::abs(t.frames[f].positions[i][k] - t.frames[f - 1].positions[i][k]) <=
                kEnsembleStep + 1e-5);
        }
      }
    }
  }
  const auto one = generate_ensemble(1, 1, 1, 0);
  CHECK(one.size() == 1);
  CHECK(one[0].n_atoms() == 1);
  CHECK_THROWS_AS(generate_ensemble(0, 1, 1, 0), UsageError);
}

TEST_CASE("bilayer generator") {
  BilayerSpec spec{4, 10.0, 1.0, 0.05, 7};
  const auto b = generate_bilayer(spec);
  CHECK(b.system.n_atoms() == 8);
  CHECK(b.truth.assignment == std::vector<std::uint32_t>{0, 0, 0, 0, 1, 1, 1, 1});
  CHECK(generate_bilayer(spec).system == b.system);
  for (std::size_t i = 0; i < 8; ++i) {
    const double z = b.system.positions[i][2];
    CHECK(std::abs(z - (i < 4 ? 0.0 : 10.0)) <= 0.05 + 1e-6);
  }
  // Ground truth matches the brute-force graph at the default cutoff.
  Xorshift64Star rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    BilayerSpec s{1 + rng.below(300), 3.0 + rng.uniform() * 5, 0.5 + rng.uniform(),
                  0.0, rng.next()};
    s.jitter = rng.uniform() * 0.1 * s.lattice_spacing;
    const auto bl = generate_bilayer(s);
    const auto labels = oracle::flood_fill(
        bl.system.n_atoms(), oracle::edges(bl.system.positions, default_bilayer_cutoff(s)));
    CHECK(labels == bl.truth.assignment);
  }
}

TEST_CASE("bilayer spec validation") {
  CHECK_THROWS_AS(generate_bilayer({4, 10.0, 1.0, 0.6, 1}), UsageError);   // jitter >= spacing/2
  CHECK_THROWS_AS(generate_bilayer({4, 1.2, 1.0, 0.05, 1}), UsageError);   // sheets within cutoff
  CHECK_THROWS_AS(generate_bilayer({4, 10.0, 1.0, 0.05, 1}, 0.9), UsageError);  // sheet breaks
  CHECK_THROWS_AS(generate_bilayer({0, 10.0, 1.0, 0.05, 1}), UsageError);
  CHECK_NOTHROW(generate_bilayer({1, 10.0, 1.0, 0.05, 1}, 0.5));
}

TEST_CASE("csv quoting and parsing") {
  CHECK(csv_field("plain") == "plain");
  CHECK(csv_field("a,b") == "\"a,b\"");
  CHECK(csv_field("say \"hi\"") == "\"say \"\"hi\"\"\"");
  CHECK(parse_csv_record("a,\"b,c\",\"d\"\"e\"") ==
        std::vector<std::string>{"a", "b,c", "d\"e"});
  std::istringstream in("x,\"multi\nline\"\ny,z\n");
  const auto rows = read_csv(in);
  REQUIRE(rows.size() == 2);
  CHECK(rows[0][1] == "multi\nline");
}

TEST_CASE("results csv round trip") {
  std::vector<BenchRecord> recs = {
      {"psa_naive", "trajectories=4;block=2", 2, 0, 0.1 + 0.2, 0},
      {"leaflet, \"odd\"", "atoms=8", 1, 3, 1e-9, 123456789012345ULL}};
  std::stringstream ss;
  write_results_csv(recs, ss);
  CHECK(ss.str().rfind(std::string(kResultsHeader) + "\n", 0) == 0);
  CHECK(read_results_csv(ss) == recs);
  std::istringstream bad("op,scale\n");
  CHECK_THROWS_AS(read_results_csv(bad), FormatError);
}

TEST_CASE("components csv round trip and summary") {
  const auto c = canonicalize({0, 0, 1, 1, 1, 2});
  std::stringstream ss;
  write_components_csv(c, ss);
  CHECK(ss.str().rfind("atom_index,component_id\n0,0\n", 0) == 0);
  CHECK(read_components_csv(ss) == c);
  CHECK(component_summary(c) == "n_components=3 sizes=2,3,1");
}
