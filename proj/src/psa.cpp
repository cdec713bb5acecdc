#include "trajan/psa.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <ostream>
#include <set>

#include "trajan/csv.hpp"
#include "trajan/engine.hpp"
#include "trajan/errors.hpp"
#include "trajan/trjb.hpp"

namespace trajan {

namespace {

static_assert(sizeof(Vec3) == 3 * sizeof(float), "frames are packed xyz floats");

// Sum of squared coordinate differences over the flat xyz arrays. Element k
// always lands in lane k % kLanes and the lanes are combined in a fixed
// tree, so the result does not depend on how the loop is vectorized.
double sum_squared_deviation(const Vec3* a, const Vec3* b, std::size_t n) {
  constexpr std::size_t kLanes = 32;
  const float* x = a->data();
  const float* y = b->data();
  const std::size_t m = 3 * n;
  double acc[kLanes] = {};
  std::size_t k = 0;
  for (; k + kLanes <= m; k += kLanes) {
    for (std::size_t l = 0; l < kLanes; ++l) {
      const double d = double(x[k + l]) - double(y[k + l]);
      acc[l] += d * d;
    }
  }
  for (std::size_t l = 0; k < m; ++k, ++l) {
    const double d = double(x[k]) - double(y[k]);
    acc[l] += d * d;
  }
  for (std::size_t width = kLanes / 2; width > 0; width /= 2) {
    for (std::size_t l = 0; l < width; ++l) acc[l] += acc[l + width];
  }
  return acc[0];
}

void require_same_atoms(const Trajectory& t1, const Trajectory& t2) {
  if (t1.frames.empty() || t2.frames.empty()) throw UsageError("trajectory has no frames");
  if (t1.n_atoms() != t2.n_atoms()) {
    throw UsageError("atom count mismatch: '" + t1.id + "' has " + std::to_string(t1.n_atoms()) +
                     ", '" + t2.id + "' has " + std::to_string(t2.n_atoms()));
  }
}

// Directed term with early break: max over f in from of min over g in to.
double directed_early_break(const Trajectory& from, const Trajectory& to) {
  double cmax = 0.0;
  for (const auto& f : from.frames) {
    double cmin = std::numeric_limits<double>::infinity();
    bool pruned = false;
    for (const auto& g : to.frames) {
      const double d = d_rms(f, g);
      if (d < cmax) {
        pruned = true;
        break;
      }
      if (d < cmin) cmin = d;
    }
    if (!pruned && cmin > cmax) cmax = cmin;
  }
  return cmax;
}

}  // namespace

double d_rms(const Frame& a, const Frame& b) {
  if (a.n_atoms() != b.n_atoms()) {
    throw UsageError("d_rms: frames have " + std::to_string(a.n_atoms()) + " and " +
                     std::to_string(b.n_atoms()) + " atoms");
  }
  if (a.n_atoms() == 0) throw UsageError("d_rms: empty frames");
  const double ssd = sum_squared_deviation(a.positions.data(), b.positions.data(), a.n_atoms());
  return std::sqrt(ssd / static_cast<double>(a.n_atoms()));
}

double hausdorff_naive(const Trajectory& t1, const Trajectory& t2) {
  require_same_atoms(t1, t2);
  const std::size_t n1 = t1.n_frames(), n2 = t2.n_frames();
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> row_min(n1, inf), col_min(n2, inf);
  // Tiles of t1 frames stay cache resident while t2 streams past once per tile.
  constexpr std::size_t kTile = 8;
  for (std::size_t i0 = 0; i0 < n1; i0 += kTile) {
    const std::size_t i1 = std::min(n1, i0 + kTile);
    for (std::size_t j = 0; j < n2; ++j) {
      for (std::size_t i = i0; i < i1; ++i) {
        const double d = d_rms(t1.frames[i], t2.frames[j]);
        if (d < row_min[i]) row_min[i] = d;
        if (d < col_min[j]) col_min[j] = d;
      }
    }
  }
  double h = 0.0;
  for (double v : row_min) h = std::max(h, v);
  for (double v : col_min) h = std::max(h, v);
  return h;
}

double hausdorff_early_break(const Trajectory& t1, const Trajectory& t2) {
  require_same_atoms(t1, t2);
  return std::max(directed_early_break(t1, t2), directed_early_break(t2, t1));
}

HausdorffVariant parse_variant(const std::string& name) {
  if (name == "naive") return HausdorffVariant::naive;
  if (name == "early-break" || name == "early_break") return HausdorffVariant::early_break;
  throw UsageError("unknown Hausdorff variant '" + name + "' (expected naive or early-break)");
}

const char* to_string(HausdorffVariant variant) {
  return variant == HausdorffVariant::naive ? "naive" : "early-break";
}

double hausdorff(const Trajectory& t1, const Trajectory& t2, HausdorffVariant variant) {
  return variant == HausdorffVariant::naive ? hausdorff_naive(t1, t2)
                                            : hausdorff_early_break(t1, t2);
}

PartitionPlan partition_2d(std::size_t n_items, std::size_t block) {
  if (n_items == 0) throw UsageError("partition_2d: no items");
  if (block == 0 || n_items % block != 0) {
    throw UsageError("block size " + std::to_string(block) + " does not divide item count " +
                     std::to_string(n_items));
  }
  PartitionPlan plan;
  plan.n_items = n_items;
  plan.block = block;
  plan.blocks = n_items / block;
  plan.tasks.reserve(plan.blocks * plan.blocks);
  for (std::size_t i = 0; i < plan.blocks; ++i) {
    for (std::size_t j = 0; j < plan.blocks; ++j) plan.tasks.push_back({i, j});
  }
  return plan;
}

void check_matrix(const DistanceMatrix& m) {
  if (m.values.size() != m.n * m.n) throw DataError("matrix storage does not match n");
  for (std::size_t i = 0; i < m.n; ++i) {
    if (m.at(i, i) != 0.0) throw DataError("non-zero diagonal at " + std::to_string(i));
    for (std::size_t j = 0; j < m.n; ++j) {
      const double v = m.at(i, j);
      if (!std::isfinite(v) || v < 0) {
        throw DataError("invalid distance at (" + std::to_string(i) + "," + std::to_string(j) + ")");
      }
      if (v != m.at(j, i)) {
        throw DataError("asymmetric at (" + std::to_string(i) + "," + std::to_string(j) + ")");
      }
    }
  }
}

// ---------------------------------------------------------------------------
// Task encoding.
//
// input:  u8 variant | u8 symmetric | u32 row_begin | u32 col_begin |
//         u32 n_rows | u32 n_cols | u8 source (0 = TRJB bytes, 1 = path) |
//         n_rows blobs, then n_cols blobs unless row_begin == col_begin
// output: u32 row_begin | u32 col_begin | u32 n_rows | u32 n_cols |
//         n_rows * n_cols f64, NaN where the cell is left to mirroring

namespace {

enum class Source : std::uint8_t { inline_trjb = 0, path = 1 };

struct BlockInput {
  HausdorffVariant variant;
  bool symmetric;
  std::uint32_t row_begin, col_begin, n_rows, n_cols;
  std::vector<Trajectory> rows, cols;
};

Trajectory load_item(Source source, std::span<const std::uint8_t> blob) {
  if (source == Source::inline_trjb) return decode_trjb(blob);
  return read_trjb_file(std::string(blob.begin(), blob.end()));
}

Bytes encode_block(const PsaOptions& opt, std::size_t row_begin, std::size_t col_begin,
                   std::size_t n, Source source,
                   const std::function<Bytes(std::size_t)>& item) {
  Bytes out;
  ByteWriter w(out);
  w.u8(static_cast<std::uint8_t>(opt.variant));
  w.u8(opt.symmetric ? 1 : 0);
  w.u32(static_cast<std::uint32_t>(row_begin));
  w.u32(static_cast<std::uint32_t>(col_begin));
  w.u32(static_cast<std::uint32_t>(n));
  w.u32(static_cast<std::uint32_t>(n));
  w.u8(static_cast<std::uint8_t>(source));
  for (std::size_t r = 0; r < n; ++r) w.blob(item(row_begin + r));
  if (row_begin != col_begin) {
    for (std::size_t c = 0; c < n; ++c) w.blob(item(col_begin + c));
  }
  return out;
}

struct BlockOutput {
  std::uint32_t row_begin, col_begin, n_rows, n_cols;
  std::vector<double> values;
};

BlockOutput decode_block_output(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes);
  BlockOutput o;
  o.row_begin = r.u32();
  o.col_begin = r.u32();
  o.n_rows = r.u32();
  o.n_cols = r.u32();
  const std::uint64_t cells = std::uint64_t{o.n_rows} * o.n_cols;
  r.expect_items(cells, 8);
  o.values.resize(cells);
  for (auto& v : o.values) v = r.f64();
  r.expect_done();
  return o;
}

}  // namespace

Bytes run_psa_block(std::span<const std::uint8_t> input) {
  ByteReader r(input);
  BlockInput in;
  const auto variant = r.u8();
  if (variant > 1) throw FormatError("bad Hausdorff variant tag " + std::to_string(variant));
  in.variant = static_cast<HausdorffVariant>(variant);
  in.symmetric = r.u8() != 0;
  in.row_begin = r.u32();
  in.col_begin = r.u32();
  in.n_rows = r.u32();
  in.n_cols = r.u32();
  const auto source = r.u8();
  if (source > 1) throw FormatError("bad PSA source tag " + std::to_string(source));
  const bool diagonal = in.row_begin == in.col_begin;
  if (diagonal && in.n_rows != in.n_cols) throw FormatError("diagonal block must be square");
  r.expect_items(in.n_rows, 4);
  for (std::uint32_t i = 0; i < in.n_rows; ++i) {
    in.rows.push_back(load_item(static_cast<Source>(source), r.blob()));
  }
  if (!diagonal) {
    r.expect_items(in.n_cols, 4);
    for (std::uint32_t i = 0; i < in.n_cols; ++i) {
      in.cols.push_back(load_item(static_cast<Source>(source), r.blob()));
    }
  }
  r.expect_done();
  const auto& cols = diagonal ? in.rows : in.cols;

  Bytes out;
  ByteWriter w(out);
  w.u32(in.row_begin);
  w.u32(in.col_begin);
  w.u32(in.n_rows);
  w.u32(in.n_cols);
  for (std::uint32_t i = 0; i < in.n_rows; ++i) {
    for (std::uint32_t j = 0; j < in.n_cols; ++j) {
      const std::size_t gr = in.row_begin + i, gc = in.col_begin + j;
      double v;
      if (gr == gc) {
        v = 0.0;
      } else if (in.symmetric && gr > gc) {
        v = std::numeric_limits<double>::quiet_NaN();
      } else {
        v = hausdorff(in.rows[i], cols[j], in.variant);
      }
      w.f64(v);
    }
  }
  return out;
}

namespace {

DistanceMatrix run_plan(std::size_t n, std::size_t block, std::vector<std::string> labels,
                        Engine& engine, const PsaOptions& options, Source source,
                        const std::function<Bytes(std::size_t)>& item) {
  const auto plan = partition_2d(n, block);
  std::vector<TaskSpec> tasks;
  for (const auto& t : plan.tasks) {
    if (options.symmetric && t.row > t.col) continue;
    TaskSpec spec;
    spec.id = t.row * plan.blocks + t.col;
    spec.kind = TaskKind::psa_block;
    spec.payload = encode_block(options, t.row * block, t.col * block, block, source, item);
    tasks.push_back(std::move(spec));
  }

  const auto results = engine.submit_map(std::move(tasks));

  DistanceMatrix m;
  m.n = n;
  m.labels = std::move(labels);
  m.values.assign(n * n, std::numeric_limits<double>::quiet_NaN());
  for (const auto& res : results) {
    const auto bi = res.id / plan.blocks, bj = res.id % plan.blocks;
    if (!res.ok()) {
      throw TaskError("PSA task (" + std::to_string(bi) + "," + std::to_string(bj) +
                      ") failed: " + res.error_message());
    }
    const auto o = decode_block_output(res.payload);
    if (o.row_begin != bi * block || o.col_begin != bj * block || o.n_rows != block ||
        o.n_cols != block) {
      throw TaskError("PSA task (" + std::to_string(bi) + "," + std::to_string(bj) +
                      ") returned the wrong block");
    }
    for (std::size_t i = 0; i < block; ++i) {
      for (std::size_t j = 0; j < block; ++j) {
        const double v = o.values[i * block + j];
        if (!std::isnan(v)) m.at(o.row_begin + i, o.col_begin + j) = v;
      }
    }
  }
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < i; ++j) {
      if (std::isnan(m.at(i, j))) m.at(i, j) = m.at(j, i);
    }
  }
  check_matrix(m);
  return m;
}

}  // namespace

DistanceMatrix psa_matrix(std::span<const Trajectory> trajectories, std::size_t block,
                          Engine& engine, const PsaOptions& options) {
  if (trajectories.empty()) throw UsageError("psa_matrix: no trajectories");
  for (const auto& t : trajectories) {
    validate(t);
    require_same_atoms(trajectories.front(), t);
  }
  partition_2d(trajectories.size(), block);
  std::vector<std::string> labels;
  for (const auto& t : trajectories) labels.push_back(t.id);
  return run_plan(trajectories.size(), block, std::move(labels), engine, options,
                  Source::inline_trjb,
                  [&](std::size_t i) { return encode_trjb(trajectories[i]); });
}

DistanceMatrix psa_matrix_files(std::span<const std::filesystem::path> paths, std::size_t block,
                                Engine& engine, const PsaOptions& options) {
  if (paths.empty()) throw UsageError("psa_matrix: no trajectories");
  const auto first = read_trjb_header_file(paths.front());
  std::vector<std::string> mismatched;
  std::vector<std::string> labels;
  for (const auto& p : paths) {
    const auto h = read_trjb_header_file(p);
    if (h.n_atoms != first.n_atoms) {
      mismatched.push_back(p.string() + " (" + std::to_string(h.n_atoms) + " atoms)");
    }
    labels.push_back(p.stem().string());
  }
  if (!mismatched.empty()) {
    std::string msg = "atom count differs from " + paths.front().string() + " (" +
                      std::to_string(first.n_atoms) + " atoms):";
    for (const auto& m : mismatched) msg += " " + m;
    throw UsageError(msg);
  }
  partition_2d(paths.size(), block);
  std::vector<std::string> absolute;
  for (const auto& p : paths) absolute.push_back(std::filesystem::absolute(p).string());
  return run_plan(paths.size(), block, std::move(labels), engine, options, Source::path,
                  [&](std::size_t i) { return Bytes(absolute[i].begin(), absolute[i].end()); });
}

std::size_t write_matrix_csv(const DistanceMatrix& m, std::ostream& out) {
  std::string text = "id";
  for (const auto& l : m.labels) text += "," + csv_field(l);
  text += '\n';
  char buf[32];
  for (std::size_t i = 0; i < m.n; ++i) {
    text += csv_field(m.labels[i]);
    for (std::size_t j = 0; j < m.n; ++j) {
      std::snprintf(buf, sizeof buf, ",%.17g", m.at(i, j));
      text += buf;
    }
    text += '\n';
  }
  out << text;
  if (!out) throw IoError("matrix CSV write failed");
  return text.size();
}

}  // namespace trajan
