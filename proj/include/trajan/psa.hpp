#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "trajan/bytes.hpp"
#include "trajan/core.hpp"

namespace trajan {

class Engine;

// Root-mean-square deviation of index-matched atoms:
//   sqrt( (1/N) * sum_i |a_i - b_i|^2 )
// No superposition or mass weighting; coordinates are widened to double
// before subtraction and accumulated in double.
double d_rms(const Frame& a, const Frame& b);

// Symmetric Hausdorff distance between two trajectories under d_rms:
//   max( max_{f in t1} min_{g in t2} d(f,g), max_{g in t2} min_{f in t1} d(g,f) )
// Evaluates every frame pair once and derives both directed terms.
double hausdorff_naive(const Trajectory& t1, const Trajectory& t2);

// Same value as hausdorff_naive, bit for bit. Each directed pass stops
// scanning candidates for a frame as soon as one is strictly closer than the
// running directed maximum, since that frame can no longer raise it.
double hausdorff_early_break(const Trajectory& t1, const Trajectory& t2);

enum class HausdorffVariant : std::uint8_t { naive = 0, early_break = 1 };

HausdorffVariant parse_variant(const std::string& name);
const char* to_string(HausdorffVariant variant);

double hausdorff(const Trajectory& t1, const Trajectory& t2, HausdorffVariant variant);

// Blocks an n_items x n_items grid into (n_items/block)^2 tasks, row-major.
// UsageError unless block divides n_items.
PartitionPlan partition_2d(std::size_t n_items, std::size_t block);

struct DistanceMatrix {
  std::size_t n = 0;
  std::vector<double> values;  // row-major n x n, nm
  std::vector<std::string> labels;

  double at(std::size_t i, std::size_t j) const { return values[i * n + j]; }
  double& at(std::size_t i, std::size_t j) { return values[i * n + j]; }
  bool operator==(const DistanceMatrix&) const = default;
};

// Symmetric, zero diagonal, finite and non-negative; DataError otherwise.
void check_matrix(const DistanceMatrix& matrix);

struct PsaOptions {
  HausdorffVariant variant = HausdorffVariant::naive;
  // Only blocks with row <= col are computed and mirrored. Disable to
  // evaluate all k^2 blocks.
  bool symmetric = true;
};

// All-pairs Hausdorff matrix. One engine task per block of the 2-D
// partition; each task receives only its row and column trajectories.
DistanceMatrix psa_matrix(std::span<const Trajectory> trajectories, std::size_t block,
                          Engine& engine, const PsaOptions& options = {});

// As psa_matrix, but tasks carry file paths and load their own TRJB inputs.
// Shapes are checked from the headers before anything is submitted.
DistanceMatrix psa_matrix_files(std::span<const std::filesystem::path> paths, std::size_t block,
                                Engine& engine, const PsaOptions& options = {});

// Header "id,<label>...", then one row per trajectory: label then n values.
std::size_t write_matrix_csv(const DistanceMatrix& matrix, std::ostream& out);

// Task handler for TaskKind::psa_block.
Bytes run_psa_block(std::span<const std::uint8_t> input);

}  // namespace trajan
