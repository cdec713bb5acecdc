#pragma once

#include <cstddef>
#include <cstdint>
#include <string>

namespace trajan {

// One timed measurement; rows of the results CSV.
struct BenchRecord {
  std::string op;
  std::string scale;
  std::size_t workers = 0;
  std::size_t repeat = 0;
  double wall_seconds = 0.0;
  std::uint64_t bytes_shuffled = 0;

  bool operator==(const BenchRecord&) const = default;
};

}  // namespace trajan
