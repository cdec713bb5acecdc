#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>

#include "trajan/bytes.hpp"
#include "trajan/core.hpp"

namespace trajan {

// TRJB layout (little-endian):
//   "TRJB" | u16 version=1 | u32 n_frames | u32 n_atoms
//   then n_frames * n_atoms * (f32 x, f32 y, f32 z)
struct TrjbHeader {
  static constexpr std::array<char, 4> kMagic{'T', 'R', 'J', 'B'};
  static constexpr std::uint16_t kVersion = 1;
  static constexpr std::size_t kSize = 14;

  std::uint32_t n_frames = 0;
  std::uint32_t n_atoms = 0;

  std::uint64_t payload_bytes() const {
    return std::uint64_t{n_frames} * n_atoms * 12;
  }
};

std::size_t trjb_size(std::size_t n_frames, std::size_t n_atoms);

Bytes encode_trjb(const Trajectory& trajectory);
Trajectory decode_trjb(std::span<const std::uint8_t> bytes, std::string id = {});
TrjbHeader decode_trjb_header(std::span<const std::uint8_t> bytes);

// Stream forms. write_trjb returns the number of bytes written and raises
// IoError naming the byte offset where the sink failed.
std::size_t write_trjb(const Trajectory& trajectory, std::ostream& out);
Trajectory read_trjb(std::istream& in, std::string id = {});

// File forms; read_trjb_file labels the trajectory with the file stem.
std::size_t write_trjb_file(const Trajectory& trajectory, const std::filesystem::path& path);
Trajectory read_trjb_file(const std::filesystem::path& path);
TrjbHeader read_trjb_header_file(const std::filesystem::path& path);
Bytes read_file_bytes(const std::filesystem::path& path);

// A System is stored as a single-frame TRJB file.
std::size_t write_system_file(const System& system, const std::filesystem::path& path);
System read_system_file(const std::filesystem::path& path);

}  // namespace trajan
