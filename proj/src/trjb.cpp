#include "trajan/trjb.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>

#include "trajan/errors.hpp"

namespace trajan {

std::size_t trjb_size(std::size_t n_frames, std::size_t n_atoms) {
  return TrjbHeader::kSize + 12 * n_frames * n_atoms;
}

namespace {

void encode_header(ByteWriter& w, std::size_t n_frames, std::size_t n_atoms) {
  w.raw(TrjbHeader::kMagic.data(), 4);
  w.u16(TrjbHeader::kVersion);
  w.u32(static_cast<std::uint32_t>(n_frames));
  w.u32(static_cast<std::uint32_t>(n_atoms));
}

void check_shape(const Trajectory& t) {
  validate(t);
  if (t.n_frames() > UINT32_MAX || t.n_atoms() > UINT32_MAX) {
    throw UsageError("trajectory too large for TRJB");
  }
}

}  // namespace

Bytes encode_trjb(const Trajectory& trajectory) {
  check_shape(trajectory);
  Bytes out;
  out.reserve(trjb_size(trajectory.n_frames(), trajectory.n_atoms()));
  ByteWriter w(out);
  encode_header(w, trajectory.n_frames(), trajectory.n_atoms());
  for (const auto& frame : trajectory.frames) {
    w.raw(frame.positions.data(), frame.positions.size() * sizeof(Vec3));
  }
  return out;
}

TrjbHeader decode_trjb_header(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < TrjbHeader::kSize) {
    throw FormatError("TRJB header truncated: expected " +
                      std::to_string(TrjbHeader::kSize) + " bytes, got " +
                      std::to_string(bytes.size()));
  }
  if (std::memcmp(bytes.data(), TrjbHeader::kMagic.data(), 4) != 0) {
    throw FormatError("bad TRJB magic");
  }
  ByteReader r(bytes.subspan(4, TrjbHeader::kSize - 4));
  const auto version = r.u16();
  if (version != TrjbHeader::kVersion) {
    throw FormatError("unsupported TRJB version " + std::to_string(version));
  }
  TrjbHeader h;
  h.n_frames = r.u32();
  h.n_atoms = r.u32();
  if (h.n_frames == 0) throw FormatError("TRJB declares zero frames");
  if (h.n_atoms == 0) throw FormatError("TRJB declares zero atoms");
  return h;
}

Trajectory decode_trjb(std::span<const std::uint8_t> bytes, std::string id) {
  const auto h = decode_trjb_header(bytes);
  const auto expected = static_cast<unsigned __int128>(TrjbHeader::kSize) +
                        static_cast<unsigned __int128>(std::uint64_t{h.n_frames} * h.n_atoms) * 12;
  if (bytes.size() != expected) {
    throw FormatError(std::string(bytes.size() < expected ? "truncated" : "oversized") +
                      " TRJB: expected " + std::to_string(TrjbHeader::kSize + h.payload_bytes()) +
                      " bytes, got " + std::to_string(bytes.size()));
  }
  Trajectory t;
  t.id = std::move(id);
  t.frames.resize(h.n_frames);
  const auto* p = bytes.data() + TrjbHeader::kSize;
  const std::size_t frame_bytes = std::size_t{h.n_atoms} * sizeof(Vec3);
  for (auto& frame : t.frames) {
    frame.positions.resize(h.n_atoms);
    std::memcpy(frame.positions.data(), p, frame_bytes);
    p += frame_bytes;
  }
  for (std::size_t f = 0; f < t.frames.size(); ++f) {
    const auto& pos = t.frames[f].positions;
    for (std::size_t a = 0; a < pos.size(); ++a) {
      for (float c : pos[a]) {
        if (!std::isfinite(c)) {
          throw DataError("non-finite coordinate in frame " + std::to_string(f) +
                          " atom " + std::to_string(a));
        }
      }
    }
  }
  return t;
}

std::size_t write_trjb(const Trajectory& trajectory, std::ostream& out) {
  check_shape(trajectory);
  Bytes header;
  ByteWriter w(header);
  encode_header(w, trajectory.n_frames(), trajectory.n_atoms());
  std::size_t written = 0;
  auto put = [&](const void* data, std::size_t n) {
    out.write(static_cast<const char*>(data), static_cast<std::streamsize>(n));
    if (!out) {
      throw IoError("TRJB write failed at byte offset " + std::to_string(written));
    }
    written += n;
  };
  put(header.data(), header.size());
  for (const auto& frame : trajectory.frames) {
    put(frame.positions.data(), frame.positions.size() * sizeof(Vec3));
  }
  out.flush();
  if (!out) throw IoError("TRJB flush failed after " + std::to_string(written) + " bytes");
  return written;
}

Trajectory read_trjb(std::istream& in, std::string id) {
  // Slurp in bounded chunks so a corrupted header cannot force a huge
  // allocation before truncation is detected.
  Bytes data;
  char chunk[1 << 16];
  while (in) {
    in.read(chunk, sizeof chunk);
    data.insert(data.end(), chunk, chunk + in.gcount());
  }
  if (in.bad()) throw IoError("TRJB read failed after " + std::to_string(data.size()) + " bytes");
  return decode_trjb(data, std::move(id));
}

Bytes read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::error_code ec;
  const auto size = std::filesystem::file_size(path, ec);
  if (ec) throw IoError("cannot stat " + path.string() + ": " + ec.message());
  Bytes data(size);
  in.read(reinterpret_cast<char*>(data.data()), static_cast<std::streamsize>(size));
  if (static_cast<std::uintmax_t>(in.gcount()) != size) {
    throw IoError("short read on " + path.string());
  }
  return data;
}

std::size_t write_trjb_file(const Trajectory& trajectory, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  try {
    return write_trjb(trajectory, out);
  } catch (const IoError& e) {
    throw IoError(path.string() + ": " + e.what());
  }
}

Trajectory read_trjb_file(const std::filesystem::path& path) {
  const auto data = read_file_bytes(path);
  try {
    return decode_trjb(data, path.stem().string());
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  } catch (const DataError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

TrjbHeader read_trjb_header_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::uint8_t buf[TrjbHeader::kSize];
  in.read(reinterpret_cast<char*>(buf), sizeof buf);
  try {
    return decode_trjb_header(std::span<const std::uint8_t>(buf, static_cast<std::size_t>(in.gcount())));
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

std::size_t write_system_file(const System& system, const std::filesystem::path& path) {
  validate(system);
  Trajectory t;
  t.id = system.id;
  t.frames.push_back(Frame{system.positions});
  return write_trjb_file(t, path);
}

System read_system_file(const std::filesystem::path& path) {
  auto t = read_trjb_file(path);
  if (t.n_frames() != 1) {
    throw FormatError(path.string() + ": system file must hold exactly 1 frame, found " +
                      std::to_string(t.n_frames()));
  }
  return System{std::move(t.id), std::move(t.frames.front().positions)};
}

}  // namespace trajan
