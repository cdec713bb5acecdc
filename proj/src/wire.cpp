#include "trajan/wire.hpp"

#include <cstring>

#include "trajan/errors.hpp"

namespace trajan::wire {

const char* to_string(MessageType type) {
  switch (type) {
    case MessageType::register_worker: return "REGISTER";
    case MessageType::task: return "TASK";
    case MessageType::result: return "RESULT";
    case MessageType::broadcast: return "BROADCAST";
    case MessageType::shutdown: return "SHUTDOWN";
    case MessageType::ack: return "ACK";
  }
  return "UNKNOWN";
}

Bytes encode_frame(MessageType type, std::span<const std::uint8_t> payload) {
  if (payload.size() > UINT32_MAX) throw UsageError("frame payload exceeds 4 GiB");
  Bytes out;
  out.reserve(kHeaderSize + payload.size());
  ByteWriter w(out);
  w.raw(kMagic.data(), kMagic.size());
  w.u8(static_cast<std::uint8_t>(type));
  w.u32(static_cast<std::uint32_t>(payload.size()));
  w.bytes(payload);
  return out;
}

void FrameDecoder::feed(std::span<const std::uint8_t> data) {
  if (consumed_ > 0 && consumed_ == buffer_.size()) {
    buffer_.clear();
    consumed_ = 0;
  }
  buffer_.insert(buffer_.end(), data.begin(), data.end());
}

void FrameDecoder::check_header() const {
  const std::uint8_t* p = buffer_.data() + consumed_;
  const std::size_t avail = buffer_.size() - consumed_;
  const std::size_t magic_bytes = std::min(avail, kMagic.size());
  if (std::memcmp(p, kMagic.data(), magic_bytes) != 0) throw ProtocolError("bad frame magic");
  if (avail > 4 && (p[4] < 1 || p[4] > 6)) {
    throw ProtocolError("unknown message type " + std::to_string(p[4]));
  }
}

std::optional<Message> FrameDecoder::next() {
  if (!mid_frame()) return std::nullopt;
  check_header();
  const std::size_t avail = buffer_.size() - consumed_;
  if (avail < kHeaderSize) return std::nullopt;

  ByteReader header(std::span<const std::uint8_t>(buffer_).subspan(consumed_ + 5, 4));
  const std::uint32_t length = header.u32();
  if (length > max_payload_) {
    throw ProtocolError("frame payload of " + std::to_string(length) +
                        " bytes exceeds limit of " + std::to_string(max_payload_));
  }
  if (avail < kHeaderSize + length) return std::nullopt;

  Message m;
  m.type = static_cast<MessageType>(buffer_[consumed_ + 4]);
  const auto begin = buffer_.begin() + static_cast<std::ptrdiff_t>(consumed_ + kHeaderSize);
  m.payload.assign(begin, begin + length);
  consumed_ += kHeaderSize + length;
  // Compact once the consumed prefix dominates the buffer.
  if (consumed_ > (1u << 20) && consumed_ * 2 > buffer_.size()) {
    buffer_.erase(buffer_.begin(), buffer_.begin() + static_cast<std::ptrdiff_t>(consumed_));
    consumed_ = 0;
  }
  return m;
}

Bytes encode_task(std::uint64_t id, std::uint8_t kind, std::span<const std::uint8_t> input) {
  Bytes out;
  out.reserve(9 + input.size());
  ByteWriter w(out);
  w.u64(id);
  w.u8(kind);
  w.bytes(input);
  return out;
}

TaskMessage decode_task(std::span<const std::uint8_t> payload) {
  ByteReader r(payload);
  TaskMessage m;
  m.id = r.u64();
  m.kind = r.u8();
  m.input = r.rest();
  return m;
}

Bytes encode_result(std::uint64_t id, std::uint8_t status, double wall_seconds,
                    std::span<const std::uint8_t> output) {
  Bytes out;
  out.reserve(17 + output.size());
  ByteWriter w(out);
  w.u64(id);
  w.u8(status);
  w.f64(wall_seconds);
  w.bytes(output);
  return out;
}

ResultMessage decode_result(std::span<const std::uint8_t> payload) {
  ByteReader r(payload);
  ResultMessage m;
  m.id = r.u64();
  m.status = r.u8();
  if (m.status > 1) throw FormatError("bad result status " + std::to_string(m.status));
  m.wall_seconds = r.f64();
  m.output = r.rest();
  return m;
}

}  // namespace trajan::wire
