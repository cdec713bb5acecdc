#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>

#include "trajan/bytes.hpp"

namespace trajan::wire {

// Frame: "TPW1" | u8 type | u32 payload length (LE) | payload.
inline constexpr std::array<std::uint8_t, 4> kMagic{'T', 'P', 'W', '1'};
inline constexpr std::size_t kHeaderSize = 9;

enum class MessageType : std::uint8_t {
  register_worker = 1,
  task = 2,
  result = 3,
  broadcast = 4,
  shutdown = 5,
  ack = 6,
};

const char* to_string(MessageType type);

struct Message {
  MessageType type{};
  Bytes payload;
};

Bytes encode_frame(MessageType type, std::span<const std::uint8_t> payload);

// Incremental frame parser for a byte stream. Raises ProtocolError as soon
// as a header is known to be invalid (bad magic, unknown type, payload
// longer than max_payload), before waiting for the rest of the frame.
class FrameDecoder {
 public:
  explicit FrameDecoder(std::uint64_t max_payload) : max_payload_(max_payload) {}

  void feed(std::span<const std::uint8_t> data);
  std::optional<Message> next();

  // True while a partially received frame is buffered.
  bool mid_frame() const { return buffer_.size() > consumed_; }

 private:
  void check_header() const;

  std::uint64_t max_payload_;
  Bytes buffer_;
  std::size_t consumed_ = 0;
};

// TASK payload: u64 task id | u8 kind | input bytes.
struct TaskMessage {
  std::uint64_t id = 0;
  std::uint8_t kind = 0;
  std::span<const std::uint8_t> input;
};

// RESULT payload: u64 task id | u8 status (0 ok, 1 error) | f64 wall seconds | output bytes.
struct ResultMessage {
  std::uint64_t id = 0;
  std::uint8_t status = 0;
  double wall_seconds = 0.0;
  std::span<const std::uint8_t> output;
};

Bytes encode_task(std::uint64_t id, std::uint8_t kind, std::span<const std::uint8_t> input);
TaskMessage decode_task(std::span<const std::uint8_t> payload);

Bytes encode_result(std::uint64_t id, std::uint8_t status, double wall_seconds,
                    std::span<const std::uint8_t> output);
ResultMessage decode_result(std::span<const std::uint8_t> payload);

// REGISTER payload: u64 worker memory budget. BROADCAST payload: u64 handle
// id | data. ACK payload: empty (REGISTER) or u64 handle id (BROADCAST).

}  // namespace trajan::wire
