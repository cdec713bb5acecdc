#include "trajan/worker.hpp"

#include <chrono>
#include <iostream>
#include <unordered_map>

#include "net.hpp"
#include "trajan/errors.hpp"
#include "trajan/wire.hpp"

namespace trajan {

namespace {

class RemoteContext final : public TaskContext {
 public:
  std::span<const std::uint8_t> broadcast(std::uint64_t handle) const override {
    auto it = data_.find(handle);
    if (it == data_.end()) throw UsageError("unknown broadcast handle " + std::to_string(handle));
    return it->second;
  }
  std::size_t worker_index() const override { return 0; }
  bool isolated() const override { return true; }

  std::unordered_map<std::uint64_t, Bytes> data_;
};

// Frame limit: the memory budget plus room for message headers.
std::uint64_t frame_limit(std::uint64_t budget) { return budget + 64; }

}  // namespace

int worker_serve(const std::string& scheduler_address, std::uint64_t memory_budget,
                 const TaskRegistry& registry) {
  using wire::MessageType;
  try {
    auto sock = net::connect_tcp(scheduler_address, std::chrono::seconds(10));

    Bytes reg;
    ByteWriter(reg).u64(memory_budget);
    net::send_all(sock, wire::encode_frame(MessageType::register_worker, reg));

    wire::FrameDecoder decoder(frame_limit(memory_budget));
    RemoteContext ctx;
    std::vector<std::uint8_t> buf(1 << 16);
    bool registered = false;

    while (true) {
      while (auto msg = decoder.next()) {
        switch (msg->type) {
          case MessageType::ack:
            if (registered) throw ProtocolError("unexpected ACK");
            if (!msg->payload.empty()) throw ProtocolError("REGISTER ACK carries a payload");
            registered = true;
            break;
          case MessageType::shutdown:
            return 0;
          case MessageType::task: {
            if (!registered) throw ProtocolError("TASK before registration ACK");
            wire::TaskMessage task;
            try {
              task = wire::decode_task(msg->payload);
            } catch (const FormatError& e) {
              throw ProtocolError(std::string("malformed TASK: ") + e.what());
            }
            const auto t0 = std::chrono::steady_clock::now();
            std::uint8_t status = 0;
            Bytes output;
            try {
              output = registry.run(task.kind, task.input, ctx);
            } catch (const std::exception& e) {
              status = 1;
              std::string what = e.what();
              output.assign(what.begin(), what.end());
            }
            const double wall =
                std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
            net::send_all(sock, wire::encode_frame(MessageType::result,
                                                   wire::encode_result(task.id, status, wall, output)));
            break;
          }
          case MessageType::broadcast: {
            if (!registered) throw ProtocolError("BROADCAST before registration ACK");
            if (msg->payload.size() < 8) throw ProtocolError("BROADCAST payload too short");
            ByteReader r(msg->payload);
            const auto handle = r.u64();
            auto data = r.rest();
            ctx.data_[handle] = Bytes(data.begin(), data.end());
            Bytes ack;
            ByteWriter(ack).u64(handle);
            net::send_all(sock, wire::encode_frame(MessageType::ack, ack));
            break;
          }
          case MessageType::register_worker:
          case MessageType::result:
            throw ProtocolError(std::string("scheduler sent ") + wire::to_string(msg->type));
        }
      }
      const long n = net::recv_some(sock, buf);
      if (n == 0) {
        std::cerr << "trajan worker: scheduler closed the connection"
                  << (decoder.mid_frame() ? " mid-frame" : "") << "\n";
        return 1;
      }
      decoder.feed(std::span(buf.data(), static_cast<std::size_t>(n)));
    }
  } catch (const ProtocolError& e) {
    std::cerr << "trajan worker: protocol violation: " << e.what() << "\n";
    return 1;
  } catch (const Error& e) {
    std::cerr << "trajan worker: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace trajan
