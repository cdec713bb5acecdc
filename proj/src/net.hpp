#pragma once

#include <chrono>
#include <cstdint>
#include <span>
#include <string>
#include <utility>

namespace trajan::net {

// Owning file descriptor.
class Socket {
 public:
  Socket() = default;
  explicit Socket(int fd) : fd_(fd) {}
  Socket(Socket&& o) noexcept : fd_(std::exchange(o.fd_, -1)) {}
  Socket& operator=(Socket&& o) noexcept {
    if (this != &o) {
      close();
      fd_ = std::exchange(o.fd_, -1);
    }
    return *this;
  }
  Socket(const Socket&) = delete;
  Socket& operator=(const Socket&) = delete;
  ~Socket() { close(); }

  int fd() const { return fd_; }
  bool valid() const { return fd_ >= 0; }
  void close();

 private:
  int fd_ = -1;
};

struct Endpoint {
  std::string host;
  std::uint16_t port = 0;
  std::string str() const { return host + ":" + std::to_string(port); }
};

// Parses "host:port"; UsageError when malformed.
Endpoint parse_endpoint(const std::string& address);

// Binds and listens; returns the socket and the actual bound endpoint
// (resolves port 0 to the kernel-chosen port).
std::pair<Socket, Endpoint> listen_tcp(const std::string& address);
Socket connect_tcp(const std::string& address, std::chrono::milliseconds retry_for);
// Accepts one pending connection, or an invalid Socket if none is ready.
Socket accept_nonblocking(const Socket& listener);

void set_nonblocking(const Socket& s);
// Blocking full write; IoError on failure. Never raises SIGPIPE.
void send_all(const Socket& s, std::span<const std::uint8_t> data);
// Nonblocking write; returns bytes written (0 if it would block).
std::size_t send_some(const Socket& s, std::span<const std::uint8_t> data);
// Returns bytes read, 0 on orderly EOF, -1 if it would block. IoError on failure.
long recv_some(const Socket& s, std::span<std::uint8_t> buffer);

}  // namespace trajan::net
