#include "net.hpp"

#include <arpa/inet.h>
#include <cerrno>
#include <cstring>
#include <fcntl.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <sys/socket.h>
#include <thread>
#include <unistd.h>

#include "trajan/errors.hpp"

namespace trajan::net {

void Socket::close() {
  if (fd_ >= 0) {
    ::close(fd_);
    fd_ = -1;
  }
}

Endpoint parse_endpoint(const std::string& address) {
  const auto colon = address.rfind(':');
  if (colon == std::string::npos || colon + 1 == address.size()) {
    throw UsageError("address '" + address + "' must be host:port");
  }
  Endpoint ep;
  ep.host = address.substr(0, colon);
  if (ep.host.empty()) ep.host = "127.0.0.1";
  unsigned long port = 0;
  try {
    std::size_t used = 0;
    port = std::stoul(address.substr(colon + 1), &used);
    if (used != address.size() - colon - 1) throw std::invalid_argument("trailing");
  } catch (const std::exception&) {
    throw UsageError("address '" + address + "' has a bad port");
  }
  if (port > 65535) throw UsageError("address '" + address + "' has a bad port");
  ep.port = static_cast<std::uint16_t>(port);
  return ep;
}

namespace {

sockaddr_in resolve(const Endpoint& ep) {
  sockaddr_in sa{};
  sa.sin_family = AF_INET;
  sa.sin_port = htons(ep.port);
  if (::inet_pton(AF_INET, ep.host.c_str(), &sa.sin_addr) == 1) return sa;
  addrinfo hints{};
  hints.ai_family = AF_INET;
  hints.ai_socktype = SOCK_STREAM;
  addrinfo* res = nullptr;
  if (::getaddrinfo(ep.host.c_str(), nullptr, &hints, &res) != 0 || res == nullptr) {
    throw UsageError("cannot resolve host '" + ep.host + "'");
  }
  sa.sin_addr = reinterpret_cast<sockaddr_in*>(res->ai_addr)->sin_addr;
  ::freeaddrinfo(res);
  return sa;
}

std::string errno_text() { return std::strerror(errno); }

void set_nodelay(int fd) {
  int one = 1;
  ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
}

}  // namespace

std::pair<Socket, Endpoint> listen_tcp(const std::string& address) {
  auto ep = parse_endpoint(address);
  auto sa = resolve(ep);
  Socket s(::socket(AF_INET, SOCK_STREAM | SOCK_CLOEXEC, 0));
  if (!s.valid()) throw IoError("socket: " + errno_text());
  int one = 1;
  ::setsockopt(s.fd(), SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
  if (::bind(s.fd(), reinterpret_cast<sockaddr*>(&sa), sizeof sa) != 0) {
    throw IoError("bind " + address + ": " + errno_text());
  }
  if (::listen(s.fd(), 128) != 0) throw IoError("listen " + address + ": " + errno_text());
  socklen_t len = sizeof sa;
  ::getsockname(s.fd(), reinterpret_cast<sockaddr*>(&sa), &len);
  ep.port = ntohs(sa.sin_port);
  char host[INET_ADDRSTRLEN];
  ::inet_ntop(AF_INET, &sa.sin_addr, host, sizeof host);
  ep.host = host;
  set_nonblocking(s);
  return {std::move(s), ep};
}

Socket connect_tcp(const std::string& address, std::chrono::milliseconds retry_for) {
  const auto sa = resolve(parse_endpoint(address));
  const auto deadline = std::chrono::steady_clock::now() + retry_for;
  while (true) {
    Socket s(::socket(AF_INET, SOCK_STREAM | SOCK_CLOEXEC, 0));
    if (!s.valid()) throw IoError("socket: " + errno_text());
    if (::connect(s.fd(), reinterpret_cast<const sockaddr*>(&sa), sizeof sa) == 0) {
      set_nodelay(s.fd());
      return s;
    }
    if (std::chrono::steady_clock::now() >= deadline) {
      throw IoError("connect " + address + ": " + errno_text());
    }
    std::this_thread::sleep_for(std::chrono::milliseconds(20));
  }
}

Socket accept_nonblocking(const Socket& listener) {
  int fd = ::accept4(listener.fd(), nullptr, nullptr, SOCK_CLOEXEC | SOCK_NONBLOCK);
  if (fd < 0) {
    if (errno == EAGAIN || errno == EWOULDBLOCK || errno == EINTR || errno == ECONNABORTED) {
      return Socket{};
    }
    throw IoError("accept: " + errno_text());
  }
  set_nodelay(fd);
  return Socket(fd);
}

void set_nonblocking(const Socket& s) {
  int flags = ::fcntl(s.fd(), F_GETFL, 0);
  ::fcntl(s.fd(), F_SETFL, flags | O_NONBLOCK);
}

void send_all(const Socket& s, std::span<const std::uint8_t> data) {
  std::size_t off = 0;
  while (off < data.size()) {
    auto n = ::send(s.fd(), data.data() + off, data.size() - off, MSG_NOSIGNAL);
    if (n < 0) {
      if (errno == EINTR) continue;
      throw IoError("send: " + errno_text());
    }
    off += static_cast<std::size_t>(n);
  }
}

std::size_t send_some(const Socket& s, std::span<const std::uint8_t> data) {
  while (true) {
    auto n = ::send(s.fd(), data.data(), data.size(), MSG_NOSIGNAL | MSG_DONTWAIT);
    if (n >= 0) return static_cast<std::size_t>(n);
    if (errno == EINTR) continue;
    if (errno == EAGAIN || errno == EWOULDBLOCK) return 0;
    throw IoError("send: " + errno_text());
  }
}

long recv_some(const Socket& s, std::span<std::uint8_t> buffer) {
  while (true) {
    auto n = ::recv(s.fd(), buffer.data(), buffer.size(), 0);
    if (n >= 0) return static_cast<long>(n);
    if (errno == EINTR) continue;
    if (errno == EAGAIN || errno == EWOULDBLOCK) return -1;
    throw IoError("recv: " + errno_text());
  }
}

}  // namespace trajan::net
