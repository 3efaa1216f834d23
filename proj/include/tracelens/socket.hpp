#pragma once

// Blocking TCP sockets with line framing.

#include <chrono>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace tracelens::net {

class NetError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};
class BindError : public NetError {
 public:
  using NetError::NetError;
};
class ConnectError : public NetError {
 public:
  using NetError::NetError;
};

struct Endpoint {
  std::string host = "127.0.0.1";
  std::uint16_t port = 0;
  std::string str() const { return host + ":" + std::to_string(port); }
};

/// `host:port`, `:port` or `port`. Throws std::invalid_argument.
Endpoint parse_endpoint(std::string_view text);

class Socket {
 public:
  Socket() = default;
  explicit Socket(int fd) : fd_(fd) {}
  ~Socket();
  Socket(Socket&& o) noexcept : fd_(o.fd_) { o.fd_ = -1; }
  Socket& operator=(Socket&& o) noexcept;
  Socket(const Socket&) = delete;
  Socket& operator=(const Socket&) = delete;

  bool valid() const { return fd_ >= 0; }
  int fd() const { return fd_; }
  /// False once the peer is gone.
  bool send_all(std::string_view data);
  /// Stops both directions; wakes a thread blocked in recv.
  void shutdown();
  void close();

 private:
  int fd_ = -1;
};

Socket connect_to(const Endpoint& ep);

class Listener {
 public:
  explicit Listener(const Endpoint& ep);
  std::uint16_t port() const { return port_; }
  /// Waits up to `timeout`; an invalid socket means no connection arrived.
  Socket accept(std::chrono::milliseconds timeout);
  void close() { sock_.close(); }

 private:
  Socket sock_;
  std::uint16_t port_ = 0;
};

/// Buffered line reader over a socket; lines are returned without '\n'.
class LineReader {
 public:
  explicit LineReader(const Socket& s) : fd_(s.fd()) {}
  /// nullopt on EOF or error.
  std::optional<std::string> read_line();
  std::uint64_t bytes_read() const { return bytes_; }

 private:
  int fd_;
  std::string buf_;
  std::size_t start_ = 0;
  std::uint64_t bytes_ = 0;
};

}  // namespace tracelens::net
