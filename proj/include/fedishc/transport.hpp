#pragma once

// Message transports between clients and the server: an in-process queue
// and a length-prefixed byte stream over a local socket.

#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <condition_variable>
#include <cstdint>
#include <cstring>
#include <deque>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "fedishc/error.hpp"
#include "fedishc/wire.hpp"

namespace fedishc {

class Transport {
 public:
  virtual ~Transport() = default;
  virtual void send(const Bytes& message) = 0;
  // Blocks until a message arrives; nullopt once the channel is closed and drained.
  virtual std::optional<Bytes> receive() = 0;
  virtual void close() = 0;
};

// Multi-producer queue shared by every endpoint in the process.
class InProcessBus final : public Transport {
 public:
  void send(const Bytes& message) override {
    {
      std::lock_guard lock(mu_);
      if (closed_) throw IoError("send on closed bus");
      queue_.push_back(message);
    }
    cv_.notify_one();
  }

  std::optional<Bytes> receive() override {
    std::unique_lock lock(mu_);
    cv_.wait(lock, [&] { return closed_ || !queue_.empty(); });
    if (queue_.empty()) return std::nullopt;
    Bytes msg = std::move(queue_.front());
    queue_.pop_front();
    return msg;
  }

  void close() override {
    {
      std::lock_guard lock(mu_);
      closed_ = true;
    }
    cv_.notify_all();
  }

 private:
  std::mutex mu_;
  std::condition_variable cv_;
  std::deque<Bytes> queue_;
  bool closed_ = false;
};

// One end of a connected stream socket; each message is framed by a 4-byte
// big-endian length.
class SocketTransport final : public Transport {
 public:
  explicit SocketTransport(int fd) : fd_(fd) {}
  SocketTransport(const SocketTransport&) = delete;
  SocketTransport& operator=(const SocketTransport&) = delete;
  ~SocketTransport() override {
    if (fd_ >= 0) ::close(fd_);
  }

  void send(const Bytes& message) override {
    if (message.size() > 0xffffffffu) throw IoError("message too large for framing");
    Bytes frame;
    frame.reserve(message.size() + 4);
    wire::put_u32_be(frame, static_cast<std::uint32_t>(message.size()));
    frame.insert(frame.end(), message.begin(), message.end());
    write_all(frame.data(), frame.size());
  }

  std::optional<Bytes> receive() override {
    std::uint8_t len[4];
    if (!read_all(len, sizeof len, /*eof_ok=*/true)) return std::nullopt;
    Bytes msg(wire::get_u32_be(len));
    if (!msg.empty()) read_all(msg.data(), msg.size(), false);
    return msg;
  }

  // Half-close: the peer sees end-of-stream after draining.
  void close() override {
    if (fd_ >= 0) ::shutdown(fd_, SHUT_WR);
  }

 private:
  void write_all(const std::uint8_t* p, std::size_t n) {
    while (n > 0) {
      const ssize_t w = ::send(fd_, p, n, MSG_NOSIGNAL);
      if (w < 0) {
        if (errno == EINTR) continue;
        throw IoError(std::string("socket send: ") + std::strerror(errno));
      }
      p += w;
      n -= static_cast<std::size_t>(w);
    }
  }

  bool read_all(std::uint8_t* p, std::size_t n, bool eof_ok) {
    std::size_t got = 0;
    while (got < n) {
      const ssize_t r = ::recv(fd_, p + got, n - got, 0);
      if (r < 0) {
        if (errno == EINTR) continue;
        throw IoError(std::string("socket recv: ") + std::strerror(errno));
      }
      if (r == 0) {
        if (eof_ok && got == 0) return false;
        throw TruncatedPayload("stream ended inside a frame");
      }
      got += static_cast<std::size_t>(r);
    }
    return true;
  }

  int fd_;
};

// Two connected endpoints over a local (AF_UNIX) stream socket.
inline std::pair<std::unique_ptr<SocketTransport>, std::unique_ptr<SocketTransport>> make_socket_pair() {
  int fds[2];
  if (::socketpair(AF_UNIX, SOCK_STREAM, 0, fds) != 0)
    throw IoError(std::string("socketpair: ") + std::strerror(errno));
  return {std::make_unique<SocketTransport>(fds[0]), std::make_unique<SocketTransport>(fds[1])};
}

// Server side of the one-round protocol: drain a transport, decode every
// upload, then aggregate.
class AggregationServer {
 public:
  void accept(const Bytes& message) { uploads_.push_back(decode_upload(message)); }

  void drain(Transport& t) {
    while (auto msg = t.receive()) accept(*msg);
  }

  const std::vector<ClientUpload>& uploads() const noexcept { return uploads_; }

  VariableRegistry registry() const {
    std::vector<std::vector<std::string>> sets;
    for (const auto& up : uploads_) sets.push_back(up.variable_ids);
    return build_registry(sets);
  }

  GlobalCumulantTable aggregate() const { return fedishc::aggregate(uploads_, registry()); }

 private:
  std::vector<ClientUpload> uploads_;
};

}  // namespace fedishc
