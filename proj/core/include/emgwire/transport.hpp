#pragma once

#include <condition_variable>
#include <cstdint>
#include <deque>
#include <memory>
#include <mutex>
#include <span>
#include <string>
#include <utility>

namespace emgwire {

class ByteSink {
 public:
  virtual ~ByteSink() = default;
  // Writes everything or throws TransportError.
  virtual void write(std::span<const std::uint8_t> bytes) = 0;
  virtual void close() {}
};

class ByteSource {
 public:
  virtual ~ByteSource() = default;
  // Blocks until at least one byte is available. Returns 0 at end of stream.
  virtual std::size_t read(std::span<std::uint8_t> buffer) = 0;
  // Unblocks a pending read from another thread; later reads return 0.
  virtual void interrupt() {}
};

// In-process byte pipe with a bounded buffer; the writer blocks when full.
class LoopbackPipe {
 public:
  explicit LoopbackPipe(std::size_t capacity = 1 << 16);

  void write(std::span<const std::uint8_t> bytes);
  std::size_t read(std::span<std::uint8_t> buffer);
  void close_write();
  void close_read();

 private:
  std::mutex mu_;
  std::condition_variable cv_;
  std::deque<std::uint8_t> buf_;
  std::size_t capacity_;
  bool write_closed_ = false;
  bool read_closed_ = false;
};

std::pair<std::unique_ptr<ByteSink>, std::unique_ptr<ByteSource>> make_loopback(
    std::size_t capacity = 1 << 16);

// Owns a file descriptor (socket, pipe, stdin/stdout).
class FdStream final : public ByteSink, public ByteSource {
 public:
  explicit FdStream(int fd, bool owned = true);
  ~FdStream() override;
  FdStream(const FdStream&) = delete;
  FdStream& operator=(const FdStream&) = delete;

  void write(std::span<const std::uint8_t> bytes) override;
  std::size_t read(std::span<std::uint8_t> buffer) override;
  void interrupt() override;
  void close() override;
  int fd() const { return fd_; }

 private:
  int fd_;
  bool owned_;
  bool is_socket_;
};

struct Endpoint {
  std::string host = "127.0.0.1";
  std::uint16_t port = 0;
};

// "HOST:PORT" or "tcp:HOST:PORT".
Endpoint parse_endpoint(const std::string& text);

// Throws TransportError if nobody is listening.
std::unique_ptr<FdStream> tcp_connect(const Endpoint& ep);

class TcpListener {
 public:
  explicit TcpListener(const Endpoint& ep);
  ~TcpListener();
  TcpListener(const TcpListener&) = delete;
  TcpListener& operator=(const TcpListener&) = delete;

  std::uint16_t port() const { return port_; }
  std::unique_ptr<FdStream> accept();

 private:
  int fd_ = -1;
  std::uint16_t port_ = 0;
};

}  // namespace emgwire
