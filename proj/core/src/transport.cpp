#include "emgwire/transport.hpp"

#include <arpa/inet.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <sys/socket.h>
#include <sys/stat.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <cstring>

#include "emgwire/errors.hpp"

namespace emgwire {

namespace {

std::string errno_text(const std::string& what) { return what + ": " + std::strerror(errno); }

class LoopbackSink final : public ByteSink {
 public:
  explicit LoopbackSink(std::shared_ptr<LoopbackPipe> p) : pipe_(std::move(p)) {}
  ~LoopbackSink() override { pipe_->close_write(); }
  void write(std::span<const std::uint8_t> bytes) override { pipe_->write(bytes); }
  void close() override { pipe_->close_write(); }

 private:
  std::shared_ptr<LoopbackPipe> pipe_;
};

class LoopbackSource final : public ByteSource {
 public:
  explicit LoopbackSource(std::shared_ptr<LoopbackPipe> p) : pipe_(std::move(p)) {}
  ~LoopbackSource() override { pipe_->close_read(); }
  std::size_t read(std::span<std::uint8_t> buffer) override { return pipe_->read(buffer); }
  void interrupt() override { pipe_->close_read(); }

 private:
  std::shared_ptr<LoopbackPipe> pipe_;
};

}  // namespace

LoopbackPipe::LoopbackPipe(std::size_t capacity) : capacity_(std::max<std::size_t>(capacity, 1)) {}

void LoopbackPipe::write(std::span<const std::uint8_t> bytes) {
  std::unique_lock lock(mu_);
  std::size_t done = 0;
  while (done < bytes.size()) {
    cv_.wait(lock, [&] { return read_closed_ || buf_.size() < capacity_; });
    if (read_closed_) throw TransportError("loopback reader closed");
    const std::size_t n = std::min(bytes.size() - done, capacity_ - buf_.size());
    buf_.insert(buf_.end(), bytes.begin() + static_cast<std::ptrdiff_t>(done),
                bytes.begin() + static_cast<std::ptrdiff_t>(done + n));
    done += n;
    cv_.notify_all();
  }
}

std::size_t LoopbackPipe::read(std::span<std::uint8_t> buffer) {
  std::unique_lock lock(mu_);
  cv_.wait(lock, [&] { return read_closed_ || write_closed_ || !buf_.empty(); });
  if (read_closed_) return 0;
  const std::size_t n = std::min(buffer.size(), buf_.size());
  std::copy_n(buf_.begin(), n, buffer.begin());
  buf_.erase(buf_.begin(), buf_.begin() + static_cast<std::ptrdiff_t>(n));
  cv_.notify_all();
  return n;
}

void LoopbackPipe::close_write() {
  std::lock_guard lock(mu_);
  write_closed_ = true;
  cv_.notify_all();
}

void LoopbackPipe::close_read() {
  std::lock_guard lock(mu_);
  read_closed_ = true;
  cv_.notify_all();
}

std::pair<std::unique_ptr<ByteSink>, std::unique_ptr<ByteSource>> make_loopback(std::size_t capacity) {
  auto pipe = std::make_shared<LoopbackPipe>(capacity);
  return {std::make_unique<LoopbackSink>(pipe), std::make_unique<LoopbackSource>(pipe)};
}

FdStream::FdStream(int fd, bool owned) : fd_(fd), owned_(owned) {
  struct stat st {};
  is_socket_ = fstat(fd, &st) == 0 && S_ISSOCK(st.st_mode);
}

FdStream::~FdStream() {
  if (owned_ && fd_ >= 0) ::close(fd_);
}

void FdStream::write(std::span<const std::uint8_t> bytes) {
  std::size_t done = 0;
  while (done < bytes.size()) {
    const ssize_t n = is_socket_ ? ::send(fd_, bytes.data() + done, bytes.size() - done, MSG_NOSIGNAL)
                                 : ::write(fd_, bytes.data() + done, bytes.size() - done);
    if (n < 0) {
      if (errno == EINTR) continue;
      throw TransportError(errno_text("write failed"));
    }
    done += static_cast<std::size_t>(n);
  }
}

std::size_t FdStream::read(std::span<std::uint8_t> buffer) {
  for (;;) {
    const ssize_t n = ::read(fd_, buffer.data(), buffer.size());
    if (n >= 0) return static_cast<std::size_t>(n);
    if (errno == EINTR) continue;
    throw TransportError(errno_text("read failed"));
  }
}

void FdStream::interrupt() {
  if (is_socket_) ::shutdown(fd_, SHUT_RDWR);
}

void FdStream::close() {
  if (is_socket_) ::shutdown(fd_, SHUT_WR);
}

Endpoint parse_endpoint(const std::string& text) {
  std::string s = text;
  if (s.rfind("tcp:", 0) == 0) s = s.substr(4);
  const auto colon = s.rfind(':');
  if (colon == std::string::npos) throw ConfigError("endpoint '" + text + "' is not HOST:PORT");
  Endpoint ep;
  ep.host = s.substr(0, colon);
  if (ep.host.empty()) ep.host = "127.0.0.1";
  const std::string port = s.substr(colon + 1);
  char* end = nullptr;
  const long p = std::strtol(port.c_str(), &end, 10);
  if (port.empty() || *end != '\0' || p < 0 || p > 65535) {
    throw ConfigError("endpoint '" + text + "' has an invalid port");
  }
  ep.port = static_cast<std::uint16_t>(p);
  return ep;
}

namespace {

sockaddr_in resolve(const Endpoint& ep) {
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_port = htons(ep.port);
  if (inet_pton(AF_INET, ep.host.c_str(), &addr.sin_addr) == 1) return addr;
  addrinfo hints{};
  hints.ai_family = AF_INET;
  hints.ai_socktype = SOCK_STREAM;
  addrinfo* res = nullptr;
  if (getaddrinfo(ep.host.c_str(), nullptr, &hints, &res) != 0 || res == nullptr) {
    throw TransportError("cannot resolve host " + ep.host);
  }
  addr.sin_addr = reinterpret_cast<sockaddr_in*>(res->ai_addr)->sin_addr;
  freeaddrinfo(res);
  return addr;
}

}  // namespace

std::unique_ptr<FdStream> tcp_connect(const Endpoint& ep) {
  const sockaddr_in addr = resolve(ep);
  const int fd = ::socket(AF_INET, SOCK_STREAM, 0);
  if (fd < 0) throw TransportError(errno_text("socket"));
  if (::connect(fd, reinterpret_cast<const sockaddr*>(&addr), sizeof addr) != 0) {
    const std::string msg = errno_text("connect to " + ep.host + ":" + std::to_string(ep.port));
    ::close(fd);
    throw TransportError(msg);
  }
  const int one = 1;
  ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
  return std::make_unique<FdStream>(fd);
}

TcpListener::TcpListener(const Endpoint& ep) {
  const sockaddr_in addr = resolve(ep);
  fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
  if (fd_ < 0) throw TransportError(errno_text("socket"));
  const int one = 1;
  ::setsockopt(fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
  if (::bind(fd_, reinterpret_cast<const sockaddr*>(&addr), sizeof addr) != 0 || ::listen(fd_, 4) != 0) {
    const std::string msg = errno_text("listen on " + ep.host + ":" + std::to_string(ep.port));
    ::close(fd_);
    throw TransportError(msg);
  }
  sockaddr_in bound{};
  socklen_t len = sizeof bound;
  ::getsockname(fd_, reinterpret_cast<sockaddr*>(&bound), &len);
  port_ = ntohs(bound.sin_port);
}

TcpListener::~TcpListener() {
  if (fd_ >= 0) ::close(fd_);
}

std::unique_ptr<FdStream> TcpListener::accept() {
  for (;;) {
    const int fd = ::accept(fd_, nullptr, nullptr);
    if (fd >= 0) return std::make_unique<FdStream>(fd);
    if (errno == EINTR) continue;
    throw TransportError(errno_text("accept"));
  }
}

}  // namespace emgwire
