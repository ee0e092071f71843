// Copyright (c) 2026 EdgePier Contributors
// SPDX-License-Identifier: Apache-2.0

#include "edgepier/netsim/real_fabric.hpp"

#include <arpa/inet.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <condition_variable>
#include <cstring>

namespace edgepier::netsim {

using net::Duration;

namespace {

struct AddrParts {
  std::string host;
  std::uint16_t port = 0;
};

AddrParts split_address(const std::string& address) {
  auto pos = address.rfind(':');
  if (pos == std::string::npos) throw net::ConnectError("address needs host:port: " + address);
  AddrParts parts;
  parts.host = address.substr(0, pos);
  parts.port = static_cast<std::uint16_t>(std::stoi(address.substr(pos + 1)));
  if (parts.host.empty() || parts.host == "localhost") parts.host = "127.0.0.1";
  return parts;
}

class FdChannel final : public net::Channel {
 public:
  FdChannel(int fd, std::string peer) : fd_(fd), peer_(std::move(peer)) {}
  ~FdChannel() override { close(); }

  std::optional<std::size_t> read_some(std::span<std::uint8_t> out,
                                       std::optional<Duration> timeout) override {
    if (fd_ < 0) throw net::ChannelClosed();
    if (timeout) {
      pollfd pfd{fd_, POLLIN, 0};
      auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(*timeout).count();
      int rc = ::poll(&pfd, 1, static_cast<int>(std::max<std::int64_t>(ms, 1)));
      if (rc == 0) return std::nullopt;
      if (rc < 0) throw net::ChannelClosed("poll failed");
    }
    ssize_t n = ::recv(fd_, out.data(), out.size(), 0);
    if (n < 0) throw net::ChannelClosed("recv failed");
    return static_cast<std::size_t>(n);
  }

  void write(std::span<const std::uint8_t> data) override {
    std::size_t off = 0;
    while (off < data.size()) {
      if (fd_ < 0) throw net::ChannelClosed();
      ssize_t n = ::send(fd_, data.data() + off, data.size() - off, MSG_NOSIGNAL);
      if (n <= 0) throw net::ChannelClosed("send failed");
      off += static_cast<std::size_t>(n);
    }
  }

  void close() override {
    if (fd_ >= 0) {
      ::shutdown(fd_, SHUT_RDWR);
      ::close(fd_);
      fd_ = -1;
    }
  }

  std::string peer_name() const override { return peer_; }

 private:
  int fd_;
  std::string peer_;
};

class FdListener final : public net::Listener {
 public:
  FdListener(int fd, std::string address) : fd_(fd), address_(std::move(address)) {}
  ~FdListener() override { close(); }

  std::unique_ptr<net::Channel> accept() override {
    for (;;) {
      int fd = fd_;
      if (fd < 0) throw net::ChannelClosed("listener closed");
      sockaddr_in peer{};
      socklen_t len = sizeof(peer);
      int cfd = ::accept(fd, reinterpret_cast<sockaddr*>(&peer), &len);
      if (cfd < 0) {
        if (fd_ < 0) throw net::ChannelClosed("listener closed");
        continue;
      }
      int one = 1;
      ::setsockopt(cfd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
      char buf[64];
      ::inet_ntop(AF_INET, &peer.sin_addr, buf, sizeof(buf));
      return std::make_unique<FdChannel>(cfd, std::string(buf));
    }
  }

  void close() override {
    int fd = fd_;
    fd_ = -1;
    if (fd >= 0) {
      ::shutdown(fd, SHUT_RDWR);
      ::close(fd);
    }
  }

  std::string address() const override { return address_; }

 private:
  std::atomic<int> fd_;
  std::string address_;
};

class RealCond final : public net::Cond {
 public:
  bool wait(std::optional<Duration> timeout) override {
    std::unique_lock lk(mu_);
    auto gen = gen_;
    if (timeout)
      return cv_.wait_for(lk, *timeout, [&] { return gen_ != gen; });
    cv_.wait(lk, [&] { return gen_ != gen; });
    return true;
  }
  void notify_all() override {
    std::unique_lock lk(mu_);
    ++gen_;
    cv_.notify_all();
  }

 private:
  std::mutex mu_;
  std::condition_variable cv_;
  std::uint64_t gen_ = 0;
};

}  // namespace

RealHost::RealHost(std::string name, std::uint64_t seed)
    : name_(std::move(name)), epoch_(std::chrono::steady_clock::now()), rng_(seed) {}

RealHost::~RealHost() { stop(); }

void RealHost::stop() {
  stopping_.store(true);
  std::vector<std::thread> tasks;
  {
    std::unique_lock lk(mu_);
    tasks.swap(tasks_);
  }
  for (auto& t : tasks)
    if (t.joinable()) t.join();
}

std::unique_ptr<net::Channel> RealHost::connect(const std::string& address) {
  auto parts = split_address(address);
  int fd = ::socket(AF_INET, SOCK_STREAM, 0);
  if (fd < 0) throw net::ConnectError("socket() failed");
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_port = htons(parts.port);
  if (::inet_pton(AF_INET, parts.host.c_str(), &addr.sin_addr) != 1) {
    ::close(fd);
    throw net::ConnectError("bad address: " + address);
  }
  if (::connect(fd, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) != 0) {
    ::close(fd);
    throw net::ConnectError("connection refused: " + address);
  }
  int one = 1;
  ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
  return std::make_unique<FdChannel>(fd, parts.host);
}

std::unique_ptr<net::Listener> RealHost::listen(const std::string& address) {
  auto parts = split_address(address);
  int fd = ::socket(AF_INET, SOCK_STREAM, 0);
  if (fd < 0) throw net::ConnectError("socket() failed");
  int one = 1;
  ::setsockopt(fd, SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_port = htons(parts.port);
  if (::inet_pton(AF_INET, parts.host.c_str(), &addr.sin_addr) != 1) {
    ::close(fd);
    throw net::ConnectError("bad address: " + address);
  }
  if (::bind(fd, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) != 0 || ::listen(fd, 64) != 0) {
    ::close(fd);
    throw net::ConnectError("bind failed: " + address);
  }
  return std::make_unique<FdListener>(fd, address);
}

void RealHost::sleep_for(Duration d) {
  // sliced so stop() is honored promptly
  auto remaining = d;
  while (remaining > Duration::zero() && !stopping_.load()) {
    auto slice = std::min<Duration>(remaining, std::chrono::milliseconds(50));
    std::this_thread::sleep_for(slice);
    remaining -= slice;
  }
  if (stopping_.load()) throw net::TaskCanceled();
}

net::TimePoint RealHost::now() const {
  return std::chrono::duration_cast<net::TimePoint>(std::chrono::steady_clock::now() - epoch_);
}

void RealHost::spawn(const std::string&, std::function<void()> fn) {
  std::unique_lock lk(mu_);
  tasks_.emplace_back([fn = std::move(fn)] {
    try {
      fn();
    } catch (const net::TaskCanceled&) {
    } catch (const std::exception&) {
    }
  });
}

std::unique_ptr<net::Cond> RealHost::make_cond() { return std::make_unique<RealCond>(); }

std::uint64_t RealHost::rand() {
  std::unique_lock lk(mu_);
  return rng_();
}

}  // namespace edgepier::netsim
