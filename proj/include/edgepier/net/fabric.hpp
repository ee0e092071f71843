// Copyright (c) 2026 EdgePier Contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <chrono>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>

namespace edgepier::net {

using Duration = std::chrono::nanoseconds;
using TimePoint = std::chrono::nanoseconds;  // since fabric epoch

inline Duration ms(std::int64_t v) { return std::chrono::milliseconds(v); }
inline Duration secs(std::int64_t v) { return std::chrono::seconds(v); }

class ChannelClosed : public std::runtime_error {
 public:
  explicit ChannelClosed(const std::string& what = "channel closed") : std::runtime_error(what) {}
};

class ConnectError : public std::runtime_error {
 public:
  explicit ConnectError(const std::string& what) : std::runtime_error(what) {}
};

// Thrown out of blocking calls when the fabric shuts down; task bodies unwind.
class TaskCanceled : public std::runtime_error {
 public:
  TaskCanceled() : std::runtime_error("task canceled") {}
};

// Reliable ordered byte stream. read_some returns nullopt on timeout, 0 on
// clean EOF; hard resets surface as ChannelClosed from either direction.
class Channel {
 public:
  virtual ~Channel() = default;
  virtual std::optional<std::size_t> read_some(std::span<std::uint8_t> out,
                                               std::optional<Duration> timeout) = 0;
  virtual void write(std::span<const std::uint8_t> data) = 0;
  virtual void close() = 0;
  virtual std::string peer_name() const = 0;

  // Fills out completely. false on clean EOF at a message boundary (nothing
  // read); mid-buffer EOF or timeout throw ChannelClosed.
  bool read_exact(std::span<std::uint8_t> out, std::optional<Duration> timeout = std::nullopt);
};

class Listener {
 public:
  virtual ~Listener() = default;
  virtual std::unique_ptr<Channel> accept() = 0;  // throws ChannelClosed once closed
  virtual void close() = 0;
  virtual std::string address() const = 0;
};

// Condition primitive routed through the fabric so waits consume virtual time
// in simulation and wall time on real transport.
class Cond {
 public:
  virtual ~Cond() = default;
  virtual bool wait(std::optional<Duration> timeout = std::nullopt) = 0;  // false on timeout
  virtual void notify_all() = 0;
};

// Per-node handle. Protocol code must route every blocking operation, timer
// and random draw through this interface; wall-clock calls would break the
// simulated mode.
class NetHost {
 public:
  virtual ~NetHost() = default;
  virtual std::string name() const = 0;
  virtual std::unique_ptr<Channel> connect(const std::string& address) = 0;
  virtual std::unique_ptr<Listener> listen(const std::string& address) = 0;
  virtual void sleep_for(Duration d) = 0;
  virtual TimePoint now() const = 0;
  virtual void spawn(const std::string& task_name, std::function<void()> fn) = 0;
  virtual std::unique_ptr<Cond> make_cond() = 0;
  virtual std::uint64_t rand() = 0;
};

}  // namespace edgepier::net
