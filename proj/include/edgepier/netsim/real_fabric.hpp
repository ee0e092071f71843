// Copyright (c) 2026 EdgePier Contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <atomic>
#include <memory>
#include <mutex>
#include <random>
#include <thread>
#include <vector>

#include "edgepier/net/fabric.hpp"

namespace edgepier::netsim {

// The same NetHost surface over OS sockets and wall-clock time. No shaping;
// used by the daemon and by cross-mode equivalence tests.
class RealHost final : public net::NetHost {
 public:
  explicit RealHost(std::string name, std::uint64_t seed = std::random_device{}());
  ~RealHost() override;

  std::string name() const override { return name_; }
  std::unique_ptr<net::Channel> connect(const std::string& address) override;
  std::unique_ptr<net::Listener> listen(const std::string& address) override;
  void sleep_for(net::Duration d) override;
  net::TimePoint now() const override;
  void spawn(const std::string& task_name, std::function<void()> fn) override;
  std::unique_ptr<net::Cond> make_cond() override;
  std::uint64_t rand() override;

  // Cooperative shutdown: makes sleeps/waits return promptly and joins tasks.
  void stop();
  bool stopping() const { return stopping_.load(); }

 private:
  std::string name_;
  std::chrono::steady_clock::time_point epoch_;
  std::mutex mu_;
  std::mt19937_64 rng_;
  std::vector<std::thread> tasks_;
  std::atomic<bool> stopping_{false};
};

}  // namespace edgepier::netsim
