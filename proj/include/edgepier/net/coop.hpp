// Copyright (c) 2026 EdgePier Contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <memory>
#include <mutex>

#include "edgepier/net/fabric.hpp"

namespace edgepier::net {

// Mutual exclusion that may be held across blocking fabric calls. A plain
// std::mutex must never be held there: in simulation the holder would suspend
// while a contender spins inside the OS lock, wedging the scheduler.
class CoopMutex {
 public:
  explicit CoopMutex(NetHost& host) : cond_(host.make_cond()) {}

  void lock() {
    // bounded waits: a real-transport Cond can miss a notify between the
    // predicate check and the wait, simulation cannot
    while (locked_) cond_->wait(std::chrono::milliseconds(50));
    locked_ = true;
  }
  void unlock() {
    locked_ = false;
    cond_->notify_all();
  }

 private:
  bool locked_ = false;
  std::unique_ptr<Cond> cond_;
};

class CoopLock {
 public:
  explicit CoopLock(CoopMutex& m) : m_(m) { m_.lock(); }
  ~CoopLock() { m_.unlock(); }
  CoopLock(const CoopLock&) = delete;
  CoopLock& operator=(const CoopLock&) = delete;

 private:
  CoopMutex& m_;
};

// Serialized token-bucket pacer: callers sleep until their reservation has
// been serviced. Models a node-level processing ceiling (hashing, datastore
// commits) independent of link rates. rate <= 0 disables pacing.
class Pacer {
 public:
  Pacer(NetHost& host, double bits_per_second) : host_(host), bps_(bits_per_second) {}

  void set_rate(double bits_per_second) { bps_ = bits_per_second; }
  double rate() const { return bps_; }

  void acquire(std::size_t bytes) {
    if (bps_ <= 0 || bytes == 0) return;
    TimePoint start;
    {
      std::lock_guard lk(mu_);  // non-blocking section only
      auto now = host_.now();
      start = std::max(now, next_free_);
      auto tx = Duration(static_cast<std::int64_t>(static_cast<double>(bytes) * 8e9 / bps_));
      next_free_ = start + tx;
      start = next_free_;
    }
    auto now = host_.now();
    if (start > now) host_.sleep_for(start - now);
  }

 private:
  NetHost& host_;
  double bps_;
  TimePoint next_free_{0};
  std::mutex mu_;
};

}  // namespace edgepier::net
