// Copyright (c) 2026 EdgePier Contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <deque>
#include <functional>
#include <map>
#include <memory>
#include <queue>
#include <random>
#include <semaphore>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include "edgepier/net/fabric.hpp"
#include "edgepier/netsim/topology.hpp"

namespace edgepier::netsim {

// Discrete-event network fabric with virtual time.
//
// Protocol code runs on cooperatively scheduled tasks: exactly one task
// executes at any moment, and control returns to the scheduler whenever the
// task blocks on channel I/O, a timer or a condition. Events fire in
// (timestamp, sequence) order, so identical seeds give identical traces
// regardless of OS thread scheduling.
class SimEngine {
 public:
  explicit SimEngine(Topology topo);
  ~SimEngine();
  SimEngine(const SimEngine&) = delete;
  SimEngine& operator=(const SimEngine&) = delete;

  const Topology& topology() const { return topo_; }
  net::TimePoint now() const { return now_; }
  net::NetHost& host(const std::string& node);

  // --- driving (call only from outside task context) --------------------
  // Fires everything due within the window; a zero window is a no-op.
  void run_for(net::Duration window);
  // Runs until done() holds (checked after every event) or the extra budget
  // is exhausted. Returns whether done() held.
  bool run_until(const std::function<bool()>& done, net::Duration max_extra);
  // Runs until no runnable task and no pending event, or the budget ends.
  void run_until_quiescent(net::Duration max_extra);

  // --- fault injection ---------------------------------------------------
  void partition(const std::set<std::string>& side_a, const std::set<std::string>& side_b);
  void heal();
  void set_node_down(const std::string& node, bool down);

  // --- accounting ----------------------------------------------------------
  struct PairCounters {
    std::uint64_t bytes = 0;      // accepted onto the wire (incl. retransmits)
    std::uint64_t delivered = 0;  // handed to the receiver
    std::uint64_t dropped = 0;    // lost to faults
    std::uint64_t messages = 0;   // write() calls
    std::map<std::int64_t, std::uint64_t> per_second;  // wire bytes per 1 s bucket
  };
  const PairCounters& counters(const std::string& from, const std::string& to) const;
  // Sum over directed pairs leaving `node` (self-loops excluded).
  std::uint64_t bytes_from(const std::string& node) const;
  std::map<std::int64_t, std::uint64_t> util_series_from(const std::string& node) const;
  void reset_counters();

  struct Stats {
    std::uint64_t events_fired = 0;
    std::uint64_t tasks_spawned = 0;
  };
  Stats stats() const { return stats_; }

  struct Task;
  struct ChannelState;
  struct ListenerState;
  struct CondState;
  struct Shaper;

 private:
  friend class SimHost;
  friend class SimSocket;
  friend class SimListener;
  friend class SimCond;

  // scheduler core
  void schedule(net::TimePoint t, std::function<void()> fn);
  void make_ready(Task* t);
  void wake_task(std::uint64_t id, std::uint64_t gen);  // ignores stale/dead handles
  void yield_blocked();                                 // from task context
  void drain_ready();
  bool fire_next_event(net::TimePoint horizon);
  Task* current_task() const;
  void spawn_task(const std::string& node, const std::string& name, std::function<void()> fn);
  std::uint64_t node_rand(const std::string& node);
  double node_roll(const std::string& node);
  void cancel_all_tasks();

  // channel plumbing (task context)
  std::unique_ptr<net::Channel> connect_from(const std::string& node, const std::string& address);
  std::unique_ptr<net::Listener> listen_at(const std::string& node, const std::string& address);
  bool cut(const std::string& a, const std::string& b) const;
  Shaper* shaper_for(const std::string& from, const std::string& to);
  void reset_channel(ChannelState& st);
  void deliver_segment(const std::shared_ptr<ChannelState>& st, bool a_to_b, std::uint64_t seq,
                       std::vector<std::uint8_t> bytes, bool fin);

  Topology topo_;
  net::TimePoint now_{0};
  std::uint64_t seq_ = 0;

  struct Event {
    net::TimePoint t;
    std::uint64_t seq;
    std::function<void()> fire;
  };
  struct EventCmp {
    bool operator()(const Event& a, const Event& b) const {
      return a.t != b.t ? a.t > b.t : a.seq > b.seq;
    }
  };
  std::priority_queue<Event, std::vector<Event>, EventCmp> events_;

  std::map<std::uint64_t, std::unique_ptr<Task>> tasks_;
  std::deque<std::uint64_t> ready_;
  std::uint64_t next_task_id_ = 1;
  std::binary_semaphore sched_sem_{0};
  Task* running_ = nullptr;

  std::map<std::string, std::unique_ptr<net::NetHost>> hosts_;
  std::map<std::string, std::mt19937_64> node_rngs_;
  std::map<std::string, std::shared_ptr<ListenerState>> listeners_;
  std::map<ChannelState*, std::weak_ptr<ChannelState>> channels_;
  std::map<std::string, std::unique_ptr<Shaper>> shapers_;
  std::vector<std::pair<std::set<std::string>, std::set<std::string>>> cuts_;
  std::set<std::string> down_nodes_;
  mutable std::map<std::pair<std::string, std::string>, PairCounters> counters_;
  Stats stats_;
};

}  // namespace edgepier::netsim
