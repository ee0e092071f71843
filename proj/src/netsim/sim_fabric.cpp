// Copyright (c) 2026 EdgePier Contributors
// SPDX-License-Identifier: Apache-2.0

#include "edgepier/netsim/sim_fabric.hpp"

#include <algorithm>
#include <cassert>

namespace edgepier::netsim {

using net::Duration;
using net::TimePoint;

namespace {
constexpr std::size_t kSegmentQuantum = 65536;   // 64 KiB wire segments
constexpr std::size_t kChannelWindow = 262144;   // per-direction in-flight cap
constexpr Duration kSelfLoopLatency = std::chrono::microseconds(10);

thread_local SimEngine::Task* tl_current_task = nullptr;

template <typename F>
struct ScopeExit {
  F fn;
  ~ScopeExit() { fn(); }
};
template <typename F>
ScopeExit(F) -> ScopeExit<F>;

std::int64_t second_of(TimePoint t) {
  return std::chrono::duration_cast<std::chrono::seconds>(t).count();
}
}  // namespace

// ---------------------------------------------------------------------------
// internal structures
// ---------------------------------------------------------------------------

struct SimEngine::Task {
  std::uint64_t id = 0;
  std::string node;
  std::string name;
  std::function<void()> fn;
  std::thread thread;
  std::binary_semaphore run{0};
  enum class State { ready, running, blocked, done } state = State::ready;
  std::uint64_t wake_gen = 0;  // bumped on every wake; stale timers check it
  bool canceled = false;
  bool timed_out = false;
};

struct SimEngine::Shaper {
  double bps = 0;  // <=0: unshaped
  TimePoint next_free{0};

  // FIFO-serialized occupancy of `bytes` starting no earlier than `earliest`.
  std::pair<TimePoint, TimePoint> reserve(std::size_t bytes, TimePoint earliest) {
    TimePoint start = std::max(earliest, next_free);
    if (bps <= 0) return {start, start};
    auto tx_ns = static_cast<std::int64_t>(static_cast<double>(bytes) * 8e9 / bps);
    TimePoint end = start + Duration(tx_ns);
    next_free = end;
    return {start, end};
  }
};

struct SimEngine::ChannelState {
  SimEngine* eng = nullptr;
  std::string node_a, node_b;
  Duration latency{0};
  double drop_prob = 0;

  struct Segment {
    std::vector<std::uint8_t> bytes;
    bool fin = false;
  };
  // Chunked receive queue; avoids per-byte deque churn on large streams.
  struct ByteQueue {
    std::deque<std::vector<std::uint8_t>> chunks;
    std::size_t front_off = 0;
    std::size_t total = 0;

    bool empty() const { return total == 0; }
    void push(std::vector<std::uint8_t> bytes) {
      if (bytes.empty()) return;
      total += bytes.size();
      chunks.push_back(std::move(bytes));
    }
    std::size_t pop_into(std::span<std::uint8_t> out) {
      std::size_t copied = 0;
      while (copied < out.size() && !chunks.empty()) {
        auto& front = chunks.front();
        std::size_t avail = front.size() - front_off;
        std::size_t n = std::min(avail, out.size() - copied);
        std::copy_n(front.begin() + static_cast<std::ptrdiff_t>(front_off), n,
                    out.begin() + static_cast<std::ptrdiff_t>(copied));
        copied += n;
        front_off += n;
        if (front_off == front.size()) {
          chunks.pop_front();
          front_off = 0;
        }
      }
      total -= copied;
      return copied;
    }
  };
  struct Dir {
    std::uint64_t in_flight = 0;
    std::uint64_t next_send_seq = 0;
    std::uint64_t next_deliver_seq = 0;
    std::map<std::uint64_t, Segment> reorder;
    ByteQueue buf;
    bool fin_sent = false;
    bool fin_delivered = false;
    std::uint64_t blocked_reader = 0;  // task ids; 0 = none
    std::uint64_t blocked_writer = 0;
  };
  Dir a_to_b, b_to_a;
  bool reset = false;

  ~ChannelState() {
    if (eng) eng->channels_.erase(this);
  }
};

struct SimEngine::ListenerState {
  std::string node;
  std::string address;
  bool open = true;
  std::deque<std::shared_ptr<ChannelState>> backlog;
  std::uint64_t blocked_acceptor = 0;
};

struct SimEngine::CondState {
  std::vector<std::pair<std::uint64_t, std::uint64_t>> waiters;  // (task id, gen)
};

// ---------------------------------------------------------------------------
// adapters
// ---------------------------------------------------------------------------

class SimSocket final : public net::Channel {
 public:
  SimSocket(SimEngine* eng, std::shared_ptr<SimEngine::ChannelState> st, bool is_a)
      : eng_(eng), st_(std::move(st)), is_a_(is_a) {}
  ~SimSocket() override {
    try {
      close();
    } catch (...) {
    }
  }

  std::optional<std::size_t> read_some(std::span<std::uint8_t> out,
                                       std::optional<Duration> timeout) override;
  void write(std::span<const std::uint8_t> data) override;
  void close() override;
  std::string peer_name() const override { return is_a_ ? st_->node_b : st_->node_a; }

 private:
  SimEngine::ChannelState::Dir& rx() { return is_a_ ? st_->b_to_a : st_->a_to_b; }
  SimEngine::ChannelState::Dir& tx() { return is_a_ ? st_->a_to_b : st_->b_to_a; }
  const std::string& src() const { return is_a_ ? st_->node_a : st_->node_b; }
  const std::string& dst() const { return is_a_ ? st_->node_b : st_->node_a; }

  SimEngine* eng_;
  std::shared_ptr<SimEngine::ChannelState> st_;
  bool is_a_;
  bool closed_ = false;
};

class SimListener final : public net::Listener {
 public:
  SimListener(SimEngine* eng, std::shared_ptr<SimEngine::ListenerState> st)
      : eng_(eng), st_(std::move(st)) {}
  ~SimListener() override {
    try {
      close();
    } catch (...) {
    }
  }

  std::unique_ptr<net::Channel> accept() override;
  void close() override;
  std::string address() const override { return st_->address; }

 private:
  SimEngine* eng_;
  std::shared_ptr<SimEngine::ListenerState> st_;
};

class SimCond final : public net::Cond {
 public:
  explicit SimCond(SimEngine* eng)
      : eng_(eng), st_(std::make_shared<SimEngine::CondState>()) {}
  bool wait(std::optional<Duration> timeout) override;
  void notify_all() override;

 private:
  SimEngine* eng_;
  std::shared_ptr<SimEngine::CondState> st_;
};

class SimHost final : public net::NetHost {
 public:
  SimHost(SimEngine* eng, std::string node) : eng_(eng), node_(std::move(node)) {}
  std::string name() const override { return node_; }
  std::unique_ptr<net::Channel> connect(const std::string& address) override {
    return eng_->connect_from(node_, address);
  }
  std::unique_ptr<net::Listener> listen(const std::string& address) override {
    return eng_->listen_at(node_, address);
  }
  void sleep_for(Duration d) override;
  TimePoint now() const override { return eng_->now(); }
  void spawn(const std::string& task_name, std::function<void()> fn) override {
    eng_->spawn_task(node_, task_name, std::move(fn));
  }
  std::unique_ptr<net::Cond> make_cond() override { return std::make_unique<SimCond>(eng_); }
  std::uint64_t rand() override { return eng_->node_rand(node_); }

 private:
  SimEngine* eng_;
  std::string node_;
};

// ---------------------------------------------------------------------------
// SimEngine: scheduler
// ---------------------------------------------------------------------------

SimEngine::SimEngine(Topology topo) : topo_(std::move(topo)) {
  for (const auto& n : topo_.nodes) {
    hosts_[n] = std::make_unique<SimHost>(this, n);
    std::uint64_t h = 1469598103934665603ULL;
    for (char c : n) h = (h ^ static_cast<unsigned char>(c)) * 1099511628211ULL;
    node_rngs_.emplace(n, std::mt19937_64(topo_.seed ^ h));
  }
}

SimEngine::~SimEngine() { cancel_all_tasks(); }

net::NetHost& SimEngine::host(const std::string& node) {
  auto it = hosts_.find(node);
  if (it == hosts_.end()) throw std::invalid_argument("unknown sim node: " + node);
  return *it->second;
}

SimEngine::Task* SimEngine::current_task() const { return tl_current_task; }

void SimEngine::schedule(TimePoint t, std::function<void()> fn) {
  events_.push(Event{std::max(t, now_), ++seq_, std::move(fn)});
}

void SimEngine::make_ready(Task* t) {
  if (!t || t->state == Task::State::done || t->state == Task::State::ready) return;
  ++t->wake_gen;
  t->state = Task::State::ready;
  ready_.push_back(t->id);
}

void SimEngine::wake_task(std::uint64_t id, std::uint64_t gen) {
  auto it = tasks_.find(id);
  if (it == tasks_.end()) return;
  Task* t = it->second.get();
  if (t->wake_gen != gen || t->state != Task::State::blocked) return;
  make_ready(t);
}

void SimEngine::spawn_task(const std::string& node, const std::string& name,
                           std::function<void()> fn) {
  auto task = std::make_unique<Task>();
  Task* t = task.get();
  t->id = next_task_id_++;
  t->node = node;
  t->name = name;
  t->fn = std::move(fn);
  t->state = Task::State::ready;
  ++stats_.tasks_spawned;
  t->thread = std::thread([this, t] {
    tl_current_task = t;
    t->run.acquire();
    if (!t->canceled) {
      try {
        t->fn();
      } catch (const net::TaskCanceled&) {
      } catch (const std::exception&) {
        // tasks are daemons; an escaped error ends the task, not the sim
      }
    }
    t->state = Task::State::done;
    sched_sem_.release();
  });
  tasks_[t->id] = std::move(task);
  ready_.push_back(t->id);
}

void SimEngine::yield_blocked() {
  Task* t = current_task();
  assert(t && t->state == Task::State::running);
  t->state = Task::State::blocked;
  sched_sem_.release();
  t->run.acquire();
  if (t->canceled) throw net::TaskCanceled();
}

void SimEngine::drain_ready() {
  while (!ready_.empty()) {
    auto id = ready_.front();
    ready_.pop_front();
    auto it = tasks_.find(id);
    if (it == tasks_.end()) continue;
    Task* t = it->second.get();
    if (t->state != Task::State::ready) continue;
    t->state = Task::State::running;
    running_ = t;
    t->run.release();
    sched_sem_.acquire();
    running_ = nullptr;
    if (t->state == Task::State::done) {
      if (t->thread.joinable()) t->thread.join();
      tasks_.erase(it);
    }
  }
}

bool SimEngine::fire_next_event(TimePoint horizon) {
  if (events_.empty() || events_.top().t > horizon) return false;
  Event ev = std::move(const_cast<Event&>(events_.top()));
  events_.pop();
  now_ = ev.t;
  ++stats_.events_fired;
  ev.fire();
  drain_ready();
  return true;
}

void SimEngine::run_for(Duration window) {
  if (window <= Duration::zero()) return;
  TimePoint horizon = now_ + window;
  drain_ready();
  while (fire_next_event(horizon)) {
  }
  now_ = horizon;
}

bool SimEngine::run_until(const std::function<bool()>& done, Duration max_extra) {
  TimePoint horizon = now_ + max_extra;
  drain_ready();
  if (done()) return true;
  while (fire_next_event(horizon)) {
    if (done()) return true;
  }
  return done();
}

void SimEngine::run_until_quiescent(Duration max_extra) {
  TimePoint horizon = now_ + max_extra;
  drain_ready();
  while (fire_next_event(horizon)) {
  }
}

void SimEngine::cancel_all_tasks() {
  for (int pass = 0; pass < 64; ++pass) {
    bool any = false;
    for (auto& [id, t] : tasks_) {
      if (t->state == Task::State::blocked) {
        t->canceled = true;
        ++t->wake_gen;
        t->state = Task::State::ready;
        ready_.push_back(t->id);
        any = true;
      } else if (t->state == Task::State::ready) {
        t->canceled = true;
        any = true;
      }
    }
    if (!any && ready_.empty()) break;
    drain_ready();
  }
  for (auto& [id, t] : tasks_)
    if (t->thread.joinable()) t->thread.join();
  tasks_.clear();
}

std::uint64_t SimEngine::node_rand(const std::string& node) { return node_rngs_.at(node)(); }

double SimEngine::node_roll(const std::string& node) {
  return static_cast<double>(node_rand(node)) / 18446744073709551616.0;
}

// ---------------------------------------------------------------------------
// link resolution and faults
// ---------------------------------------------------------------------------

bool Topology::has_node(const std::string& n) const {
  return std::find(nodes.begin(), nodes.end(), n) != nodes.end();
}

const LinkShape& Topology::shape_for(const std::string& from, const std::string& to) const {
  auto ov = overrides.find({from, to});
  if (ov != overrides.end()) return ov->second;
  if (!origin.empty() && (from == origin || to == origin)) return uplink;
  return intra;
}

bool SimEngine::cut(const std::string& a, const std::string& b) const {
  for (const auto& [left, right] : cuts_)
    if ((left.count(a) && right.count(b)) || (left.count(b) && right.count(a))) return true;
  return false;
}

SimEngine::Shaper* SimEngine::shaper_for(const std::string& from, const std::string& to) {
  if (from == to) return nullptr;  // loopback is unshaped
  std::string key;
  double bps;
  auto ov = topo_.overrides.find({from, to});
  if (ov != topo_.overrides.end()) {
    key = "pair:" + from + ">" + to;
    bps = ov->second.bandwidth_bps;
  } else if (!topo_.origin.empty() && (from == topo_.origin || to == topo_.origin)) {
    // one shared bucket per uplink direction: all site flows contend here
    key = from == topo_.origin ? "uplink:out" : "uplink:in";
    bps = topo_.uplink.bandwidth_bps;
  } else {
    key = "pair:" + from + ">" + to;
    bps = topo_.intra.bandwidth_bps;
  }
  auto it = shapers_.find(key);
  if (it == shapers_.end()) {
    auto sh = std::make_unique<Shaper>();
    sh->bps = bps;
    it = shapers_.emplace(key, std::move(sh)).first;
  }
  return it->second.get();
}

void SimEngine::reset_channel(ChannelState& st) {
  if (st.reset) return;
  st.reset = true;
  counters_[{st.node_a, st.node_b}].dropped += st.a_to_b.in_flight;
  counters_[{st.node_b, st.node_a}].dropped += st.b_to_a.in_flight;
  for (auto* dir : {&st.a_to_b, &st.b_to_a}) {
    dir->in_flight = 0;
    dir->reorder.clear();
    if (dir->blocked_reader) {
      wake_task(dir->blocked_reader, tasks_.count(dir->blocked_reader)
                                         ? tasks_[dir->blocked_reader]->wake_gen
                                         : 0);
      dir->blocked_reader = 0;
    }
    if (dir->blocked_writer) {
      wake_task(dir->blocked_writer, tasks_.count(dir->blocked_writer)
                                         ? tasks_[dir->blocked_writer]->wake_gen
                                         : 0);
      dir->blocked_writer = 0;
    }
  }
}

void SimEngine::partition(const std::set<std::string>& side_a,
                          const std::set<std::string>& side_b) {
  cuts_.emplace_back(side_a, side_b);
  std::vector<std::shared_ptr<ChannelState>> hit;
  for (auto& [ptr, weak] : channels_) {
    auto st = weak.lock();
    if (st && cut(st->node_a, st->node_b)) hit.push_back(st);
  }
  for (auto& st : hit) reset_channel(*st);
}

void SimEngine::heal() { cuts_.clear(); }

void SimEngine::set_node_down(const std::string& node, bool down) {
  if (!down) {
    down_nodes_.erase(node);
    return;
  }
  down_nodes_.insert(node);
  std::vector<std::shared_ptr<ChannelState>> hit;
  for (auto& [ptr, weak] : channels_) {
    auto st = weak.lock();
    if (st && (st->node_a == node || st->node_b == node)) hit.push_back(st);
  }
  for (auto& st : hit) reset_channel(*st);
  std::vector<std::string> stale;
  for (auto& [addr, ls] : listeners_) {
    if (ls->node != node) continue;
    ls->open = false;
    if (ls->blocked_acceptor) {
      wake_task(ls->blocked_acceptor, tasks_.count(ls->blocked_acceptor)
                                          ? tasks_[ls->blocked_acceptor]->wake_gen
                                          : 0);
      ls->blocked_acceptor = 0;
    }
    stale.push_back(addr);
  }
  for (const auto& addr : stale) listeners_.erase(addr);
}

// ---------------------------------------------------------------------------
// connect / listen
// ---------------------------------------------------------------------------

std::unique_ptr<net::Channel> SimEngine::connect_from(const std::string& node,
                                                      const std::string& address) {
  Task* t = current_task();
  if (!t) throw std::logic_error("connect() outside task context");
  auto pos = address.find(':');
  std::string target = pos == std::string::npos ? address : address.substr(0, pos);
  if (!topo_.has_node(target)) throw net::ConnectError("no route to " + address);

  const bool self = target == node;
  const LinkShape& shape = topo_.shape_for(node, target);

  auto st = std::make_shared<ChannelState>();
  st->eng = this;
  st->node_a = node;
  st->node_b = target;
  st->latency = self ? kSelfLoopLatency : shape.latency;
  st->drop_prob = self ? 0.0 : shape.drop_prob;
  channels_[st.get()] = st;

  enum class Outcome { pending, ok, refused };
  auto outcome = std::make_shared<Outcome>(Outcome::pending);
  const std::uint64_t connector = t->id;
  const bool syn_lost = !self && node_roll(node) < st->drop_prob;

  schedule(now_ + st->latency, [this, st, outcome, connector, address, syn_lost] {
    auto decide = [&](Outcome o) {
      schedule(now_ + st->latency, [this, outcome, connector, o] {
        *outcome = o;
        auto it = tasks_.find(connector);
        if (it != tasks_.end()) make_ready(it->second.get());
      });
    };
    auto it = listeners_.find(address);
    if (syn_lost || cut(st->node_a, st->node_b) || down_nodes_.count(st->node_b) ||
        it == listeners_.end() || !it->second->open) {
      decide(Outcome::refused);
      return;
    }
    it->second->backlog.push_back(st);
    if (it->second->blocked_acceptor) {
      wake_task(it->second->blocked_acceptor, tasks_.count(it->second->blocked_acceptor)
                                                  ? tasks_[it->second->blocked_acceptor]->wake_gen
                                                  : 0);
      it->second->blocked_acceptor = 0;
    }
    decide(Outcome::ok);
  });

  while (*outcome == Outcome::pending) yield_blocked();
  if (*outcome == Outcome::refused) throw net::ConnectError("connection refused: " + address);
  return std::make_unique<SimSocket>(this, st, true);
}

std::unique_ptr<net::Listener> SimEngine::listen_at(const std::string& node,
                                                    const std::string& address) {
  auto existing = listeners_.find(address);
  if (existing != listeners_.end() && existing->second->open)
    throw net::ConnectError("address in use: " + address);
  auto st = std::make_shared<ListenerState>();
  st->node = node;
  st->address = address;
  listeners_[address] = st;
  return std::make_unique<SimListener>(this, st);
}

// ---------------------------------------------------------------------------
// segment delivery
// ---------------------------------------------------------------------------

void SimEngine::deliver_segment(const std::shared_ptr<ChannelState>& st, bool a_to_b,
                                std::uint64_t seq, std::vector<std::uint8_t> bytes, bool fin) {
  auto& dir = a_to_b ? st->a_to_b : st->b_to_a;
  if (st->reset) return;
  const std::string& from = a_to_b ? st->node_a : st->node_b;
  const std::string& to = a_to_b ? st->node_b : st->node_a;
  if (cut(from, to)) {
    reset_channel(*st);
    return;
  }
  dir.reorder[seq] = ChannelState::Segment{std::move(bytes), fin};
  auto& pc = counters_[{from, to}];
  while (!dir.reorder.empty() && dir.reorder.begin()->first == dir.next_deliver_seq) {
    auto& seg = dir.reorder.begin()->second;
    pc.delivered += seg.bytes.size();
    dir.in_flight -= seg.bytes.size();
    dir.buf.push(std::move(seg.bytes));
    if (seg.fin) dir.fin_delivered = true;
    dir.reorder.erase(dir.reorder.begin());
    ++dir.next_deliver_seq;
  }
  if (dir.blocked_reader && (!dir.buf.empty() || dir.fin_delivered)) {
    wake_task(dir.blocked_reader,
              tasks_.count(dir.blocked_reader) ? tasks_[dir.blocked_reader]->wake_gen : 0);
    dir.blocked_reader = 0;
  }
  if (dir.blocked_writer && dir.in_flight < kChannelWindow) {
    wake_task(dir.blocked_writer,
              tasks_.count(dir.blocked_writer) ? tasks_[dir.blocked_writer]->wake_gen : 0);
    dir.blocked_writer = 0;
  }
}

// ---------------------------------------------------------------------------
// SimSocket
// ---------------------------------------------------------------------------

std::optional<std::size_t> SimSocket::read_some(std::span<std::uint8_t> out,
                                                std::optional<Duration> timeout) {
  SimEngine::Task* t = eng_->current_task();
  auto& dir = rx();
  std::optional<TimePoint> deadline;
  if (timeout) deadline = eng_->now() + *timeout;
  for (;;) {
    if (!dir.buf.empty()) return dir.buf.pop_into(out);
    if (st_->reset) throw net::ChannelClosed("connection reset");
    if (dir.fin_delivered || closed_) return std::size_t{0};
    if (deadline && eng_->now() >= *deadline) return std::nullopt;
    dir.blocked_reader = t->id;
    ScopeExit clear{[&] {
      if (dir.blocked_reader == t->id) dir.blocked_reader = 0;
    }};
    if (deadline) {
      auto gen = t->wake_gen;
      auto id = t->id;
      auto* eng = eng_;
      eng_->schedule(*deadline, [eng, id, gen] {
        auto it = eng->tasks_.find(id);
        if (it != eng->tasks_.end() && it->second->wake_gen == gen) {
          it->second->timed_out = true;
          eng->wake_task(id, gen);
        }
      });
    }
    t->timed_out = false;
    eng_->yield_blocked();
    if (t->timed_out) {
      t->timed_out = false;
      return std::nullopt;
    }
  }
}

void SimSocket::write(std::span<const std::uint8_t> data) {
  SimEngine::Task* t = eng_->current_task();
  auto& dir = tx();
  ++eng_->counters_[{src(), dst()}].messages;
  if (closed_ || dir.fin_sent) throw net::ChannelClosed("write on closed channel");

  std::size_t off = 0;
  while (off < data.size()) {
    if (st_->reset) throw net::ChannelClosed("connection reset");
    if (eng_->cut(src(), dst())) {
      eng_->reset_channel(*st_);
      throw net::ChannelClosed("connection reset");
    }
    if (dir.in_flight >= kChannelWindow) {
      dir.blocked_writer = t->id;
      ScopeExit clear{[&] {
        if (dir.blocked_writer == t->id) dir.blocked_writer = 0;
      }};
      eng_->yield_blocked();
      continue;
    }
    std::size_t n = std::min(kSegmentQuantum, data.size() - off);
    std::vector<std::uint8_t> seg(data.begin() + static_cast<std::ptrdiff_t>(off),
                                  data.begin() + static_cast<std::ptrdiff_t>(off + n));
    off += n;
    dir.in_flight += n;

    auto* shaper = eng_->shaper_for(src(), dst());
    bool lost = st_->drop_prob > 0 && eng_->node_roll(src()) < st_->drop_prob;
    auto [tx_start, tx_end] =
        shaper ? shaper->reserve(n, eng_->now()) : std::make_pair(eng_->now(), eng_->now());
    auto& pc = eng_->counters_[{src(), dst()}];
    pc.bytes += n;
    pc.per_second[second_of(tx_end)] += n;

    std::uint64_t seq = dir.next_send_seq++;
    auto* eng = eng_;
    auto st = st_;
    bool a_to_b = is_a_;
    if (!lost) {
      eng_->schedule(tx_end + st_->latency, [eng, st, a_to_b, seq, seg = std::move(seg)]() mutable {
        eng->deliver_segment(st, a_to_b, seq, std::move(seg), false);
      });
    } else {
      // account the loss at delivery time, retransmit once after an RTO;
      // ordering holds because the sequence number is unchanged
      eng_->schedule(tx_end + st_->latency,
                     [eng, st, a_to_b, seq, seg = std::move(seg)]() mutable {
                       const std::string& from = a_to_b ? st->node_a : st->node_b;
                       const std::string& to = a_to_b ? st->node_b : st->node_a;
                       if (st->reset) return;
                       if (eng->cut(from, to)) {
                         eng->reset_channel(*st);
                         return;
                       }
                       auto& pc2 = eng->counters_[{from, to}];
                       pc2.dropped += seg.size();
                       auto* sh = eng->shaper_for(from, to);
                       auto rto = st->latency + st->latency;
                       auto [rs, re] = sh ? sh->reserve(seg.size(), eng->now() + rto)
                                          : std::make_pair(eng->now() + rto, eng->now() + rto);
                       pc2.bytes += seg.size();
                       pc2.per_second[second_of(re)] += seg.size();
                       eng->schedule(re + st->latency,
                                     [eng, st, a_to_b, seq, seg = std::move(seg)]() mutable {
                                       eng->deliver_segment(st, a_to_b, seq, std::move(seg), false);
                                     });
                     });
    }
  }
}

void SimSocket::close() {
  if (closed_) return;
  closed_ = true;
  auto& dir = tx();
  if (!dir.fin_sent && !st_->reset) {
    dir.fin_sent = true;
    auto* shaper = eng_->shaper_for(src(), dst());
    auto [s, e] =
        shaper ? shaper->reserve(0, eng_->now()) : std::make_pair(eng_->now(), eng_->now());
    std::uint64_t seq = dir.next_send_seq++;
    auto* eng = eng_;
    auto st = st_;
    bool a_to_b = is_a_;
    eng_->schedule(e + st_->latency, [eng, st, a_to_b, seq] {
      eng->deliver_segment(st, a_to_b, seq, {}, true);
    });
  }
  auto& in = rx();
  if (in.blocked_reader) {
    eng_->wake_task(in.blocked_reader, eng_->tasks_.count(in.blocked_reader)
                                           ? eng_->tasks_[in.blocked_reader]->wake_gen
                                           : 0);
    in.blocked_reader = 0;
  }
}

// ---------------------------------------------------------------------------
// SimListener / SimCond / SimHost
// ---------------------------------------------------------------------------

std::unique_ptr<net::Channel> SimListener::accept() {
  SimEngine::Task* t = eng_->current_task();
  for (;;) {
    if (!st_->open) throw net::ChannelClosed("listener closed");
    if (!st_->backlog.empty()) {
      auto ch = st_->backlog.front();
      st_->backlog.pop_front();
      return std::make_unique<SimSocket>(eng_, std::move(ch), false);
    }
    st_->blocked_acceptor = t->id;
    ScopeExit clear{[&] {
      if (st_->blocked_acceptor == t->id) st_->blocked_acceptor = 0;
    }};
    eng_->yield_blocked();
  }
}

void SimListener::close() {
  if (!st_->open) return;
  st_->open = false;
  if (st_->blocked_acceptor) {
    eng_->wake_task(st_->blocked_acceptor, eng_->tasks_.count(st_->blocked_acceptor)
                                               ? eng_->tasks_[st_->blocked_acceptor]->wake_gen
                                               : 0);
    st_->blocked_acceptor = 0;
  }
  auto it = eng_->listeners_.find(st_->address);
  if (it != eng_->listeners_.end() && it->second == st_) eng_->listeners_.erase(it);
}

bool SimCond::wait(std::optional<Duration> timeout) {
  SimEngine::Task* t = eng_->current_task();
  auto st = st_;
  st->waiters.emplace_back(t->id, t->wake_gen);
  ScopeExit clear{[&] {
    auto& w = st->waiters;
    w.erase(std::remove_if(w.begin(), w.end(), [&](auto& p) { return p.first == t->id; }),
            w.end());
  }};
  if (timeout) {
    auto gen = t->wake_gen;
    auto id = t->id;
    auto* eng = eng_;
    eng_->schedule(eng_->now() + *timeout, [eng, st, id, gen] {
      auto it = eng->tasks_.find(id);
      if (it != eng->tasks_.end() && it->second->wake_gen == gen) {
        it->second->timed_out = true;
        eng->wake_task(id, gen);
      }
    });
  }
  t->timed_out = false;
  eng_->yield_blocked();
  bool ok = !t->timed_out;
  t->timed_out = false;
  return ok;
}

void SimCond::notify_all() {
  auto waiters = std::move(st_->waiters);
  st_->waiters.clear();
  for (auto& [id, gen] : waiters) eng_->wake_task(id, gen);
}

void SimHost::sleep_for(Duration d) {
  SimEngine::Task* t = eng_->current_task();
  if (!t) throw std::logic_error("sleep_for outside task context");
  if (d <= Duration::zero()) return;
  auto gen = t->wake_gen;
  auto id = t->id;
  auto* eng = eng_;
  eng_->schedule(eng_->now() + d, [eng, id, gen] { eng->wake_task(id, gen); });
  eng_->yield_blocked();
}

}  // namespace edgepier::netsim
