// Copyright (c) 2026 EdgePier Contributors
// SPDX-License-Identifier: Apache-2.0

#include "edgepier/p2p/exchange.hpp"

#include <algorithm>
#include <cassert>
#include <mutex>

#include "edgepier/cas/sha256.hpp"

namespace edgepier::p2p {

using cas::ContentId;

// ---------------------------------------------------------------------------
// session structures
// ---------------------------------------------------------------------------

struct Exchange::Flight {
  bool done = false;
  std::optional<ContentId> root;
  std::exception_ptr error;
  FetchStats stats;
};

struct Exchange::Session {
  ContentId digest;
  FetchStats stats;

  struct Prov {
    std::string address;
    bool full_holder = false;
    bool is_origin = false;
    double ewma_bps = 0;
    int strikes = 0;
    bool worker_running = false;
    std::set<ContentId> lacks;
  };

  std::mutex mu;  // guards everything below; never held across fabric calls
  std::map<std::string, Prov> providers;
  std::vector<ContentId> order;
  std::set<ContentId> needed;
  std::map<ContentId, int> assigned;
  int outstanding = 0;
  std::map<ContentId, std::set<std::string>> cid_holders;  // discovered per cid
  std::set<ContentId> looked_up;
  std::vector<ContentId> held;  // store holds to release at session end
  std::size_t total = 0;
  int active_workers = 0;
  bool discovery_done = true;
  bool aborted = false;
  std::unique_ptr<net::Cond> change;  // nudged on every state mutation
};

// ---------------------------------------------------------------------------
// construction / lifecycle
// ---------------------------------------------------------------------------

Exchange::Exchange(net::NetHost& host, cas::BlockStore& store, ExchangeConfig cfg)
    : host_(host),
      store_(store),
      cfg_(std::move(cfg)),
      self_id_(PeerId::from_address(cfg_.listen_address)),
      routing_(self_id_, cfg_.k_bucket),
      upload_pacer_(host, cfg_.upload_bps),
      ingest_pacer_(host, cfg_.ingest_bps),
      links_mu_(host),
      flight_cond_(host.make_cond()) {}

Exchange::~Exchange() = default;

HelloMsg Exchange::self_hello() const { return HelloMsg{self_id_, cfg_.listen_address}; }

void Exchange::start() {
  if (running_) return;
  running_ = true;
  {
    std::lock_guard lk(state_mu_);
    for (const auto& addr : cfg_.bootstrap_peers)
      if (addr != cfg_.listen_address)
        routing_.observe(PeerId::from_address(addr), addr, host_.now());
    if (!cfg_.origin_address.empty() && cfg_.origin_address != cfg_.listen_address)
      routing_.observe(PeerId::from_address(cfg_.origin_address), cfg_.origin_address,
                       host_.now());
  }
  listener_ = host_.listen(cfg_.listen_address);
  host_.spawn("exchange-accept", [this] {
    try {
      for (;;) {
        std::shared_ptr<net::Channel> ch = listener_->accept();
        {
          std::lock_guard lk(state_mu_);
          server_conns_.insert(ch.get());
        }
        host_.spawn("exchange-serve", [this, ch] { serve_connection(ch); });
      }
    } catch (const net::ChannelClosed&) {
    } catch (const net::TaskCanceled&) {
    }
  });
  host_.spawn("exchange-announce", [this] { announce_loop(); });
}

void Exchange::stop() {
  if (!running_) return;
  running_ = false;
  if (listener_) listener_->close();
  std::set<net::Channel*> conns;
  {
    std::lock_guard lk(state_mu_);
    conns = server_conns_;
  }
  for (auto* ch : conns) {
    try {
      ch->close();
    } catch (...) {
    }
  }
  net::CoopLock lk(links_mu_);
  for (auto& [addr, link] : links_) link->shutdown();
  links_.clear();
}

// ---------------------------------------------------------------------------
// server side
// ---------------------------------------------------------------------------

void Exchange::serve_connection(std::shared_ptr<net::Channel> ch) {
  std::string peer_addr = "?";
  try {
    auto first = read_frame(*ch, net::secs(10));
    if (!first || !std::holds_alternative<HelloMsg>(*first))
      throw ProtocolError("expected HELLO");
    const auto& hello = std::get<HelloMsg>(*first);
    peer_addr = hello.address;
    {
      std::lock_guard lk(state_mu_);
      routing_.observe(hello.peer, hello.address, host_.now());
    }
    ch->write(encode_frame(Message{self_hello()}));

    for (;;) {
      auto msg = read_frame(*ch);
      if (!msg) break;
      if (auto* want = std::get_if<WantMsg>(&*msg)) {
        // responses strictly in request order; the node-wide pacer shares
        // upload capacity round-robin across requesting peers
        for (const auto& cid : want->cids) {
          auto data = store_.lookup_for_want(cid);
          if (data) {
            upload_pacer_.acquire(data->size());
            auto actual = cas::sha256(*data);
            {
              std::lock_guard lk(state_mu_);
              ++counters_.blocks_served;
              counters_.bytes_served += data->size();
              ++served_by_peer_[peer_addr];
            }
            ch->write(encode_frame(Message{BlockMsg{actual, std::move(*data)}}));
          } else {
            {
              std::lock_guard lk(state_mu_);
              ++counters_.dont_haves;
            }
            ch->write(encode_frame(Message{DontHaveMsg{cid}}));
          }
        }
      } else if (auto* find = std::get_if<FindProvidersMsg>(&*msg)) {
        std::vector<ProviderEntry> entries;
        {
          std::lock_guard lk(state_mu_);
          entries = records_.get(find->cid, host_.now());
        }
        ch->write(encode_frame(Message{ProvidersMsg{std::move(entries)}}));
      } else if (auto* provide = std::get_if<ProvideMsg>(&*msg)) {
        std::lock_guard lk(state_mu_);
        for (const auto& e : provide->entries) {
          records_.put(e.cid, e.address, host_.now() + std::chrono::seconds(e.ttl_seconds));
          routing_.observe(PeerId::from_address(e.address), e.address, host_.now());
          ++counters_.provides_stored;
        }
      } else if (auto* sync = std::get_if<PinsetSyncMsg>(&*msg)) {
        PinsetSyncMsg reply = sync_handler_ ? sync_handler_(*sync) : PinsetSyncMsg{};
        ch->write(encode_frame(Message{reply}));
      } else {
        throw ProtocolError("unexpected message type on server connection");
      }
    }
  } catch (const net::TaskCanceled&) {
  } catch (const std::exception&) {
    // protocol violation or reset: close and forget
  }
  {
    std::lock_guard lk(state_mu_);
    server_conns_.erase(ch.get());
  }
  try {
    ch->close();
  } catch (...) {
  }
}

// ---------------------------------------------------------------------------
// links
// ---------------------------------------------------------------------------

std::shared_ptr<PeerLink> Exchange::link_to(const std::string& address) {
  net::CoopLock lk(links_mu_);
  auto it = links_.find(address);
  if (it != links_.end()) {
    if (it->second->alive()) return it->second;
    it->second->shutdown();
    links_.erase(it);
  }
  auto link = PeerLink::dial(host_, address, self_hello());
  {
    std::lock_guard slk(state_mu_);
    routing_.observe(link->peer_id(), link->peer_listen_address(), host_.now());
  }
  links_[address] = link;
  return link;
}

void Exchange::drop_link(const std::string& address) {
  net::CoopLock lk(links_mu_);
  auto it = links_.find(address);
  if (it != links_.end()) {
    it->second->shutdown();
    links_.erase(it);
  }
}

// ---------------------------------------------------------------------------
// announcements
// ---------------------------------------------------------------------------

void Exchange::announce_later(const std::vector<ContentId>& cids) {
  std::lock_guard lk(state_mu_);
  announce_queue_.insert(announce_queue_.end(), cids.begin(), cids.end());
}

void Exchange::announce_provide(const std::vector<ContentId>& cids) {
  flush_announcements(cids);
}

void Exchange::flush_announcements(std::vector<ContentId> cids) {
  if (cids.empty()) return;
  std::sort(cids.begin(), cids.end());
  cids.erase(std::unique(cids.begin(), cids.end()), cids.end());

  auto ttl = static_cast<std::uint32_t>(
      std::chrono::duration_cast<std::chrono::seconds>(cfg_.provider_ttl).count());
  std::map<std::string, std::vector<ProviderEntry>> batches;
  {
    std::lock_guard lk(state_mu_);
    for (const auto& cid : cids) {
      ProviderEntry entry{cid, cfg_.listen_address, ttl};
      auto holders = routing_.closest(cid.bytes, cfg_.record_replicas);
      bool self_holds = holders.size() < cfg_.record_replicas ||
                        PeerId::closer(self_id_, holders.back().id, cid.bytes);
      if (self_holds) {
        records_.put(cid, cfg_.listen_address, host_.now() + cfg_.provider_ttl);
        if (holders.size() == cfg_.record_replicas) holders.pop_back();
      }
      for (const auto& h : holders) batches[h.address].push_back(entry);
    }
  }
  for (auto& [address, entries] : batches) {
    try {
      auto link = link_to(address);
      constexpr std::size_t kPerFrame = 800;
      for (std::size_t off = 0; off < entries.size(); off += kPerFrame) {
        std::vector<ProviderEntry> chunk(
            entries.begin() + static_cast<std::ptrdiff_t>(off),
            entries.begin() +
                static_cast<std::ptrdiff_t>(std::min(off + kPerFrame, entries.size())));
        link->send_provide(chunk);
      }
    } catch (const std::exception&) {
      // best effort; the periodic reannounce repairs gaps
    }
  }
}

void Exchange::announce_loop() {
  net::TimePoint last_full{0};
  for (;;) {
    host_.sleep_for(cfg_.announce_batch_delay);
    std::vector<ContentId> queued;
    {
      std::lock_guard lk(state_mu_);
      queued.swap(announce_queue_);
    }
    if (!queued.empty()) flush_announcements(std::move(queued));
    if (host_.now() - last_full >= cfg_.reannounce_period) {
      last_full = host_.now();
      auto cids = store_.block_cids();
      auto files = store_.complete_files();
      cids.insert(cids.end(), files.begin(), files.end());
      flush_announcements(std::move(cids));
    }
  }
}

// ---------------------------------------------------------------------------
// lookups
// ---------------------------------------------------------------------------

std::vector<ProviderEntry> Exchange::find_providers(const ContentId& cid) {
  std::map<std::string, ProviderEntry> merged;
  {
    std::lock_guard lk(state_mu_);
    ++counters_.lookups;
    for (const auto& e : records_.get(cid, host_.now())) merged[e.address] = e;
  }

  std::set<std::string> queried;
  for (int round = 0; round < 2; ++round) {
    std::vector<PeerInfo> candidates;
    {
      std::lock_guard lk(state_mu_);
      candidates = routing_.closest(cid.bytes, cfg_.record_replicas);
    }
    std::size_t asked = 0;
    for (const auto& peer : candidates) {
      if (asked >= cfg_.lookup_alpha) break;
      if (queried.count(peer.address)) continue;
      queried.insert(peer.address);
      ++asked;
      try {
        auto link = link_to(peer.address);
        auto entries = link->request_providers(cid, cfg_.lookup_timeout);
        if (!entries) continue;
        std::lock_guard lk(state_mu_);
        for (const auto& e : *entries) {
          merged[e.address] = e;
          routing_.observe(PeerId::from_address(e.address), e.address, host_.now());
        }
      } catch (const std::exception&) {
        // unreachable holder; remaining holders satisfy the lookup
      }
    }
    if (asked == 0) break;  // nothing new surfaced
  }

  merged.erase(cfg_.listen_address);
  std::vector<ProviderEntry> out;
  out.reserve(merged.size());
  for (auto& [_, e] : merged) out.push_back(e);
  std::sort(out.begin(), out.end(), [&](const ProviderEntry& a, const ProviderEntry& b) {
    return PeerId::closer(PeerId::from_address(a.address), PeerId::from_address(b.address),
                          self_id_.bytes);
  });
  return out;
}

std::optional<PinsetSyncMsg> Exchange::sync_with(const std::string& address,
                                                 const PinsetSyncMsg& state) {
  try {
    auto link = link_to(address);
    return link->request_sync(state, cfg_.lookup_timeout + net::secs(3));
  } catch (const std::exception&) {
    return std::nullopt;
  }
}

// ---------------------------------------------------------------------------
// fetching
// ---------------------------------------------------------------------------

cas::ContentId Exchange::fetch_file(const ContentId& file_digest, FetchStats* stats_out) {
  if (auto root = store_.root_for_digest(file_digest)) {
    if (stats_out) *stats_out = FetchStats{};
    return *root;
  }

  // single flight per digest: joiners wait for the running session
  std::shared_ptr<Flight> flight;
  bool runner = false;
  {
    std::lock_guard lk(state_mu_);
    auto it = flights_.find(file_digest);
    if (it != flights_.end()) {
      flight = it->second;
    } else {
      flight = std::make_shared<Flight>();
      flights_[file_digest] = flight;
      runner = true;
    }
  }
  if (!runner) {
    for (;;) {
      {
        std::lock_guard lk(state_mu_);
        if (flight->done) break;
      }
      flight_cond_->wait(net::ms(100));
    }
    if (flight->error) std::rethrow_exception(flight->error);
    if (stats_out) *stats_out = FetchStats{};  // joiners transferred nothing
    return *flight->root;
  }

  FetchStats stats;
  auto finish = [&](std::exception_ptr err, std::optional<ContentId> root) {
    std::lock_guard lk(state_mu_);
    flight->error = err;
    flight->root = root;
    flight->stats = stats;
    flight->done = true;
    flights_.erase(file_digest);
    flight_cond_->notify_all();
  };
  try {
    auto root = run_fetch(file_digest, stats);
    finish(nullptr, root);
    if (stats_out) *stats_out = stats;
    return root;
  } catch (...) {
    finish(std::current_exception(), std::nullopt);
    throw;
  }
}

cas::ContentId Exchange::run_fetch(const ContentId& file_digest, FetchStats& stats) {
  {
    std::lock_guard lk(state_mu_);
    ++counters_.fetch_sessions;
  }
  auto sess = std::make_shared<Session>();
  sess->digest = file_digest;
  sess->change = host_.make_cond();

  auto release_holds = [this, sess] {
    std::vector<ContentId> held;
    {
      std::lock_guard lk(sess->mu);
      held.swap(sess->held);
    }
    for (const auto& cid : held) store_.release(cid);
  };

  try {
    auto add_provider = [&](const std::string& address, bool full, bool origin) {
      if (address.empty() || address == cfg_.listen_address) return;
      std::lock_guard lk(sess->mu);
      auto [it, inserted] = sess->providers.try_emplace(address);
      it->second.address = address;
      it->second.full_holder = it->second.full_holder || full;
      it->second.is_origin = it->second.is_origin || origin;
    };
    for (const auto& e : find_providers(file_digest)) add_provider(e.address, true, false);
    if (!cfg_.origin_address.empty()) add_provider(cfg_.origin_address, true, true);
    {
      std::lock_guard lk(sess->mu);
      if (sess->providers.empty()) throw NoProviderError(file_digest);
    }

    auto root_cid = fetch_root(*sess);
    if (!store_.file_complete(file_digest)) fetch_blocks(sess, root_cid);
    if (!store_.file_complete(file_digest)) store_.register_root(root_cid);

    stats = sess->stats;
    release_holds();
    announce_provide({file_digest});
    return *store_.root_for_digest(file_digest);
  } catch (...) {
    {
      std::lock_guard lk(sess->mu);
      sess->aborted = true;
    }
    sess->change->notify_all();
    release_holds();
    throw;
  }
}

// Tries providers in deterministic order (peers first, origin last) until one
// resolves the digest into either the whole file (single leaf) or its root
// DagNode block.
cas::ContentId Exchange::fetch_root(Session& sess) {
  std::vector<std::string> order;
  {
    std::lock_guard lk(sess.mu);
    for (const auto& [addr, p] : sess.providers)
      if (!p.is_origin) order.push_back(addr);
    for (const auto& [addr, p] : sess.providers)
      if (p.is_origin) order.push_back(addr);
  }

  for (const auto& addr : order) {
    try {
      auto link = link_to(addr);
      auto res = link->request_block(sess.digest, cfg_.block_timeout);
      if (!res || !res->have) continue;
      auto actual = cas::sha256(res->data);
      if (actual != res->cid) {
        ++sess.stats.garbage_blocks;
        continue;
      }
      bool from_origin = addr == cfg_.origin_address;
      if (actual == sess.digest) {
        // the whole file fit in one block; re-chunk locally
        ingest_pacer_.acquire(res->data.size());
        auto chunked = store_.chunk_blob(res->data);
        sess.stats.blocks += 1;
        (from_origin ? sess.stats.bytes_from_origin : sess.stats.bytes_from_peers) +=
            res->data.size();
        announce_later({chunked.root_cid, actual});
        return chunked.root_cid;
      }
      auto node = cas::DagNode::deserialize(res->data);
      if (node && node->is_root() && node->file_digest == sess.digest) {
        ingest_pacer_.acquire(res->data.size());
        store_.put_block(res->data);
        store_.hold(actual);
        {
          std::lock_guard lk(sess.mu);
          sess.held.push_back(actual);
        }
        sess.stats.blocks += 1;
        (from_origin ? sess.stats.bytes_from_origin : sess.stats.bytes_from_peers) +=
            res->data.size();
        announce_later({actual});
        return actual;
      }
      ++sess.stats.garbage_blocks;
    } catch (const std::exception&) {
      // unreachable provider; try the next one
    }
  }
  throw NoProviderError(sess.digest);
}

void Exchange::fetch_blocks(const std::shared_ptr<Session>& sess, const ContentId& root_cid) {
  // a deterministic per-node rotation staggers concurrent fetchers so they
  // drain disjoint ranges from slow providers first
  std::uint64_t stagger_hash = 0;
  for (auto b : self_id_.bytes) stagger_hash = stagger_hash * 31 + b;

  auto worker_body = [this, sess](const std::string& address) {
    auto dup_limit = [&](std::size_t remaining) -> int {
      if (cfg_.max_duplication >= 2) return static_cast<int>(cfg_.max_duplication);
      std::size_t tail = std::max<std::size_t>(
          1, static_cast<std::size_t>(cfg_.endgame_fraction * static_cast<double>(sess->total)));
      return remaining <= tail ? 2 : 1;
    };

    try {
      auto link = link_to(address);
      for (;;) {
        ContentId cid;
        bool have_work = false;
        {
          std::lock_guard lk(sess->mu);
          auto& me = sess->providers[address];
          if (sess->aborted || sess->needed.empty() || me.strikes >= 2) break;
          int limit = dup_limit(sess->needed.size());
          for (const auto& c : sess->order) {
            if (!sess->needed.count(c)) continue;
            auto asg = sess->assigned.find(c);
            if (asg != sess->assigned.end() && asg->second >= limit) continue;
            if (me.lacks.count(c)) continue;
            bool known = me.full_holder;
            if (!known) {
              auto h = sess->cid_holders.find(c);
              known = h != sess->cid_holders.end() && h->second.count(address);
            }
            if (!known) continue;
            cid = c;
            have_work = true;
            break;
          }
          if (have_work) {
            ++sess->assigned[cid];
            ++sess->outstanding;
          } else if (sess->outstanding == 0 && sess->discovery_done) {
            break;
          }
        }
        if (!have_work) {
          sess->change->wait(net::ms(200));
          continue;
        }

        std::optional<PeerLink::BlockResult> res;
        auto t0 = host_.now();
        bool link_dead = false;
        try {
          res = link->request_block(cid, cfg_.block_timeout);
        } catch (const std::exception&) {
          link_dead = true;
        }

        if (link_dead || !res) {
          {
            std::lock_guard lk(sess->mu);
            --sess->assigned[cid];
            --sess->outstanding;
            sess->providers[address].strikes += link_dead ? 2 : 1;
          }
          sess->change->notify_all();
          if (link_dead) break;
          continue;
        }
        if (!res->have) {
          {
            std::lock_guard lk(sess->mu);
            --sess->assigned[cid];
            --sess->outstanding;
            sess->providers[address].lacks.insert(cid);
          }
          sess->change->notify_all();
          continue;
        }
        auto actual = cas::sha256(res->data);
        if (actual != cid) {
          // verified receipt: garbage never enters the store
          {
            std::lock_guard lk(sess->mu);
            --sess->assigned[cid];
            --sess->outstanding;
            ++sess->stats.garbage_blocks;
            auto& me = sess->providers[address];
            ++me.strikes;
            me.lacks.insert(cid);
          }
          sess->change->notify_all();
          continue;
        }

        ingest_pacer_.acquire(res->data.size());
        store_.put_block(res->data);
        store_.hold(cid);
        bool fresh = false;
        {
          std::lock_guard lk(sess->mu);
          sess->held.push_back(cid);
          auto& me = sess->providers[address];
          auto dt =
              std::chrono::duration_cast<std::chrono::duration<double>>(host_.now() - t0).count();
          double rate = dt > 0 ? static_cast<double>(res->data.size()) * 8.0 / dt : 1e9;
          me.ewma_bps =
              me.ewma_bps <= 0 ? rate : cfg_.ewma_alpha * rate + (1 - cfg_.ewma_alpha) * me.ewma_bps;
          --sess->assigned[cid];
          --sess->outstanding;
          if (sess->needed.erase(cid)) {
            fresh = true;
            sess->stats.blocks += 1;
            (address == cfg_.origin_address ? sess->stats.bytes_from_origin
                                            : sess->stats.bytes_from_peers) += res->data.size();
          } else {
            ++sess->stats.duplicate_blocks;
          }
        }
        sess->change->notify_all();
        if (fresh) announce_later({cid});
      }
    } catch (const net::TaskCanceled&) {
    } catch (const std::exception&) {
    }
    {
      std::lock_guard lk(sess->mu);
      --sess->active_workers;
      sess->providers[address].worker_running = false;
    }
    sess->change->notify_all();
  };

  // must be called with sess->mu held
  auto spawn_worker_locked = [this, sess, worker_body](const std::string& address) {
    auto& p = sess->providers[address];
    if (p.worker_running || p.strikes >= 2) return;
    if (static_cast<std::size_t>(sess->active_workers) >= cfg_.session_parallelism) return;
    p.worker_running = true;
    ++sess->active_workers;
    host_.spawn("fetch-worker", [worker_body, address] { worker_body(address); });
  };

  auto discovery_body = [this, sess, spawn_worker_locked] {
    try {
      for (;;) {
        ContentId target;
        bool found = false;
        {
          std::lock_guard lk(sess->mu);
          if (sess->aborted || sess->needed.empty()) break;
          for (const auto& c : sess->order) {
            if (!sess->needed.count(c) || sess->looked_up.count(c)) continue;
            target = c;
            found = true;
            sess->looked_up.insert(c);
            break;
          }
        }
        if (!found) break;
        auto entries = find_providers(target);
        {
          std::lock_guard lk(sess->mu);
          for (const auto& e : entries) {
            if (e.address == cfg_.listen_address) continue;
            sess->cid_holders[target].insert(e.address);
            auto [it, inserted] = sess->providers.try_emplace(e.address);
            it->second.address = e.address;
            spawn_worker_locked(e.address);
          }
        }
        sess->change->notify_all();
      }
    } catch (const net::TaskCanceled&) {
    } catch (const std::exception&) {
    }
    {
      std::lock_guard lk(sess->mu);
      sess->discovery_done = true;
      --sess->active_workers;
    }
    sess->change->notify_all();
  };

  for (int wave = 0; wave < 6; ++wave) {
    auto missing = store_.missing_blocks(root_cid);
    if (missing.empty()) return;

    // refresh full holders between waves
    if (wave > 0) {
      auto entries = find_providers(sess->digest);
      std::lock_guard lk(sess->mu);
      for (const auto& e : entries) {
        auto [it, inserted] = sess->providers.try_emplace(e.address);
        it->second.address = e.address;
        it->second.full_holder = true;
      }
    }

    {
      std::lock_guard lk(sess->mu);
      sess->order = missing;
      if (sess->order.size() > 1) {
        std::size_t rot = stagger_hash % sess->order.size();
        std::rotate(sess->order.begin(), sess->order.begin() + static_cast<std::ptrdiff_t>(rot),
                    sess->order.end());
      }
      sess->needed.clear();
      sess->needed.insert(missing.begin(), missing.end());
      sess->total = missing.size();
      sess->assigned.clear();
      sess->outstanding = 0;
      sess->discovery_done = false;
      for (auto& [_, p] : sess->providers) p.strikes = 0;
      std::vector<std::string> addresses;
      for (const auto& [addr, _] : sess->providers) addresses.push_back(addr);
      for (const auto& addr : addresses) spawn_worker_locked(addr);
      ++sess->active_workers;  // discovery counts until it signs off
    }
    host_.spawn("fetch-discovery", discovery_body);

    for (;;) {
      {
        std::lock_guard lk(sess->mu);
        if (sess->active_workers == 0) break;
      }
      sess->change->wait(net::ms(500));
    }
  }

  auto missing = store_.missing_blocks(root_cid);
  if (!missing.empty()) throw IncompleteFetchError(std::move(missing));
}

}  // namespace edgepier::p2p
