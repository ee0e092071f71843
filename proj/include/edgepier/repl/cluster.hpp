// Copyright (c) 2026 EdgePier Contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "edgepier/cas/block_store.hpp"
#include "edgepier/image/manifest.hpp"
#include "edgepier/p2p/exchange.hpp"
#include "edgepier/repl/pinset.hpp"

namespace edgepier::repl {

struct ClusterConfig {
  std::vector<std::string> members;  // p2p addresses of the site cluster
  std::string self_address;          // own p2p address (identifies the writer)
  std::string origin_address;        // consulted for unknown tags; "" = none
  std::uint32_t default_factor = kFactorAll;
  net::Duration gossip_period = net::secs(5);
  net::Duration fetch_retry = net::secs(2);
  // passive: answer syncs with own state but never merge, gossip or fetch
  // (the cloud origin sits outside the site cluster)
  bool passive = false;
};

// Site-wide pinset and tag synchronization: anti-entropy gossip of the CRDT
// state, rendezvous-placed background replication and LWW tag resolution.
class ClusterService {
 public:
  ClusterService(net::NetHost& host, cas::BlockStore& store, p2p::Exchange& exchange,
                 ClusterConfig cfg);

  void start();
  void stop();

  // push path: record the tag and (active mode) create the pin entry
  void on_image_pushed(const std::string& name, const std::string& tag,
                       const cas::ContentId& manifest_digest);
  // pull path: local DAGs complete, create + gossip the pin entry
  void auto_pin_on_complete(const cas::ContentId& manifest_digest);

  // LWW winner; consults cluster peers then the origin once when locally
  // unknown. nullopt = unknown tag.
  std::optional<cas::ContentId> resolve_tag(const std::string& name, const std::string& tag);

  p2p::PinsetSyncMsg snapshot() const;
  bool image_replicated(const cas::ContentId& manifest_digest) const;
  std::vector<p2p::PeerId> membership_ids() const;
  const ClusterConfig& config() const { return cfg_; }

  struct Counters {
    std::uint64_t gossip_rounds = 0;
    std::uint64_t merges_in = 0;
    std::uint64_t fetches_done = 0;
    std::uint64_t fetch_failures = 0;
  };
  Counters counters() const {
    std::lock_guard lk(mu_);
    return counters_;
  }

 private:
  p2p::PinsetSyncMsg handle_sync(const p2p::PinsetSyncMsg& incoming);
  void gossip_loop();
  void fetch_loop();
  bool placed_on_self(const PinEntry& entry) const;
  // fetch + pin one image; true when complete
  bool replicate_image(const cas::ContentId& manifest_digest);

  net::NetHost& host_;
  cas::BlockStore& store_;
  p2p::Exchange& exchange_;
  ClusterConfig cfg_;
  p2p::PeerId self_id_;
  mutable std::mutex mu_;
  PinsetState state_;
  std::set<cas::ContentId> done_;  // images fetched and pinned by this node
  Counters counters_;
  std::unique_ptr<net::Cond> kick_;
  bool running_ = false;
};

}  // namespace edgepier::repl
