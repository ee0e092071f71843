// Copyright (c) 2026 EdgePier Contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "edgepier/cas/block_store.hpp"
#include "edgepier/net/coop.hpp"
#include "edgepier/net/fabric.hpp"
#include "edgepier/p2p/peer_link.hpp"
#include "edgepier/p2p/providers.hpp"
#include "edgepier/p2p/routing.hpp"
#include "edgepier/p2p/wire.hpp"

namespace edgepier::p2p {

struct ExchangeConfig {
  std::string listen_address;
  std::vector<std::string> bootstrap_peers;  // site peers plus the origin
  std::string origin_address;                // static fallback; "" = none

  std::size_t record_replicas = 3;  // provider records live on the r closest peers
  std::size_t lookup_alpha = 3;     // peers queried per lookup
  std::size_t k_bucket = 20;
  net::Duration provider_ttl = net::secs(30);
  net::Duration reannounce_period = net::secs(10);
  net::Duration announce_batch_delay = net::secs(1);
  net::Duration block_timeout = net::secs(10);
  net::Duration lookup_timeout = net::secs(2);
  net::Duration session_refresh = net::secs(2);
  std::size_t session_parallelism = 8;
  std::size_t max_duplication = 1;   // raised to 2 for the endgame tail
  double endgame_fraction = 0.05;
  double ewma_alpha = 0.3;

  // Node-level processing ceilings for block service and ingest (0 = off).
  // These model the hashing/datastore cost that caps p2p throughput well
  // below intra-site line rate on small nodes.
  double upload_bps = 0;
  double ingest_bps = 0;
};

class IncompleteFetchError : public std::runtime_error {
 public:
  explicit IncompleteFetchError(std::vector<cas::ContentId> missing)
      : std::runtime_error("fetch incomplete: " + std::to_string(missing.size()) +
                           " blocks unavailable"),
        missing(std::move(missing)) {}
  std::vector<cas::ContentId> missing;
};

class NoProviderError : public std::runtime_error {
 public:
  explicit NoProviderError(const cas::ContentId& cid)
      : std::runtime_error("no provider for " + cid.short_hex()), cid(cid) {}
  cas::ContentId cid;
};

struct FetchStats {
  std::uint64_t bytes_from_origin = 0;
  std::uint64_t bytes_from_peers = 0;
  std::uint64_t blocks = 0;
  std::uint64_t duplicate_blocks = 0;
  std::uint64_t garbage_blocks = 0;

  void add(const FetchStats& o) {
    bytes_from_origin += o.bytes_from_origin;
    bytes_from_peers += o.bytes_from_peers;
    blocks += o.blocks;
    duplicate_blocks += o.duplicate_blocks;
    garbage_blocks += o.garbage_blocks;
  }
};

// Peer-to-peer block exchange: serves wants from the local store, announces
// held content to the record holders, looks up providers and runs fetch
// sessions that spread block downloads across providers.
class Exchange {
 public:
  Exchange(net::NetHost& host, cas::BlockStore& store, ExchangeConfig cfg);
  ~Exchange();

  void start();
  void stop();

  const PeerId& self() const { return self_id_; }
  RoutingTable& routing() { return routing_; }
  const ExchangeConfig& config() const { return cfg_; }

  // Batched PROVIDE of these cids to the record holders. Also records locally
  // when this node is among the holders.
  void announce_provide(const std::vector<cas::ContentId>& cids);
  // Queues cids for the next announce batch (cheap, used per received block).
  void announce_later(const std::vector<cas::ContentId>& cids);

  // Deduplicated provider list ordered by XOR distance to this node, self
  // excluded, expired records dropped.
  std::vector<ProviderEntry> find_providers(const cas::ContentId& cid);

  // Fetches the whole file addressed by file_digest into the store and
  // registers it. Concurrent calls for the same digest coalesce. Returns the
  // root cid. Throws NoProviderError / IncompleteFetchError.
  cas::ContentId fetch_file(const cas::ContentId& file_digest, FetchStats* stats = nullptr);

  // Replication hook: incoming PINSET_SYNC payload -> reply payload.
  using SyncHandler = std::function<PinsetSyncMsg(const PinsetSyncMsg&)>;
  void set_sync_handler(SyncHandler handler) { sync_handler_ = std::move(handler); }
  // One anti-entropy exchange with a peer; nullopt when unreachable.
  std::optional<PinsetSyncMsg> sync_with(const std::string& address, const PinsetSyncMsg& state);

  struct Counters {
    std::uint64_t blocks_served = 0;
    std::uint64_t bytes_served = 0;
    std::uint64_t dont_haves = 0;
    std::uint64_t lookups = 0;
    std::uint64_t provides_stored = 0;
    std::uint64_t fetch_sessions = 0;
  };
  const Counters& counters() const { return counters_; }
  // blocks served per requesting peer (fairness checks)
  const std::map<std::string, std::uint64_t>& served_by_peer() const { return served_by_peer_; }

 private:
  struct Flight;
  struct Session;

  void serve_connection(std::shared_ptr<net::Channel> ch);
  std::shared_ptr<PeerLink> link_to(const std::string& address);
  void drop_link(const std::string& address);
  void announce_loop();
  void flush_announcements(std::vector<cas::ContentId> cids);
  cas::ContentId run_fetch(const cas::ContentId& file_digest, FetchStats& stats);
  cas::ContentId fetch_root(Session& sess);
  void fetch_blocks(const std::shared_ptr<Session>& sess, const cas::ContentId& root_cid);
  HelloMsg self_hello() const;

  net::NetHost& host_;
  cas::BlockStore& store_;
  mutable std::mutex state_mu_;  // small non-blocking state only
  ExchangeConfig cfg_;
  PeerId self_id_;
  RoutingTable routing_;
  ProviderStore records_;
  net::Pacer upload_pacer_;
  net::Pacer ingest_pacer_;
  net::CoopMutex links_mu_;
  std::map<std::string, std::shared_ptr<PeerLink>> links_;
  std::unique_ptr<net::Listener> listener_;
  std::set<net::Channel*> server_conns_;
  std::map<cas::ContentId, std::shared_ptr<Flight>> flights_;
  std::unique_ptr<net::Cond> flight_cond_;
  std::vector<cas::ContentId> announce_queue_;
  SyncHandler sync_handler_;
  Counters counters_;
  std::map<std::string, std::uint64_t> served_by_peer_;
  bool running_ = false;
};

}  // namespace edgepier::p2p
