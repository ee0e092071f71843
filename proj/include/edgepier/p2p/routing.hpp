// Copyright (c) 2026 EdgePier Contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "edgepier/net/fabric.hpp"
#include "edgepier/p2p/peer_id.hpp"

namespace edgepier::p2p {

struct PeerInfo {
  PeerId id;
  std::string address;
  net::TimePoint last_seen{0};
};

// Kademlia-style k-buckets keyed by XOR distance to self. At site scale this
// degenerates to full membership, which is fine; the structure keeps lookup
// behavior honest if a site grows.
class RoutingTable {
 public:
  RoutingTable(PeerId self, std::size_t k = 20) : self_(self), k_(k) {}

  const PeerId& self() const { return self_; }

  // Insert or refresh. Full buckets evict the stalest entry.
  void observe(const PeerId& id, const std::string& address, net::TimePoint now);
  void forget(const PeerId& id);

  // n closest peers to target by XOR distance; self excluded.
  std::vector<PeerInfo> closest(const std::array<std::uint8_t, 32>& target, std::size_t n) const;
  std::vector<PeerInfo> all() const;
  std::size_t size() const;

 private:
  PeerId self_;
  std::size_t k_;
  std::map<int, std::vector<PeerInfo>> buckets_;  // ordered by last-seen, oldest first
};

}  // namespace edgepier::p2p
