// Copyright (c) 2026 EdgePier Contributors
// SPDX-License-Identifier: Apache-2.0

#include "edgepier/p2p/routing.hpp"

#include <algorithm>

namespace edgepier::p2p {

void RoutingTable::observe(const PeerId& id, const std::string& address, net::TimePoint now) {
  if (id == self_) return;
  int bucket = PeerId::bucket_index(self_, id);
  if (bucket < 0) return;
  auto& entries = buckets_[bucket];
  auto it = std::find_if(entries.begin(), entries.end(),
                         [&](const PeerInfo& p) { return p.id == id; });
  if (it != entries.end()) {
    it->address = address;
    it->last_seen = now;
    // move to the tail: freshest last
    PeerInfo info = *it;
    entries.erase(it);
    entries.push_back(info);
    return;
  }
  if (entries.size() >= k_) entries.erase(entries.begin());
  entries.push_back(PeerInfo{id, address, now});
}

void RoutingTable::forget(const PeerId& id) {
  int bucket = PeerId::bucket_index(self_, id);
  if (bucket < 0) return;
  auto it = buckets_.find(bucket);
  if (it == buckets_.end()) return;
  auto& entries = it->second;
  entries.erase(std::remove_if(entries.begin(), entries.end(),
                               [&](const PeerInfo& p) { return p.id == id; }),
                entries.end());
}

std::vector<PeerInfo> RoutingTable::closest(const std::array<std::uint8_t, 32>& target,
                                            std::size_t n) const {
  auto out = all();
  std::sort(out.begin(), out.end(), [&](const PeerInfo& a, const PeerInfo& b) {
    return PeerId::closer(a.id, b.id, target);
  });
  if (out.size() > n) out.resize(n);
  return out;
}

std::vector<PeerInfo> RoutingTable::all() const {
  std::vector<PeerInfo> out;
  for (const auto& [_, entries] : buckets_)
    out.insert(out.end(), entries.begin(), entries.end());
  return out;
}

std::size_t RoutingTable::size() const {
  std::size_t n = 0;
  for (const auto& [_, entries] : buckets_) n += entries.size();
  return n;
}

}  // namespace edgepier::p2p
