// Copyright (c) 2026 EdgePier Contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <map>
#include <string>
#include <vector>

#include "edgepier/cas/content_id.hpp"
#include "edgepier/net/fabric.hpp"
#include "edgepier/p2p/wire.hpp"

namespace edgepier::p2p {

// Provider records this node stores as a DHT record holder. Expired records
// are never returned.
class ProviderStore {
 public:
  void put(const cas::ContentId& cid, const std::string& address, net::TimePoint expires_at) {
    records_[cid][address] = expires_at;
  }

  std::vector<ProviderEntry> get(const cas::ContentId& cid, net::TimePoint now) {
    std::vector<ProviderEntry> out;
    auto it = records_.find(cid);
    if (it == records_.end()) return out;
    for (auto rec = it->second.begin(); rec != it->second.end();) {
      if (rec->second <= now) {
        rec = it->second.erase(rec);
        continue;
      }
      auto remaining =
          std::chrono::duration_cast<std::chrono::seconds>(rec->second - now).count();
      out.push_back(ProviderEntry{cid, rec->first,
                                  static_cast<std::uint32_t>(std::max<std::int64_t>(remaining, 1))});
      ++rec;
    }
    if (it->second.empty()) records_.erase(it);
    return out;
  }

  void sweep(net::TimePoint now) {
    for (auto it = records_.begin(); it != records_.end();) {
      for (auto rec = it->second.begin(); rec != it->second.end();)
        rec = rec->second <= now ? it->second.erase(rec) : std::next(rec);
      it = it->second.empty() ? records_.erase(it) : std::next(it);
    }
  }

  std::size_t size() const { return records_.size(); }

 private:
  std::map<cas::ContentId, std::map<std::string, net::TimePoint>> records_;
};

}  // namespace edgepier::p2p
