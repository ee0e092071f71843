// Copyright (c) 2026 EdgePier Contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "edgepier/net/fabric.hpp"

namespace edgepier::netsim {

struct LinkShape {
  double bandwidth_bps = 1e9;
  net::Duration latency = net::ms(1);
  double drop_prob = 0.0;
};

// Simulated site: named nodes, a default intra-site link shape, and one node
// ("origin") whose traffic is squeezed through a shared uplink bucket per
// direction. Per-pair overrides win over both defaults.
struct Topology {
  std::vector<std::string> nodes;
  std::string origin;  // empty: no shared uplink
  LinkShape intra{1e9 /* 1000 Mbps */, net::ms(1), 0.0};
  LinkShape uplink{20e6 /* 20 Mbps */, net::ms(20), 0.0};
  std::uint64_t seed = 1;
  std::map<std::pair<std::string, std::string>, LinkShape> overrides;  // directed

  bool has_node(const std::string& n) const;
  const LinkShape& shape_for(const std::string& from, const std::string& to) const;

  // key=value config, '#' comments. Keys: nodes (comma separated), origin,
  // default_bandwidth_mbps, default_latency_ms, uplink_bandwidth_mbps,
  // uplink_latency_ms, drop_prob, seed.
  static Topology parse(const std::string& text);
  static Topology parse_file(const std::string& path);
};

inline double mbps(double v) { return v * 1'000'000.0; }  // megabits/s -> bits/s

}  // namespace edgepier::netsim
