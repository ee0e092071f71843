// Copyright (c) 2026 EdgePier Contributors
// SPDX-License-Identifier: Apache-2.0

#include "edgepier/netsim/topology.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

namespace edgepier::netsim {

namespace {

std::string trim(const std::string& s) {
  auto b = s.find_first_not_of(" \t\r");
  auto e = s.find_last_not_of(" \t\r");
  return b == std::string::npos ? "" : s.substr(b, e - b + 1);
}

}  // namespace

Topology Topology::parse(const std::string& text) {
  Topology topo;
  topo.nodes.clear();
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    auto eq = line.find('=');
    if (eq == std::string::npos) throw std::invalid_argument("topology: bad line: " + line);
    std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    if (key == "nodes") {
      std::istringstream vs(value);
      std::string n;
      while (std::getline(vs, n, ',')) {
        n = trim(n);
        if (!n.empty()) topo.nodes.push_back(n);
      }
    } else if (key == "origin") {
      topo.origin = value;
    } else if (key == "default_bandwidth_mbps") {
      topo.intra.bandwidth_bps = mbps(std::stod(value));
    } else if (key == "default_latency_ms") {
      topo.intra.latency = std::chrono::nanoseconds(
          static_cast<std::int64_t>(std::stod(value) * 1e6));
    } else if (key == "uplink_bandwidth_mbps") {
      topo.uplink.bandwidth_bps = mbps(std::stod(value));
    } else if (key == "uplink_latency_ms") {
      topo.uplink.latency = std::chrono::nanoseconds(
          static_cast<std::int64_t>(std::stod(value) * 1e6));
    } else if (key == "drop_prob") {
      topo.intra.drop_prob = topo.uplink.drop_prob = std::stod(value);
    } else if (key == "seed") {
      topo.seed = std::stoull(value);
    } else {
      throw std::invalid_argument("topology: unknown key: " + key);
    }
  }
  if (topo.nodes.empty()) throw std::invalid_argument("topology: no nodes");
  if (!topo.origin.empty() && !topo.has_node(topo.origin))
    throw std::invalid_argument("topology: origin not in node list");
  return topo;
}

Topology Topology::parse_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("topology: cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse(ss.str());
}

}  // namespace edgepier::netsim
