// Copyright (c) 2026 EdgePier Contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>

#include "edgepier/cas/block_store.hpp"
#include "edgepier/image/manifest.hpp"
#include "edgepier/net/http.hpp"
#include "edgepier/p2p/exchange.hpp"
#include "edgepier/repl/cluster.hpp"

namespace edgepier::gw {

struct GatewayConfig {
  std::string listen_address;
  int provider_retries = 3;               // backoff 1 s, 2 s, 4 s then 503
  net::Duration retry_base = net::secs(1);
};

// emitted when a pull session (manifest GET through last blob) completes
struct PullMetric {
  std::string node;
  std::string image;  // name:tag or digest as requested
  net::TimePoint start{0};
  net::TimePoint end{0};
  std::uint64_t bytes_from_origin = 0;
  std::uint64_t bytes_from_peers = 0;
};
using MetricsSink = std::function<void(const PullMetric&)>;

// Node-local Docker Registry V2 pull/push subset. Translates manifest and
// blob requests into store reads, filling local misses through the exchange.
// A stock V2 client needs no protocol extensions.
class RegistryGateway {
 public:
  RegistryGateway(net::NetHost& host, cas::BlockStore& store, p2p::Exchange* exchange,
                  repl::ClusterService* cluster, GatewayConfig cfg, MetricsSink sink = nullptr);

  void start();
  void stop();

  // exposed for direct handler tests
  net::HttpResponse handle(const net::HttpRequest& req);

  struct Counters {
    std::uint64_t manifests_served = 0;
    std::uint64_t blobs_served = 0;
    std::uint64_t pushes = 0;
    std::uint64_t p2p_fetches = 0;
  };
  Counters counters() const {
    std::lock_guard lk(mu_);
    return counters_;
  }

 private:
  struct Session {
    std::string image;
    net::TimePoint start{0};
    std::uint64_t bytes_origin = 0;
    std::uint64_t bytes_peers = 0;
    std::set<cas::ContentId> pending;  // blobs not yet served in this session
  };

  net::HttpResponse handle_base() const;
  net::HttpResponse get_manifest(const std::string& name, const std::string& ref, bool head);
  net::HttpResponse get_blob(const std::string& name, const std::string& digest_str, bool head);
  net::HttpResponse start_upload(const std::string& name);
  net::HttpResponse put_upload(const net::HttpRequest& req, const std::string& name,
                               const std::string& uuid);
  net::HttpResponse put_manifest(const std::string& name, const std::string& ref,
                                 const net::HttpRequest& req);

  // fetches with the spec retry/backoff schedule; returns root or an error response
  std::optional<cas::ContentId> ensure_file(const cas::ContentId& digest,
                                            p2p::FetchStats* stats);
  void observe_manifest_session(const img::ImageManifest& manifest,
                                const cas::ContentId& digest, const std::string& image_name);
  void credit_session(const cas::ContentId& manifest_digest, const cas::ContentId& blob,
                      const p2p::FetchStats& stats);

  net::NetHost& host_;
  cas::BlockStore& store_;
  p2p::Exchange* exchange_;        // null: baseline mode, no P2P fill
  repl::ClusterService* cluster_;  // null: no tag table beyond local pushes
  GatewayConfig cfg_;
  MetricsSink sink_;
  std::unique_ptr<net::HttpServer> server_;
  mutable std::mutex mu_;
  std::map<std::string, std::string> uploads_;        // uuid -> repo name
  std::map<cas::ContentId, Session> sessions_;        // keyed by manifest digest
  std::map<cas::ContentId, cas::ContentId> blob_of_;  // blob digest -> manifest digest
  Counters counters_;
  std::uint64_t next_upload_ = 1;
};

}  // namespace edgepier::gw
