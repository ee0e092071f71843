// Copyright (c) 2026 EdgePier Contributors
// SPDX-License-Identifier: Apache-2.0

#include "edgepier/repl/cluster.hpp"

#include <algorithm>

namespace edgepier::repl {

using cas::ContentId;

ClusterService::ClusterService(net::NetHost& host, cas::BlockStore& store,
                               p2p::Exchange& exchange, ClusterConfig cfg)
    : host_(host),
      store_(store),
      exchange_(exchange),
      cfg_(std::move(cfg)),
      self_id_(p2p::PeerId::from_address(cfg_.self_address)),
      kick_(host.make_cond()) {
  exchange_.set_sync_handler([this](const p2p::PinsetSyncMsg& in) { return handle_sync(in); });
}

void ClusterService::start() {
  if (running_ || cfg_.passive) {
    running_ = true;
    return;  // passive mode still answers syncs via the handler
  }
  running_ = true;
  host_.spawn("cluster-gossip", [this] { gossip_loop(); });
  host_.spawn("cluster-fetch", [this] { fetch_loop(); });
}

void ClusterService::stop() { running_ = false; }

std::vector<p2p::PeerId> ClusterService::membership_ids() const {
  std::vector<p2p::PeerId> ids;
  ids.reserve(cfg_.members.size());
  for (const auto& addr : cfg_.members) ids.push_back(p2p::PeerId::from_address(addr));
  std::sort(ids.begin(), ids.end());
  ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
  return ids;
}

bool ClusterService::placed_on_self(const PinEntry& entry) const {
  auto placed = place_replicas(entry.manifest_digest, entry.factor, membership_ids());
  return std::find(placed.begin(), placed.end(), self_id_) != placed.end();
}

p2p::PinsetSyncMsg ClusterService::handle_sync(const p2p::PinsetSyncMsg& incoming) {
  std::lock_guard lk(mu_);
  if (!cfg_.passive) {
    auto fresh = state_.merge(incoming);
    ++counters_.merges_in;
    if (!fresh.empty()) kick_->notify_all();
  }
  return state_.to_wire();
}

p2p::PinsetSyncMsg ClusterService::snapshot() const {
  std::lock_guard lk(mu_);
  return state_.to_wire();
}

void ClusterService::on_image_pushed(const std::string& name, const std::string& tag,
                                     const ContentId& manifest_digest) {
  {
    std::lock_guard lk(mu_);
    state_.set_tag(name, tag, manifest_digest, self_id_);
    if (!cfg_.passive) state_.add_pin(manifest_digest, cfg_.default_factor, self_id_);
  }
  kick_->notify_all();
}

void ClusterService::auto_pin_on_complete(const ContentId& manifest_digest) {
  if (cfg_.passive) return;
  bool self_pin = false;
  {
    std::lock_guard lk(mu_);
    auto entry = state_.add_pin(manifest_digest, cfg_.default_factor, self_id_);
    self_pin = placed_on_self(entry);
  }
  if (self_pin && replicate_image(manifest_digest)) {
    std::lock_guard lk(mu_);
    done_.insert(manifest_digest);
  }
  kick_->notify_all();
}

std::optional<ContentId> ClusterService::resolve_tag(const std::string& name,
                                                     const std::string& tag) {
  auto local = [&]() -> std::optional<ContentId> {
    std::lock_guard lk(mu_);
    auto it = state_.tags().find({name, tag});
    if (it == state_.tags().end()) return std::nullopt;
    return it->second.manifest_digest;
  };
  if (auto hit = local()) return hit;
  if (cfg_.passive) return std::nullopt;

  // one consultation round: cluster peers first, then the origin
  std::vector<std::string> targets;
  for (const auto& m : cfg_.members)
    if (m != cfg_.self_address) targets.push_back(m);
  if (!cfg_.origin_address.empty()) targets.push_back(cfg_.origin_address);
  for (const auto& addr : targets) {
    auto reply = exchange_.sync_with(addr, snapshot());
    if (!reply) continue;
    {
      std::lock_guard lk(mu_);
      state_.merge(*reply);
    }
    if (auto hit = local()) return hit;
  }
  return std::nullopt;
}

bool ClusterService::image_replicated(const ContentId& manifest_digest) const {
  if (!store_.file_complete(manifest_digest)) return false;
  auto root = store_.root_for_digest(manifest_digest);
  if (!root) return false;
  auto bytes = const_cast<cas::BlockStore&>(store_).assemble_bytes(*root);
  try {
    auto manifest = img::ImageManifest::parse(
        std::string_view(reinterpret_cast<const char*>(bytes.data()), bytes.size()));
    if (!store_.file_complete(manifest.config.digest)) return false;
    for (const auto& layer : manifest.layers)
      if (!store_.file_complete(layer.digest)) return false;
    return true;
  } catch (const std::exception&) {
    return false;
  }
}

bool ClusterService::replicate_image(const ContentId& manifest_digest) {
  try {
    auto manifest_root = exchange_.fetch_file(manifest_digest);
    auto bytes = store_.assemble_bytes(manifest_root);
    auto manifest = img::ImageManifest::parse(
        std::string_view(reinterpret_cast<const char*>(bytes.data()), bytes.size()));
    auto config_root = exchange_.fetch_file(manifest.config.digest);
    std::vector<ContentId> layer_roots;
    for (const auto& layer : manifest.layers) layer_roots.push_back(exchange_.fetch_file(layer.digest));
    store_.pin(manifest_root);
    store_.pin(config_root);
    for (const auto& root : layer_roots) store_.pin(root);
    {
      std::lock_guard lk(mu_);
      ++counters_.fetches_done;
    }
    return true;
  } catch (const std::exception&) {
    std::lock_guard lk(mu_);
    ++counters_.fetch_failures;
    return false;
  }
}

void ClusterService::gossip_loop() {
  for (;;) {
    host_.sleep_for(cfg_.gossip_period);
    if (!running_) return;
    std::vector<std::string> peers;
    for (const auto& m : cfg_.members)
      if (m != cfg_.self_address) peers.push_back(m);
    if (peers.empty()) continue;
    const auto& target = peers[host_.rand() % peers.size()];
    auto reply = exchange_.sync_with(target, snapshot());
    {
      std::lock_guard lk(mu_);
      ++counters_.gossip_rounds;
    }
    if (reply) {
      std::vector<ContentId> fresh;
      {
        std::lock_guard lk(mu_);
        fresh = state_.merge(*reply);
      }
      if (!fresh.empty()) kick_->notify_all();
    }
  }
}

void ClusterService::fetch_loop() {
  for (;;) {
    kick_->wait(cfg_.fetch_retry);
    if (!running_) return;
    // entries placed on this node whose images are not yet complete+pinned
    std::vector<PinEntry> todo;
    {
      std::lock_guard lk(mu_);
      for (const auto& [digest, entry] : state_.entries()) todo.push_back(entry);
    }
    for (const auto& entry : todo) {
      if (!running_) return;
      {
        std::lock_guard lk(mu_);
        if (done_.count(entry.manifest_digest)) continue;
      }
      if (!placed_on_self(entry)) continue;
      if (replicate_image(entry.manifest_digest)) {
        std::lock_guard lk(mu_);
        done_.insert(entry.manifest_digest);
      }
    }
  }
}

}  // namespace edgepier::repl
