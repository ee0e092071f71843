// Copyright (c) 2026 EdgePier Contributors
// SPDX-License-Identifier: Apache-2.0

#include "edgepier/gateway/registry.hpp"

#include <sstream>

#include "edgepier/cas/sha256.hpp"

namespace edgepier::gw {

using cas::ContentId;

namespace {

net::HttpResponse registry_error(int status, const std::string& code, const std::string& message) {
  std::ostringstream body;
  body << "{\"errors\":[{\"code\":\"" << code << "\",\"message\":\"" << message << "\"}]}";
  return net::HttpResponse::json(status, body.str());
}

struct Route {
  std::string name;
  std::string kind;  // "manifests" | "blobs" | "uploads"
  std::string rest;
};

// /v2/<name...>/{manifests,blobs}/<ref> with multi-segment names
std::optional<Route> split_route(const std::string& path) {
  if (path.rfind("/v2/", 0) != 0) return std::nullopt;
  auto tail = path.substr(4);
  for (const char* kind : {"/manifests/", "/blobs/"}) {
    auto pos = tail.rfind(kind);
    if (pos == std::string::npos) continue;
    Route r;
    r.name = tail.substr(0, pos);
    r.kind = kind == std::string("/manifests/") ? "manifests" : "blobs";
    r.rest = tail.substr(pos + std::strlen(kind));
    return r;
  }
  return std::nullopt;
}

}  // namespace

RegistryGateway::RegistryGateway(net::NetHost& host, cas::BlockStore& store,
                                 p2p::Exchange* exchange, repl::ClusterService* cluster,
                                 GatewayConfig cfg, MetricsSink sink)
    : host_(host),
      store_(store),
      exchange_(exchange),
      cluster_(cluster),
      cfg_(std::move(cfg)),
      sink_(std::move(sink)) {}

void RegistryGateway::start() {
  server_ = std::make_unique<net::HttpServer>(
      host_, cfg_.listen_address, [this](const net::HttpRequest& req) { return handle(req); });
  server_->start();
}

void RegistryGateway::stop() {
  if (server_) server_->stop();
}

net::HttpResponse RegistryGateway::handle_base() const {
  return net::HttpResponse::json(200, "{}");
}

net::HttpResponse RegistryGateway::handle(const net::HttpRequest& req) {
  auto path = req.path();
  if (path == "/v2/" || path == "/v2") return handle_base();

  // upload endpoints first: /v2/<name>/blobs/uploads/...
  if (auto pos = path.find("/blobs/uploads/"); pos != std::string::npos && path.rfind("/v2/", 0) == 0) {
    auto name = path.substr(4, pos - 4);
    auto uuid = path.substr(pos + std::strlen("/blobs/uploads/"));
    if (!img::ImageRef::valid_name(name))
      return registry_error(400, "UNSUPPORTED", "invalid repository name");
    if (req.method == "POST" && uuid.empty()) return start_upload(name);
    if (req.method == "PUT" && !uuid.empty()) return put_upload(req, name, uuid);
    return registry_error(405, "UNSUPPORTED", "unsupported upload operation");
  }

  auto route = split_route(path);
  if (!route) return registry_error(404, "UNSUPPORTED", "unknown endpoint");
  if (!img::ImageRef::valid_name(route->name))
    return registry_error(400, "UNSUPPORTED", "invalid repository name");

  if (route->kind == "manifests") {
    if (req.method == "GET" || req.method == "HEAD")
      return get_manifest(route->name, route->rest, req.method == "HEAD");
    if (req.method == "PUT") return put_manifest(route->name, route->rest, req);
    return registry_error(405, "UNSUPPORTED", "method not allowed");
  }
  if (req.method == "GET" || req.method == "HEAD")
    return get_blob(route->name, route->rest, req.method == "HEAD");
  return registry_error(405, "UNSUPPORTED", "method not allowed");
}

// ---------------------------------------------------------------------------
// fetch helper with the retry/backoff schedule
// ---------------------------------------------------------------------------

std::optional<ContentId> RegistryGateway::ensure_file(const ContentId& digest,
                                                      p2p::FetchStats* stats) {
  if (auto root = store_.root_for_digest(digest)) return root;
  if (!exchange_) return std::nullopt;
  auto backoff = cfg_.retry_base;
  for (int attempt = 0;; ++attempt) {
    try {
      auto root = exchange_->fetch_file(digest, stats);
      std::lock_guard lk(mu_);
      ++counters_.p2p_fetches;
      return root;
    } catch (const p2p::NoProviderError&) {
      if (attempt >= cfg_.provider_retries - 1) return std::nullopt;
      host_.sleep_for(backoff);
      backoff *= 2;
    } catch (const p2p::IncompleteFetchError&) {
      if (attempt >= cfg_.provider_retries - 1) return std::nullopt;
      host_.sleep_for(backoff);
      backoff *= 2;
    }
  }
}

// ---------------------------------------------------------------------------
// pull side
// ---------------------------------------------------------------------------

void RegistryGateway::observe_manifest_session(const img::ImageManifest& manifest,
                                               const ContentId& digest,
                                               const std::string& image_name) {
  if (!sink_) return;
  std::lock_guard lk(mu_);
  if (sessions_.count(digest)) return;
  Session s;
  s.image = image_name;
  s.start = host_.now();
  s.pending.insert(manifest.config.digest);
  for (const auto& layer : manifest.layers) s.pending.insert(layer.digest);
  for (const auto& blob : s.pending) blob_of_[blob] = digest;
  sessions_[digest] = std::move(s);
}

void RegistryGateway::credit_session(const ContentId& manifest_digest, const ContentId& blob,
                                     const p2p::FetchStats& stats) {
  if (!sink_) return;
  std::optional<PullMetric> metric;
  {
    std::lock_guard lk(mu_);
    auto it = sessions_.find(manifest_digest);
    if (it == sessions_.end()) return;
    auto& s = it->second;
    s.bytes_origin += stats.bytes_from_origin;
    s.bytes_peers += stats.bytes_from_peers;
    s.pending.erase(blob);
    if (s.pending.empty()) {
      metric = PullMetric{host_.name(), s.image, s.start, host_.now(), s.bytes_origin,
                          s.bytes_peers};
      for (auto pit = blob_of_.begin(); pit != blob_of_.end();)
        pit = pit->second == manifest_digest ? blob_of_.erase(pit) : std::next(pit);
      sessions_.erase(it);
    }
  }
  if (metric) {
    sink_(*metric);
    if (cluster_) cluster_->auto_pin_on_complete(manifest_digest);
  }
}

net::HttpResponse RegistryGateway::get_manifest(const std::string& name, const std::string& ref,
                                                bool head) {
  std::optional<ContentId> digest;
  if (auto parsed = ContentId::parse(ref)) {
    digest = parsed;
  } else if (img::ImageRef::valid_tag(ref)) {
    if (cluster_) digest = cluster_->resolve_tag(name, ref);
    if (!digest) return registry_error(404, "MANIFEST_UNKNOWN", "unknown tag " + name + ":" + ref);
  } else {
    return registry_error(400, "DIGEST_INVALID", "reference is neither tag nor digest");
  }

  if (head) {
    // existence only: local hit or provider lookup, never a block transfer
    bool exists = store_.file_complete(*digest);
    if (!exists && exchange_) exists = !exchange_->find_providers(*digest).empty();
    if (!exists) return registry_error(404, "MANIFEST_UNKNOWN", "manifest not found");
    net::HttpResponse resp;
    resp.status = 200;
    resp.set_header("Docker-Content-Digest", digest->to_string());
    resp.set_header("Content-Type", std::string(img::kManifestMediaType));
    if (auto size = store_.file_size(*digest)) {
      resp.body.assign(0, 0);
      resp.content_length = 0;
      resp.set_header("Content-Length-Hint", std::to_string(*size));
    }
    return resp;
  }

  p2p::FetchStats stats;
  auto root = ensure_file(*digest, &stats);
  if (!root) {
    bool anywhere = exchange_ && !exchange_->find_providers(*digest).empty();
    if (anywhere)
      return registry_error(503, "MANIFEST_UNKNOWN", "providers unreachable");
    return registry_error(404, "MANIFEST_UNKNOWN", "manifest not found");
  }
  auto bytes = store_.assemble_bytes(*root);
  img::ImageManifest manifest;
  try {
    manifest = img::ImageManifest::parse(
        std::string_view(reinterpret_cast<const char*>(bytes.data()), bytes.size()));
  } catch (const std::exception& e) {
    return registry_error(500, "UNSUPPORTED", e.what());
  }
  observe_manifest_session(manifest, *digest, name + (ref[0] == 's' ? "@" : ":") + ref);
  {
    std::lock_guard lk(mu_);
    ++counters_.manifests_served;
    auto it = sessions_.find(*digest);
    if (it != sessions_.end()) {
      it->second.bytes_origin += stats.bytes_from_origin;
      it->second.bytes_peers += stats.bytes_from_peers;
    }
  }

  net::HttpResponse resp;
  resp.status = 200;
  resp.body = std::move(bytes);
  resp.set_header("Docker-Content-Digest", digest->to_string());
  resp.set_header("Content-Type", manifest.media_type);
  return resp;
}

net::HttpResponse RegistryGateway::get_blob(const std::string&, const std::string& digest_str,
                                            bool head) {
  auto digest = ContentId::parse(digest_str);
  if (!digest) return registry_error(400, "DIGEST_INVALID", "malformed digest");

  if (head) {
    if (auto size = store_.file_size(*digest)) {
      net::HttpResponse resp;
      resp.status = 200;
      resp.set_header("Docker-Content-Digest", digest->to_string());
      resp.content_length = 0;
      resp.set_header("X-Content-Size", std::to_string(*size));
      return resp;
    }
    if (exchange_ && !exchange_->find_providers(*digest).empty()) {
      net::HttpResponse resp;
      resp.status = 200;
      resp.set_header("Docker-Content-Digest", digest->to_string());
      return resp;
    }
    return registry_error(404, "BLOB_UNKNOWN", "blob not found");
  }

  p2p::FetchStats stats;
  auto root = ensure_file(*digest, &stats);
  if (!root) {
    bool anywhere = exchange_ && !exchange_->find_providers(*digest).empty();
    if (anywhere) return registry_error(503, "BLOB_UNKNOWN", "providers unreachable");
    return registry_error(404, "BLOB_UNKNOWN", "blob not found");
  }
  ContentId manifest_digest;
  bool in_session = false;
  {
    std::lock_guard lk(mu_);
    ++counters_.blobs_served;
    auto it = blob_of_.find(*digest);
    if (it != blob_of_.end()) {
      manifest_digest = it->second;
      in_session = true;
    }
  }

  auto size = store_.file_size(*digest).value_or(0);
  net::HttpResponse resp;
  resp.status = 200;
  resp.set_header("Docker-Content-Digest", digest->to_string());
  resp.set_header("Content-Type", "application/octet-stream");
  resp.content_length = size;
  auto* store = &store_;
  auto root_cid = *root;
  resp.body_writer = [store, root_cid](net::Channel& ch) {
    // stream leaf by leaf; an integrity error aborts the connection so the
    // client never sees silently wrong bytes
    store->assemble_blob(root_cid, [&ch](std::span<const std::uint8_t> piece) { ch.write(piece); });
  };
  if (in_session) credit_session(manifest_digest, *digest, stats);
  return resp;
}

// ---------------------------------------------------------------------------
// push side
// ---------------------------------------------------------------------------

net::HttpResponse RegistryGateway::start_upload(const std::string& name) {
  std::string uuid;
  {
    std::lock_guard lk(mu_);
    uuid = "u" + std::to_string(next_upload_++);
    uploads_[uuid] = name;
  }
  net::HttpResponse resp;
  resp.status = 202;
  resp.set_header("Location", "/v2/" + name + "/blobs/uploads/" + uuid);
  resp.set_header("Docker-Upload-UUID", uuid);
  return resp;
}

net::HttpResponse RegistryGateway::put_upload(const net::HttpRequest& req,
                                              const std::string& name, const std::string& uuid) {
  {
    std::lock_guard lk(mu_);
    auto it = uploads_.find(uuid);
    if (it == uploads_.end() || it->second != name)
      return registry_error(404, "BLOB_UNKNOWN", "unknown upload session");
  }
  auto digest_str = req.query_param("digest");
  if (!digest_str) return registry_error(400, "DIGEST_INVALID", "missing digest parameter");
  auto digest = ContentId::parse(*digest_str);
  if (!digest) return registry_error(400, "DIGEST_INVALID", "malformed digest");

  try {
    auto chunked = store_.chunk_blob(req.body, digest);
    store_.pin(chunked.root_cid);
    if (exchange_) {
      auto cids = store_.missing_blocks(chunked.root_cid);  // empty; dag enumerated below
      std::vector<ContentId> announce{chunked.file_digest, chunked.root_cid};
      exchange_->announce_later(announce);
    }
  } catch (const cas::DigestMismatchError&) {
    return registry_error(400, "DIGEST_INVALID", "content does not match declared digest");
  } catch (const cas::CapacityError& e) {
    return registry_error(507, "UNSUPPORTED", e.what());
  }
  {
    std::lock_guard lk(mu_);
    uploads_.erase(uuid);
    ++counters_.pushes;
  }
  net::HttpResponse resp;
  resp.status = 201;
  resp.set_header("Docker-Content-Digest", digest->to_string());
  resp.set_header("Location", "/v2/" + name + "/blobs/" + digest->to_string());
  return resp;
}

net::HttpResponse RegistryGateway::put_manifest(const std::string& name, const std::string& ref,
                                                const net::HttpRequest& req) {
  img::ImageManifest manifest;
  try {
    manifest = img::ImageManifest::parse(
        std::string_view(reinterpret_cast<const char*>(req.body.data()), req.body.size()));
  } catch (const img::UnsupportedSchemaError& e) {
    return registry_error(400, "UNSUPPORTED", e.what());
  } catch (const img::ManifestParseError& e) {
    return registry_error(400, "UNSUPPORTED", e.what());
  }

  for (const auto& layer : manifest.layers)
    if (!store_.file_complete(layer.digest))
      return registry_error(400, "BLOB_UNKNOWN",
                            "manifest references unknown blob " + layer.digest.to_string());
  if (!store_.file_complete(manifest.config.digest))
    return registry_error(400, "BLOB_UNKNOWN", "manifest references unknown config blob");

  auto computed = cas::sha256(req.body);
  if (auto ref_digest = ContentId::parse(ref)) {
    if (*ref_digest != computed)
      return registry_error(400, "DIGEST_INVALID", "manifest digest mismatch");
  } else if (!img::ImageRef::valid_tag(ref)) {
    return registry_error(400, "UNSUPPORTED", "invalid tag");
  }

  try {
    auto chunked = store_.chunk_blob(req.body);
    store_.pin(chunked.root_cid);
    // push-through pinning: the uploaded image is pinned at this node
    for (const auto& layer : manifest.layers)
      if (auto root = store_.root_for_digest(layer.digest)) store_.pin(*root);
    if (auto root = store_.root_for_digest(manifest.config.digest)) store_.pin(*root);
    if (exchange_) {
      std::vector<ContentId> announce = store_.block_cids();
      auto files = store_.complete_files();
      announce.insert(announce.end(), files.begin(), files.end());
      exchange_->announce_provide(announce);
    }
    if (cluster_ && img::ImageRef::valid_tag(ref) && !ContentId::parse(ref))
      cluster_->on_image_pushed(name, ref, computed);
    else if (cluster_)
      cluster_->on_image_pushed(name, "", computed);
  } catch (const cas::CapacityError& e) {
    return registry_error(507, "UNSUPPORTED", e.what());
  }
  {
    std::lock_guard lk(mu_);
    ++counters_.pushes;
  }
  net::HttpResponse resp;
  resp.status = 201;
  resp.set_header("Docker-Content-Digest", computed.to_string());
  resp.set_header("Location", "/v2/" + name + "/manifests/" + computed.to_string());
  return resp;
}

}  // namespace edgepier::gw
