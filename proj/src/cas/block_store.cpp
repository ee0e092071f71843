// Copyright (c) 2026 EdgePier Contributors
// SPDX-License-Identifier: Apache-2.0

#include "edgepier/cas/block_store.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>

#include "edgepier/cas/sha256.hpp"

namespace fs = std::filesystem;

namespace edgepier::cas {

namespace {

class MemoryBackend final : public StorageBackend {
 public:
  void put(const ContentId& cid, std::span<const std::uint8_t> data) override {
    data_[cid].assign(data.begin(), data.end());
  }
  std::optional<std::vector<std::uint8_t>> get(const ContentId& cid) const override {
    auto it = data_.find(cid);
    if (it == data_.end()) return std::nullopt;
    return it->second;
  }
  void remove(const ContentId& cid) override { data_.erase(cid); }
  void quarantine(const ContentId& cid) override { data_.erase(cid); }
  std::vector<ContentId> list() const override {
    std::vector<ContentId> out;
    out.reserve(data_.size());
    for (const auto& [cid, _] : data_) out.push_back(cid);
    return out;
  }

  std::map<ContentId, std::vector<std::uint8_t>> data_;
};

// One file per block under <dir>/blocks/ab/cd/<hex>, written via tmp+rename so
// a crash never leaves a partial block behind a valid name.
class FileBackend final : public StorageBackend {
 public:
  explicit FileBackend(std::string dir) : dir_(std::move(dir)) {
    fs::create_directories(fs::path(dir_) / "blocks");
    fs::create_directories(fs::path(dir_) / "quarantine");
    fs::create_directories(fs::path(dir_) / "tmp");
  }

  fs::path path_for(const ContentId& cid) const {
    auto hex = cid.hex();
    return fs::path(dir_) / "blocks" / hex.substr(0, 2) / hex.substr(2, 2) / hex;
  }

  void put(const ContentId& cid, std::span<const std::uint8_t> data) override {
    auto dest = path_for(cid);
    fs::create_directories(dest.parent_path());
    auto tmp = fs::path(dir_) / "tmp" / (cid.hex() + ".tmp");
    {
      std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
      if (!out) throw std::runtime_error("block store: cannot write " + tmp.string());
      out.write(reinterpret_cast<const char*>(data.data()),
                static_cast<std::streamsize>(data.size()));
      if (!out) throw std::runtime_error("block store: short write " + tmp.string());
    }
    fs::rename(tmp, dest);
  }

  std::optional<std::vector<std::uint8_t>> get(const ContentId& cid) const override {
    std::ifstream in(path_for(cid), std::ios::binary);
    if (!in) return std::nullopt;
    std::vector<std::uint8_t> data((std::istreambuf_iterator<char>(in)),
                                   std::istreambuf_iterator<char>());
    return data;
  }

  void remove(const ContentId& cid) override {
    std::error_code ec;
    fs::remove(path_for(cid), ec);
  }

  void quarantine(const ContentId& cid) override {
    std::error_code ec;
    fs::rename(path_for(cid), fs::path(dir_) / "quarantine" / cid.hex(), ec);
    if (ec) fs::remove(path_for(cid), ec);
  }

  std::vector<ContentId> list() const override {
    std::vector<ContentId> out;
    std::error_code ec;
    for (fs::recursive_directory_iterator it(fs::path(dir_) / "blocks", ec), end;
         it != end && !ec; it.increment(ec)) {
      if (!it->is_regular_file()) continue;
      if (auto cid = ContentId::parse_hex(it->path().filename().string())) out.push_back(*cid);
    }
    std::sort(out.begin(), out.end());
    return out;
  }

 private:
  std::string dir_;
};

}  // namespace

BlockStore::BlockStore(StoreOptions opts) : opts_(std::move(opts)) {
  if (opts_.chunk_size < kMinChunkSize)
    throw std::invalid_argument("chunk_size must be >= " + std::to_string(kMinChunkSize));
  if (opts_.max_links_per_node < 3)
    throw std::invalid_argument("max_links_per_node must be >= 3");
  if (opts_.dir.empty()) {
    backend_ = std::make_unique<MemoryBackend>();
  } else {
    backend_ = std::make_unique<FileBackend>(opts_.dir);
    log_path_ = (fs::path(opts_.dir) / "meta.log").string();
    load_persisted();
  }
}

BlockStore::~BlockStore() = default;

ContentId BlockStore::put_block(std::span<const std::uint8_t> data) {
  std::unique_lock lk(mu_);
  return put_block_locked(data, lk);
}

ContentId BlockStore::put_block_locked(std::span<const std::uint8_t> data,
                                       std::unique_lock<std::mutex>& lk) {
  if (data.size() > std::max(opts_.chunk_size, kMaxSerializedNode))
    throw std::invalid_argument("put_block: block exceeds size bound");
  auto cid = sha256(data);
  auto it = blocks_.find(cid);
  if (it != blocks_.end()) {
    it->second.touched = ++lru_seq_;
    return cid;  // idempotent, no physical growth
  }
  ensure_space_locked(data.size(), lk);
  backend_->put(cid, data);
  blocks_[cid] = BlockMeta{data.size(), 0, 0, ++lru_seq_};
  physical_ += data.size();
  return cid;
}

void BlockStore::ensure_space_locked(std::uint64_t needed, std::unique_lock<std::mutex>&) {
  if (needed > opts_.capacity_bytes)
    throw CapacityError("block larger than store capacity");
  while (physical_ + needed > opts_.capacity_bytes) {
    if (!evict_one_locked())
      throw CapacityError("store full: " + std::to_string(physical_) + " bytes used, " +
                          std::to_string(needed) + " more needed");
  }
}

bool BlockStore::evict_one_locked() {
  // Loose unreferenced blocks go first, oldest touch first.
  const ContentId* loose = nullptr;
  std::uint64_t loose_touch = UINT64_MAX;
  for (const auto& [cid, meta] : blocks_) {
    if (meta.refs == 0 && meta.holds == 0 && meta.touched < loose_touch) {
      loose = &cid;
      loose_touch = meta.touched;
    }
  }
  if (loose) {
    ContentId cid = *loose;
    physical_ -= blocks_[cid].size;
    blocks_.erase(cid);
    backend_->remove(cid);
    return true;
  }
  // Then whole unpinned DAGs, least recently used root first.
  const ContentId* victim = nullptr;
  std::uint64_t victim_lru = UINT64_MAX;
  for (const auto& [root, meta] : roots_) {
    if (!meta.pinned && meta.lru < victim_lru) {
      victim = &root;
      victim_lru = meta.lru;
    }
  }
  if (!victim) return false;
  ContentId root = *victim;
  std::vector<ContentId> dag, missing;
  collect_dag_locked(root, dag, missing);
  digest_index_.erase(roots_[root].file_digest);
  roots_.erase(root);
  for (const auto& cid : dag) {
    auto it = blocks_.find(cid);
    if (it == blocks_.end()) continue;
    if (it->second.refs > 0) --it->second.refs;
    if (it->second.refs == 0 && it->second.holds == 0) {
      physical_ -= it->second.size;
      blocks_.erase(it);
      backend_->remove(cid);
    }
  }
  if (!log_path_.empty()) append_log("E " + root.hex());
  return true;
}

std::optional<std::vector<std::uint8_t>> BlockStore::get_block(const ContentId& cid) {
  std::unique_lock lk(mu_);
  auto it = blocks_.find(cid);
  if (it == blocks_.end()) return std::nullopt;
  auto data = backend_->get(cid);
  if (!data) {  // backend lost it (external interference); treat as absent
    physical_ -= it->second.size;
    blocks_.erase(it);
    return std::nullopt;
  }
  if (sha256(*data) != cid) {
    physical_ -= it->second.size;
    blocks_.erase(it);
    backend_->quarantine(cid);
    throw IntegrityError(cid, "stored block " + cid.short_hex() + " failed re-hash, quarantined");
  }
  it->second.touched = ++lru_seq_;
  return data;
}

bool BlockStore::has_block(const ContentId& cid) const {
  std::unique_lock lk(mu_);
  return blocks_.count(cid) > 0;
}

ChunkResult BlockStore::chunk_blob(std::span<const std::uint8_t> data,
                                   std::optional<ContentId> expect_digest) {
  const std::size_t chunk = opts_.chunk_size;
  std::vector<ContentId> staged;  // held until registration or rollback
  auto rollback = [&] {
    std::unique_lock lk(mu_);
    for (const auto& cid : staged) {
      auto it = blocks_.find(cid);
      if (it == blocks_.end()) continue;
      --it->second.holds;
      if (it->second.refs == 0 && it->second.holds == 0) {
        physical_ -= it->second.size;
        blocks_.erase(it);
        backend_->remove(cid);
      }
    }
  };

  try {
    Sha256 file_hash;
    std::vector<DagLink> leaves;
    leaves.reserve(data.size() / chunk + 1);
    for (std::size_t off = 0; off < data.size(); off += chunk) {
      auto piece = data.subspan(off, std::min(chunk, data.size() - off));
      file_hash.update(piece);
      std::unique_lock lk(mu_);
      auto cid = put_block_locked(piece, lk);
      ++blocks_[cid].holds;
      staged.push_back(cid);
      leaves.push_back({cid, piece.size()});
    }
    ContentId digest = file_hash.finish();
    if (expect_digest && *expect_digest != digest) {
      rollback();
      throw DigestMismatchError(*expect_digest, digest);
    }

    // Collapse into one extra level when the leaf count exceeds the fan-out
    // cap; balanced split keeps every interior child at >= 2 leaves.
    std::vector<DagLink> level = std::move(leaves);
    if (level.size() > opts_.max_links_per_node) {
      std::size_t groups =
          (level.size() + opts_.max_links_per_node - 1) / opts_.max_links_per_node;
      std::vector<DagLink> parents;
      parents.reserve(groups);
      std::size_t base = level.size() / groups, extra = level.size() % groups, pos = 0;
      for (std::size_t g = 0; g < groups; ++g) {
        std::size_t take = base + (g < extra ? 1 : 0);
        DagNode mid;
        mid.kind = DagNode::Kind::interior;
        mid.links.assign(level.begin() + pos, level.begin() + pos + take);
        mid.total_size = mid.links_size_sum();
        pos += take;
        auto bytes = mid.serialize();
        std::unique_lock lk(mu_);
        auto cid = put_block_locked(bytes, lk);
        ++blocks_[cid].holds;
        staged.push_back(cid);
        parents.push_back({cid, mid.total_size});
      }
      level = std::move(parents);
    }

    DagNode root;
    root.kind = DagNode::Kind::interior;
    root.links = std::move(level);
    root.total_size = data.size();
    root.file_digest = digest;
    auto root_bytes = root.serialize();
    if (root_bytes.size() > kMaxSerializedNode) {
      rollback();
      throw std::invalid_argument("serialized DagNode exceeds 1 MiB");
    }
    ContentId root_cid;
    {
      std::unique_lock lk(mu_);
      root_cid = put_block_locked(root_bytes, lk);
      ++blocks_[root_cid].holds;
      staged.push_back(root_cid);
    }
    register_root(root_cid);
    {
      std::unique_lock lk(mu_);
      for (const auto& cid : staged) --blocks_[cid].holds;
    }
    return ChunkResult{root_cid, digest, data.size(), (data.size() + chunk - 1) / chunk};
  } catch (const DigestMismatchError&) {
    throw;
  } catch (...) {
    rollback();
    throw;
  }
}

std::optional<DagNode> BlockStore::get_node(const ContentId& node_cid) {
  auto bytes = get_block(node_cid);
  if (!bytes) return std::nullopt;
  return DagNode::deserialize(*bytes);
}

std::optional<ContentId> BlockStore::root_for_digest(const ContentId& file_digest) const {
  std::unique_lock lk(mu_);
  auto it = digest_index_.find(file_digest);
  if (it == digest_index_.end()) return std::nullopt;
  return it->second;
}

bool BlockStore::file_complete(const ContentId& file_digest) const {
  std::unique_lock lk(mu_);
  return digest_index_.count(file_digest) > 0;
}

std::optional<std::uint64_t> BlockStore::file_size(const ContentId& file_digest) const {
  std::unique_lock lk(mu_);
  auto it = digest_index_.find(file_digest);
  if (it == digest_index_.end()) return std::nullopt;
  return roots_.at(it->second).total_size;
}

void BlockStore::collect_dag_locked(const ContentId& root_cid, std::vector<ContentId>& blocks,
                                    std::vector<ContentId>& missing) {
  auto root_bytes = backend_->get(root_cid);
  if (!blocks_.count(root_cid) || !root_bytes) {
    missing.push_back(root_cid);
    return;
  }
  blocks.push_back(root_cid);
  auto root = DagNode::deserialize(*root_bytes);
  if (!root) {
    missing.push_back(root_cid);  // unparsable node treated as absent
    return;
  }
  for (const auto& link : root->links) {
    if (link_is_interior(link)) {
      auto mid_bytes = blocks_.count(link.cid) ? backend_->get(link.cid) : std::nullopt;
      if (!mid_bytes) {
        missing.push_back(link.cid);
        continue;
      }
      blocks.push_back(link.cid);
      auto mid = DagNode::deserialize(*mid_bytes);
      if (!mid) {
        missing.push_back(link.cid);
        continue;
      }
      for (const auto& leaf : mid->links) {
        if (blocks_.count(leaf.cid))
          blocks.push_back(leaf.cid);
        else
          missing.push_back(leaf.cid);
      }
    } else {
      if (blocks_.count(link.cid))
        blocks.push_back(link.cid);
      else
        missing.push_back(link.cid);
    }
  }
}

std::vector<ContentId> BlockStore::missing_blocks(const ContentId& root_cid) {
  std::unique_lock lk(mu_);
  std::vector<ContentId> blocks, missing;
  collect_dag_locked(root_cid, blocks, missing);
  return missing;
}

void BlockStore::assemble_blob(
    const ContentId& root_cid,
    const std::function<void(std::span<const std::uint8_t>)>& sink) {
  DagNode root;
  ContentId expect;
  {
    auto bytes = get_block(root_cid);
    if (!bytes) throw MissingChildError({root_cid});
    auto parsed = DagNode::deserialize(*bytes);
    if (!parsed) throw IntegrityError(root_cid, "root block is not a DagNode");
    root = std::move(*parsed);
    expect = root.file_digest;
  }
  // Flatten one optional interior level into a leaf schedule.
  std::vector<DagLink> leaves;
  std::vector<ContentId> missing;
  for (const auto& link : root.links) {
    if (link_is_interior(link)) {
      auto mid_bytes = get_block(link.cid);
      if (!mid_bytes) {
        missing.push_back(link.cid);
        continue;
      }
      auto mid = DagNode::deserialize(*mid_bytes);
      if (!mid) throw IntegrityError(link.cid, "interior block is not a DagNode");
      for (const auto& leaf : mid->links) leaves.push_back(leaf);
    } else {
      leaves.push_back(link);
    }
  }
  if (!missing.empty()) throw MissingChildError(std::move(missing));

  Sha256 hash;
  std::uint64_t streamed = 0;
  for (const auto& leaf : leaves) {
    auto data = get_block(leaf.cid);  // verifies per-block hash
    if (!data) throw MissingChildError({leaf.cid});
    hash.update(*data);
    streamed += data->size();
    sink(*data);
  }
  auto digest = hash.finish();
  if (streamed != root.total_size || (root.is_root() && digest != expect))
    throw IntegrityError(root_cid, "assembled stream failed whole-file digest check");
  std::unique_lock lk(mu_);
  if (auto it = roots_.find(root_cid); it != roots_.end()) it->second.lru = ++lru_seq_;
}

std::vector<std::uint8_t> BlockStore::assemble_bytes(const ContentId& root_cid) {
  std::vector<std::uint8_t> out;
  assemble_blob(root_cid, [&](std::span<const std::uint8_t> piece) {
    out.insert(out.end(), piece.begin(), piece.end());
  });
  return out;
}

void BlockStore::register_root(const ContentId& root_cid) {
  std::unique_lock lk(mu_);
  if (roots_.count(root_cid)) {
    roots_[root_cid].lru = ++lru_seq_;
    return;
  }
  std::vector<ContentId> dag, missing;
  collect_dag_locked(root_cid, dag, missing);
  if (!missing.empty()) throw MissingChildError(std::move(missing));
  auto root_bytes = backend_->get(root_cid);
  auto root = DagNode::deserialize(*root_bytes);
  if (!root || !root->is_root())
    throw std::invalid_argument("register_root: " + root_cid.short_hex() + " is not a file root");
  RootMeta meta;
  meta.file_digest = root->file_digest;
  meta.total_size = root->total_size;
  meta.lru = ++lru_seq_;
  std::uint64_t dag_bytes = 0;
  for (const auto& cid : dag) {
    ++blocks_[cid].refs;
    dag_bytes += blocks_[cid].size;
  }
  meta.node_bytes = dag_bytes >= meta.total_size ? dag_bytes - meta.total_size : 0;
  roots_[root_cid] = meta;
  digest_index_[meta.file_digest] = root_cid;
  if (!log_path_.empty()) append_log("R " + root_cid.hex());
}

void BlockStore::pin(const ContentId& root_cid) {
  std::unique_lock lk(mu_);
  auto it = roots_.find(root_cid);
  if (it == roots_.end()) {
    // allow pinning by file digest as a convenience
    auto di = digest_index_.find(root_cid);
    if (di == digest_index_.end()) throw NotFoundError("pin: unknown root " + root_cid.short_hex());
    it = roots_.find(di->second);
  }
  if (!it->second.pinned) {
    it->second.pinned = true;
    if (!log_path_.empty()) append_log("P " + it->first.hex());
  }
}

void BlockStore::unpin(const ContentId& root_cid) {
  std::unique_lock lk(mu_);
  auto it = roots_.find(root_cid);
  if (it == roots_.end()) {
    auto di = digest_index_.find(root_cid);
    if (di == digest_index_.end()) return;
    it = roots_.find(di->second);
  }
  if (it->second.pinned) {
    it->second.pinned = false;
    if (!log_path_.empty()) append_log("U " + it->first.hex());
  }
}

bool BlockStore::pinned(const ContentId& root_cid) const {
  std::unique_lock lk(mu_);
  if (auto it = roots_.find(root_cid); it != roots_.end()) return it->second.pinned;
  if (auto di = digest_index_.find(root_cid); di != digest_index_.end())
    return roots_.at(di->second).pinned;
  return false;
}

void BlockStore::hold(const ContentId& cid) {
  std::unique_lock lk(mu_);
  auto it = blocks_.find(cid);
  if (it != blocks_.end()) ++it->second.holds;
}

void BlockStore::release(const ContentId& cid) {
  std::unique_lock lk(mu_);
  auto it = blocks_.find(cid);
  if (it != blocks_.end() && it->second.holds > 0) --it->second.holds;
}

void BlockStore::drop_loose(const ContentId& cid) {
  std::unique_lock lk(mu_);
  auto it = blocks_.find(cid);
  if (it == blocks_.end() || it->second.refs > 0) return;
  physical_ -= it->second.size;
  blocks_.erase(it);
  backend_->remove(cid);
}

std::uint64_t BlockStore::logical_locked() const {
  std::uint64_t logical = 0;
  for (const auto& [_, meta] : roots_) logical += meta.total_size + meta.node_bytes;
  for (const auto& [cid, meta] : blocks_)
    if (meta.refs == 0) logical += meta.size;
  return logical;
}

StoreStats BlockStore::stats() const {
  std::unique_lock lk(mu_);
  StoreStats s;
  s.unique_blocks = blocks_.size();
  s.physical_bytes = physical_;
  s.logical_bytes = logical_locked();
  return s;
}

std::vector<ContentId> BlockStore::block_cids() const {
  std::unique_lock lk(mu_);
  std::vector<ContentId> out;
  out.reserve(blocks_.size());
  for (const auto& [cid, _] : blocks_) out.push_back(cid);
  return out;
}

std::vector<ContentId> BlockStore::complete_files() const {
  std::unique_lock lk(mu_);
  std::vector<ContentId> out;
  out.reserve(digest_index_.size());
  for (const auto& [digest, _] : digest_index_) out.push_back(digest);
  return out;
}

std::vector<ContentId> BlockStore::pinned_roots() const {
  std::unique_lock lk(mu_);
  std::vector<ContentId> out;
  for (const auto& [root, meta] : roots_)
    if (meta.pinned) out.push_back(root);
  return out;
}

std::optional<std::vector<std::uint8_t>> BlockStore::lookup_for_want(const ContentId& cid) {
  if (auto block = get_block(cid)) return block;
  std::optional<ContentId> root;
  {
    std::unique_lock lk(mu_);
    auto it = digest_index_.find(cid);
    if (it != digest_index_.end()) root = it->second;
  }
  if (root) return get_block(*root);
  return std::nullopt;
}

void BlockStore::corrupt_block_for_test(const ContentId& cid, std::size_t offset) {
  std::unique_lock lk(mu_);
  auto data = backend_->get(cid);
  if (!data || data->empty()) return;
  (*data)[offset % data->size()] ^= 0x01;
  backend_->put(cid, *data);
}

void BlockStore::append_log(const std::string& line) {
  std::ofstream out(log_path_, std::ios::app);
  out << line << '\n';
}

void BlockStore::load_persisted() {
  // Index every block file, then replay the journal: register still-complete
  // roots, re-apply pins, drop entries whose DAGs did not survive.
  for (const auto& cid : backend_->list()) {
    auto data = backend_->get(cid);
    if (!data) continue;
    if (sha256(*data) != cid) {
      backend_->quarantine(cid);
      continue;
    }
    blocks_[cid] = BlockMeta{data->size(), 0, 0, ++lru_seq_};
    physical_ += data->size();
  }
  std::vector<ContentId> roots, pins;
  {
    std::ifstream in(log_path_);
    std::string line;
    std::set<ContentId> root_set, pin_set;
    while (std::getline(in, line)) {
      if (line.size() < 3) continue;
      auto cid = ContentId::parse_hex(line.substr(2));
      if (!cid) continue;
      switch (line[0]) {
        case 'R': root_set.insert(*cid); break;
        case 'E': root_set.erase(*cid); pin_set.erase(*cid); break;
        case 'P': pin_set.insert(*cid); break;
        case 'U': pin_set.erase(*cid); break;
        default: break;
      }
    }
    roots.assign(root_set.begin(), root_set.end());
    pins.assign(pin_set.begin(), pin_set.end());
  }
  for (const auto& root : roots) {
    try {
      register_root(root);
    } catch (const std::exception&) {
      // incomplete after crash; the blocks stay as evictable loose data
    }
  }
  for (const auto& pin_cid : pins) {
    std::unique_lock lk(mu_);
    if (auto it = roots_.find(pin_cid); it != roots_.end()) it->second.pinned = true;
  }
  std::unique_lock lk(mu_);
  compact_logs_locked();
}

void BlockStore::compact_logs_locked() {
  if (log_path_.empty()) return;
  std::ofstream out(log_path_ + ".tmp", std::ios::trunc);
  for (const auto& [root, meta] : roots_) {
    out << "R " << root.hex() << '\n';
    if (meta.pinned) out << "P " << root.hex() << '\n';
  }
  out.close();
  fs::rename(log_path_ + ".tmp", log_path_);
}

}  // namespace edgepier::cas
