// Copyright (c) 2026 EdgePier Contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "edgepier/cas/content_id.hpp"
#include "edgepier/cas/dag.hpp"

namespace edgepier::cas {

class CapacityError : public std::runtime_error {
 public:
  explicit CapacityError(const std::string& what) : std::runtime_error(what) {}
};

class IntegrityError : public std::runtime_error {
 public:
  IntegrityError(const ContentId& cid, const std::string& what)
      : std::runtime_error(what), cid(cid) {}
  ContentId cid;
};

class NotFoundError : public std::runtime_error {
 public:
  explicit NotFoundError(const std::string& what) : std::runtime_error(what) {}
};

class DigestMismatchError : public std::runtime_error {
 public:
  DigestMismatchError(const ContentId& expected, const ContentId& actual)
      : std::runtime_error("digest mismatch: expected " + expected.to_string() + ", got " +
                           actual.to_string()),
        expected(expected),
        actual(actual) {}
  ContentId expected;
  ContentId actual;
};

class MissingChildError : public std::runtime_error {
 public:
  explicit MissingChildError(std::vector<ContentId> missing)
      : std::runtime_error("dag incomplete: " + std::to_string(missing.size()) +
                           " blocks missing"),
        missing(std::move(missing)) {}
  std::vector<ContentId> missing;
};

struct StoreStats {
  std::uint64_t unique_blocks = 0;
  std::uint64_t physical_bytes = 0;  // every stored byte, leaf data and node blocks
  std::uint64_t logical_bytes = 0;   // sum over registered files of size + node
                                     // overhead, plus unreferenced loose blocks
};

struct StoreOptions {
  std::size_t chunk_size = kDefaultChunkSize;
  std::uint64_t capacity_bytes = UINT64_MAX;
  std::size_t max_links_per_node = kMaxLinksPerNode;  // >= 3
  std::string dir;  // empty: volatile in-memory backend
};

struct ChunkResult {
  ContentId root_cid;
  ContentId file_digest;
  std::uint64_t total_size = 0;
  std::size_t leaf_count = 0;
};

// Raw keyed blob storage behind the store. Implementations: memory, filesystem
// (one file per block, two-level fan-out by leading hex chars).
class StorageBackend {
 public:
  virtual ~StorageBackend() = default;
  virtual void put(const ContentId& cid, std::span<const std::uint8_t> data) = 0;
  virtual std::optional<std::vector<std::uint8_t>> get(const ContentId& cid) const = 0;
  virtual void remove(const ContentId& cid) = 0;
  virtual void quarantine(const ContentId& cid) = 0;
  virtual std::vector<ContentId> list() const = 0;
};

// Content-addressed block store with Merkle-DAG files, pinning, refcounted
// LRU eviction of unpinned DAGs and verify-on-read.
//
// Thread safety: all operations are safe for concurrent callers; blocks are
// immutable once written, so readers never observe partial data.
class BlockStore {
 public:
  explicit BlockStore(StoreOptions opts = {});
  ~BlockStore();

  const StoreOptions& options() const { return opts_; }

  // --- blocks ---------------------------------------------------------
  ContentId put_block(std::span<const std::uint8_t> data);
  // nullopt if absent. Throws IntegrityError (and quarantines) if the stored
  // bytes fail re-hash.
  std::optional<std::vector<std::uint8_t>> get_block(const ContentId& cid);
  bool has_block(const ContentId& cid) const;

  // --- files / DAGs ---------------------------------------------------
  // Splits data into chunk_size leaves, stores them plus interior nodes and
  // the root, registers the file. If expect_digest is given and the content
  // hashes differently, everything staged is rolled back and
  // DigestMismatchError is thrown.
  ChunkResult chunk_blob(std::span<const std::uint8_t> data,
                         std::optional<ContentId> expect_digest = std::nullopt);

  std::optional<DagNode> get_node(const ContentId& node_cid);
  std::optional<ContentId> root_for_digest(const ContentId& file_digest) const;
  // true iff the file digest maps to a registered (complete) DAG.
  bool file_complete(const ContentId& file_digest) const;
  std::optional<std::uint64_t> file_size(const ContentId& file_digest) const;

  // Absent descendants of root_cid in file byte order (root itself first if
  // absent). Interior nodes that are absent mask their subtrees.
  std::vector<ContentId> missing_blocks(const ContentId& root_cid);

  // Streams the file in order to sink, verifying length and whole-file digest.
  void assemble_blob(const ContentId& root_cid,
                     const std::function<void(std::span<const std::uint8_t>)>& sink);
  std::vector<std::uint8_t> assemble_bytes(const ContentId& root_cid);

  // Marks a fully present DAG as a stored file (refcounts its blocks, indexes
  // file_digest -> root). chunk_blob registers automatically; block fetchers
  // call this once the last block landed. Throws MissingChildError if
  // incomplete.
  void register_root(const ContentId& root_cid);

  // --- pinning & eviction ---------------------------------------------
  void pin(const ContentId& root_cid);
  void unpin(const ContentId& root_cid);
  bool pinned(const ContentId& root_cid) const;

  // Temporary per-cid holds protecting in-flight data from eviction.
  void hold(const ContentId& cid);
  void release(const ContentId& cid);
  // Removes a block that no registered root references (rollback path).
  void drop_loose(const ContentId& cid);

  // --- queries ----------------------------------------------------------
  StoreStats stats() const;
  std::vector<ContentId> block_cids() const;
  // file digests of all registered (complete) files
  std::vector<ContentId> complete_files() const;
  std::vector<ContentId> pinned_roots() const;

  // Serves a want: raw block if present, else the root node block when the
  // cid is a known file digest.
  std::optional<std::vector<std::uint8_t>> lookup_for_want(const ContentId& cid);

  // Test fault injection: XORs one stored byte in place, bypassing hashing.
  void corrupt_block_for_test(const ContentId& cid, std::size_t offset);

 private:
  struct BlockMeta {
    std::uint64_t size = 0;
    std::uint32_t refs = 0;   // registered roots referencing this block
    std::uint32_t holds = 0;  // live session holds
    std::uint64_t touched = 0;
  };
  struct RootMeta {
    ContentId file_digest;
    std::uint64_t total_size = 0;
    std::uint64_t node_bytes = 0;  // serialized node blocks of this DAG
    bool pinned = false;
    std::uint64_t lru = 0;
  };

  ContentId put_block_locked(std::span<const std::uint8_t> data,
                             std::unique_lock<std::mutex>& lk);
  void ensure_space_locked(std::uint64_t needed, std::unique_lock<std::mutex>& lk);
  bool evict_one_locked();
  void collect_dag_locked(const ContentId& root_cid, std::vector<ContentId>& blocks,
                          std::vector<ContentId>& missing);
  bool link_is_interior(const DagLink& link) const {
    return link.subtree_size > opts_.chunk_size;
  }
  void append_log(const std::string& line);
  void load_persisted();
  void compact_logs_locked();
  std::uint64_t logical_locked() const;

  StoreOptions opts_;
  std::unique_ptr<StorageBackend> backend_;
  mutable std::mutex mu_;
  std::map<ContentId, BlockMeta> blocks_;
  std::map<ContentId, RootMeta> roots_;         // root_cid -> meta
  std::map<ContentId, ContentId> digest_index_; // file_digest -> root_cid
  std::uint64_t physical_ = 0;
  std::uint64_t lru_seq_ = 0;
  std::string log_path_;  // pins + roots journal (filesystem backend only)
};

}  // namespace edgepier::cas
