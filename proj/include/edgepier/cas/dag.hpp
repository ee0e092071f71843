// Copyright (c) 2026 EdgePier Contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "edgepier/cas/content_id.hpp"

namespace edgepier::cas {

// Merkle node. Leaves are stored as raw data blocks; serialized DagNodes only
// occur for interior nodes (including roots, which may have zero links for an
// empty file). A node is a root iff file_digest is nonzero.
struct DagLink {
  ContentId cid;
  std::uint64_t subtree_size = 0;

  bool operator==(const DagLink&) const = default;
};

struct DagNode {
  enum class Kind : std::uint8_t { leaf = 0x00, interior = 0x01 };

  Kind kind = Kind::interior;
  std::vector<DagLink> links;        // ordered by file byte offset; empty for leaves
  std::uint64_t total_size = 0;      // bytes of the reassembled file/subtree
  ContentId file_digest{};           // digest of the whole file; zeroed unless root

  bool is_root() const { return !file_digest.is_zero(); }
  std::uint64_t links_size_sum() const;

  // Deterministic binary layout:
  //   magic 0xD1 | u8 kind | u64 BE total_size | 32B file_digest
  //   | u32 BE link count | per link: 32B digest + u64 BE subtree size
  std::vector<std::uint8_t> serialize() const;
  static std::optional<DagNode> deserialize(std::span<const std::uint8_t> bytes);
};

constexpr std::uint8_t kDagNodeMagic = 0xD1;
constexpr std::size_t kMaxSerializedNode = 1 << 20;  // 1 MiB cap on node blocks
constexpr std::size_t kDefaultChunkSize = 262144;    // 256 KiB
constexpr std::size_t kMinChunkSize = 4096;
constexpr std::size_t kMaxLinksPerNode = 131072;     // beyond this, add a level

}  // namespace edgepier::cas
