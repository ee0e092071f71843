// Copyright (c) 2026 EdgePier Contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "edgepier/cas/content_id.hpp"
#include "edgepier/p2p/peer_id.hpp"
#include "edgepier/p2p/wire.hpp"

namespace edgepier::repl {

using p2p::kFactorAll;

struct PinEntry {
  cas::ContentId manifest_digest;
  std::uint32_t factor = kFactorAll;
  std::uint64_t lamport = 0;
  p2p::PeerId writer;

  bool operator==(const PinEntry&) const = default;
};

struct TagRecord {
  cas::ContentId manifest_digest;
  std::uint64_t lamport = 0;
  p2p::PeerId writer;

  bool operator==(const TagRecord&) const = default;
};

// higher lamport wins, ties go to the higher writer id
inline bool lww_wins(std::uint64_t lamport_a, const p2p::PeerId& writer_a, std::uint64_t lamport_b,
                     const p2p::PeerId& writer_b) {
  if (lamport_a != lamport_b) return lamport_a > lamport_b;
  return writer_a.bytes > writer_b.bytes;
}

// Grow-only pin set plus LWW tag table. merge() is commutative, associative
// and idempotent, so anti-entropy converges regardless of exchange order.
class PinsetState {
 public:
  using TagKey = std::pair<std::string, std::string>;  // (name, tag)

  // local writes; lamport clock advances past everything seen
  PinEntry add_pin(const cas::ContentId& digest, std::uint32_t factor, const p2p::PeerId& writer);
  TagRecord set_tag(const std::string& name, const std::string& tag,
                    const cas::ContentId& digest, const p2p::PeerId& writer);

  // returns digests newly added or changed by the merge
  std::vector<cas::ContentId> merge(const p2p::PinsetSyncMsg& incoming);

  p2p::PinsetSyncMsg to_wire() const;

  const std::map<cas::ContentId, PinEntry>& entries() const { return entries_; }
  const std::map<TagKey, TagRecord>& tags() const { return tags_; }
  std::uint64_t clock() const { return clock_; }

  bool operator==(const PinsetState&) const = default;

 private:
  std::map<cas::ContentId, PinEntry> entries_;
  std::map<TagKey, TagRecord> tags_;
  std::uint64_t clock_ = 0;
};

// Deterministic rendezvous placement: the factor highest scores of
// SHA-256(digest || peer id) win. factor above the membership clamps.
std::vector<p2p::PeerId> place_replicas(const cas::ContentId& digest, std::uint32_t factor,
                                        const std::vector<p2p::PeerId>& membership);

}  // namespace edgepier::repl
