// Copyright (c) 2026 EdgePier Contributors
// SPDX-License-Identifier: Apache-2.0

#include "edgepier/repl/pinset.hpp"

#include <algorithm>

#include "edgepier/cas/sha256.hpp"

namespace edgepier::repl {

PinEntry PinsetState::add_pin(const cas::ContentId& digest, std::uint32_t factor,
                              const p2p::PeerId& writer) {
  auto it = entries_.find(digest);
  if (it != entries_.end()) return it->second;  // grow-only: first write sticks locally
  PinEntry entry{digest, factor, ++clock_, writer};
  entries_[digest] = entry;
  return entry;
}

TagRecord PinsetState::set_tag(const std::string& name, const std::string& tag,
                               const cas::ContentId& digest, const p2p::PeerId& writer) {
  TagRecord rec{digest, ++clock_, writer};
  auto key = TagKey{name, tag};
  auto it = tags_.find(key);
  if (it == tags_.end() || lww_wins(rec.lamport, rec.writer, it->second.lamport, it->second.writer))
    tags_[key] = rec;
  return tags_[key];
}

std::vector<cas::ContentId> PinsetState::merge(const p2p::PinsetSyncMsg& incoming) {
  std::vector<cas::ContentId> fresh;
  for (const auto& w : incoming.entries) {
    clock_ = std::max(clock_, w.lamport);
    PinEntry entry{w.manifest_digest, w.factor, w.lamport, w.writer};
    auto it = entries_.find(w.manifest_digest);
    if (it == entries_.end()) {
      entries_[w.manifest_digest] = entry;
      fresh.push_back(w.manifest_digest);
    } else if (lww_wins(entry.lamport, entry.writer, it->second.lamport, it->second.writer)) {
      bool factor_changed = entry.factor != it->second.factor;
      it->second = entry;
      if (factor_changed) fresh.push_back(w.manifest_digest);
    }
  }
  for (const auto& w : incoming.tags) {
    clock_ = std::max(clock_, w.lamport);
    TagRecord rec{w.manifest_digest, w.lamport, w.writer};
    auto key = TagKey{w.name, w.tag};
    auto it = tags_.find(key);
    if (it == tags_.end() ||
        lww_wins(rec.lamport, rec.writer, it->second.lamport, it->second.writer))
      tags_[key] = rec;
  }
  return fresh;
}

p2p::PinsetSyncMsg PinsetState::to_wire() const {
  p2p::PinsetSyncMsg msg;
  msg.entries.reserve(entries_.size());
  for (const auto& [digest, e] : entries_)
    msg.entries.push_back(p2p::PinEntryWire{digest, e.factor, e.lamport, e.writer});
  msg.tags.reserve(tags_.size());
  for (const auto& [key, t] : tags_)
    msg.tags.push_back(p2p::TagRecordWire{key.first, key.second, t.manifest_digest, t.lamport,
                                          t.writer});
  return msg;
}

std::vector<p2p::PeerId> place_replicas(const cas::ContentId& digest, std::uint32_t factor,
                                        const std::vector<p2p::PeerId>& membership) {
  std::vector<p2p::PeerId> members = membership;
  std::sort(members.begin(), members.end());
  members.erase(std::unique(members.begin(), members.end()), members.end());
  if (factor == kFactorAll || factor >= members.size()) return members;

  struct Scored {
    cas::ContentId score;
    p2p::PeerId peer;
  };
  std::vector<Scored> scored;
  scored.reserve(members.size());
  for (const auto& peer : members) {
    cas::Sha256 h;
    h.update(std::span<const std::uint8_t>(digest.bytes.data(), digest.bytes.size()));
    h.update(std::span<const std::uint8_t>(peer.bytes.data(), peer.bytes.size()));
    scored.push_back({h.finish(), peer});
  }
  std::sort(scored.begin(), scored.end(), [](const Scored& a, const Scored& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.peer < b.peer;
  });
  std::vector<p2p::PeerId> out;
  out.reserve(factor);
  for (std::uint32_t i = 0; i < factor; ++i) out.push_back(scored[i].peer);
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace edgepier::repl
