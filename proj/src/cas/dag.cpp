// Copyright (c) 2026 EdgePier Contributors
// SPDX-License-Identifier: Apache-2.0

#include "edgepier/cas/dag.hpp"

namespace edgepier::cas {

namespace {

void put_u32_be(std::vector<std::uint8_t>& out, std::uint32_t v) {
  out.push_back(static_cast<std::uint8_t>(v >> 24));
  out.push_back(static_cast<std::uint8_t>(v >> 16));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
  out.push_back(static_cast<std::uint8_t>(v));
}

void put_u64_be(std::vector<std::uint8_t>& out, std::uint64_t v) {
  for (int shift = 56; shift >= 0; shift -= 8)
    out.push_back(static_cast<std::uint8_t>(v >> shift));
}

std::uint32_t get_u32_be(const std::uint8_t* p) {
  return (std::uint32_t(p[0]) << 24) | (std::uint32_t(p[1]) << 16) |
         (std::uint32_t(p[2]) << 8) | std::uint32_t(p[3]);
}

std::uint64_t get_u64_be(const std::uint8_t* p) {
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v = (v << 8) | p[i];
  return v;
}

}  // namespace

std::uint64_t DagNode::links_size_sum() const {
  std::uint64_t sum = 0;
  for (const auto& l : links) sum += l.subtree_size;
  return sum;
}

std::vector<std::uint8_t> DagNode::serialize() const {
  std::vector<std::uint8_t> out;
  out.reserve(1 + 1 + 8 + 32 + 4 + links.size() * 40);
  out.push_back(kDagNodeMagic);
  out.push_back(static_cast<std::uint8_t>(kind));
  put_u64_be(out, total_size);
  out.insert(out.end(), file_digest.bytes.begin(), file_digest.bytes.end());
  put_u32_be(out, static_cast<std::uint32_t>(links.size()));
  for (const auto& l : links) {
    out.insert(out.end(), l.cid.bytes.begin(), l.cid.bytes.end());
    put_u64_be(out, l.subtree_size);
  }
  return out;
}

std::optional<DagNode> DagNode::deserialize(std::span<const std::uint8_t> bytes) {
  constexpr std::size_t header = 1 + 1 + 8 + 32 + 4;
  if (bytes.size() < header) return std::nullopt;
  if (bytes[0] != kDagNodeMagic) return std::nullopt;
  DagNode node;
  switch (bytes[1]) {
    case 0x00: node.kind = Kind::leaf; break;
    case 0x01: node.kind = Kind::interior; break;
    default: return std::nullopt;
  }
  node.total_size = get_u64_be(bytes.data() + 2);
  for (std::size_t i = 0; i < 32; ++i) node.file_digest.bytes[i] = bytes[10 + i];
  std::uint32_t count = get_u32_be(bytes.data() + 42);
  if (bytes.size() != header + std::size_t(count) * 40) return std::nullopt;
  node.links.reserve(count);
  const std::uint8_t* p = bytes.data() + header;
  for (std::uint32_t i = 0; i < count; ++i, p += 40) {
    DagLink link;
    for (std::size_t b = 0; b < 32; ++b) link.cid.bytes[b] = p[b];
    link.subtree_size = get_u64_be(p + 32);
    node.links.push_back(link);
  }
  return node;
}

}  // namespace edgepier::cas
