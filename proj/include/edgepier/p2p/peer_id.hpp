// Copyright (c) 2026 EdgePier Contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <compare>
#include <cstdint>
#include <string>

#include "edgepier/cas/content_id.hpp"

namespace edgepier::p2p {

// 32-byte identity derived from the node's public listen address, so it is
// stable across restarts and uniform for XOR-metric purposes.
struct PeerId {
  std::array<std::uint8_t, 32> bytes{};

  auto operator<=>(const PeerId&) const = default;

  static PeerId from_address(const std::string& listen_address);
  static PeerId from_raw(const std::array<std::uint8_t, 32>& raw) { return PeerId{raw}; }

  std::string short_hex(std::size_t n = 8) const;

  // big-endian XOR distance comparison: is |a ^ target| < |b ^ target|?
  static bool closer(const PeerId& a, const PeerId& b, const std::array<std::uint8_t, 32>& target);
  // index of the highest differing bit (255..0), -1 when equal
  static int bucket_index(const PeerId& a, const PeerId& b);
};

}  // namespace edgepier::p2p
