// Copyright (c) 2026 EdgePier Contributors
// SPDX-License-Identifier: Apache-2.0

#include "edgepier/p2p/peer_id.hpp"

#include "edgepier/cas/sha256.hpp"

namespace edgepier::p2p {

PeerId PeerId::from_address(const std::string& listen_address) {
  return PeerId{cas::sha256(listen_address).bytes};
}

std::string PeerId::short_hex(std::size_t n) const {
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (std::size_t i = 0; i < bytes.size() && out.size() < n; ++i) {
    out.push_back(hex[bytes[i] >> 4]);
    if (out.size() < n) out.push_back(hex[bytes[i] & 0x0F]);
  }
  return out;
}

bool PeerId::closer(const PeerId& a, const PeerId& b,
                    const std::array<std::uint8_t, 32>& target) {
  for (std::size_t i = 0; i < 32; ++i) {
    std::uint8_t da = a.bytes[i] ^ target[i];
    std::uint8_t db = b.bytes[i] ^ target[i];
    if (da != db) return da < db;
  }
  return false;
}

int PeerId::bucket_index(const PeerId& a, const PeerId& b) {
  for (std::size_t i = 0; i < 32; ++i) {
    std::uint8_t x = a.bytes[i] ^ b.bytes[i];
    if (x != 0) {
      for (int bit = 7; bit >= 0; --bit)
        if (x & (1 << bit)) return static_cast<int>(255 - (i * 8 + (7 - bit)));
    }
  }
  return -1;
}

}  // namespace edgepier::p2p
