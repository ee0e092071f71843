// Copyright (c) 2026 EdgePier Contributors
// SPDX-License-Identifier: Apache-2.0

#include "edgepier/cas/content_id.hpp"

#include <algorithm>

namespace edgepier::cas {

namespace {

constexpr std::string_view kPrefix = "sha256:";
constexpr char kHexDigits[] = "0123456789abcdef";

int hex_value(char c) {
  if (c >= '0' && c <= '9') return c - '0';
  if (c >= 'a' && c <= 'f') return c - 'a' + 10;
  return -1;  // uppercase is rejected on purpose
}

}  // namespace

std::string ContentId::hex() const {
  std::string out;
  out.reserve(64);
  for (auto b : bytes) {
    out.push_back(kHexDigits[b >> 4]);
    out.push_back(kHexDigits[b & 0x0F]);
  }
  return out;
}

std::string ContentId::to_string() const { return std::string(kPrefix) + hex(); }

std::string ContentId::short_hex(std::size_t n) const {
  auto h = hex();
  return h.substr(0, std::min(n, h.size()));
}

std::optional<ContentId> ContentId::parse(std::string_view canonical) {
  if (canonical.size() != kPrefix.size() + 64) return std::nullopt;
  if (canonical.substr(0, kPrefix.size()) != kPrefix) return std::nullopt;
  return parse_hex(canonical.substr(kPrefix.size()));
}

std::optional<ContentId> ContentId::parse_hex(std::string_view hex) {
  if (hex.size() != 64) return std::nullopt;
  ContentId id;
  for (std::size_t i = 0; i < 32; ++i) {
    int hi = hex_value(hex[2 * i]);
    int lo = hex_value(hex[2 * i + 1]);
    if (hi < 0 || lo < 0) return std::nullopt;
    id.bytes[i] = static_cast<std::uint8_t>((hi << 4) | lo);
  }
  return id;
}

ContentId ContentId::from_raw(std::span<const std::uint8_t, 32> raw) {
  ContentId id;
  std::copy(raw.begin(), raw.end(), id.bytes.begin());
  return id;
}

}  // namespace edgepier::cas
