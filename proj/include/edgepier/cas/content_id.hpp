// Copyright (c) 2026 EdgePier Contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <compare>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>

namespace edgepier::cas {

// SHA-256 based content address. Canonical text form is "sha256:<64 lowercase
// hex chars>"; the same form doubles as a Docker layer/manifest digest.
struct ContentId {
  std::array<std::uint8_t, 32> bytes{};

  auto operator<=>(const ContentId&) const = default;

  bool is_zero() const {
    for (auto b : bytes)
      if (b != 0) return false;
    return true;
  }

  // "sha256:<hex>"
  std::string to_string() const;
  // bare 64-char hex, no algorithm prefix
  std::string hex() const;
  // short display form for logs
  std::string short_hex(std::size_t n = 8) const;

  // Strict parse of the canonical form. Rejects wrong prefix, wrong length,
  // uppercase or non-hex characters.
  static std::optional<ContentId> parse(std::string_view canonical);
  // Parse bare 64-char hex.
  static std::optional<ContentId> parse_hex(std::string_view hex);
  static ContentId from_raw(std::span<const std::uint8_t, 32> raw);
};

}  // namespace edgepier::cas
