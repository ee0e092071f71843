// Copyright (c) 2026 EdgePier Contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "edgepier/cas/content_id.hpp"

namespace edgepier::cas {

// Streaming SHA-256 (OpenSSL EVP underneath).
class Sha256 {
 public:
  Sha256();
  ~Sha256();
  Sha256(const Sha256&) = delete;
  Sha256& operator=(const Sha256&) = delete;

  void update(std::span<const std::uint8_t> data);
  void update(std::string_view data);
  // Finalizes; the hasher must not be reused afterwards.
  ContentId finish();

 private:
  void* ctx_;
};

ContentId sha256(std::span<const std::uint8_t> data);
ContentId sha256(std::string_view data);

}  // namespace edgepier::cas
