// Copyright (c) 2026 EdgePier Contributors
// SPDX-License-Identifier: Apache-2.0

#include "edgepier/net/fabric.hpp"

namespace edgepier::net {

bool Channel::read_exact(std::span<std::uint8_t> out, std::optional<Duration> timeout) {
  std::size_t got = 0;
  while (got < out.size()) {
    auto n = read_some(out.subspan(got), timeout);
    if (!n) throw ChannelClosed("read timeout");
    if (*n == 0) {
      if (got == 0) return false;
      throw ChannelClosed("eof mid-message");
    }
    got += *n;
  }
  return true;
}

}  // namespace edgepier::net
