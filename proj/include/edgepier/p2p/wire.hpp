// Copyright (c) 2026 EdgePier Contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "edgepier/cas/content_id.hpp"
#include "edgepier/net/fabric.hpp"
#include "edgepier/p2p/peer_id.hpp"

namespace edgepier::p2p {

// Exchange wire protocol over reliable ordered byte streams.
// Frame: u32 BE payload length | u8 message type | payload. Payloads above
// 2 MiB are a protocol violation and close the connection.

constexpr std::size_t kMaxFramePayload = 2 * 1024 * 1024;

enum class MsgType : std::uint8_t {
  hello = 0x01,
  want = 0x02,
  block = 0x03,
  dont_have = 0x04,
  provide = 0x05,
  find_providers = 0x06,
  providers = 0x07,
  pinset_sync = 0x08,
};

struct HelloMsg {
  PeerId peer;
  std::string address;
};

struct WantMsg {
  std::vector<cas::ContentId> cids;
};

struct BlockMsg {
  cas::ContentId cid;
  std::vector<std::uint8_t> data;
};

struct DontHaveMsg {
  cas::ContentId cid;
};

struct ProviderEntry {
  cas::ContentId cid;
  std::string address;
  std::uint32_t ttl_seconds = 0;
};

struct ProvideMsg {
  std::vector<ProviderEntry> entries;
};

struct FindProvidersMsg {
  cas::ContentId cid;
};

struct ProvidersMsg {
  std::vector<ProviderEntry> entries;
};

// Replicated cluster state exchanged by anti-entropy; defined here because it
// shares the frame format (type 0x08). Tag records run to the end of the
// payload, the frame length delimits them.
struct PinEntryWire {
  cas::ContentId manifest_digest;
  std::uint32_t factor = 0;  // 0xFFFFFFFF = ALL
  std::uint64_t lamport = 0;
  PeerId writer;
};

struct TagRecordWire {
  std::string name;
  std::string tag;
  cas::ContentId manifest_digest;
  std::uint64_t lamport = 0;
  PeerId writer;
};

struct PinsetSyncMsg {
  std::vector<PinEntryWire> entries;
  std::vector<TagRecordWire> tags;
};

constexpr std::uint32_t kFactorAll = 0xFFFFFFFF;

using Message = std::variant<HelloMsg, WantMsg, BlockMsg, DontHaveMsg, ProvideMsg,
                             FindProvidersMsg, ProvidersMsg, PinsetSyncMsg>;

class ProtocolError : public std::runtime_error {
 public:
  explicit ProtocolError(const std::string& what) : std::runtime_error(what) {}
};

std::vector<std::uint8_t> encode_frame(const Message& msg);

// Blocking frame read. nullopt on clean EOF at a frame boundary; throws
// ProtocolError on garbage or oversize frames, ChannelClosed on timeout/reset.
std::optional<Message> read_frame(net::Channel& ch,
                                  std::optional<net::Duration> timeout = std::nullopt);

}  // namespace edgepier::p2p
