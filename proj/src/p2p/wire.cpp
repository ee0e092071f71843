// Copyright (c) 2026 EdgePier Contributors
// SPDX-License-Identifier: Apache-2.0

#include "edgepier/p2p/wire.hpp"

#include <cstring>

namespace edgepier::p2p {

namespace {

class Writer {
 public:
  void u8(std::uint8_t v) { buf_.push_back(v); }
  void u16(std::uint16_t v) {
    buf_.push_back(static_cast<std::uint8_t>(v >> 8));
    buf_.push_back(static_cast<std::uint8_t>(v));
  }
  void u32(std::uint32_t v) {
    for (int s = 24; s >= 0; s -= 8) buf_.push_back(static_cast<std::uint8_t>(v >> s));
  }
  void u64(std::uint64_t v) {
    for (int s = 56; s >= 0; s -= 8) buf_.push_back(static_cast<std::uint8_t>(v >> s));
  }
  void raw32(const std::array<std::uint8_t, 32>& a) {
    buf_.insert(buf_.end(), a.begin(), a.end());
  }
  void str16(const std::string& s) {
    if (s.size() > 0xFFFF) throw ProtocolError("string too long for u16 length");
    u16(static_cast<std::uint16_t>(s.size()));
    buf_.insert(buf_.end(), s.begin(), s.end());
  }
  void bytes(const std::vector<std::uint8_t>& b) { buf_.insert(buf_.end(), b.begin(), b.end()); }
  std::vector<std::uint8_t> take() { return std::move(buf_); }

 private:
  std::vector<std::uint8_t> buf_;
};

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> data) : data_(data) {}

  bool done() const { return pos_ == data_.size(); }
  std::size_t remaining() const { return data_.size() - pos_; }

  std::uint8_t u8() { return take(1)[0]; }
  std::uint16_t u16() {
    auto p = take(2);
    return static_cast<std::uint16_t>((p[0] << 8) | p[1]);
  }
  std::uint32_t u32() {
    auto p = take(4);
    return (std::uint32_t(p[0]) << 24) | (std::uint32_t(p[1]) << 16) |
           (std::uint32_t(p[2]) << 8) | std::uint32_t(p[3]);
  }
  std::uint64_t u64() {
    auto p = take(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v = (v << 8) | p[i];
    return v;
  }
  std::array<std::uint8_t, 32> raw32() {
    auto p = take(32);
    std::array<std::uint8_t, 32> a;
    std::memcpy(a.data(), p.data(), 32);
    return a;
  }
  std::string str16() {
    auto len = u16();
    auto p = take(len);
    return std::string(reinterpret_cast<const char*>(p.data()), p.size());
  }
  std::vector<std::uint8_t> bytes(std::size_t n) {
    auto p = take(n);
    return std::vector<std::uint8_t>(p.begin(), p.end());
  }

 private:
  std::span<const std::uint8_t> take(std::size_t n) {
    if (pos_ + n > data_.size()) throw ProtocolError("truncated frame payload");
    auto out = data_.subspan(pos_, n);
    pos_ += n;
    return out;
  }
  std::span<const std::uint8_t> data_;
  std::size_t pos_ = 0;
};

void write_provider_entries(Writer& w, const std::vector<ProviderEntry>& entries) {
  if (entries.size() > 0xFFFF) throw ProtocolError("too many provider entries");
  w.u16(static_cast<std::uint16_t>(entries.size()));
  for (const auto& e : entries) {
    w.raw32(e.cid.bytes);
    w.str16(e.address);
    w.u32(e.ttl_seconds);
  }
}

std::vector<ProviderEntry> read_provider_entries(Reader& r) {
  auto count = r.u16();
  std::vector<ProviderEntry> out;
  out.reserve(count);
  for (std::uint16_t i = 0; i < count; ++i) {
    ProviderEntry e;
    e.cid.bytes = r.raw32();
    e.address = r.str16();
    e.ttl_seconds = r.u32();
    out.push_back(std::move(e));
  }
  return out;
}

}  // namespace

std::vector<std::uint8_t> encode_frame(const Message& msg) {
  Writer w;
  MsgType type{};
  std::visit(
      [&](const auto& m) {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, HelloMsg>) {
          type = MsgType::hello;
          w.raw32(m.peer.bytes);
          w.str16(m.address);
        } else if constexpr (std::is_same_v<T, WantMsg>) {
          type = MsgType::want;
          if (m.cids.size() > 0xFFFF) throw ProtocolError("want list too long");
          w.u16(static_cast<std::uint16_t>(m.cids.size()));
          for (const auto& cid : m.cids) w.raw32(cid.bytes);
        } else if constexpr (std::is_same_v<T, BlockMsg>) {
          type = MsgType::block;
          w.raw32(m.cid.bytes);
          w.u32(static_cast<std::uint32_t>(m.data.size()));
          w.bytes(m.data);
        } else if constexpr (std::is_same_v<T, DontHaveMsg>) {
          type = MsgType::dont_have;
          w.raw32(m.cid.bytes);
        } else if constexpr (std::is_same_v<T, ProvideMsg>) {
          type = MsgType::provide;
          write_provider_entries(w, m.entries);
        } else if constexpr (std::is_same_v<T, FindProvidersMsg>) {
          type = MsgType::find_providers;
          w.raw32(m.cid.bytes);
        } else if constexpr (std::is_same_v<T, ProvidersMsg>) {
          type = MsgType::providers;
          write_provider_entries(w, m.entries);
        } else if constexpr (std::is_same_v<T, PinsetSyncMsg>) {
          type = MsgType::pinset_sync;
          w.u32(static_cast<std::uint32_t>(m.entries.size()));
          for (const auto& e : m.entries) {
            w.raw32(e.manifest_digest.bytes);
            w.u32(e.factor);
            w.u64(e.lamport);
            w.raw32(e.writer.bytes);
          }
          for (const auto& t : m.tags) {
            w.str16(t.name);
            w.str16(t.tag);
            w.raw32(t.manifest_digest.bytes);
            w.u64(t.lamport);
            w.raw32(t.writer.bytes);
          }
        }
      },
      msg);

  auto payload = w.take();
  if (payload.size() > kMaxFramePayload) throw ProtocolError("frame payload exceeds 2 MiB");
  std::vector<std::uint8_t> frame;
  frame.reserve(5 + payload.size());
  auto len = static_cast<std::uint32_t>(payload.size());
  for (int s = 24; s >= 0; s -= 8) frame.push_back(static_cast<std::uint8_t>(len >> s));
  frame.push_back(static_cast<std::uint8_t>(type));
  frame.insert(frame.end(), payload.begin(), payload.end());
  return frame;
}

std::optional<Message> read_frame(net::Channel& ch, std::optional<net::Duration> timeout) {
  std::uint8_t header[5];
  if (!ch.read_exact({header, 5}, timeout)) return std::nullopt;
  std::uint32_t len = (std::uint32_t(header[0]) << 24) | (std::uint32_t(header[1]) << 16) |
                      (std::uint32_t(header[2]) << 8) | std::uint32_t(header[3]);
  if (len > kMaxFramePayload) throw ProtocolError("frame payload exceeds 2 MiB");
  std::vector<std::uint8_t> payload(len);
  if (len > 0 && !ch.read_exact(payload, timeout)) throw net::ChannelClosed("eof mid-frame");

  Reader r(payload);
  switch (header[4]) {
    case static_cast<std::uint8_t>(MsgType::hello): {
      HelloMsg m;
      m.peer.bytes = r.raw32();
      m.address = r.str16();
      return Message{std::move(m)};
    }
    case static_cast<std::uint8_t>(MsgType::want): {
      WantMsg m;
      auto count = r.u16();
      m.cids.reserve(count);
      for (std::uint16_t i = 0; i < count; ++i) m.cids.push_back(cas::ContentId{r.raw32()});
      return Message{std::move(m)};
    }
    case static_cast<std::uint8_t>(MsgType::block): {
      BlockMsg m;
      m.cid.bytes = r.raw32();
      auto n = r.u32();
      m.data = r.bytes(n);
      return Message{std::move(m)};
    }
    case static_cast<std::uint8_t>(MsgType::dont_have): {
      DontHaveMsg m;
      m.cid.bytes = r.raw32();
      return Message{std::move(m)};
    }
    case static_cast<std::uint8_t>(MsgType::provide): {
      ProvideMsg m;
      m.entries = read_provider_entries(r);
      return Message{std::move(m)};
    }
    case static_cast<std::uint8_t>(MsgType::find_providers): {
      FindProvidersMsg m;
      m.cid.bytes = r.raw32();
      return Message{std::move(m)};
    }
    case static_cast<std::uint8_t>(MsgType::providers): {
      ProvidersMsg m;
      m.entries = read_provider_entries(r);
      return Message{std::move(m)};
    }
    case static_cast<std::uint8_t>(MsgType::pinset_sync): {
      PinsetSyncMsg m;
      auto count = r.u32();
      m.entries.reserve(count);
      for (std::uint32_t i = 0; i < count; ++i) {
        PinEntryWire e;
        e.manifest_digest.bytes = r.raw32();
        e.factor = r.u32();
        e.lamport = r.u64();
        e.writer.bytes = r.raw32();
        m.entries.push_back(e);
      }
      while (!r.done()) {
        TagRecordWire t;
        t.name = r.str16();
        t.tag = r.str16();
        t.manifest_digest.bytes = r.raw32();
        t.lamport = r.u64();
        t.writer.bytes = r.raw32();
        m.tags.push_back(std::move(t));
      }
      return Message{std::move(m)};
    }
    default:
      throw ProtocolError("unknown message type " + std::to_string(header[4]));
  }
}

}  // namespace edgepier::p2p
