// Copyright (c) 2026 EdgePier Contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <deque>
#include <memory>
#include <optional>
#include <string>
#include <variant>

#include "edgepier/net/coop.hpp"
#include "edgepier/net/fabric.hpp"
#include "edgepier/p2p/wire.hpp"

namespace edgepier::p2p {

// Outbound connection to one peer. Requests are answered strictly in order on
// the wire, so correlation is a FIFO of pending slots drained by the reader
// task. Slots abandoned by timeout stay queued until their response arrives
// and is discarded, keeping the FIFO aligned.
class PeerLink {
 public:
  // Dials, performs the HELLO exchange and starts the reader task, which
  // co-owns the link; throws ConnectError on failure.
  static std::shared_ptr<PeerLink> dial(net::NetHost& host, std::string address,
                                        const HelloMsg& self_hello);

  PeerLink(net::NetHost& host, std::string address);
  ~PeerLink();

  const std::string& address() const { return address_; }
  const PeerId& peer_id() const { return peer_id_; }
  const std::string& peer_listen_address() const { return peer_listen_address_; }
  bool alive() const { return alive_; }

  struct BlockResult {
    bool have = false;
    cas::ContentId cid;               // as sent by the peer (may differ from the want)
    std::vector<std::uint8_t> data;
  };
  // nullopt on timeout; throws ChannelClosed if the link died.
  std::optional<BlockResult> request_block(const cas::ContentId& cid, net::Duration timeout);
  std::optional<std::vector<ProviderEntry>> request_providers(const cas::ContentId& cid,
                                                              net::Duration timeout);
  std::optional<PinsetSyncMsg> request_sync(const PinsetSyncMsg& state, net::Duration timeout);
  void send_provide(const std::vector<ProviderEntry>& entries);  // fire and forget

  void shutdown();

 private:
  enum class Kind { block, providers, sync };
  struct Pending {
    Kind kind;
    bool abandoned = false;
    bool done = false;
    std::optional<BlockResult> block;
    std::optional<std::vector<ProviderEntry>> providers;
    std::optional<PinsetSyncMsg> sync;
  };

  void reader_loop();
  void fail_all_pending();
  std::shared_ptr<Pending> enqueue_and_send(Kind kind, const Message& msg);
  template <typename T>
  std::optional<T> await(const std::shared_ptr<Pending>& slot, net::Duration timeout,
                         std::optional<T> Pending::*field);

  net::NetHost& host_;
  std::string address_;
  PeerId peer_id_;
  std::string peer_listen_address_;
  std::unique_ptr<net::Channel> channel_;
  net::CoopMutex write_mu_;
  std::unique_ptr<net::Cond> response_cond_;
  std::deque<std::shared_ptr<Pending>> pending_;
  bool alive_ = false;
  bool reader_done_ = false;
};

}  // namespace edgepier::p2p
