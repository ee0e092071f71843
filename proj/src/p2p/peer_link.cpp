// Copyright (c) 2026 EdgePier Contributors
// SPDX-License-Identifier: Apache-2.0

#include "edgepier/p2p/peer_link.hpp"

namespace edgepier::p2p {

PeerLink::PeerLink(net::NetHost& host, std::string address)
    : host_(host), address_(std::move(address)), write_mu_(host), response_cond_(host.make_cond()) {}

std::shared_ptr<PeerLink> PeerLink::dial(net::NetHost& host, std::string address,
                                         const HelloMsg& self_hello) {
  auto link = std::make_shared<PeerLink>(host, std::move(address));
  link->channel_ = host.connect(link->address_);
  auto hello = encode_frame(Message{self_hello});
  link->channel_->write(hello);
  auto reply = read_frame(*link->channel_, net::secs(10));
  if (!reply || !std::holds_alternative<HelloMsg>(*reply))
    throw net::ConnectError("peer did not HELLO: " + link->address_);
  const auto& h = std::get<HelloMsg>(*reply);
  link->peer_id_ = h.peer;
  link->peer_listen_address_ = h.address;
  link->alive_ = true;
  // the reader task co-owns the link until the channel dies
  host.spawn("link-reader:" + link->address_, [link] { link->reader_loop(); });
  return link;
}

PeerLink::~PeerLink() { shutdown(); }

void PeerLink::shutdown() {
  if (!alive_ && reader_done_) return;
  alive_ = false;
  if (channel_) {
    try {
      channel_->close();
    } catch (...) {
    }
  }
  fail_all_pending();
}

void PeerLink::fail_all_pending() {
  for (auto& slot : pending_) slot->done = true;
  pending_.clear();
  response_cond_->notify_all();
}

void PeerLink::reader_loop() {
  try {
    for (;;) {
      auto msg = read_frame(*channel_);
      if (!msg) break;  // EOF
      std::shared_ptr<Pending> slot;
      if (!pending_.empty()) {
        slot = pending_.front();
      }
      if (std::holds_alternative<BlockMsg>(*msg) || std::holds_alternative<DontHaveMsg>(*msg)) {
        if (!slot || slot->kind != Kind::block) throw ProtocolError("unexpected block response");
        pending_.pop_front();
        BlockResult res;
        if (auto* b = std::get_if<BlockMsg>(&*msg)) {
          res.have = true;
          res.cid = b->cid;
          res.data = std::move(b->data);
        } else {
          res.have = false;
          res.cid = std::get<DontHaveMsg>(*msg).cid;
        }
        slot->block = std::move(res);
        slot->done = true;
        response_cond_->notify_all();
      } else if (std::holds_alternative<ProvidersMsg>(*msg)) {
        if (!slot || slot->kind != Kind::providers)
          throw ProtocolError("unexpected providers response");
        pending_.pop_front();
        slot->providers = std::move(std::get<ProvidersMsg>(*msg).entries);
        slot->done = true;
        response_cond_->notify_all();
      } else if (std::holds_alternative<PinsetSyncMsg>(*msg)) {
        if (!slot || slot->kind != Kind::sync) throw ProtocolError("unexpected sync response");
        pending_.pop_front();
        slot->sync = std::move(std::get<PinsetSyncMsg>(*msg));
        slot->done = true;
        response_cond_->notify_all();
      } else {
        throw ProtocolError("unexpected message on client link");
      }
    }
  } catch (const net::TaskCanceled&) {
  } catch (const std::exception&) {
    // reset, protocol error or timeout: the link is dead either way
  }
  alive_ = false;
  reader_done_ = true;
  fail_all_pending();
}

std::shared_ptr<PeerLink::Pending> PeerLink::enqueue_and_send(Kind kind, const Message& msg) {
  if (!alive_) throw net::ChannelClosed("link down: " + address_);
  auto slot = std::make_shared<Pending>();
  slot->kind = kind;
  auto frame = encode_frame(msg);
  net::CoopLock lk(write_mu_);
  if (!alive_) throw net::ChannelClosed("link down: " + address_);
  pending_.push_back(slot);
  try {
    channel_->write(frame);
  } catch (...) {
    alive_ = false;
    fail_all_pending();
    throw net::ChannelClosed("link write failed: " + address_);
  }
  return slot;
}

template <typename T>
std::optional<T> PeerLink::await(const std::shared_ptr<Pending>& slot, net::Duration timeout,
                                 std::optional<T> Pending::*field) {
  auto deadline = host_.now() + timeout;
  while (!slot->done) {
    auto now = host_.now();
    if (now >= deadline) {
      slot->abandoned = true;  // reader will discard the late response
      return std::nullopt;
    }
    response_cond_->wait(deadline - now);
  }
  if (!alive_ && !((*slot).*field)) throw net::ChannelClosed("link died: " + address_);
  return std::move((*slot).*field);
}

std::optional<PeerLink::BlockResult> PeerLink::request_block(const cas::ContentId& cid,
                                                             net::Duration timeout) {
  auto slot = enqueue_and_send(Kind::block, Message{WantMsg{{cid}}});
  return await(slot, timeout, &Pending::block);
}

std::optional<std::vector<ProviderEntry>> PeerLink::request_providers(const cas::ContentId& cid,
                                                                      net::Duration timeout) {
  auto slot = enqueue_and_send(Kind::providers, Message{FindProvidersMsg{cid}});
  return await(slot, timeout, &Pending::providers);
}

std::optional<PinsetSyncMsg> PeerLink::request_sync(const PinsetSyncMsg& state,
                                                    net::Duration timeout) {
  auto slot = enqueue_and_send(Kind::sync, Message{state});
  return await(slot, timeout, &Pending::sync);
}

void PeerLink::send_provide(const std::vector<ProviderEntry>& entries) {
  if (entries.empty()) return;
  auto frame = encode_frame(Message{ProvideMsg{entries}});
  net::CoopLock lk(write_mu_);
  if (!alive_) throw net::ChannelClosed("link down: " + address_);
  try {
    channel_->write(frame);
  } catch (...) {
    alive_ = false;
    fail_all_pending();
    throw net::ChannelClosed("link write failed: " + address_);
  }
}

}  // namespace edgepier::p2p
