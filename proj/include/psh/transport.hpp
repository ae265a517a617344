#pragma once

// Link: one node's handle on a peer. call() carries a request and blocks
// for the matching ACK/NACK (matched by "rid", never by arrival order);
// push() is one-way. LocalLink wires two in-process nodes together and
// still round-trips every frame through the byte codec, so the in-process
// and socket backends run the exact same transformations on the exact same
// bytes - only the pipe differs.

#include <atomic>
#include <chrono>
#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <utility>

#include "psh/channel.hpp"
#include "psh/wire.hpp"

namespace psh {

// Protocol pushes between parties travel as typed frames; slots that have
// no dedicated message type ride STORE pushes (no rid, so no reply).
inline MsgType slot_msg_type(Slot s) {
  switch (s) {
    case Slot::Eval: return MsgType::EvalFn;
    case Slot::Fx: return MsgType::ShareBack;
    case Slot::Hidden: return MsgType::HiddenFwd;
    case Slot::Grad: return MsgType::GradBack;
    default: return MsgType::Store;
  }
}

inline Frame msg_to_frame(NodeRole self, const Msg& m) {
  Frame f(slot_msg_type(m.slot));
  f.put_str("role", node_role_name(self));
  f.put_str("slot", slot_name(m.slot));
  f.put_u64("round", m.round);
  if (!m.meta.empty()) f.put_str("meta", m.meta);
  f.put_u64("tn", m.tensors.size());
  for (std::size_t i = 0; i < m.tensors.size(); ++i)
    f.put_tensor("t" + std::to_string(i), m.tensors[i]);
  return f;
}

inline std::pair<NodeRole, Msg> frame_to_msg(const Frame& f) {
  Msg m;
  m.slot = slot_from_name(f.str("slot"));
  if (slot_msg_type(m.slot) != f.type)
    throw WireError(std::string("slot ") + slot_name(m.slot) +
                    " arrived under type " + msg_type_name(f.type));
  m.round = f.u64("round");
  m.meta = f.str_or("meta", "");
  const std::uint64_t tn = f.u64("tn");
  m.tensors.reserve(tn);
  for (std::uint64_t i = 0; i < tn; ++i)
    m.tensors.push_back(f.tensor("t" + std::to_string(i)));
  return {node_role_from_name(f.str("role")), std::move(m)};
}

class Link {
 public:
  virtual ~Link() = default;
  virtual Frame call(Frame request,
                     std::chrono::milliseconds timeout = std::chrono::seconds(30)) = 0;
  virtual void push(Frame oneway) = 0;
};

// What a node exposes to its links: request frames come back with a reply,
// pushes are routed into the node's mailboxes.
struct FrameSink {
  std::function<Frame(Frame)> on_request;
  std::function<void(Frame)> on_push;
};

class LocalLink final : public Link {
 public:
  explicit LocalLink(std::shared_ptr<FrameSink> sink) : sink_(std::move(sink)) {}

  Frame call(Frame request, std::chrono::milliseconds) override {
    request.put_u64("rid", rid_.fetch_add(1, std::memory_order_relaxed));
    return recode(sink_->on_request(recode(std::move(request))));
  }

  void push(Frame oneway) override { sink_->on_push(recode(std::move(oneway))); }

 private:
  // Byte round-trip: the local backend must not skip any transformation
  // the socket backend performs.
  static Frame recode(Frame f) { return Frame::decode(f.encode()); }

  std::shared_ptr<FrameSink> sink_;
  std::atomic<std::uint64_t> rid_{1};
};

// Channel endpoint over a link: sends become pushes to the peer, receives
// take from the per-peer mailbox this node's router fills.
class NetChannel final : public Channel {
 public:
  NetChannel(NodeRole self, Link& out, Mailbox& in)
      : self_(self), out_(&out), in_(&in) {}

  void send(Msg m) override { out_->push(msg_to_frame(self_, m)); }

  Msg recv(Slot slot, std::uint64_t round) override {
    return in_->take(slot, round, timeout_);
  }

  void set_timeout(std::chrono::milliseconds t) { timeout_ = t; }

 private:
  NodeRole self_;
  Link* out_;
  Mailbox* in_;
  std::chrono::milliseconds timeout_ = std::chrono::seconds(30);
};

}  // namespace psh
