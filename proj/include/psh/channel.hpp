#pragma once

// Tagged tensor exchange between parties. Protocol code (Beaver openings,
// permuted-nonlinear rounds, hidden-layer traffic) is written against
// Channel only, so the in-process and socket backends execute the same
// numeric path. Messages are matched by (slot, round), never by arrival
// order.

#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <map>
#include <memory>
#include <mutex>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "psh/tensor.hpp"

namespace psh {

struct ProtocolError : std::runtime_error {
  explicit ProtocolError(const std::string& what) : std::runtime_error(what) {}
};

struct TimeoutError : std::runtime_error {
  explicit TimeoutError(const std::string& what) : std::runtime_error(what) {}
};

// Message slots. On the wire each maps to a frame type or a STORE slot
// string; see wire.hpp.
enum class Slot : std::uint8_t {
  BeaverD,   // opening x - u
  BeaverE,   // opening y - v
  TripleU,   // dealer share of u
  TripleV,
  TripleW,
  Eval,      // permuted share to the nonlinear party
  Fx,        // fresh share of f(x') back from the nonlinear party
  Hidden,    // hidden layer share to the tail
  Grad,      // hidden gradient share back from the tail
  Reveal,    // generic reconstruction half
};

inline const char* slot_name(Slot s) {
  switch (s) {
    case Slot::BeaverD: return "bv.d";
    case Slot::BeaverE: return "bv.e";
    case Slot::TripleU: return "tr.u";
    case Slot::TripleV: return "tr.v";
    case Slot::TripleW: return "tr.w";
    case Slot::Eval:    return "eval";
    case Slot::Fx:      return "fx";
    case Slot::Hidden:  return "hidden";
    case Slot::Grad:    return "grad";
    case Slot::Reveal:  return "reveal";
  }
  return "?";
}

inline Slot slot_from_name(const std::string& s) {
  if (s == "bv.d") return Slot::BeaverD;
  if (s == "bv.e") return Slot::BeaverE;
  if (s == "tr.u") return Slot::TripleU;
  if (s == "tr.v") return Slot::TripleV;
  if (s == "tr.w") return Slot::TripleW;
  if (s == "eval") return Slot::Eval;
  if (s == "fx") return Slot::Fx;
  if (s == "hidden") return Slot::Hidden;
  if (s == "grad") return Slot::Grad;
  if (s == "reveal") return Slot::Reveal;
  throw ProtocolError("unknown slot name: " + s);
}

struct Msg {
  Slot slot{};
  std::uint64_t round = 0;
  std::string meta;             // small out-of-band field (e.g. fn name)
  std::vector<Tensor> tensors;
};

class Mailbox {
 public:
  void put(Msg m) {
    {
      std::lock_guard lk(mu_);
      box_[{m.slot, m.round}].push_back(std::move(m));
    }
    cv_.notify_all();
  }

  Msg take(Slot slot, std::uint64_t round,
           std::chrono::milliseconds timeout = std::chrono::seconds(30)) {
    std::unique_lock lk(mu_);
    const auto key = std::make_pair(slot, round);
    if (!cv_.wait_for(lk, timeout, [&] {
          auto it = box_.find(key);
          return it != box_.end() && !it->second.empty();
        }))
      throw TimeoutError(std::string("mailbox timeout on ") + slot_name(slot) +
                         " round " + std::to_string(round));
    auto it = box_.find(key);
    Msg m = std::move(it->second.front());
    it->second.pop_front();
    if (it->second.empty()) box_.erase(it);
    return m;
  }

  bool empty() const {
    std::lock_guard lk(mu_);
    return box_.empty();
  }

 private:
  mutable std::mutex mu_;
  std::condition_variable cv_;
  std::map<std::pair<Slot, std::uint64_t>, std::deque<Msg>> box_;
};

class Channel {
 public:
  virtual ~Channel() = default;
  virtual void send(Msg m) = 0;
  virtual Msg recv(Slot slot, std::uint64_t round) = 0;

  Tensor recv_tensor(Slot slot, std::uint64_t round) {
    Msg m = recv(slot, round);
    if (m.tensors.size() != 1)
      throw ProtocolError(std::string("expected one tensor on ") +
                          slot_name(slot));
    return std::move(m.tensors[0]);
  }

  void send_tensor(Slot slot, std::uint64_t round, Tensor t) {
    Msg m;
    m.slot = slot;
    m.round = round;
    m.tensors.push_back(std::move(t));
    send(std::move(m));
  }
};

// In-process channel: a pair of endpoints over two mailboxes.
class LocalChannel final : public Channel {
 public:
  static std::pair<std::unique_ptr<LocalChannel>, std::unique_ptr<LocalChannel>>
  make_pair() {
    auto a_box = std::make_shared<Mailbox>();
    auto b_box = std::make_shared<Mailbox>();
    auto a = std::unique_ptr<LocalChannel>(new LocalChannel(b_box, a_box));
    auto b = std::unique_ptr<LocalChannel>(new LocalChannel(a_box, b_box));
    return {std::move(a), std::move(b)};
  }

  void send(Msg m) override { peer_->put(std::move(m)); }

  Msg recv(Slot slot, std::uint64_t round) override {
    return own_->take(slot, round, timeout_);
  }

  void set_timeout(std::chrono::milliseconds t) { timeout_ = t; }

 private:
  LocalChannel(std::shared_ptr<Mailbox> peer, std::shared_ptr<Mailbox> own)
      : peer_(std::move(peer)), own_(std::move(own)) {}

  std::shared_ptr<Mailbox> peer_;
  std::shared_ptr<Mailbox> own_;
  std::chrono::milliseconds timeout_ = std::chrono::seconds(30);
};

}  // namespace psh
