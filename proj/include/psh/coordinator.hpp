#pragma once

// The coordinator drives everything: it stores shares at the parties,
// issues expressions, requests triples, and fetches results. Calls that
// must overlap (paired EXECs on P0/P1, or a helper round) go through
// parallel() - issuing them one by one would deadlock, because the first
// party blocks waiting for a peer message that only the second party's
// EXEC produces. A NACK is a non-retryable failure; timeouts are retried only
// for FETCH, the one idempotent read.

#include <chrono>
#include <cstdint>
#include <future>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "psh/expr.hpp"
#include "psh/party.hpp"
#include "psh/rng.hpp"
#include "psh/sharing.hpp"
#include "psh/tcp.hpp"
#include "psh/tensor.hpp"
#include "psh/transport.hpp"
#include "psh/wire.hpp"

namespace psh {

struct NackError : std::runtime_error {
  explicit NackError(const std::string& reason)
      : std::runtime_error("party refused: " + reason) {}
};

struct ExecResult {
  std::optional<std::uint64_t> key;
  std::optional<std::uint64_t> key2;
  std::optional<double> val;

  std::uint64_t key_or_throw() const {
    if (!key) throw ProtocolError("exec reply carried no key");
    return *key;
  }
};

class Coordinator {
 public:
  explicit Coordinator(std::uint64_t seed, double mask_bound = kDefaultMaskBound)
      : rng_(Rng::derive(seed, node_role_tag(NodeRole::Coord))),
        mask_bound_(mask_bound) {}

  void attach(NodeRole r, Link& l) { links_[std::size_t(r)] = &l; }
  bool attached(NodeRole r) const { return links_[std::size_t(r)] != nullptr; }
  void set_timeout(std::chrono::milliseconds t) { timeout_ = t; }
  Rng& rng() { return rng_; }
  double mask_bound() const { return mask_bound_; }

  std::uint64_t store(NodeRole r, const Tensor& t) {
    Frame req(MsgType::Store);
    req.put_tensor("t", t);
    return call(r, std::move(req)).u64("key");
  }

  Tensor fetch(NodeRole r, std::uint64_t key) {
    Frame req(MsgType::Fetch);
    req.put_u64("key", key);
    // idempotent, so a timed-out attempt may be retried
    for (int attempt = 0;; ++attempt) {
      try {
        Frame copy = req;
        return call(r, std::move(copy)).tensor("t");
      } catch (const TimeoutError&) {
        if (attempt >= 2) throw;
      }
    }
  }

  void free(NodeRole r, std::uint64_t key) {
    Frame req(MsgType::Free);
    req.put_u64("key", key);
    call(r, std::move(req));
  }

  ExecResult exec(NodeRole r, const Expr& e) { return exec(r, print_expr(e)); }

  ExecResult exec(NodeRole r, const std::string& expr_text) {
    Frame req(MsgType::Exec);
    req.put_str("e", expr_text);
    const Frame reply = call(r, std::move(req));
    ExecResult out;
    if (reply.has("key")) out.key = reply.u64("key");
    if (reply.has("key2")) out.key2 = reply.u64("key2");
    if (reply.has("val")) out.val = reply.f64("val");
    return out;
  }

  // Issue several calls concurrently; results come back in input order.
  // Any failure is rethrown after every call finished.
  std::vector<ExecResult> parallel(
      const std::vector<std::pair<NodeRole, std::string>>& calls) {
    std::vector<std::future<ExecResult>> futs;
    futs.reserve(calls.size());
    for (const auto& [role, text] : calls)
      futs.push_back(std::async(std::launch::async,
                                [this, role = role, text = text] {
                                  return exec(role, text);
                                }));
    std::vector<ExecResult> out;
    out.reserve(calls.size());
    std::exception_ptr first_error;
    for (auto& f : futs) {
      try {
        out.push_back(f.get());
      } catch (...) {
        if (!first_error) first_error = std::current_exception();
        out.emplace_back();
      }
    }
    if (first_error) std::rethrow_exception(first_error);
    return out;
  }

  // Ask the dealer to deal one triple for a round; the halves land in the
  // parties' mailboxes.
  void triple_req(std::uint64_t round, MulKind kind, const Shape& u_shape,
                  const Shape& v_shape) {
    if (u_shape.size() != 2 || v_shape.size() != 2)
      throw ProtocolError("triple shapes must be rank-2");
    Frame req(MsgType::TripleReq);
    req.put_str("kind", mul_kind_name(kind));
    req.put_u64("round", round);
    req.put_u64("ur", u_shape[0]).put_u64("uc", u_shape[1]);
    req.put_u64("vr", v_shape[0]).put_u64("vc", v_shape[1]);
    call(NodeRole::Dealer, std::move(req));
  }

  // --- share plumbing ----------------------------------------------------

  struct KeyPair {
    std::uint64_t k0 = 0, k1 = 0;
  };

  KeyPair share_store(const Tensor& x) {
    auto [h0, h1] = share(x, rng_, mask_bound_);
    return {store(NodeRole::P0, h0.share), store(NodeRole::P1, h1.share)};
  }

  Tensor reconstruct_fetch(const KeyPair& kp) {
    return add(fetch(NodeRole::P0, kp.k0), fetch(NodeRole::P1, kp.k1));
  }

  void free_pair(const KeyPair& kp) {
    free(NodeRole::P0, kp.k0);
    free(NodeRole::P1, kp.k1);
  }

 private:
  Frame call(NodeRole r, Frame req) {
    Link* l = links_[std::size_t(r)];
    if (!l)
      throw ProtocolError(std::string("coordinator has no link to ") +
                          node_role_name(r));
    req.put_str("role", node_role_name(NodeRole::Coord));
    Frame reply = l->call(std::move(req), timeout_);
    if (reply.type == MsgType::Nack) throw NackError(reply.str("reason"));
    if (reply.type != MsgType::Ack)
      throw ProtocolError(std::string("unexpected reply type ") +
                          msg_type_name(reply.type));
    return reply;
  }

  std::array<Link*, kNodeRoleCount> links_{};
  Rng rng_;
  double mask_bound_;
  std::chrono::milliseconds timeout_ = std::chrono::seconds(30);
};

// --- in-process deployment ------------------------------------------------

// All five nodes in one process, fully meshed over LocalLinks (which still
// round-trip every frame through the byte codec). The coordinator lives on
// the caller's thread.
class LocalDeployment {
 public:
  explicit LocalDeployment(std::uint64_t seed,
                           double mask_bound = kDefaultMaskBound)
      : coord_(seed, mask_bound) {
    for (std::size_t i = 0; i < 5; ++i) {
      PartyConfig cfg;
      cfg.role = NodeRole(i);
      cfg.seed = seed;
      cfg.mask_bound = mask_bound;
      nodes_.push_back(std::make_unique<PartyNode>(cfg));
    }
    for (std::size_t a = 0; a < 5; ++a)
      for (std::size_t b = 0; b < 5; ++b) {
        if (a == b) continue;
        links_.push_back(std::make_unique<LocalLink>(nodes_[b]->sink()));
        nodes_[a]->connect(NodeRole(b), *links_.back());
      }
    for (std::size_t b = 0; b < 5; ++b) {
      links_.push_back(std::make_unique<LocalLink>(nodes_[b]->sink()));
      coord_.attach(NodeRole(b), *links_.back());
    }
  }

  Coordinator& coord() { return coord_; }
  PartyNode& node(NodeRole r) { return *nodes_.at(std::size_t(r)); }

 private:
  std::vector<std::unique_ptr<PartyNode>> nodes_;
  std::vector<std::unique_ptr<LocalLink>> links_;
  Coordinator coord_;
};

// Dial every node in the topology from a socket coordinator. The returned
// links must outlive the coordinator's use of them.
struct CoordinatorSockets {
  std::vector<std::unique_ptr<TcpLink>> links;
};

inline CoordinatorSockets connect_coordinator(Coordinator& coord,
                                              const Topology& topo) {
  auto sink = std::make_shared<FrameSink>();
  sink->on_request = [](Frame) -> Frame {
    Frame nack(MsgType::Nack);
    nack.put_str("reason", "coordinator does not serve requests");
    nack.put_u64("rid", 0);
    return nack;
  };
  sink->on_push = [](Frame) {};  // coordinator expects no pushes

  CoordinatorSockets out;
  for (std::size_t i = 0; i < 5; ++i) {
    const NodeRole r = NodeRole(i);
    if (!topo.has(r)) continue;
    out.links.push_back(dial_link(NodeRole::Coord, topo.at(r), sink));
    coord.attach(r, *out.links.back());
  }
  return out;
}

}  // namespace psh
