#pragma once

// A deployment node. Every node owns a keyed tensor store, one mailbox per
// peer, and links to the peers it talks to. The coordinator drives all
// work: requests (rid-carrying frames) are dispatched one at a time per
// node, while protocol pushes between parties bypass dispatch and land in
// mailboxes, keyed by (slot, round) so arrival order never matters.
//
// The EXEC vocabulary evaluates s-expressions against the store. Plain
// tensor math runs on whatever is stored (on share holders the linear ops
// are exactly the share-space operations); protocol ops (beaver_mul,
// eval_nl, head_fwd/head_bwd, p3_serve, tail_step) run the two-party
// protocols over this node's links.

#include <array>
#include <chrono>
#include <cstdint>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "psh/channel.hpp"
#include "psh/expr.hpp"
#include "psh/nonlinear.hpp"
#include "psh/permute.hpp"
#include "psh/rng.hpp"
#include "psh/sharing.hpp"
#include "psh/split.hpp"
#include "psh/store.hpp"
#include "psh/transport.hpp"
#include "psh/wire.hpp"

namespace psh {

struct PartyConfig {
  NodeRole role = NodeRole::P0;
  std::uint64_t seed = 1;  // one base seed shared by the deployment
  double mask_bound = kDefaultMaskBound;
};

// Both share holders must derive the same permutation for a round; only
// (seed, round) go in, so the parties agree without talking.
inline std::uint64_t perm_seed_for(std::uint64_t base_seed,
                                   std::uint64_t round) {
  return detail::mix64(base_seed ^ detail::mix64(0x7065726d5eedull) ^
                       detail::mix64(round));
}

class PartyNode {
 public:
  explicit PartyNode(PartyConfig cfg)
      : cfg_(cfg),
        node_seed_(cfg.seed ^ detail::mix64(node_role_tag(cfg.role))) {}

  NodeRole role() const { return cfg_.role; }
  TensorStore& store() { return store_; }

  // The face this node shows to incoming links.
  std::shared_ptr<FrameSink> sink() {
    auto s = std::make_shared<FrameSink>();
    s->on_request = [this](Frame f) { return handle_request(std::move(f)); };
    s->on_push = [this](Frame f) { handle_push(std::move(f)); };
    return s;
  }

  void connect(NodeRole peer, Link& link) {
    links_[std::size_t(peer)] = &link;
  }

  void set_mailbox_timeout(std::chrono::milliseconds t) { mbox_timeout_ = t; }

  void handle_push(Frame f) {
    auto [src, msg] = frame_to_msg(f);
    inbox(src).put(std::move(msg));
  }

  Frame handle_request(Frame f) {
    const std::uint64_t rid = f.u64("rid");
    std::lock_guard lk(dispatch_mu_);
    try {
      Frame reply = dispatch(f);
      reply.put_u64("rid", rid);
      reply.put_str("role", node_role_name(cfg_.role));
      return reply;
    } catch (const std::exception& ex) {
      Frame nack(MsgType::Nack);
      nack.put_u64("rid", rid);
      nack.put_str("role", node_role_name(cfg_.role));
      nack.put_str("reason", ex.what());
      return nack;
    }
  }

 private:
  // --- plumbing ---------------------------------------------------------

  Mailbox& inbox(NodeRole src) { return inbox_[std::size_t(src)]; }

  Link& link_to(NodeRole peer) const {
    Link* l = links_[std::size_t(peer)];
    if (!l)
      throw ProtocolError(std::string(node_role_name(cfg_.role)) +
                          " has no link to " + node_role_name(peer));
    return *l;
  }

  NetChannel chan(NodeRole peer) {
    NetChannel c(cfg_.role, link_to(peer), inbox(peer));
    c.set_timeout(mbox_timeout_);
    return c;
  }

  Role share_role() const {
    if (cfg_.role == NodeRole::P0) return Role::P0;
    if (cfg_.role == NodeRole::P1) return Role::P1;
    throw ProtocolError(std::string("op needs a share holder, not ") +
                        node_role_name(cfg_.role));
  }

  NodeRole peer01() const {
    return cfg_.role == NodeRole::P0 ? NodeRole::P1 : NodeRole::P0;
  }

  Rng round_rng(std::uint64_t round) const {
    return Rng::derive(node_seed_, round);
  }

  // Pull one dealt triple for a round out of the dealer mailbox. Triples
  // are dealt per round and the take below consumes them, so reuse of a
  // round starves and times out rather than reusing randomness.
  TripleHalf take_triple(MulKind kind, std::uint64_t round) {
    Mailbox& mb = inbox(NodeRole::Dealer);
    TripleHalf t;
    t.kind = kind;
    t.u = mb.take(Slot::TripleU, round, mbox_timeout_).tensors.at(0);
    t.v = mb.take(Slot::TripleV, round, mbox_timeout_).tensors.at(0);
    t.w = mb.take(Slot::TripleW, round, mbox_timeout_).tensors.at(0);
    t.consumed = std::make_shared<std::atomic<bool>>(false);
    return t;
  }

  // --- request dispatch -------------------------------------------------

  Frame dispatch(const Frame& f) {
    switch (f.type) {
      case MsgType::Store: {
        Frame ack(MsgType::Ack);
        ack.put_u64("key", store_.put(f.tensor("t")));
        return ack;
      }
      case MsgType::Fetch: {
        Frame ack(MsgType::Ack);
        ack.put_tensor("t", store_.get(f.u64("key")));
        return ack;
      }
      case MsgType::Free: {
        store_.free(f.u64("key"));
        return Frame(MsgType::Ack);
      }
      case MsgType::TripleReq:
        return deal_triple(f);
      case MsgType::Exec:
        return exec_frame(f);
      default:
        throw ProtocolError(std::string("unexpected request type ") +
                            msg_type_name(f.type));
    }
  }

  Frame deal_triple(const Frame& f) {
    if (cfg_.role != NodeRole::Dealer)
      throw ProtocolError("triple request sent to a non-dealer");
    const std::uint64_t round = f.u64("round");
    if (!dealt_.insert(round).second)
      throw ProtocolError("triple for round " + std::to_string(round) +
                          " already dealt");
    const MulKind kind = mul_kind_from_name(f.str("kind"));
    const Shape ushape{std::size_t(f.u64("ur")), std::size_t(f.u64("uc"))};
    const Shape vshape{std::size_t(f.u64("vr")), std::size_t(f.u64("vc"))};
    Rng rng = round_rng(round);
    BeaverTriple t =
        dealer_make_triple(ushape, vshape, kind, rng, cfg_.mask_bound);
    push_half(NodeRole::P0, round, t.half0);
    push_half(NodeRole::P1, round, t.half1);
    return Frame(MsgType::Ack);
  }

  void push_half(NodeRole to, std::uint64_t round, const TripleHalf& h) {
    NetChannel c = chan(to);
    c.send_tensor(Slot::TripleU, round, h.u);
    c.send_tensor(Slot::TripleV, round, h.v);
    c.send_tensor(Slot::TripleW, round, h.w);
  }

  // --- EXEC -------------------------------------------------------------

  struct ExecOut {
    std::optional<Tensor> value;   // stored, key returned
    std::optional<Tensor> second;  // stored, key2 returned
    std::optional<double> scalar;  // returned as "val"
    std::optional<std::uint64_t> key_override;  // in-place update target
  };

  Frame exec_frame(const Frame& f) {
    const Expr e = parse_expr(f.str("e"));
    ExecOut out = eval_op(e);
    Frame ack(MsgType::Ack);
    if (out.value) ack.put_u64("key", store_.put(std::move(*out.value)));
    if (out.second) ack.put_u64("key2", store_.put(std::move(*out.second)));
    if (out.scalar) ack.put_f64("val", *out.scalar);
    if (out.key_override) ack.put_u64("key", *out.key_override);
    return ack;
  }

  // Nested expressions must produce exactly one tensor.
  Tensor eval_tensor(const Expr& e) {
    ExecOut out = eval_op(e);
    if (!out.value || out.second)
      throw ProtocolError("op '" + e.op +
                          "' cannot be used as a sub-expression");
    return std::move(*out.value);
  }

  Tensor arg_tensor(const Arg& a) {
    switch (a.kind) {
      case Arg::Kind::Key: return store_.get(a.key);
      case Arg::Kind::Tensor: return a.tensor;
      case Arg::Kind::Sub: return eval_tensor(*a.sub);
      default: throw ProtocolError("expected a tensor-valued argument");
    }
  }

  static const Arg& want(const Expr& e, std::size_t i, Arg::Kind k,
                         const char* what) {
    if (i >= e.args.size())
      throw ProtocolError("op '" + e.op + "': missing argument " +
                          std::to_string(i) + " (" + what + ")");
    const Arg& a = e.args[i];
    if (a.kind != k)
      throw ProtocolError("op '" + e.op + "': argument " + std::to_string(i) +
                          " must be " + what);
    return a;
  }

  static void arity(const Expr& e, std::size_t n) {
    if (e.args.size() != n)
      throw ProtocolError("op '" + e.op + "': expected " + std::to_string(n) +
                          " arguments, got " + std::to_string(e.args.size()));
  }

  ExecOut eval_op(const Expr& e) {
    ExecOut out;
    const std::string& op = e.op;

    // plain tensor math -----------------------------------------------
    if (op == "add" || op == "sub" || op == "mul" || op == "matmul" ||
        op == "addrow") {
      arity(e, 2);
      const Tensor a = arg_tensor(e.args[0]);
      const Tensor b = arg_tensor(e.args[1]);
      out.value = op == "add"      ? add(a, b)
                  : op == "sub"    ? sub(a, b)
                  : op == "mul"    ? mul(a, b)
                  : op == "matmul" ? matmul(a, b)
                                   : add_rowbias(a, b);
      return out;
    }
    if (op == "transpose" || op == "colsum") {
      arity(e, 1);
      const Tensor a = arg_tensor(e.args[0]);
      out.value = op == "transpose" ? transpose(a) : colsum(a);
      return out;
    }
    if (op == "scale") {
      arity(e, 2);
      out.value = scale(arg_tensor(e.args[0]),
                        want(e, 1, Arg::Kind::Float, "f:factor").f);
      return out;
    }
    if (op == "add_scaled") {  // a + c*b
      arity(e, 3);
      const Tensor a = arg_tensor(e.args[0]);
      const double c = want(e, 1, Arg::Kind::Float, "f:factor").f;
      out.value = add_scaled(a, c, arg_tensor(e.args[2]));
      return out;
    }
    if (op == "apply") {  // plaintext nonlinearity, not the protocol
      arity(e, 2);
      const NonlinearFn fn =
          fn_from_name(want(e, 0, Arg::Kind::Sym, "s:fn").sym);
      out.value = apply_fn(fn, arg_tensor(e.args[1]));
      return out;
    }
    if (op == "sgd") {  // (sgd k:target f:lr grad): target -= lr*grad
      arity(e, 3);
      const std::uint64_t target = want(e, 0, Arg::Kind::Key, "k:target").key;
      const double lr = want(e, 1, Arg::Kind::Float, "f:lr").f;
      const Tensor g = arg_tensor(e.args[2]);
      store_.update(target, add_scaled(store_.get(target), -lr, g));
      out.key_override = target;
      return out;
    }
    if (op == "ping") {
      arity(e, 0);
      return out;
    }
    if (op == "mbox_take") {  // (mbox_take s:src s:slot i:round)
      arity(e, 3);
      const NodeRole src =
          node_role_from_name(want(e, 0, Arg::Kind::Sym, "s:src").sym);
      const Slot slot = slot_from_name(want(e, 1, Arg::Kind::Sym, "s:slot").sym);
      const std::uint64_t round =
          std::uint64_t(want(e, 2, Arg::Kind::Int, "i:round").i);
      out.value = inbox(src).take(slot, round, mbox_timeout_).tensors.at(0);
      return out;
    }

    // share-holder protocol ops ----------------------------------------
    if (op == "beaver_mul") {  // (beaver_mul x y i:round s:kind)
      arity(e, 4);
      const Role r = share_role();
      const Tensor x = arg_tensor(e.args[0]);
      const Tensor y = arg_tensor(e.args[1]);
      const std::uint64_t round =
          std::uint64_t(want(e, 2, Arg::Kind::Int, "i:round").i);
      const MulKind kind =
          mul_kind_from_name(want(e, 3, Arg::Kind::Sym, "s:kind").sym);
      TripleHalf triple = take_triple(kind, round);
      NetChannel peer = chan(peer01());
      const ShareHandle hx{r, round, x}, hy{r, round, y};
      out.value = beaver_mul(r, peer, hx, hy, triple, round).share;
      return out;
    }
    if (op == "eval_nl") {  // (eval_nl x s:fn i:round i:prime [f:sigma])
      if (e.args.size() != 4 && e.args.size() != 5)
        throw ProtocolError("op 'eval_nl': expected 4 or 5 arguments");
      const Role r = share_role();
      const Tensor x = arg_tensor(e.args[0]);
      const NonlinearFn fn =
          fn_from_name(want(e, 1, Arg::Kind::Sym, "s:fn").sym);
      const std::uint64_t round =
          std::uint64_t(want(e, 2, Arg::Kind::Int, "i:round").i);
      EvalOptions opt;
      opt.want_prime = want(e, 3, Arg::Kind::Int, "i:prime").i != 0;
      Rng noise_rng = Rng::derive(node_seed_, round ^ 0x6e6f697365ull);
      if (e.args.size() == 5) {
        opt.noise_sigma = want(e, 4, Arg::Kind::Float, "f:sigma").f;
        opt.noise_rng = &noise_rng;
      }
      NetChannel p3 = chan(NodeRole::P3);
      const ShareHandle hx{r, round, x};
      EvalResult res = eval_nonlinear_party(
          r, p3, hx, fn, perm_seed_for(cfg_.seed, round), round, opt);
      out.value = std::move(res.fx.share);
      if (res.with_prime) out.second = std::move(res.fpx.share);
      return out;
    }
    if (op == "head_fwd") {  // (head_fwd k:x k:w k:b i:round)
      arity(e, 4);
      const Role r = share_role();
      const std::uint64_t kx = want(e, 0, Arg::Kind::Key, "k:x").key;
      const std::uint64_t kw = want(e, 1, Arg::Kind::Key, "k:w").key;
      const std::uint64_t kb = want(e, 2, Arg::Kind::Key, "k:b").key;
      const std::uint64_t round =
          std::uint64_t(want(e, 3, Arg::Kind::Int, "i:round").i);
      TripleHalf triple = take_triple(MulKind::Matmul, round);
      NetChannel peer = chan(peer01());
      NetChannel tail = chan(NodeRole::Tail);
      const ShareHandle hx{r, round, store_.get(kx)};
      HeadShare head{{r, round, store_.get(kw)}, {r, round, store_.get(kb)}};
      out.value =
          head_forward_party(r, peer, tail, hx, head, triple, round).share;
      return out;
    }
    if (op == "head_bwd") {  // (head_bwd k:x k:w k:b i:grad_round i:round f:lr)
      arity(e, 6);
      const Role r = share_role();
      const std::uint64_t kx = want(e, 0, Arg::Kind::Key, "k:x").key;
      const std::uint64_t kw = want(e, 1, Arg::Kind::Key, "k:w").key;
      const std::uint64_t kb = want(e, 2, Arg::Kind::Key, "k:b").key;
      const std::uint64_t grad_round =
          std::uint64_t(want(e, 3, Arg::Kind::Int, "i:grad_round").i);
      const std::uint64_t round =
          std::uint64_t(want(e, 4, Arg::Kind::Int, "i:round").i);
      const double lr = want(e, 5, Arg::Kind::Float, "f:lr").f;
      TripleHalf triple = take_triple(MulKind::Matmul, round);
      NetChannel peer = chan(peer01());
      NetChannel tail = chan(NodeRole::Tail);
      const ShareHandle hx{r, round, store_.get(kx)};
      HeadShare head{{r, round, store_.get(kw)}, {r, round, store_.get(kb)}};
      head_backward_party(r, peer, tail, hx, head, triple, lr, grad_round,
                          round);
      store_.update(kw, std::move(head.W.share));
      store_.update(kb, std::move(head.b.share));
      out.key_override = kw;
      return out;
    }

    // helper ops ---------------------------------------------------------
    if (op == "p3_serve") {  // (p3_serve i:round)
      arity(e, 1);
      if (cfg_.role != NodeRole::P3)
        throw ProtocolError("p3_serve on a non-helper node");
      const std::uint64_t round =
          std::uint64_t(want(e, 0, Arg::Kind::Int, "i:round").i);
      serve_eval_round(round);
      return out;
    }
    if (op == "tail_init") {  // (tail_init i:hidden i:out f:lr s:loss i:tag)
      arity(e, 5);
      if (cfg_.role != NodeRole::Tail)
        throw ProtocolError("tail_init on a non-tail node");
      const auto hidden = std::size_t(want(e, 0, Arg::Kind::Int, "i:hidden").i);
      const auto outdim = std::size_t(want(e, 1, Arg::Kind::Int, "i:out").i);
      const double lr = want(e, 2, Arg::Kind::Float, "f:lr").f;
      const std::string& lname = want(e, 3, Arg::Kind::Sym, "s:loss").sym;
      const auto tag = std::uint64_t(want(e, 4, Arg::Kind::Int, "i:tag").i);
      LossKind loss;
      if (lname == "mse")
        loss = LossKind::Mse;
      else if (lname == "ce")
        loss = LossKind::CrossEntropy;
      else
        throw ProtocolError("unknown loss kind: " + lname);
      // Derived from the base seed, not the node stream: a plaintext run
      // with the same seed must draw the identical initialization.
      Rng rng = Rng::derive(cfg_.seed, tag);
      tail_ = TailNet(hidden, outdim, lr, loss, rng);
      return out;
    }
    if (op == "tail_step") {  // (tail_step i:round t:labels)
      arity(e, 2);
      if (cfg_.role != NodeRole::Tail)
        throw ProtocolError("tail_step on a non-tail node");
      if (!tail_) throw ProtocolError("tail_step before tail_init");
      const std::uint64_t round =
          std::uint64_t(want(e, 0, Arg::Kind::Int, "i:round").i);
      const Tensor labels = arg_tensor(e.args[1]);
      NetChannel c0 = chan(NodeRole::P0);
      NetChannel c1 = chan(NodeRole::P1);
      Rng rng = round_rng(round);
      out.scalar =
          tail_round(c0, c1, round, *tail_, labels, rng, cfg_.mask_bound);
      return out;
    }
    if (op == "tail_params") {  // -> key = weights, key2 = bias
      arity(e, 0);
      if (cfg_.role != NodeRole::Tail || !tail_)
        throw ProtocolError("tail_params without an initialized tail");
      out.value = tail_->weights();
      out.second = tail_->bias();
      return out;
    }

    throw ProtocolError("unknown op '" + op + "'");
  }

  // One helper round: both parties' Eval messages in, fresh shares out.
  // The function name and prime flag ride the message meta, so the helper
  // needs only the round tag.
  void serve_eval_round(std::uint64_t round) {
    Msg m0 = inbox(NodeRole::P0).take(Slot::Eval, round, mbox_timeout_);
    Msg m1 = inbox(NodeRole::P1).take(Slot::Eval, round, mbox_timeout_);
    if (m0.meta != m1.meta)
      throw ProtocolError("eval round " + std::to_string(round) +
                          ": parties disagree on fn (" + m0.meta + " vs " +
                          m1.meta + ")");
    std::string name = m0.meta;
    bool want_prime = false;
    if (const auto pos = name.find("+prime"); pos != std::string::npos) {
      want_prime = true;
      name.erase(pos);
    }
    const NonlinearFn fn = fn_from_name(name);
    Rng rng = round_rng(round);
    P3Reply r = p3_eval_round(m0.tensors.at(0), m1.tensors.at(0), fn,
                              want_prime, rng, cfg_.mask_bound);
    NetChannel c0 = chan(NodeRole::P0);
    NetChannel c1 = chan(NodeRole::P1);
    Msg out0, out1;
    out0.slot = out1.slot = Slot::Fx;
    out0.round = out1.round = round;
    out0.tensors.push_back(std::move(r.fx0));
    out1.tensors.push_back(std::move(r.fx1));
    if (want_prime) {
      out0.tensors.push_back(std::move(r.fpx0));
      out1.tensors.push_back(std::move(r.fpx1));
    }
    c0.send(std::move(out0));
    c1.send(std::move(out1));
  }

  PartyConfig cfg_;
  std::uint64_t node_seed_;
  TensorStore store_;
  std::array<Mailbox, kNodeRoleCount> inbox_;
  std::array<Link*, kNodeRoleCount> links_{};
  std::mutex dispatch_mu_;
  std::set<std::uint64_t> dealt_;
  std::optional<TailNet> tail_;
  std::chrono::milliseconds mbox_timeout_ = std::chrono::seconds(30);
};

// --- deployment topology -------------------------------------------------------

struct Endpoint {
  std::string host;
  std::uint16_t port = 0;
};

// Config text: one "role = host:port" line per node; '#' comments. Roles a
// run does not use (e.g. tail for logistic regression) may be omitted.
struct Topology {
  std::array<std::optional<Endpoint>, kNodeRoleCount> nodes;

  bool has(NodeRole r) const { return nodes[std::size_t(r)].has_value(); }
  const Endpoint& at(NodeRole r) const {
    if (!has(r))
      throw ProtocolError(std::string("topology has no entry for ") +
                          node_role_name(r));
    return *nodes[std::size_t(r)];
  }
};

inline Topology parse_topology(const std::string& text) {
  Topology topo;
  std::size_t line_no = 0, pos = 0;
  while (pos <= text.size()) {
    const std::size_t eol = text.find('\n', pos);
    std::string line = text.substr(
        pos, eol == std::string::npos ? std::string::npos : eol - pos);
    pos = eol == std::string::npos ? text.size() + 1 : eol + 1;
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos)
      line.erase(hash);
    const auto strip = [](std::string s) {
      const auto b = s.find_first_not_of(" \t\r");
      if (b == std::string::npos) return std::string();
      const auto e = s.find_last_not_of(" \t\r");
      return s.substr(b, e - b + 1);
    };
    line = strip(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ProtocolError("topology line " + std::to_string(line_no) +
                          ": expected 'role = host:port'");
    const NodeRole role = node_role_from_name(strip(line.substr(0, eq)));
    const std::string addr = strip(line.substr(eq + 1));
    const auto colon = addr.rfind(':');
    if (colon == std::string::npos || colon == 0 || colon + 1 >= addr.size())
      throw ProtocolError("topology line " + std::to_string(line_no) +
                          ": bad address '" + addr + "'");
    Endpoint ep;
    ep.host = addr.substr(0, colon);
    const int port = std::stoi(addr.substr(colon + 1));
    if (port <= 0 || port > 65535)
      throw ProtocolError("topology line " + std::to_string(line_no) +
                          ": bad port");
    ep.port = std::uint16_t(port);
    topo.nodes[std::size_t(role)] = std::move(ep);
  }
  return topo;
}

// Which peers a role dials (everyone it must talk to that has a smaller
// role id; larger ids dial in). The coordinator dials every present node.
inline std::vector<NodeRole> dial_targets(NodeRole self, const Topology& topo) {
  static const std::array<std::vector<NodeRole>, kNodeRoleCount> need = {{
      /* P0    */ {},
      /* P1    */ {NodeRole::P0},
      /* P3    */ {NodeRole::P0, NodeRole::P1},
      /* Dealer*/ {NodeRole::P0, NodeRole::P1},
      /* Tail  */ {NodeRole::P0, NodeRole::P1},
      /* Coord */ {NodeRole::P0, NodeRole::P1, NodeRole::P3, NodeRole::Dealer,
                   NodeRole::Tail},
  }};
  std::vector<NodeRole> out;
  for (NodeRole r : need[std::size_t(self)])
    if (topo.has(r)) out.push_back(r);
  return out;
}

}  // namespace psh
