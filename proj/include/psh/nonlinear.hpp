#pragma once

// Element-wise nonlinear functions on shared vectors, evaluated by a
// semi-honest helper party. Protocol per round:
//
//   1. P0 and P1 permute their own shares with the same seed-derived
//      permutation and send them to the helper.
//   2. The helper sums the halves (seeing only the permuted plaintext),
//      applies f (and optionally f' in the same round), freshly shares
//      each result and returns one half to each party.
//   3. The parties apply the inverse permutation to what they received.
//
// The helper learns the multiset of values, never their positions, and
// never sees the permutation seed. softmax is not element-wise and is
// deliberately unsupported.

#include <cmath>
#include <cstdint>
#include <string>

#include "psh/channel.hpp"
#include "psh/permute.hpp"
#include "psh/rng.hpp"
#include "psh/sharing.hpp"
#include "psh/tensor.hpp"

namespace psh {

enum class NonlinearFn : std::uint8_t {
  Sigmoid,
  SigmoidPrime,
  Relu,
  ReluPrime,
};

inline const char* fn_name(NonlinearFn f) {
  switch (f) {
    case NonlinearFn::Sigmoid: return "sigmoid";
    case NonlinearFn::SigmoidPrime: return "sigmoid_prime";
    case NonlinearFn::Relu: return "relu";
    case NonlinearFn::ReluPrime: return "relu_prime";
  }
  return "?";
}

inline NonlinearFn fn_from_name(const std::string& s) {
  if (s == "sigmoid") return NonlinearFn::Sigmoid;
  if (s == "sigmoid_prime") return NonlinearFn::SigmoidPrime;
  if (s == "relu") return NonlinearFn::Relu;
  if (s == "relu_prime") return NonlinearFn::ReluPrime;
  throw ProtocolError("unknown nonlinear fn: " + s);
}

inline double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }
inline double sigmoid_prime(double z) {
  const double s = sigmoid(z);
  return s * (1.0 - s);
}
inline double relu(double z) { return z > 0.0 ? z : 0.0; }
inline double relu_prime(double z) { return z > 0.0 ? 1.0 : 0.0; }

inline double apply_fn(NonlinearFn f, double z) {
  switch (f) {
    case NonlinearFn::Sigmoid: return sigmoid(z);
    case NonlinearFn::SigmoidPrime: return sigmoid_prime(z);
    case NonlinearFn::Relu: return relu(z);
    case NonlinearFn::ReluPrime: return relu_prime(z);
  }
  return 0.0;
}

inline NonlinearFn fn_derivative(NonlinearFn f) {
  switch (f) {
    case NonlinearFn::Sigmoid: return NonlinearFn::SigmoidPrime;
    case NonlinearFn::Relu: return NonlinearFn::ReluPrime;
    default: throw ProtocolError("no derivative registered for fn");
  }
}

inline Tensor apply_fn(NonlinearFn f, const Tensor& x) {
  return map(x, [f](double z) { return apply_fn(f, z); });
}

// i.i.d. Gaussian noise of standard deviation sigma, for optional local
// differential privacy before a reveal. sigma = 0 is the identity.
inline Tensor add_local_noise(const Tensor& x, double sigma, Rng& rng) {
  if (sigma == 0.0) return x;
  Tensor out = x;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += rng.normal(0.0, sigma);
  return out;
}

// --- helper (P3) side -------------------------------------------------------

struct P3Reply {
  Tensor fx0, fx1;    // fresh shares of f(x')
  Tensor fpx0, fpx1;  // fresh shares of f'(x'), when requested
  bool with_prime = false;
};

// One round of helper work on the reconstructed permuted vector. Fresh
// masks come from `rng`; callers derive it per round tag so results do not
// depend on request arrival order.
inline P3Reply p3_eval_round(const Tensor& share0, const Tensor& share1,
                             NonlinearFn fn, bool want_prime, Rng& rng,
                             double mask_bound = kDefaultMaskBound) {
  detail::require_same_shape(share0, share1, "p3_eval_round");
  const Tensor x_perm = add(share0, share1);
  P3Reply r;
  r.with_prime = want_prime;
  {
    Tensor fx = apply_fn(fn, x_perm);
    Tensor m = rng.uniform_tensor(fx.shape(), -mask_bound, mask_bound);
    r.fx0 = m;  // P0 receives the pure mask
    r.fx1 = sub(fx, m);
  }
  if (want_prime) {
    Tensor fp = apply_fn(fn_derivative(fn), x_perm);
    Tensor m = rng.uniform_tensor(fp.shape(), -mask_bound, mask_bound);
    r.fpx0 = m;
    r.fpx1 = sub(fp, m);
  }
  return r;
}

// Helper's serve step: take one Eval message from each party, reply with
// fresh result shares. Runs identically under local channels and the
// networked executor.
inline void p3_serve_round(Channel& to_p0, Channel& to_p1, std::uint64_t round,
                           NonlinearFn fn, bool want_prime, Rng& round_rng,
                           double mask_bound = kDefaultMaskBound) {
  Msg m0 = to_p0.recv(Slot::Eval, round);
  Msg m1 = to_p1.recv(Slot::Eval, round);
  if (m0.tensors.size() != 1 || m1.tensors.size() != 1)
    throw ProtocolError("eval round: expected exactly one share per party");
  P3Reply r = p3_eval_round(m0.tensors[0], m1.tensors[0], fn, want_prime,
                            round_rng, mask_bound);
  Msg out0, out1;
  out0.slot = out1.slot = Slot::Fx;
  out0.round = out1.round = round;
  out0.tensors.push_back(std::move(r.fx0));
  out1.tensors.push_back(std::move(r.fx1));
  if (want_prime) {
    out0.tensors.push_back(std::move(r.fpx0));
    out1.tensors.push_back(std::move(r.fpx1));
  }
  to_p0.send(std::move(out0));
  to_p1.send(std::move(out1));
}

// --- party side -------------------------------------------------------------

struct EvalResult {
  ShareHandle fx;
  ShareHandle fpx;  // valid when with_prime
  bool with_prime = false;
};

struct EvalOptions {
  bool want_prime = false;
  double noise_sigma = 0.0;  // per-reveal LDP noise; each party adds
                             // sigma/sqrt(2) so the revealed sum carries sigma
  Rng* noise_rng = nullptr;
};

// Party-side protocol step. `share` is this party's half of the flattened
// vector; both parties must pass the same perm_seed and round.
inline EvalResult eval_nonlinear_party(Role role, Channel& to_p3,
                                       const ShareHandle& h, NonlinearFn fn,
                                       std::uint64_t perm_seed,
                                       std::uint64_t round,
                                       const EvalOptions& opt = {}) {
  const Tensor flat_share = h.share.flat();
  const Permutation perm = Permutation::from_seed(perm_seed, flat_share.size());
  Tensor permuted = perm.apply(flat_share);
  if (opt.noise_sigma > 0.0) {
    if (!opt.noise_rng)
      throw ProtocolError("noise requested without a noise rng");
    permuted = add_local_noise(permuted, opt.noise_sigma / std::sqrt(2.0),
                               *opt.noise_rng);
  }

  Msg m;
  m.slot = Slot::Eval;
  m.round = round;
  m.meta = fn_name(fn);
  if (opt.want_prime) m.meta += "+prime";
  m.tensors.push_back(std::move(permuted));
  to_p3.send(std::move(m));

  Msg back = to_p3.recv(Slot::Fx, round);
  if (back.tensors.size() != std::size_t(opt.want_prime ? 2 : 1))
    throw ProtocolError("eval reply: unexpected tensor count");

  EvalResult out;
  out.with_prime = opt.want_prime;
  Tensor fx = perm.apply_inverse(back.tensors[0]).reshaped(h.share.shape());
  out.fx = {role, h.value_id, std::move(fx)};
  if (opt.want_prime) {
    Tensor fp = perm.apply_inverse(back.tensors[1]).reshaped(h.share.shape());
    out.fpx = {role, h.value_id, std::move(fp)};
  }
  return out;
}

}  // namespace psh
