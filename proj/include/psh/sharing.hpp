#pragma once

// Two-party additive secret sharing over 64-bit reals.
//
// A value x is held as shares s0 + s1 == x. Shares are produced by drawing
// a mask uniform in [-B, B] (B configurable, default 100; it bounds float
// cancellation error, it is not a security parameter under the semi-honest
// model). Multiplication of two shared values consumes a dealer-issued
// Beaver triple (u, v, w = u*v) and opens only x-u and y-v between the
// parties.

#include <atomic>
#include <cstdint>
#include <memory>
#include <string>
#include <utility>

#include "psh/channel.hpp"
#include "psh/rng.hpp"
#include "psh/tensor.hpp"

namespace psh {

enum class Role : std::uint8_t { P0 = 0, P1 = 1 };

inline const char* role_name(Role r) { return r == Role::P0 ? "p0" : "p1"; }
inline Role other(Role r) { return r == Role::P0 ? Role::P1 : Role::P0; }

constexpr double kDefaultMaskBound = 100.0;

struct ShareHandle {
  Role role{};
  std::uint64_t value_id = 0;
  Tensor share;
};

namespace detail {
inline std::uint64_t next_value_id() {
  static std::atomic<std::uint64_t> counter{1};
  return counter.fetch_add(1);
}
}  // namespace detail

// share_P0 = mask, share_P1 = x - mask.
inline std::pair<ShareHandle, ShareHandle> share(
    const Tensor& x, Rng& rng, double mask_bound = kDefaultMaskBound,
    std::uint64_t value_id = 0) {
  if (value_id == 0) value_id = detail::next_value_id();
  Tensor mask = rng.uniform_tensor(x.shape(), -mask_bound, mask_bound);
  ShareHandle h0{Role::P0, value_id, mask};
  ShareHandle h1{Role::P1, value_id, sub(x, mask)};
  return {std::move(h0), std::move(h1)};
}

inline Tensor reconstruct(const ShareHandle& h0, const ShareHandle& h1) {
  if (h0.value_id != h1.value_id)
    throw ProtocolError("reconstruct: value_id mismatch " +
                        std::to_string(h0.value_id) + " vs " +
                        std::to_string(h1.value_id));
  if (h0.role == h1.role)
    throw ProtocolError("reconstruct: two shares with the same role");
  return add(h0.share, h1.share);
}

// Public addition: both parties add a/2 to their shares.
inline ShareHandle add_public(const ShareHandle& h, const Tensor& a) {
  return {h.role, h.value_id, add(h.share, scale(a, 0.5))};
}

// Result id defaults to the first operand's so both parties, running
// independently, agree on it.
inline ShareHandle add_shared(const ShareHandle& hx, const ShareHandle& hy,
                              std::uint64_t out_id = 0) {
  if (hx.role != hy.role)
    throw ProtocolError("add_shared: shares from different roles");
  return {hx.role, out_id ? out_id : hx.value_id, add(hx.share, hy.share)};
}

// Public multiplication, element-wise; also covers scalars via a 1x1 `a`.
inline ShareHandle mul_public(const ShareHandle& h, const Tensor& a) {
  if (a.size() == 1) return {h.role, h.value_id, scale(h.share, a[0])};
  return {h.role, h.value_id, mul(h.share, a)};
}

// --- Beaver triples ---------------------------------------------------------

enum class MulKind : std::uint8_t { Elementwise, Matmul };

inline const char* mul_kind_name(MulKind k) {
  return k == MulKind::Elementwise ? "ew" : "mm";
}
inline MulKind mul_kind_from_name(const std::string& s) {
  if (s == "ew") return MulKind::Elementwise;
  if (s == "mm") return MulKind::Matmul;
  throw ProtocolError("unknown mul kind: " + s);
}

inline Tensor mul_by_kind(MulKind kind, const Tensor& a, const Tensor& b) {
  return kind == MulKind::Elementwise ? mul(a, b) : matmul(a, b);
}

// One party's half of a triple. Each half is spent by its own party during
// exactly one multiplication; a second spend throws.
struct TripleHalf {
  MulKind kind{};
  Tensor u, v, w;
  std::shared_ptr<std::atomic<bool>> consumed;

  void spend() {
    if (!consumed || consumed->exchange(true))
      throw ProtocolError("beaver triple reused");
  }
};

struct BeaverTriple {
  MulKind kind{};
  TripleHalf half0, half1;
};

// Trusted dealer: fresh u, v with w = u (*) v, all three additively shared.
inline BeaverTriple dealer_make_triple(const Shape& u_shape,
                                       const Shape& v_shape, MulKind kind,
                                       Rng& rng,
                                       double mask_bound = kDefaultMaskBound) {
  if (kind == MulKind::Elementwise && u_shape != v_shape)
    throw ShapeError("triple: elementwise shapes differ " +
                     shape_str(u_shape) + " vs " + shape_str(v_shape));
  Tensor u = rng.uniform_tensor(u_shape, -mask_bound, mask_bound);
  Tensor v = rng.uniform_tensor(v_shape, -mask_bound, mask_bound);
  Tensor w = mul_by_kind(kind, u, v);

  auto split = [&](const Tensor& t) {
    Tensor m = rng.uniform_tensor(t.shape(), -mask_bound, mask_bound);
    return std::pair<Tensor, Tensor>(m, sub(t, m));
  };
  auto [u0, u1] = split(u);
  auto [v0, v1] = split(v);
  auto [w0, w1] = split(w);

  BeaverTriple t;
  t.kind = kind;
  t.half0 = {kind, std::move(u0), std::move(v0), std::move(w0),
             std::make_shared<std::atomic<bool>>(false)};
  t.half1 = {kind, std::move(u1), std::move(v1), std::move(w1),
             std::make_shared<std::atomic<bool>>(false)};
  return t;
}

namespace detail {
inline void check_triple_shapes(const TripleHalf& t, const Tensor& x,
                                const Tensor& y) {
  // u must match x's shape and v must match y's.
  if (t.u.shape() != x.shape() || t.v.shape() != y.shape())
    throw ShapeError("beaver_mul: triple shaped for " + shape_str(t.u.shape()) +
                     " (*) " + shape_str(t.v.shape()) + ", got " +
                     shape_str(x.shape()) + " (*) " + shape_str(y.shape()));
}
}  // namespace detail

// The local combine step of Beaver's identity
//   xy = (x-u)(y-v) + (x-u)v + u(y-v) + uv.
// The public (x-u)(y-v) term is added by P0 only; reconstruction is the
// contract, not per-share symmetry.
inline Tensor beaver_combine(Role role, MulKind kind, const Tensor& d,
                             const Tensor& e, const TripleHalf& t) {
  Tensor z = add(mul_by_kind(kind, d, t.v), mul_by_kind(kind, t.u, e));
  z = add(z, t.w);
  if (role == Role::P0) z = add(z, mul_by_kind(kind, d, e));
  return z;
}

// Interactive multiplication of shared x by shared y. Each party runs this
// with its own shares and triple half; `chan` connects P0 and P1. The only
// values crossing the channel are the openings x-u and y-v.
inline ShareHandle beaver_mul(Role role, Channel& chan, const ShareHandle& hx,
                              const ShareHandle& hy, TripleHalf& triple,
                              std::uint64_t round, std::uint64_t out_id = 0) {
  if (hx.role != role || hy.role != role)
    throw ProtocolError("beaver_mul: share role does not match party role");
  detail::check_triple_shapes(triple, hx.share, hy.share);
  triple.spend();

  Tensor d_own = sub(hx.share, triple.u);
  Tensor e_own = sub(hy.share, triple.v);
  chan.send_tensor(Slot::BeaverD, round, d_own);
  chan.send_tensor(Slot::BeaverE, round, e_own);
  Tensor d_peer = chan.recv_tensor(Slot::BeaverD, round);
  Tensor e_peer = chan.recv_tensor(Slot::BeaverE, round);

  Tensor d = add(d_own, d_peer);
  Tensor e = add(e_own, e_peer);
  return {role, out_id ? out_id : hx.value_id,
          beaver_combine(role, triple.kind, d, e, triple)};
}

}  // namespace psh
