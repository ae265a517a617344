#pragma once

// Wire format. Every frame is
//
//   magic "PSH1" | type u8 | body_len u64 LE | body
//
// and the body is a compact self-describing key-value block:
//
//   body  := count u32 LE , entry*
//   entry := klen u8 , key bytes , tag u8 , payload
//   tag 'U': u64 LE
//   tag 'I': i64 LE (two's complement)
//   tag 'D': f64 IEEE-754 LE
//   tag 'S': len u32 LE , raw bytes
//   tag 'T': len u64 LE , tensor bytes (rank u64 LE, dims u64 LE each,
//            then f64 LE data, exactly as serialize_tensor emits)
//
// Fields keep insertion order, so encoding the same frame twice yields the
// same bytes. Every frame carries the sender's "role"; request frames carry
// a "rid" echoed by the matching ACK/NACK reply, pushes carry none.

#include <cstdint>
#include <cstring>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "psh/tensor.hpp"

namespace psh {

struct WireError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

enum class MsgType : std::uint8_t {
  Store = 1,      // request: put a tensor (reply carries the new key).
                  // without rid: a peer push carrying "slot" + "round".
  Fetch = 2,      // request: read a tensor by key
  Free = 3,       // request: drop a tensor by key
  Exec = 4,       // request: evaluate an expression, store the result
  EvalFn = 5,     // push: permuted share toward the nonlinear helper
  ShareBack = 6,  // push: helper's fresh result shares
  TripleReq = 7,  // request to the dealer: deal one triple for a round
  HiddenFwd = 8,  // push: hidden-layer share toward the tail
  GradBack = 9,   // push: hidden gradient share back from the tail
  Ack = 10,       // reply: success (also the post-connect hello)
  Nack = 11,      // reply: failure, "reason" string attached
};

inline const char* msg_type_name(MsgType t) {
  switch (t) {
    case MsgType::Store: return "STORE";
    case MsgType::Fetch: return "FETCH";
    case MsgType::Free: return "FREE";
    case MsgType::Exec: return "EXEC";
    case MsgType::EvalFn: return "EVAL_FN";
    case MsgType::ShareBack: return "SHARE_BACK";
    case MsgType::TripleReq: return "TRIPLE_REQ";
    case MsgType::HiddenFwd: return "HIDDEN_FWD";
    case MsgType::GradBack: return "GRAD_BACK";
    case MsgType::Ack: return "ACK";
    case MsgType::Nack: return "NACK";
  }
  return "?";
}

// Deployment roles. The numeric order doubles as the connection rule:
// a node dials every peer with a smaller id and accepts from larger ones.
enum class NodeRole : std::uint8_t { P0 = 0, P1, P3, Dealer, Tail, Coord };
inline constexpr std::size_t kNodeRoleCount = 6;

inline const char* node_role_name(NodeRole r) {
  switch (r) {
    case NodeRole::P0: return "p0";
    case NodeRole::P1: return "p1";
    case NodeRole::P3: return "p3";
    case NodeRole::Dealer: return "dealer";
    case NodeRole::Tail: return "tail";
    case NodeRole::Coord: return "coord";
  }
  return "?";
}

inline NodeRole node_role_from_name(const std::string& s) {
  for (std::size_t i = 0; i < kNodeRoleCount; ++i)
    if (s == node_role_name(NodeRole(i))) return NodeRole(i);
  throw WireError("unknown role name: " + s);
}

// Seed-derivation tags, one per role, so every node draws from its own
// stream of a single base seed.
inline std::uint64_t node_role_tag(NodeRole r) {
  static constexpr std::uint64_t tags[kNodeRoleCount] = {
      0x70300a1ull, 0x70310a2ull, 0x70330a3ull,
      0xdea1e40aull, 0x7a110a5ull, 0xc0040a6ull};
  return tags[std::size_t(r)];
}

namespace detail {

inline void put_u32le(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(std::uint8_t(v >> (8 * i)));
}
inline void put_u64le(std::vector<std::uint8_t>& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(std::uint8_t(v >> (8 * i)));
}

class WireReader {
 public:
  WireReader(const std::uint8_t* p, std::size_t n) : p_(p), n_(n) {}
  std::uint8_t u8() {
    need(1);
    return p_[pos_++];
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= std::uint32_t(p_[pos_ + i]) << (8 * i);
    pos_ += 4;
    return v;
  }
  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= std::uint64_t(p_[pos_ + i]) << (8 * i);
    pos_ += 8;
    return v;
  }
  std::string bytes(std::size_t n) {
    need(n);
    std::string s(reinterpret_cast<const char*>(p_ + pos_), n);
    pos_ += n;
    return s;
  }
  std::size_t remaining() const { return n_ - pos_; }

 private:
  void need(std::size_t n) const {
    if (n_ - pos_ < n) throw WireError("truncated frame body");
  }
  const std::uint8_t* p_;
  std::size_t n_, pos_ = 0;
};

}  // namespace detail

class Frame {
 public:
  using Val = std::variant<std::uint64_t, std::int64_t, double, std::string,
                           Tensor>;
  // 'S' strings and 'T' tensors both land in distinct variant slots; the
  // string alternative is tagged 'S'.

  Frame() = default;
  explicit Frame(MsgType t) : type(t) {}

  MsgType type = MsgType::Ack;

  Frame& put_u64(const std::string& k, std::uint64_t v) { return put(k, Val(v)); }
  Frame& put_i64(const std::string& k, std::int64_t v) { return put(k, Val(v)); }
  Frame& put_f64(const std::string& k, double v) { return put(k, Val(v)); }
  Frame& put_str(const std::string& k, std::string v) {
    return put(k, Val(std::move(v)));
  }
  Frame& put_tensor(const std::string& k, Tensor t) {
    return put(k, Val(std::move(t)));
  }

  bool has(const std::string& k) const { return find(k) != nullptr; }

  std::uint64_t u64(const std::string& k) const {
    return get_as<std::uint64_t>(k, "u64");
  }
  std::int64_t i64(const std::string& k) const {
    return get_as<std::int64_t>(k, "i64");
  }
  double f64(const std::string& k) const { return get_as<double>(k, "f64"); }
  const std::string& str(const std::string& k) const {
    return get_as<std::string>(k, "str");
  }
  const Tensor& tensor(const std::string& k) const {
    return get_as<Tensor>(k, "tensor");
  }

  std::uint64_t u64_or(const std::string& k, std::uint64_t dflt) const {
    return find(k) ? u64(k) : dflt;
  }
  std::string str_or(const std::string& k, std::string dflt) const {
    return find(k) ? str(k) : std::move(dflt);
  }
  double f64_or(const std::string& k, double dflt) const {
    return find(k) ? f64(k) : dflt;
  }

  const std::vector<std::pair<std::string, Val>>& fields() const {
    return fields_;
  }

  std::vector<std::uint8_t> encode() const {
    std::vector<std::uint8_t> body;
    detail::put_u32le(body, std::uint32_t(fields_.size()));
    for (const auto& [k, v] : fields_) {
      if (k.empty() || k.size() > 255)
        throw WireError("field key length out of range: " + k);
      body.push_back(std::uint8_t(k.size()));
      body.insert(body.end(), k.begin(), k.end());
      if (std::holds_alternative<std::uint64_t>(v)) {
        body.push_back('U');
        detail::put_u64le(body, std::get<std::uint64_t>(v));
      } else if (std::holds_alternative<std::int64_t>(v)) {
        body.push_back('I');
        detail::put_u64le(body, std::uint64_t(std::get<std::int64_t>(v)));
      } else if (std::holds_alternative<double>(v)) {
        body.push_back('D');
        std::uint64_t bits;
        const double d = std::get<double>(v);
        std::memcpy(&bits, &d, 8);
        detail::put_u64le(body, bits);
      } else if (std::holds_alternative<std::string>(v)) {
        const auto& s = std::get<std::string>(v);
        body.push_back('S');
        detail::put_u32le(body, std::uint32_t(s.size()));
        body.insert(body.end(), s.begin(), s.end());
      } else {
        const auto bytes = serialize_tensor(std::get<Tensor>(v));
        body.push_back('T');
        detail::put_u64le(body, bytes.size());
        body.insert(body.end(), bytes.begin(), bytes.end());
      }
    }
    std::vector<std::uint8_t> out;
    out.reserve(13 + body.size());
    out.insert(out.end(), {'P', 'S', 'H', '1'});
    out.push_back(std::uint8_t(type));
    detail::put_u64le(out, body.size());
    out.insert(out.end(), body.begin(), body.end());
    return out;
  }

  // Decodes a body given its already-validated header fields.
  static Frame decode_body(MsgType t, const std::uint8_t* p, std::size_t n) {
    Frame f(t);
    detail::WireReader r(p, n);
    const std::uint32_t count = r.u32();
    for (std::uint32_t i = 0; i < count; ++i) {
      const std::uint8_t klen = r.u8();
      if (klen == 0) throw WireError("empty field key");
      std::string key = r.bytes(klen);
      if (f.has(key)) throw WireError("duplicate field key: " + key);
      const std::uint8_t tag = r.u8();
      switch (tag) {
        case 'U': f.put(key, Val(r.u64())); break;
        case 'I': f.put(key, Val(std::int64_t(r.u64()))); break;
        case 'D': {
          const std::uint64_t bits = r.u64();
          double d;
          std::memcpy(&d, &bits, 8);
          f.put(key, Val(d));
          break;
        }
        case 'S': {
          const std::uint32_t len = r.u32();
          f.put(key, Val(r.bytes(len)));
          break;
        }
        case 'T': {
          const std::uint64_t len = r.u64();
          if (len > r.remaining()) throw WireError("tensor length overruns body");
          f.put(key, Val(deserialize_tensor(r.bytes(std::size_t(len)))));
          break;
        }
        default:
          throw WireError("unknown field tag " + std::to_string(tag));
      }
    }
    if (r.remaining() != 0) throw WireError("trailing bytes in frame body");
    return f;
  }

  static Frame decode(const std::uint8_t* p, std::size_t n) {
    if (n < 13) throw WireError("frame shorter than header");
    if (std::memcmp(p, "PSH1", 4) != 0) throw WireError("bad frame magic");
    const std::uint8_t t = p[4];
    if (t < 1 || t > 11) throw WireError("unknown message type");
    std::uint64_t blen = 0;
    for (int i = 0; i < 8; ++i) blen |= std::uint64_t(p[5 + i]) << (8 * i);
    if (blen != n - 13) throw WireError("frame length mismatch");
    return decode_body(MsgType(t), p + 13, std::size_t(blen));
  }

  static Frame decode(const std::vector<std::uint8_t>& bytes) {
    return decode(bytes.data(), bytes.size());
  }

 private:
  Frame& put(const std::string& k, Val v) {
    for (auto& [key, val] : fields_)
      if (key == k) {
        val = std::move(v);
        return *this;
      }
    fields_.emplace_back(k, std::move(v));
    return *this;
  }

  const Val* find(const std::string& k) const {
    for (const auto& [key, val] : fields_)
      if (key == k) return &val;
    return nullptr;
  }

  const Val& get(const std::string& k, const char* want) const {
    const Val* v = find(k);
    if (!v)
      throw WireError(std::string("missing field '") + k + "' (" + want + ")");
    return *v;
  }

  template <class T>
  const T& get_as(const std::string& k, const char* want) const {
    const Val& v = get(k, want);
    if (!std::holds_alternative<T>(v))
      throw WireError(std::string("field '") + k + "' is not " + want);
    return std::get<T>(v);
  }

  std::vector<std::pair<std::string, Val>> fields_;
};

// --- base64 (standard alphabet, '=' padding) ----------------------------------

inline std::string base64_encode(const std::uint8_t* p, std::size_t n) {
  static const char* tab =
      "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";
  std::string out;
  out.reserve((n + 2) / 3 * 4);
  for (std::size_t i = 0; i < n; i += 3) {
    std::uint32_t v = std::uint32_t(p[i]) << 16;
    if (i + 1 < n) v |= std::uint32_t(p[i + 1]) << 8;
    if (i + 2 < n) v |= std::uint32_t(p[i + 2]);
    out.push_back(tab[(v >> 18) & 63]);
    out.push_back(tab[(v >> 12) & 63]);
    out.push_back(i + 1 < n ? tab[(v >> 6) & 63] : '=');
    out.push_back(i + 2 < n ? tab[v & 63] : '=');
  }
  return out;
}

inline std::string base64_encode(const std::vector<std::uint8_t>& v) {
  return base64_encode(v.data(), v.size());
}

inline std::string base64_encode(const std::string& v) {
  return base64_encode(reinterpret_cast<const std::uint8_t*>(v.data()),
                       v.size());
}

inline std::vector<std::uint8_t> base64_decode(const std::string& s) {
  auto val = [](char c) -> int {
    if (c >= 'A' && c <= 'Z') return c - 'A';
    if (c >= 'a' && c <= 'z') return c - 'a' + 26;
    if (c >= '0' && c <= '9') return c - '0' + 52;
    if (c == '+') return 62;
    if (c == '/') return 63;
    return -1;
  };
  if (s.size() % 4 != 0) throw WireError("base64 length not a multiple of 4");
  std::vector<std::uint8_t> out;
  out.reserve(s.size() / 4 * 3);
  for (std::size_t i = 0; i < s.size(); i += 4) {
    int pad = 0;
    std::uint32_t v = 0;
    for (int j = 0; j < 4; ++j) {
      const char c = s[i + j];
      if (c == '=') {
        if (i + 4 != s.size() || j < 2) throw WireError("misplaced base64 pad");
        ++pad;
        v <<= 6;
        continue;
      }
      if (pad) throw WireError("base64 data after pad");
      const int d = val(c);
      if (d < 0) throw WireError("invalid base64 character");
      v = (v << 6) | std::uint32_t(d);
    }
    out.push_back(std::uint8_t(v >> 16));
    if (pad < 2) out.push_back(std::uint8_t(v >> 8));
    if (pad < 1) out.push_back(std::uint8_t(v));
  }
  return out;
}

inline std::string base64_decode_str(const std::string& s) {
  const auto v = base64_decode(s);
  return std::string(v.begin(), v.end());
}

}  // namespace psh
