#pragma once

// Expression strings sent to parties for evaluation. Grammar:
//
//   expr := '(' op arg* ')'
//   op   := [a-z0-9_]+
//   arg  := 'k:' <uint64>    reference to a stored tensor
//         | 't:' <base64>    inline tensor, base64 of the tensor binary
//         | 'i:' <int64>     integer parameter (round tags, flags)
//         | 'f:' <double>    float parameter (learning rate, noise scale)
//         | 's:' [a-z0-9_.+-]+   symbol parameter (op kinds, fn names)
//         | expr             nested expression, evaluated innermost-first
//
// Tokens are whitespace-separated. Nesting lets one round trip carry a
// composed computation, e.g. (matmul (add k:1 k:2) k:3).

#include <cctype>
#include <cstdint>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "psh/tensor.hpp"
#include "psh/wire.hpp"

namespace psh {

struct ExprError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Expr;

struct Arg {
  enum class Kind : std::uint8_t { Key, Tensor, Int, Float, Sym, Sub };
  Kind kind = Kind::Key;
  std::uint64_t key = 0;
  Tensor tensor;
  std::int64_t i = 0;
  double f = 0.0;
  std::string sym;
  std::shared_ptr<Expr> sub;

  static Arg of_key(std::uint64_t k) {
    Arg a;
    a.kind = Kind::Key;
    a.key = k;
    return a;
  }
  static Arg of_tensor(Tensor t) {
    Arg a;
    a.kind = Kind::Tensor;
    a.tensor = std::move(t);
    return a;
  }
  static Arg of_int(std::int64_t v) {
    Arg a;
    a.kind = Kind::Int;
    a.i = v;
    return a;
  }
  static Arg of_float(double v) {
    Arg a;
    a.kind = Kind::Float;
    a.f = v;
    return a;
  }
  static Arg of_sym(std::string s) {
    Arg a;
    a.kind = Kind::Sym;
    a.sym = std::move(s);
    return a;
  }
  static Arg of_sub(Expr e);
};

struct Expr {
  std::string op;
  std::vector<Arg> args;
};

inline Arg Arg::of_sub(Expr e) {
  Arg a;
  a.kind = Kind::Sub;
  a.sub = std::make_shared<Expr>(std::move(e));
  return a;
}

namespace detail {

inline bool is_sym_char(char c) {
  return std::islower(std::uint8_t(c)) || std::isdigit(std::uint8_t(c)) ||
         c == '_' || c == '.' || c == '+' || c == '-';
}

class ExprParser {
 public:
  explicit ExprParser(const std::string& s) : s_(s) {}

  Expr parse() {
    Expr e = expr();
    skip_ws();
    if (pos_ != s_.size()) throw ExprError("trailing text after expression");
    return e;
  }

 private:
  Expr expr() {
    skip_ws();
    expect('(');
    skip_ws();
    Expr e;
    e.op = symbol("op name");
    for (;;) {
      skip_ws();
      if (pos_ >= s_.size()) throw ExprError("unterminated expression");
      if (s_[pos_] == ')') {
        ++pos_;
        return e;
      }
      e.args.push_back(arg());
    }
  }

  Arg arg() {
    if (s_[pos_] == '(') return Arg::of_sub(expr());
    if (pos_ + 1 < s_.size() && s_[pos_ + 1] == ':') {
      const char tag = s_[pos_];
      pos_ += 2;
      switch (tag) {
        case 'k': return Arg::of_key(parse_u64());
        case 'i': return Arg::of_int(parse_i64());
        case 'f': return Arg::of_float(parse_f64());
        case 's': return Arg::of_sym(symbol("symbol argument"));
        case 't': {
          const std::string b64 = base64_token();
          Tensor t;
          try {
            t = deserialize_tensor(base64_decode_str(b64));
          } catch (const std::exception& ex) {
            throw ExprError(std::string("bad inline tensor: ") + ex.what());
          }
          return Arg::of_tensor(std::move(t));
        }
        default:
          throw ExprError(std::string("unknown argument tag '") + tag + "'");
      }
    }
    throw ExprError("expected argument at offset " + std::to_string(pos_));
  }

  std::string symbol(const char* what) {
    const std::size_t start = pos_;
    while (pos_ < s_.size() && is_sym_char(s_[pos_])) ++pos_;
    if (pos_ == start)
      throw ExprError(std::string("expected ") + what + " at offset " +
                      std::to_string(start));
    return s_.substr(start, pos_ - start);
  }

  std::string base64_token() {
    const std::size_t start = pos_;
    while (pos_ < s_.size() &&
           (std::isalnum(std::uint8_t(s_[pos_])) || s_[pos_] == '+' ||
            s_[pos_] == '/' || s_[pos_] == '='))
      ++pos_;
    return s_.substr(start, pos_ - start);
  }

  std::uint64_t parse_u64() {
    const std::string tok = number_token();
    try {
      std::size_t used = 0;
      const std::uint64_t v = std::stoull(tok, &used);
      if (used != tok.size()) throw std::invalid_argument(tok);
      return v;
    } catch (const std::exception&) {
      throw ExprError("bad key id: " + tok);
    }
  }

  std::int64_t parse_i64() {
    const std::string tok = number_token();
    try {
      std::size_t used = 0;
      const std::int64_t v = std::stoll(tok, &used);
      if (used != tok.size()) throw std::invalid_argument(tok);
      return v;
    } catch (const std::exception&) {
      throw ExprError("bad integer: " + tok);
    }
  }

  double parse_f64() {
    const std::string tok = number_token();
    try {
      std::size_t used = 0;
      const double v = std::stod(tok, &used);
      if (used != tok.size()) throw std::invalid_argument(tok);
      return v;
    } catch (const std::exception&) {
      throw ExprError("bad float: " + tok);
    }
  }

  std::string number_token() {
    const std::size_t start = pos_;
    while (pos_ < s_.size() && !std::isspace(std::uint8_t(s_[pos_])) &&
           s_[pos_] != ')' && s_[pos_] != '(')
      ++pos_;
    if (pos_ == start) throw ExprError("expected a number");
    return s_.substr(start, pos_ - start);
  }

  void expect(char c) {
    if (pos_ >= s_.size() || s_[pos_] != c)
      throw ExprError(std::string("expected '") + c + "' at offset " +
                      std::to_string(pos_));
    ++pos_;
  }

  void skip_ws() {
    while (pos_ < s_.size() && std::isspace(std::uint8_t(s_[pos_]))) ++pos_;
  }

  const std::string& s_;
  std::size_t pos_ = 0;
};

}  // namespace detail

inline Expr parse_expr(const std::string& s) {
  return detail::ExprParser(s).parse();
}

inline std::string print_expr(const Expr& e);

inline std::string print_arg(const Arg& a) {
  switch (a.kind) {
    case Arg::Kind::Key: return "k:" + std::to_string(a.key);
    case Arg::Kind::Int: return "i:" + std::to_string(a.i);
    case Arg::Kind::Float: {
      std::ostringstream os;
      os.precision(17);  // round-trips any double
      os << "f:" << a.f;
      return os.str();
    }
    case Arg::Kind::Sym: return "s:" + a.sym;
    case Arg::Kind::Tensor:
      return "t:" + base64_encode(serialize_tensor(a.tensor));
    case Arg::Kind::Sub: return print_expr(*a.sub);
  }
  throw ExprError("corrupt argument");
}

inline std::string print_expr(const Expr& e) {
  std::string out = "(" + e.op;
  for (const auto& a : e.args) {
    out += ' ';
    out += print_arg(a);
  }
  out += ')';
  return out;
}

// Convenience builder: expr("add", Arg::of_key(1), Arg::of_key(2)).
template <typename... A>
Expr make_expr(std::string op, A&&... args) {
  Expr e;
  e.op = std::move(op);
  (e.args.push_back(std::forward<A>(args)), ...);
  return e;
}

}  // namespace psh
