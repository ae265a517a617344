#pragma once

// Dense row-major tensor of doubles. The universal value type of the
// framework: every protocol message and model parameter is one of these.

#include <cmath>
#include <cstdint>
#include <cstring>
#include <initializer_list>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace psh {

struct ShapeError : std::runtime_error {
  explicit ShapeError(const std::string& what) : std::runtime_error(what) {}
};

using Shape = std::vector<std::size_t>;

inline std::string shape_str(const Shape& s) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < s.size(); ++i) os << (i ? "," : "") << s[i];
  os << ']';
  return os.str();
}

class Tensor {
 public:
  Tensor() = default;

  explicit Tensor(Shape shape) : shape_(std::move(shape)) {
    data_.assign(count(shape_), 0.0);
  }

  Tensor(Shape shape, std::vector<double> data)
      : shape_(std::move(shape)), data_(std::move(data)) {
    if (count(shape_) != data_.size())
      throw ShapeError("tensor data length " + std::to_string(data_.size()) +
                       " does not match shape " + shape_str(shape_));
  }

  static Tensor matrix(std::size_t r, std::size_t c, std::vector<double> data) {
    return Tensor({r, c}, std::move(data));
  }

  static Tensor matrix(std::initializer_list<std::initializer_list<double>> rows) {
    const std::size_t r = rows.size();
    const std::size_t c = r ? rows.begin()->size() : 0;
    std::vector<double> data;
    data.reserve(r * c);
    for (const auto& row : rows) {
      if (row.size() != c) throw ShapeError("matrix: ragged initializer rows");
      data.insert(data.end(), row.begin(), row.end());
    }
    return Tensor({r, c}, std::move(data));
  }

  static Tensor zeros(Shape shape) { return Tensor(std::move(shape)); }

  static Tensor full(Shape shape, double v) {
    Tensor t(std::move(shape));
    for (auto& x : t.data_) x = v;
    return t;
  }

  static Tensor identity(std::size_t n) {
    Tensor t({n, n});
    for (std::size_t i = 0; i < n; ++i) t.data_[i * n + i] = 1.0;
    return t;
  }

  const Shape& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t size() const { return data_.size(); }

  // rank-2 accessors
  std::size_t rows() const { return dim(0); }
  std::size_t cols() const { return dim(1); }
  std::size_t dim(std::size_t i) const {
    return i < shape_.size() ? shape_[i] : 1;
  }

  double& at(std::size_t r, std::size_t c) { return data_[r * cols() + c]; }
  double at(std::size_t r, std::size_t c) const { return data_[r * cols() + c]; }
  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  std::vector<double>& data() { return data_; }
  const std::vector<double>& data() const { return data_; }

  bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }

  bool all_finite() const {
    for (double v : data_)
      if (!std::isfinite(v)) return false;
    return true;
  }

  Tensor reshaped(Shape shape) const {
    if (count(shape) != data_.size())
      throw ShapeError("reshape to " + shape_str(shape) + " from " +
                       shape_str(shape_));
    return Tensor(std::move(shape), data_);
  }

  Tensor flat() const { return reshaped({data_.size()}); }

  static std::size_t count(const Shape& s) {
    std::size_t n = 1;
    for (auto d : s) {
      if (d == 0) throw ShapeError("zero dimension in shape " + shape_str(s));
      n *= d;
    }
    return n;
  }

 private:
  Shape shape_;
  std::vector<double> data_;
};

namespace detail {
inline void require_same_shape(const Tensor& a, const Tensor& b,
                               const char* op) {
  if (!a.same_shape(b))
    throw ShapeError(std::string(op) + ": shape mismatch " +
                     shape_str(a.shape()) + " vs " + shape_str(b.shape()));
}
}  // namespace detail

inline Tensor add(const Tensor& a, const Tensor& b) {
  detail::require_same_shape(a, b, "add");
  Tensor out = a;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += b[i];
  return out;
}

inline Tensor sub(const Tensor& a, const Tensor& b) {
  detail::require_same_shape(a, b, "sub");
  Tensor out = a;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] -= b[i];
  return out;
}

inline Tensor mul(const Tensor& a, const Tensor& b) {
  detail::require_same_shape(a, b, "mul");
  Tensor out = a;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= b[i];
  return out;
}

inline Tensor scale(const Tensor& a, double c) {
  Tensor out = a;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= c;
  return out;
}

// a + c*b, fused so optimizer updates are a single pass
inline Tensor add_scaled(const Tensor& a, double c, const Tensor& b) {
  detail::require_same_shape(a, b, "add_scaled");
  Tensor out = a;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += c * b[i];
  return out;
}

// Fixed i-k-j loop so the summation order (and hence every rounding) is
// identical on every run and every party.
inline Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.cols() != b.rows())
    throw ShapeError("matmul: inner dimension mismatch " +
                     shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
  Tensor out({m, n});
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t p = 0; p < k; ++p) {
      const double aip = a[i * k + p];
      for (std::size_t j = 0; j < n; ++j) out[i * n + j] += aip * b[p * n + j];
    }
  return out;
}

inline Tensor transpose(const Tensor& a) {
  if (a.rank() != 2) throw ShapeError("transpose: rank-2 only");
  Tensor out({a.cols(), a.rows()});
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) out.at(j, i) = a.at(i, j);
  return out;
}

// Broadcast a 1xC bias row onto every row of a. The only broadcasting the
// tensor layer supports.
inline Tensor add_rowbias(const Tensor& a, const Tensor& bias) {
  if (a.rank() != 2 || bias.rank() != 2 || bias.rows() != 1 ||
      bias.cols() != a.cols())
    throw ShapeError("add_rowbias: need MxC and 1xC, got " +
                     shape_str(a.shape()) + " and " + shape_str(bias.shape()));
  Tensor out = a;
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) out.at(i, j) += bias.at(0, j);
  return out;
}

// Column sums as a 1xC row (bias gradients).
inline Tensor colsum(const Tensor& a) {
  if (a.rank() != 2) throw ShapeError("colsum: rank-2 only");
  Tensor out({1, a.cols()});
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) out.at(0, j) += a.at(i, j);
  return out;
}

inline double sum(const Tensor& a) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i];
  return s;
}

inline double max_abs_diff(const Tensor& a, const Tensor& b) {
  detail::require_same_shape(a, b, "max_abs_diff");
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i)
    m = std::max(m, std::fabs(a[i] - b[i]));
  return m;
}

template <class F>
inline Tensor map(const Tensor& a, F&& f) {
  Tensor out = a;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = f(out[i]);
  return out;
}

// --- binary serialization -------------------------------------------------
// rank as 8-byte little-endian unsigned, then each dim as 8-byte
// little-endian unsigned, then the data as IEEE-754 little-endian doubles.
// This layout is used verbatim on the wire.

namespace detail {
inline void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(char((v >> (8 * i)) & 0xff));
}
inline std::uint64_t get_u64(const unsigned char* p) {
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= std::uint64_t(p[i]) << (8 * i);
  return v;
}
inline void put_f64(std::string& out, double d) {
  std::uint64_t bits;
  std::memcpy(&bits, &d, 8);
  put_u64(out, bits);
}
inline double get_f64(const unsigned char* p) {
  std::uint64_t bits = get_u64(p);
  double d;
  std::memcpy(&d, &bits, 8);
  return d;
}
}  // namespace detail

struct SerializeError : std::runtime_error {
  explicit SerializeError(const std::string& what) : std::runtime_error(what) {}
};

inline void serialize_tensor(const Tensor& t, std::string& out) {
  detail::put_u64(out, t.rank());
  for (auto d : t.shape()) detail::put_u64(out, d);
  for (std::size_t i = 0; i < t.size(); ++i) detail::put_f64(out, t[i]);
}

inline std::string serialize_tensor(const Tensor& t) {
  std::string out;
  out.reserve(8 + 8 * t.rank() + 8 * t.size());
  serialize_tensor(t, out);
  return out;
}

// Reads one tensor starting at `off`; advances `off` past it.
inline Tensor deserialize_tensor(const std::string& in, std::size_t& off) {
  const auto* p = reinterpret_cast<const unsigned char*>(in.data());
  auto need = [&](std::size_t n) {
    if (in.size() - off < n) throw SerializeError("tensor blob truncated");
  };
  need(8);
  std::uint64_t rank = detail::get_u64(p + off);
  off += 8;
  if (rank > 8) throw SerializeError("tensor rank " + std::to_string(rank));
  Shape shape(rank);
  std::uint64_t n = 1;
  for (std::uint64_t i = 0; i < rank; ++i) {
    need(8);
    shape[i] = detail::get_u64(p + off);
    off += 8;
    if (shape[i] == 0 || n > (1ull << 40) / (shape[i] ? shape[i] : 1))
      throw SerializeError("bad tensor dimension");
    n *= shape[i];
  }
  need(8 * n);
  std::vector<double> data(n);
  for (std::uint64_t i = 0; i < n; ++i) {
    data[i] = detail::get_f64(p + off);
    off += 8;
  }
  Tensor t(std::move(shape), std::move(data));
  if (!t.all_finite()) throw SerializeError("non-finite value in tensor blob");
  return t;
}

inline Tensor deserialize_tensor(const std::string& in) {
  std::size_t off = 0;
  Tensor t = deserialize_tensor(in, off);
  if (off != in.size()) throw SerializeError("trailing bytes after tensor");
  return t;
}

}  // namespace psh
