#pragma once

// Seed-derived random permutations. Both parties run Fisher-Yates over the
// shared Rng stream, so a synced 64-bit seed yields the same bijection on
// each side without any permutation ever crossing the wire.

#include <cstdint>
#include <numeric>
#include <vector>

#include "psh/channel.hpp"
#include "psh/rng.hpp"
#include "psh/tensor.hpp"

namespace psh {

class Permutation {
 public:
  // Fisher-Yates: for i = n-1 .. 1, j = below(i+1), swap a[i] and a[j].
  static Permutation from_seed(std::uint64_t seed, std::size_t n) {
    if (n == 0) throw ProtocolError("permutation over empty vector");
    Permutation p;
    p.seed_ = seed;
    p.forward_.resize(n);
    std::iota(p.forward_.begin(), p.forward_.end(), std::size_t{0});
    Rng rng(seed);
    for (std::size_t i = n - 1; i > 0; --i) {
      const std::size_t j = std::size_t(rng.below(i + 1));
      std::swap(p.forward_[i], p.forward_[j]);
    }
    p.build_inverse();
    return p;
  }

  std::size_t size() const { return forward_.size(); }
  std::uint64_t seed() const { return seed_; }
  const std::vector<std::size_t>& forward() const { return forward_; }

  // out[i] = in[forward[i]]
  Tensor apply(const Tensor& x) const { return gather(x, forward_); }

  // exact inverse: apply_inverse(apply(x)) == x
  Tensor apply_inverse(const Tensor& x) const { return gather(x, inverse_); }

 private:
  Tensor gather(const Tensor& x, const std::vector<std::size_t>& idx) const {
    if (x.size() != forward_.size())
      throw ShapeError("permutation of length " +
                       std::to_string(forward_.size()) +
                       " applied to tensor of " + std::to_string(x.size()));
    Tensor out(x.shape());
    for (std::size_t i = 0; i < idx.size(); ++i) out[i] = x[idx[i]];
    return out;
  }

  void build_inverse() {
    inverse_.resize(forward_.size());
    for (std::size_t i = 0; i < forward_.size(); ++i) inverse_[forward_[i]] = i;
  }

  std::uint64_t seed_ = 0;
  std::vector<std::size_t> forward_;
  std::vector<std::size_t> inverse_;
};

}  // namespace psh
