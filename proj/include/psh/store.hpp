#pragma once

// Per-party tensor store: 64-bit key -> tensor, with explicit free. The
// party assigns keys; whoever drives the party owns the lifecycle (nothing
// is garbage-collected).

#include <cstdint>
#include <mutex>
#include <stdexcept>
#include <string>
#include <unordered_map>

#include "psh/tensor.hpp"

namespace psh {

struct UnknownKey : std::runtime_error {
  explicit UnknownKey(std::uint64_t k)
      : std::runtime_error("unknown tensor key " + std::to_string(k)) {}
};

class TensorStore {
 public:
  std::uint64_t put(Tensor t) {
    std::lock_guard lk(mu_);
    const std::uint64_t k = next_++;
    map_.emplace(k, std::move(t));
    return k;
  }

  Tensor get(std::uint64_t key) const {
    std::lock_guard lk(mu_);
    auto it = map_.find(key);
    if (it == map_.end()) throw UnknownKey(key);
    return it->second;
  }

  // In-place overwrite of an existing entry (parameter updates).
  void update(std::uint64_t key, Tensor t) {
    std::lock_guard lk(mu_);
    auto it = map_.find(key);
    if (it == map_.end()) throw UnknownKey(key);
    it->second = std::move(t);
  }

  void free(std::uint64_t key) {
    std::lock_guard lk(mu_);
    if (map_.erase(key) == 0) throw UnknownKey(key);
  }

  bool has(std::uint64_t key) const {
    std::lock_guard lk(mu_);
    return map_.count(key) != 0;
  }

  std::size_t size() const {
    std::lock_guard lk(mu_);
    return map_.size();
  }

 private:
  mutable std::mutex mu_;
  std::unordered_map<std::uint64_t, Tensor> map_;
  std::uint64_t next_ = 1;
};

}  // namespace psh
