#pragma once

#include <vector>

#include "ps2man/rng.hpp"
#include "ps2man/tensor.hpp"

namespace ps2man {

/// Pool of previously generated fakes. Discriminators train on a mix of
/// fresh and historical fakes, which damps oscillation between the two
/// players. Capacity 0 disables the pool (push returns the input).
class ReplayBuffer {
 public:
  explicit ReplayBuffer(int capacity) : capacity_(capacity) {}

  /// Below capacity: store a copy and return the incoming fake. Once full:
  /// with probability 1/2 return the incoming fake untouched, otherwise
  /// swap it with a uniformly chosen stored one and return the old image.
  Tensor push_sample(const Tensor& fake, Rng& rng) {
    if (capacity_ <= 0) return fake;
    if (static_cast<int>(pool_.size()) < capacity_) {
      pool_.push_back(fake);
      return fake;
    }
    if (rng.bernoulli(0.5)) return fake;
    const size_t idx = rng.next_index(pool_.size());
    Tensor old = std::move(pool_[idx]);
    pool_[idx] = fake;
    return old;
  }

  int capacity() const { return capacity_; }
  size_t size() const { return pool_.size(); }
  std::vector<Tensor>& pool() { return pool_; }
  const std::vector<Tensor>& pool() const { return pool_; }

 private:
  int capacity_;
  std::vector<Tensor> pool_;
};

}  // namespace ps2man
