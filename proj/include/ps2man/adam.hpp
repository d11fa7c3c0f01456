#pragma once

#include <cstdint>
#include <vector>

#include "ps2man/nn.hpp"

namespace ps2man {

/// Adam over one parameter registry. Moment buffers are owned here so the
/// whole optimizer state can be checkpointed alongside the weights.
class Adam {
 public:
  explicit Adam(nn::ParamRegistry& reg, double beta1 = 0.5,
                double beta2 = 0.999, double eps = 1e-8);

  void step(double lr);

  int64_t steps_taken() const { return t_; }
  void set_steps_taken(int64_t t) { t_ = t; }
  std::vector<std::vector<float>>& first_moments() { return m_; }
  std::vector<std::vector<float>>& second_moments() { return v_; }

 private:
  nn::ParamRegistry* reg_;
  double beta1_, beta2_, eps_;
  int64_t t_ = 0;
  std::vector<std::vector<float>> m_, v_;
};

}  // namespace ps2man
