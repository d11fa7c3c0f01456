#include "ps2man/adam.hpp"

#include <cmath>

namespace ps2man {

Adam::Adam(nn::ParamRegistry& reg, double beta1, double beta2, double eps)
    : reg_(&reg), beta1_(beta1), beta2_(beta2), eps_(eps) {
  for (const auto& p : reg.params()) {
    m_.emplace_back(p.w->size(), 0.0f);
    v_.emplace_back(p.w->size(), 0.0f);
  }
}

void Adam::step(double lr) {
  ++t_;
  const float b1 = static_cast<float>(beta1_);
  const float b2 = static_cast<float>(beta2_);
  const float corr = static_cast<float>(
      lr * std::sqrt(1.0 - std::pow(beta2_, double(t_))) /
      (1.0 - std::pow(beta1_, double(t_))));
  const float eps = static_cast<float>(eps_);

  const auto& params = reg_->params();
  for (size_t i = 0; i < params.size(); ++i) {
    float* w = params[i].w->data();
    const float* g = params[i].g->data();
    float* m = m_[i].data();
    float* v = v_[i].data();
    const size_t n = params[i].w->size();
    for (size_t j = 0; j < n; ++j) {
      m[j] = b1 * m[j] + (1.0f - b1) * g[j];
      v[j] = b2 * v[j] + (1.0f - b2) * g[j] * g[j];
      w[j] -= corr * m[j] / (std::sqrt(v[j]) + eps);
    }
  }
}

}  // namespace ps2man
