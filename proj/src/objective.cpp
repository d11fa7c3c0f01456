#include "ps2man/objective.hpp"

#include <cmath>

namespace ps2man {

namespace {

inline double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

// Mean BCE of sigmoid(logits) against a constant target with clamped
// probabilities. Fills dlogits (same shape) when non-null; the gradient is
// zero wherever the clamp is active.
double bce_patch(const Tensor& logits, double target, Tensor* dlogits) {
  const size_t n = logits.size();
  if (dlogits) dlogits->resize(logits.n(), logits.c(), logits.h(), logits.w());
  double acc = 0.0;
  const float* z = logits.data();
  float* dz = dlogits ? dlogits->data() : nullptr;
  for (size_t i = 0; i < n; ++i) {
    double p = sigmoid(z[i]);
    const bool clamped = p < kScoreEps || p > 1.0 - kScoreEps;
    p = std::min(1.0 - kScoreEps, std::max(kScoreEps, p));
    acc += -(target * std::log(p) + (1.0 - target) * std::log(1.0 - p));
    if (dz) dz[i] = clamped ? 0.0f : static_cast<float>((p - target) / n);
  }
  return acc / double(n);
}

// LSGAN term: 0.5 * mean((z - target)^2) on raw scores.
double ls_patch(const Tensor& logits, double target, Tensor* dlogits) {
  const size_t n = logits.size();
  if (dlogits) dlogits->resize(logits.n(), logits.c(), logits.h(), logits.w());
  double acc = 0.0;
  const float* z = logits.data();
  float* dz = dlogits ? dlogits->data() : nullptr;
  for (size_t i = 0; i < n; ++i) {
    const double d = z[i] - target;
    acc += 0.5 * d * d;
    if (dz) dz[i] = static_cast<float>(d / n);
  }
  return acc / double(n);
}

// Saturating generator term: mean log(1 - p), minimized.
double saturating_patch(const Tensor& logits, Tensor* dlogits) {
  const size_t n = logits.size();
  if (dlogits) dlogits->resize(logits.n(), logits.c(), logits.h(), logits.w());
  double acc = 0.0;
  const float* z = logits.data();
  float* dz = dlogits ? dlogits->data() : nullptr;
  for (size_t i = 0; i < n; ++i) {
    double p = sigmoid(z[i]);
    const bool clamped = p < kScoreEps || p > 1.0 - kScoreEps;
    p = std::min(1.0 - kScoreEps, std::max(kScoreEps, p));
    acc += std::log(1.0 - p);
    if (dz) dz[i] = clamped ? 0.0f : static_cast<float>(-p / n);
  }
  return acc / double(n);
}

}  // namespace

LossBreakdown total_objective(const LossParts& parts, const LossWeights& w) {
  auto need = [](const std::optional<double>& v, const char* name, int i) {
    if (!v)
      throw std::invalid_argument(std::string("total_objective: missing ") +
                                  name + std::to_string(i + 1) +
                                  " (ablated terms must be explicit zeros)");
    return *v;
  };
  LossBreakdown out;
  for (int i = 0; i < 3; ++i) {
    out.gan_a[i] = need(parts.gan_a[i], "gan_a", i);
    out.gan_b[i] = need(parts.gan_b[i], "gan_b", i);
    out.syn_a[i] = need(parts.syn_a[i], "syn_a", i);
    out.syn_b[i] = need(parts.syn_b[i], "syn_b", i);
    out.cyc_a[i] = need(parts.cyc_a[i], "cyc_a", i);
    out.cyc_b[i] = need(parts.cyc_b[i], "cyc_b", i);
    out.total += out.gan_a[i] + out.gan_b[i] +
                 w.lambda[i] * (out.syn_a[i] + out.syn_b[i]) +
                 w.eta[i] * (out.cyc_a[i] + out.cyc_b[i]);
  }
  return out;
}

double adversarial_loss_d(Discriminator& d, const Tensor& real,
                          const Tensor& fake, GanMode mode,
                          bool accumulate_grads) {
  check_same_shape(real, fake, "adversarial_loss_d");
  const bool ls = mode == GanMode::LeastSquares;

  Tensor dz;
  const Tensor& zr = d.forward(real, /*training=*/true);
  double loss = ls ? ls_patch(zr, 1.0, accumulate_grads ? &dz : nullptr)
                   : bce_patch(zr, 1.0, accumulate_grads ? &dz : nullptr);
  if (accumulate_grads) d.backward(dz, /*param_grads=*/true);

  const Tensor& zf = d.forward(fake, /*training=*/true);
  loss += ls ? ls_patch(zf, 0.0, accumulate_grads ? &dz : nullptr)
             : bce_patch(zf, 0.0, accumulate_grads ? &dz : nullptr);
  if (accumulate_grads) d.backward(dz, /*param_grads=*/true);
  return loss;
}

double adversarial_loss_g(Discriminator& d, const Tensor& fake, GanMode mode,
                          Tensor* grad_fake) {
  Tensor dz;
  Tensor* dzp = grad_fake ? &dz : nullptr;
  const Tensor& z = d.forward(fake, /*training=*/true);
  double loss;
  switch (mode) {
    case GanMode::LeastSquares: loss = ls_patch(z, 1.0, dzp); break;
    case GanMode::Saturating: loss = saturating_patch(z, dzp); break;
    default: loss = bce_patch(z, 1.0, dzp); break;
  }
  if (grad_fake) *grad_fake = d.backward(dz, /*param_grads=*/false);
  return loss;
}

std::array<double, 3> synthesis_loss(const GeneratorOutput& fake,
                                     const ResolutionPyramid& target) {
  return {mean_abs_diff(fake.levels[0], target.level(0)),
          mean_abs_diff(fake.levels[1], target.level(1)),
          mean_abs_diff(fake.levels[2], target.level(2))};
}

std::array<double, 3> cycle_loss(const GeneratorOutput& reconstruction,
                                 const ResolutionPyramid& source) {
  return {mean_abs_diff(reconstruction.levels[0], source.level(0)),
          mean_abs_diff(reconstruction.levels[1], source.level(1)),
          mean_abs_diff(reconstruction.levels[2], source.level(2))};
}

Tensor l1_grad(const Tensor& a, const Tensor& b, double coeff) {
  check_same_shape(a, b, "l1_grad");
  Tensor g(a.n(), a.c(), a.h(), a.w());
  const float s = static_cast<float>(coeff / double(a.size()));
  const float* pa = a.data();
  const float* pb = b.data();
  float* pg = g.data();
  for (size_t i = 0; i < a.size(); ++i) {
    const float d = pa[i] - pb[i];
    pg[i] = d > 0.0f ? s : (d < 0.0f ? -s : 0.0f);
  }
  return g;
}

}  // namespace ps2man
