#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include <memory>

#include "ps2man/objective.hpp"
#include "ps2man/rng.hpp"

using namespace ps2man;

namespace {

Tensor random_like(int c, int h, int w, Rng& rng) {
  Tensor t(1, c, h, w);
  for (float& v : t.vec()) v = rng.uniform(-1.0f, 1.0f);
  return t;
}

GeneratorOutput output_from(const Tensor& l1, const Tensor& l2,
                            const Tensor& l3) {
  GeneratorOutput out;
  out.levels = {l1, l2, l3};
  return out;
}

ResolutionPyramid pyramid_from(const Tensor& l1, const Tensor& l2,
                               const Tensor& l3) {
  ResolutionPyramid p;
  p.level1 = l1;
  p.level2 = l2;
  p.level3 = l3;
  return p;
}

LossParts ones_parts() {
  LossParts p;
  for (int i = 0; i < 3; ++i) {
    p.gan_a[i] = p.gan_b[i] = 1.0;
    p.syn_a[i] = p.syn_b[i] = 1.0;
    p.cyc_a[i] = p.cyc_b[i] = 1.0;
  }
  return p;
}

// flat-score discriminator: all weights zero, scoring bias = z
std::unique_ptr<Discriminator> flat_discriminator(float z, Rng& rng) {
  DiscriminatorSpec spec;
  spec.tokens = "C8-C16-C16-C16";
  spec.input_resolution = 64;
  auto d = std::make_unique<Discriminator>(spec, rng);
  for (const auto& p : d->registry().params())
    std::fill(p.w->begin(), p.w->end(),
              p.name == "score.bias" ? z : 0.0f);
  return d;
}

}  // namespace

TEST_CASE("total objective arithmetic") {
  LossWeights w;  // lambda 1, eta 0.7
  LossBreakdown bd = total_objective(ones_parts(), w);
  CHECK(bd.total == doctest::Approx(16.2).epsilon(1e-9));

  LossParts zeros;
  for (int i = 0; i < 3; ++i) {
    zeros.gan_a[i] = zeros.gan_b[i] = 0.0;
    zeros.syn_a[i] = zeros.syn_b[i] = 0.0;
    zeros.cyc_a[i] = zeros.cyc_b[i] = 0.0;
  }
  CHECK(total_objective(zeros, w).total == 0.0);

  LossWeights gan_only;
  gan_only.lambda = {0, 0, 0};
  gan_only.eta = {0, 0, 0};
  CHECK(total_objective(ones_parts(), gan_only).total ==
        doctest::Approx(6.0));

  LossParts missing = ones_parts();
  missing.cyc_b[1].reset();
  CHECK_THROWS_WITH_AS(total_objective(missing, w),
                       doctest::Contains("cyc_b2"), std::invalid_argument);
}

TEST_CASE("total objective is linear in each component") {
  Rng rng(3);
  LossWeights w;
  w.lambda = {0.9, 1.1, 1.3};
  w.eta = {0.5, 0.7, 0.2};
  LossParts parts = ones_parts();
  for (int i = 0; i < 3; ++i) {
    parts.gan_a[i] = rng.uniform_double(0, 2);
    parts.syn_b[i] = rng.uniform_double(0, 2);
    parts.cyc_a[i] = rng.uniform_double(0, 2);
  }
  const double base = total_objective(parts, w).total;

  LossParts bumped = parts;
  *bumped.syn_b[1] += 1.0;
  CHECK(total_objective(bumped, w).total - base ==
        doctest::Approx(w.lambda[1]).epsilon(1e-9));
  bumped = parts;
  *bumped.cyc_a[2] += 1.0;
  CHECK(total_objective(bumped, w).total - base ==
        doctest::Approx(w.eta[2]).epsilon(1e-9));
  bumped = parts;
  *bumped.gan_b[0] += 1.0;
  CHECK(total_objective(bumped, w).total - base ==
        doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("uninformative discriminator gives the ln 2 baselines") {
  Rng rng(5);
  auto d = flat_discriminator(0.0f, rng);
  Tensor real = random_like(3, 64, 64, rng);
  Tensor fake = random_like(3, 64, 64, rng);

  CHECK(adversarial_loss_d(*d, real, fake, GanMode::NonSaturating, false) ==
        doctest::Approx(2.0 * std::log(2.0)).epsilon(1e-6));
  CHECK(adversarial_loss_g(*d, fake, GanMode::NonSaturating, nullptr) ==
        doctest::Approx(std::log(2.0)).epsilon(1e-6));
}

TEST_CASE("saturated scores stay finite through the clamp") {
  Rng rng(7);
  // huge positive bias: sigmoid saturates to 1 well past float precision
  auto d = flat_discriminator(50.0f, rng);
  Tensor real = random_like(3, 64, 64, rng);
  Tensor fake = random_like(3, 64, 64, rng);

  const double dl = adversarial_loss_d(*d, real, fake, GanMode::NonSaturating,
                                       false);
  CHECK(std::isfinite(dl));
  // fake branch pays -log(1-p) at the clamp boundary
  CHECK(dl == doctest::Approx(-std::log(kScoreEps)).epsilon(1e-3));
  const double gl = adversarial_loss_g(*d, fake, GanMode::NonSaturating,
                                       nullptr);
  CHECK(std::isfinite(gl));
  CHECK(gl < 1e-6);  // generator fully fools it
}

TEST_CASE("generator loss strictly decreases as the scores rise") {
  Rng rng(9);
  Tensor fake = random_like(3, 64, 64, rng);
  double prev = 1e9;
  for (float z : {-2.0f, -1.0f, 0.0f, 1.0f, 2.0f}) {
    auto d = flat_discriminator(z, rng);
    const double loss =
        adversarial_loss_g(*d, fake, GanMode::NonSaturating, nullptr);
    CHECK(loss < prev);
    prev = loss;
  }
}

TEST_CASE("least-squares and saturating variants behave") {
  Rng rng(11);
  Tensor fake = random_like(3, 64, 64, rng);
  auto d = flat_discriminator(0.0f, rng);
  // scores are exactly 0 -> LS generator loss 0.5*(0-1)^2 = 0.5
  CHECK(adversarial_loss_g(*d, fake, GanMode::LeastSquares, nullptr) ==
        doctest::Approx(0.5).epsilon(1e-6));
  Tensor real = random_like(3, 64, 64, rng);
  CHECK(adversarial_loss_d(*d, real, fake, GanMode::LeastSquares, false) ==
        doctest::Approx(0.5).epsilon(1e-6));
  // saturating form: mean log(1-p) = log(1/2) at p = 1/2
  CHECK(adversarial_loss_g(*d, fake, GanMode::Saturating, nullptr) ==
        doctest::Approx(-std::log(2.0)).epsilon(1e-6));
}

TEST_CASE("synthesis and cycle losses against the elementwise oracle") {
  Rng rng(13);
  Tensor a1 = random_like(3, 8, 8, rng), b1 = random_like(3, 8, 8, rng);
  Tensor a2 = random_like(3, 16, 16, rng), b2 = random_like(3, 16, 16, rng);
  Tensor a3 = random_like(3, 32, 32, rng), b3 = random_like(3, 32, 32, rng);
  GeneratorOutput fake = output_from(a1, a2, a3);
  ResolutionPyramid target = pyramid_from(b1, b2, b3);

  auto oracle = [](const Tensor& x, const Tensor& y) {
    double acc = 0.0;
    for (size_t i = 0; i < x.size(); ++i)
      acc += std::abs(double(x.data()[i]) - y.data()[i]);
    return acc / double(x.size());
  };

  auto syn = synthesis_loss(fake, target);
  CHECK(syn[0] == doctest::Approx(oracle(a1, b1)).epsilon(1e-7));
  CHECK(syn[1] == doctest::Approx(oracle(a2, b2)).epsilon(1e-7));
  CHECK(syn[2] == doctest::Approx(oracle(a3, b3)).epsilon(1e-7));

  auto cyc = cycle_loss(fake, target);
  CHECK(cyc[0] == doctest::Approx(syn[0]));

  // identity and constant-offset cases
  auto zero = synthesis_loss(output_from(b1, b2, b3), target);
  CHECK(zero[0] == 0.0);
  CHECK(zero[1] == 0.0);
  CHECK(zero[2] == 0.0);

  Tensor c1 = b1, c2 = b2, c3 = b3;
  for (float& v : c1.vec()) v += 0.5f;
  for (float& v : c2.vec()) v += 0.5f;
  for (float& v : c3.vec()) v += 0.5f;
  auto off = synthesis_loss(output_from(c1, c2, c3), target);
  CHECK(off[0] == doctest::Approx(0.5).epsilon(1e-6));
  CHECK(off[2] == doctest::Approx(0.5).epsilon(1e-6));

  // level decoupling: change level 1 only
  Tensor a1b = a1;
  a1b.data()[5] += 0.25f;
  auto syn_b = synthesis_loss(output_from(a1b, a2, a3), target);
  CHECK(syn_b[0] != syn[0]);
  CHECK(syn_b[1] == syn[1]);
  CHECK(syn_b[2] == syn[2]);

  CHECK_THROWS_AS(synthesis_loss(output_from(a1, a2, a3),
                                 pyramid_from(b1, b2, b1)),
                  std::invalid_argument);
}

TEST_CASE("L1 gradient matches central differences on 8x8 tensors") {
  Rng rng(17);
  Tensor a = random_like(3, 8, 8, rng);
  Tensor b = random_like(3, 8, 8, rng);
  const double coeff = 0.7;
  Tensor grad = l1_grad(a, b, coeff);

  const float h = 1e-3f;
  for (size_t i = 0; i < a.size(); i += 11) {
    const float orig = a.data()[i];
    a.data()[i] = orig + h;
    const double lp = coeff * mean_abs_diff(a, b);
    a.data()[i] = orig - h;
    const double lm = coeff * mean_abs_diff(a, b);
    a.data()[i] = orig;
    const double fd = (lp - lm) / (2.0 * h);
    const double an = grad.data()[i];
    CHECK(std::abs(fd - an) <= 1e-3 * std::max(1.0, std::abs(fd)));
  }

  // every term nonnegative by construction
  Tensor x = random_like(3, 8, 8, rng), y = random_like(3, 8, 8, rng);
  CHECK(mean_abs_diff(x, y) >= 0.0);
}
