#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "ps2man/discriminator.hpp"
#include "ps2man/generator.hpp"
#include "ps2man/rng.hpp"

using namespace ps2man;

namespace {

Tensor random_image(int n, int size, Rng& rng) {
  Tensor t(n, 3, size, size);
  for (float& v : t.vec()) v = rng.uniform(-1.0f, 1.0f);
  return t;
}

}  // namespace

TEST_CASE("generator token parsing rejects malformed specs") {
  CHECK_THROWS_AS(parse_generator_tokens("C7S1-64,whatever,C7S1-3"),
                  std::invalid_argument);
  CHECK_THROWS_AS(parse_generator_tokens("RBx9"), std::invalid_argument);
  CHECK_THROWS_AS(parse_generator_tokens(""), std::invalid_argument);
  // must end with the 3-channel output conv
  CHECK_THROWS_AS(parse_generator_tokens("C7S1-64,C3-128"),
                  std::invalid_argument);
  // fine: both x and the multiplication sign
  CHECK(parse_generator_tokens("C7S1-8,C3-16,RB16x2,TC8,TC4,C7S1-3").size() ==
        6);
  CHECK(parse_generator_tokens("C7S1-8,C3-16,RB16\xc3\x97"
                               "2,TC8,TC4,C7S1-3")
            .size() == 6);

  Rng rng(3);
  GeneratorSpec bad;
  bad.tokens = "C7S1-64,C3-128,C3-256,RB128x9,TC64,TC32,C7S1-3";
  CHECK_THROWS_AS(Generator(bad, rng), std::invalid_argument);
  GeneratorSpec no_tc;
  no_tc.tokens = "C7S1-64,C3-128,C7S1-3";
  CHECK_THROWS_AS(Generator(no_tc, rng), std::invalid_argument);
}

TEST_CASE("trunk shape trace matches the documented arithmetic") {
  Rng rng(1);
  GeneratorSpec spec;  // standard recipe at 256
  Generator g(spec, rng);

  auto trace = g.trunk_shape_trace();
  REQUIRE(trace.size() == 15);  // 3 encoder + 9 residual + 2 tconv + output
  CHECK(trace[0] == std::array<int, 3>{64, 256, 256});
  CHECK(trace[1] == std::array<int, 3>{128, 128, 128});
  CHECK(trace[2] == std::array<int, 3>{256, 64, 64});
  for (int i = 3; i < 12; ++i)
    CHECK(trace[i] == std::array<int, 3>{256, 64, 64});
  CHECK(trace[12] == std::array<int, 3>{64, 128, 128});
  CHECK(trace[13] == std::array<int, 3>{32, 256, 256});
  CHECK(trace[14] == std::array<int, 3>{3, 256, 256});
  CHECK(g.head_resolutions() == std::array<int, 3>{64, 128, 256});
}

TEST_CASE("zero residual blocks still yield a shape-consistent trunk") {
  Rng rng(2);
  GeneratorSpec spec;
  spec.tokens = "C7S1-8,C3-16,C3-32,RB32x0,TC16,TC8,C7S1-3";
  Generator g(spec, rng);
  CHECK(g.head_resolutions() == std::array<int, 3>{64, 128, 256});
  Tensor x = random_image(1, 256, rng);
  GeneratorOutput out = g.forward(x, false);
  CHECK(out.levels[0].h() == 64);
  CHECK(out.levels[2].h() == 256);
}

TEST_CASE("generator forward: shapes, tanh range, determinism, batching") {
  Rng rng(5);
  GeneratorSpec spec;
  spec.tokens = "C7S1-8,C3-16,C3-32,RB32x2,TC16,TC8,C7S1-3";
  Generator g(spec, rng);

  Tensor x = random_image(1, 256, rng);
  GeneratorOutput out = g.forward(x, false);
  CHECK(out.levels[0].shape_str() == "1x3x64x64");
  CHECK(out.levels[1].shape_str() == "1x3x128x128");
  CHECK(out.levels[2].shape_str() == "1x3x256x256");
  for (const auto& level : out.levels)
    for (float v : level.vec()) {
      CHECK(v > -1.0f);
      CHECK(v < 1.0f);
      CHECK(std::isfinite(v));
    }

  GeneratorOutput out2 = g.forward(x, false);
  for (int i = 0; i < 3; ++i)
    CHECK(out.levels[i].vec() == out2.levels[i].vec());

  // same seed, fresh network: bitwise identical weights and outputs
  Rng rng_b(5);
  Generator g2(spec, rng_b);
  Tensor x2 = random_image(1, 256, rng_b);
  (void)x2;
  GeneratorOutput out3 = g2.forward(x, false);
  CHECK(out.levels[2].vec() == out3.levels[2].vec());

  Tensor xb = random_image(2, 256, rng);
  GeneratorOutput outb = g.forward(xb, true);
  CHECK(outb.levels[0].shape_str() == "2x3x64x64");
  CHECK(outb.levels[2].shape_str() == "2x3x256x256");

  Tensor wrong = random_image(1, 128, rng);
  CHECK_THROWS_AS(g.forward(wrong, false), std::invalid_argument);
}

TEST_CASE("heads are taps: silencing the coarse head leaves level 3 alone") {
  Rng rng(7);
  GeneratorSpec spec;
  spec.tokens = "C7S1-8,C3-16,C3-32,RB32x1,TC16,TC8,C7S1-3";
  Generator g(spec, rng);
  Tensor x = random_image(1, 256, rng);
  GeneratorOutput before = g.forward(x, false);

  for (const auto& p : g.registry().params())
    if (p.name.rfind("head1", 0) == 0)
      std::fill(p.w->begin(), p.w->end(), 0.0f);

  GeneratorOutput after = g.forward(x, false);
  CHECK(before.levels[0].vec() != after.levels[0].vec());
  CHECK(before.levels[2].vec() == after.levels[2].vec());
}

TEST_CASE("a loss on the coarse head alone reaches the first encoder conv") {
  Rng rng(11);
  GeneratorSpec spec;
  spec.tokens = "C7S1-8,C3-16,C3-32,RB32x1,TC16,TC8,C7S1-3";
  Generator g(spec, rng);
  Tensor x = random_image(1, 256, rng);
  GeneratorOutput out = g.forward(x, true);

  std::array<Tensor, 3> grads;
  grads[0] = Tensor(1, 3, 64, 64);
  for (float& v : grads[0].vec()) v = rng.uniform(-1.0f, 1.0f);
  g.registry().zero_grads();
  Tensor gx = g.backward(grads, true);

  double first_conv_grad = 0.0;
  for (const auto& p : g.registry().params())
    if (p.name == "trunk0.conv.weight")
      for (float v : *p.g) first_conv_grad += std::abs(v);
  CHECK(first_conv_grad > 0.0);

  double input_grad = 0.0;
  for (float v : gx.vec()) input_grad += std::abs(v);
  CHECK(input_grad > 0.0);
}

TEST_CASE("whole-generator input gradient matches finite differences") {
  Rng rng(41);
  GeneratorSpec spec;
  spec.tokens = "C7S1-4,C3-6,C3-8,RB8x1,TC6,TC4,C7S1-3";
  spec.norm = nn::NormKind::Instance;  // stats are pure functions of x
  Generator g(spec, rng);
  Tensor x = random_image(1, 256, rng);

  // probe loss: fixed random projection of all three heads
  std::array<Tensor, 3> coeff;
  const int sizes[3] = {64, 128, 256};
  for (int i = 0; i < 3; ++i) {
    coeff[i] = Tensor(1, 3, sizes[i], sizes[i]);
    for (float& v : coeff[i].vec()) v = rng.uniform(-1.0f, 1.0f);
  }
  auto loss = [&](const Tensor& input) {
    GeneratorOutput out = g.forward(input, true);
    double acc = 0.0;
    for (int i = 0; i < 3; ++i)
      for (size_t j = 0; j < coeff[i].size(); ++j)
        acc += double(coeff[i].data()[j]) * out.levels[i].data()[j];
    return acc;
  };

  loss(x);
  Tensor gx = g.backward(coeff, false);

  // directional derivative: tolerance leaves room for ReLU kink crossings,
  // which central differences average while backward takes one side
  {
    Rng drng(100);
    Tensor delta(1, 3, 256, 256);
    for (float& v : delta.vec()) v = drng.uniform(-1.0f, 1.0f);
    double analytic = 0.0;
    for (size_t i = 0; i < gx.size(); ++i)
      analytic += double(gx.data()[i]) * delta.data()[i];
    const float h = 1e-3f;
    Tensor xp = x, xm = x;
    axpy(xp, h, delta);
    axpy(xm, -h, delta);
    const double fd = (loss(xp) - loss(xm)) / (2.0 * h);
    CHECK(std::abs(fd - analytic) / std::max(1.0, std::abs(fd)) < 0.15);
  }

  // the kink-free composition check: for a fixed forward state the
  // backward pass must be additive across the three head gradients, which
  // pins the tap accumulation wiring exactly
  loss(x);
  std::array<Tensor, 3> only;
  Tensor sum_of_parts;
  for (int i = 0; i < 3; ++i) {
    only = {};
    only[i] = coeff[i];
    Tensor part = g.backward(only, false);
    if (i == 0) sum_of_parts = part;
    else axpy(sum_of_parts, 1.0f, part);
  }
  Tensor joint = g.backward(coeff, false);
  double num = 0.0, den = 0.0;
  for (size_t i = 0; i < joint.size(); ++i) {
    num += std::abs(double(joint.data()[i]) - sum_of_parts.data()[i]);
    den += std::abs(double(joint.data()[i]));
  }
  CHECK(num / den < 1e-4);
}

TEST_CASE("discriminator patch maps: 30/14/6 at 256/128/64") {
  Rng rng(13);
  const int expected[3][2] = {{256, 30}, {128, 14}, {64, 6}};
  for (auto [res, patch] : expected) {
    DiscriminatorSpec spec;
    spec.input_resolution = res;
    Discriminator d(spec, rng);
    CHECK(d.patch_map_size() == patch);
    Tensor x = random_image(2, res, rng);
    const Tensor& logits = d.forward(x, false);
    CHECK(logits.shape_str() == "2x1x" + std::to_string(patch) + "x" +
                                    std::to_string(patch));
    PatchScoreMap map = d.score(x);
    for (float v : map.scores.vec()) {
      CHECK(v > 0.0f);
      CHECK(v < 1.0f);
    }
  }

  DiscriminatorSpec bad;
  bad.tokens = "C64-Q128";
  CHECK_THROWS_AS(Discriminator(bad, rng), std::invalid_argument);
  DiscriminatorSpec bad_res;
  bad_res.input_resolution = 100;
  CHECK_THROWS_AS(Discriminator(bad_res, rng), std::invalid_argument);

  DiscriminatorSpec spec256;
  Discriminator d(spec256, rng);
  Tensor wrong = random_image(1, 128, rng);
  CHECK_THROWS_AS(d.forward(wrong, false), std::invalid_argument);
}

TEST_CASE("fresh weights follow the 0.02 recipe at full width") {
  Rng rng(17);
  GeneratorSpec spec;  // full width, > 10^7 conv parameters
  Generator g(spec, rng);

  double sum = 0.0, sq = 0.0;
  size_t n = 0;
  for (const auto& p : g.registry().params())
    if (p.kind == nn::ParamKind::ConvWeight)
      for (float v : *p.w) {
        sum += v;
        sq += double(v) * v;
        ++n;
      }
  REQUIRE(n > 100000);
  const double mean = sum / double(n);
  const double stdev = std::sqrt(sq / double(n) - mean * mean);
  CHECK(std::abs(mean) < 0.002);
  CHECK(stdev > 0.018);
  CHECK(stdev < 0.022);

  double scale_sum = 0.0;
  size_t sn = 0;
  for (const auto& p : g.registry().params())
    if (p.kind == nn::ParamKind::NormScale)
      for (float v : *p.w) {
        scale_sum += v;
        ++sn;
      }
  CHECK(scale_sum / double(sn) == doctest::Approx(1.0).epsilon(0.01));
}
