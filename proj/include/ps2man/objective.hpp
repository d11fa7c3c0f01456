#pragma once

#include <array>
#include <optional>

#include "ps2man/discriminator.hpp"
#include "ps2man/generator.hpp"
#include "ps2man/pyramid.hpp"
#include "ps2man/tensor.hpp"

namespace ps2man {

enum class GanMode {
  NonSaturating,  // generator maximizes log D(fake)  (default)
  Saturating,     // generator minimizes log(1 - D(fake)) literally
  LeastSquares,   // LSGAN on raw scores
};

/// Per-level weights: lambda for the synthesis (L1-to-target) terms and eta
/// for the cycle terms, both shared across the two directions.
struct LossWeights {
  std::array<double, 3> lambda{1.0, 1.0, 1.0};
  std::array<double, 3> eta{0.7, 0.7, 0.7};
};

/// Every component of the objective, per level and direction, plus the
/// weighted sum. Components are stored unweighted.
struct LossBreakdown {
  std::array<double, 3> gan_a{}, gan_b{};
  std::array<double, 3> syn_a{}, syn_b{};
  std::array<double, 3> cyc_a{}, cyc_b{};
  double total = 0.0;
};

/// Inputs to total_objective. Every slot must be filled; an ablated term is
/// an explicit zero, not an absent value.
struct LossParts {
  std::array<std::optional<double>, 3> gan_a, gan_b;
  std::array<std::optional<double>, 3> syn_a, syn_b;
  std::array<std::optional<double>, 3> cyc_a, cyc_b;
};

/// total = sum_i gan_a[i] + gan_b[i] + lambda[i]*(syn_a[i] + syn_b[i])
///               + eta[i]*(cyc_a[i] + cyc_b[i]).
/// Throws if any of the 18 terms is missing.
LossBreakdown total_objective(const LossParts& parts, const LossWeights& w);

/// Discriminator loss on a real/fake pair at its resolution:
/// BCE(score(real) -> 1) + BCE(score(fake) -> 0), mean over the patch map.
/// Scores are clamped to [eps, 1-eps] inside the logs so saturated maps
/// stay finite. When accumulate_grads is set, parameter gradients for both
/// terms are accumulated into the discriminator.
double adversarial_loss_d(Discriminator& d, const Tensor& real,
                          const Tensor& fake, GanMode mode,
                          bool accumulate_grads);

/// Generator-side adversarial loss on an attached fake. With grad_fake
/// non-null the gradient w.r.t. the fake image is returned through it;
/// discriminator parameters are never touched.
double adversarial_loss_g(Discriminator& d, const Tensor& fake, GanMode mode,
                          Tensor* grad_fake);

/// Per-level mean absolute error between synthesized pyramid and target.
std::array<double, 3> synthesis_loss(const GeneratorOutput& fake,
                                     const ResolutionPyramid& target);

/// Per-level mean absolute error between a reconstruction and its source.
std::array<double, 3> cycle_loss(const GeneratorOutput& reconstruction,
                                 const ResolutionPyramid& source);

/// d/da [coeff * mean |a - b|]  (sign convention: 0 where a == b).
Tensor l1_grad(const Tensor& a, const Tensor& b, double coeff);

/// Patch-map clamp applied inside the BCE logs.
inline constexpr double kScoreEps = 1e-7;

}  // namespace ps2man
