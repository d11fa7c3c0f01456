#pragma once

#include <memory>
#include <string>
#include <vector>

#include "ps2man/nn.hpp"
#include "ps2man/rng.hpp"
#include "ps2man/tensor.hpp"

namespace ps2man {

/// Patch discriminator recipe. Tokens "C64-C128-C256-C512" describe 4x4
/// convolutions; all listed layers stride 2 except the last, which runs at
/// stride 1, followed by a stride-1 single-channel scoring convolution.
/// That stack sees a 70x70 receptive field at full resolution.
struct DiscriminatorSpec {
  std::string tokens = "C64-C128-C256-C512";
  int input_resolution = 256;  // one of 64, 128, 256
  nn::NormKind norm = nn::NormKind::Batch;
  bool normalize_first_block = false;
  float leaky_slope = 0.2f;
};

/// Spatial grid of per-patch real/fake probabilities.
struct PatchScoreMap {
  Tensor scores;  // (n, 1, ph, pw), sigmoid outputs
};

class Discriminator {
 public:
  Discriminator(const DiscriminatorSpec& spec, Rng& rng);
  ~Discriminator();
  Discriminator(const Discriminator&) = delete;
  Discriminator& operator=(const Discriminator&) = delete;

  /// Raw patch logits (n, 1, ph, pw).
  const Tensor& forward(const Tensor& x, bool training = true);
  Tensor backward(const Tensor& gy, bool param_grads = true);

  PatchScoreMap score(const Tensor& x);

  nn::ParamRegistry& registry() { return reg_; }
  const DiscriminatorSpec& spec() const { return spec_; }
  int patch_map_size() const;

 private:
  struct Block;
  DiscriminatorSpec spec_;
  std::vector<std::unique_ptr<Block>> blocks_;
  std::unique_ptr<nn::Conv2d> score_conv_;
  nn::ParamRegistry reg_;
};

}  // namespace ps2man
