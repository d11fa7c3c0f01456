#pragma once

#include <array>
#include <memory>
#include <string>
#include <vector>

#include "ps2man/nn.hpp"
#include "ps2man/rng.hpp"
#include "ps2man/tensor.hpp"

namespace ps2man {

/// Declarative layer recipe for a generator. Tokens:
///   C7S1-k  7x7 conv, stride 1, reflect padding, norm + ReLU
///           (as the final token, k must be 3 and the layer ends in tanh)
///   C3-k    3x3 conv, stride 2, norm + ReLU
///   RBkxm   m residual blocks of width k
///   TCk     3x3 transposed conv, stride 1/2, norm + ReLU
/// Image outputs are tapped at three decoder points: after the residual
/// stack, after the first transposed conv, and at the final layer.
struct GeneratorSpec {
  std::string tokens = "C7S1-64,C3-128,C3-256,RB256x9,TC64,TC32,C7S1-3";
  nn::NormKind norm = nn::NormKind::Batch;
  int input_resolution = 256;
};

/// The three synthesized images, coarse to fine (64, 128, 256 for the
/// standard recipe). All values are tanh outputs in (-1, 1).
struct GeneratorOutput {
  std::array<Tensor, 3> levels;

  const Tensor& level1() const { return levels[0]; }
  const Tensor& level2() const { return levels[1]; }
  const Tensor& level3() const { return levels[2]; }
};

/// Encoder / residual bottleneck / decoder generator with image heads at
/// three resolutions. forward() keeps every intermediate activation so a
/// single backward() can push gradients from any combination of heads down
/// to the input.
class Generator {
 public:
  Generator(const GeneratorSpec& spec, Rng& rng);
  ~Generator();
  Generator(const Generator&) = delete;
  Generator& operator=(const Generator&) = delete;

  GeneratorOutput forward(const Tensor& x, bool training = true);

  /// grad_levels holds dLoss/dOutput per head; an empty tensor means no
  /// gradient flows from that head. Returns dLoss/dInput.
  Tensor backward(const std::array<Tensor, 3>& grad_levels,
                  bool param_grads = true);

  nn::ParamRegistry& registry() { return reg_; }
  const GeneratorSpec& spec() const { return spec_; }

  /// (channels, height, width) after each trunk stage for the nominal
  /// input resolution.
  std::vector<std::array<int, 3>> trunk_shape_trace() const;
  std::array<int, 3> head_resolutions() const { return head_res_; }

  struct Stage;
  struct Head;

 private:
  GeneratorSpec spec_;
  std::vector<std::unique_ptr<Stage>> trunk_;
  std::unique_ptr<Head> head1_, head2_;
  int tap1_ = -1, tap2_ = -1;  // trunk indices the heads attach to
  std::array<int, 3> head_res_{0, 0, 0};
  nn::ParamRegistry reg_;
  std::vector<const Tensor*> stage_out_;  // activations of the last forward
};

/// One parsed generator token.
struct GeneratorStagePlan {
  enum class Kind { Conv7, Conv3Down, ResBlocks, Tconv, Output } kind;
  int channels = 0;
  int count = 1;  // residual block repeat
};

/// Parses the token string; throws std::invalid_argument on malformed
/// tokens. Exposed separately so specs can be validated without building.
std::vector<GeneratorStagePlan> parse_generator_tokens(
    const std::string& tokens);

}  // namespace ps2man
