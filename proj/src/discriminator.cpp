#include "ps2man/discriminator.hpp"

#include <cctype>
#include <cmath>
#include <sstream>

namespace ps2man {

using nn::Conv2d;
using nn::Norm2d;
using nn::PadMode;

struct Discriminator::Block {
  Conv2d conv;
  std::unique_ptr<Norm2d> norm;  // absent on the first block by default
  float slope;

  Block(int in_ch, int out_ch, int stride, bool with_norm, nn::NormKind nk,
        float leaky)
      : conv(in_ch, out_ch, 4, stride, 1, PadMode::Zero), slope(leaky) {
    if (with_norm) norm = std::make_unique<Norm2d>(out_ch, nk);
  }

  const Tensor& forward(const Tensor& x, bool training) {
    if (norm) {
      norm->forward(conv.forward(x), training);
      nn::leaky_relu_inplace(norm->output_mutable(), slope);
      return norm->output();
    }
    conv.forward(x);
    nn::leaky_relu_inplace(conv.output_mutable(), slope);
    return conv.output();
  }
  Tensor backward(const Tensor& gy, bool pg) {
    if (norm) {
      Tensor g = nn::leaky_relu_backward(gy, norm->output(), slope);
      g = norm->backward(g, pg);
      return conv.backward(g, pg);
    }
    Tensor g = nn::leaky_relu_backward(gy, conv.output(), slope);
    return conv.backward(g, pg);
  }
  void register_into(nn::ParamRegistry& reg, const std::string& p) {
    conv.register_into(reg, p + ".conv");
    if (norm) norm->register_into(reg, p + ".norm");
  }
};

namespace {

std::vector<int> parse_discriminator_tokens(const std::string& tokens) {
  std::vector<int> widths;
  std::stringstream ss(tokens);
  std::string t;
  while (std::getline(ss, t, '-')) {
    if (t.empty()) continue;
    if (t[0] != 'C')
      throw std::invalid_argument("bad discriminator token: " + t);
    std::string num = t.substr(1);
    for (char ch : num)
      if (!std::isdigit(static_cast<unsigned char>(ch)))
        throw std::invalid_argument("bad discriminator token: " + t);
    widths.push_back(std::stoi(num));
  }
  if (widths.empty())
    throw std::invalid_argument("discriminator spec has no tokens");
  return widths;
}

}  // namespace

Discriminator::Discriminator(const DiscriminatorSpec& spec, Rng& rng)
    : spec_(spec) {
  if (spec.input_resolution != 64 && spec.input_resolution != 128 &&
      spec.input_resolution != 256)
    throw std::invalid_argument("discriminator resolution must be 64/128/256");

  auto widths = parse_discriminator_tokens(spec.tokens);
  int ch = 3;
  for (size_t i = 0; i < widths.size(); ++i) {
    const bool last = i + 1 == widths.size();
    const bool with_norm = i > 0 || spec.normalize_first_block;
    blocks_.push_back(std::make_unique<Block>(ch, widths[i], last ? 1 : 2,
                                              with_norm, spec.norm,
                                              spec.leaky_slope));
    ch = widths[i];
  }
  score_conv_ = std::make_unique<Conv2d>(ch, 1, 4, 1, 1, PadMode::Zero);

  for (size_t i = 0; i < blocks_.size(); ++i)
    blocks_[i]->register_into(reg_, "block" + std::to_string(i));
  score_conv_->register_into(reg_, "score");

  nn::init_weights(reg_, rng);
}

Discriminator::~Discriminator() = default;

const Tensor& Discriminator::forward(const Tensor& x, bool training) {
  if (x.c() != 3 || x.h() != spec_.input_resolution ||
      x.w() != spec_.input_resolution)
    throw std::invalid_argument(
        "discriminator expects 3x" + std::to_string(spec_.input_resolution) +
        "x" + std::to_string(spec_.input_resolution) + " input, got " +
        x.shape_str());
  const Tensor* cur = &x;
  for (auto& b : blocks_) cur = &b->forward(*cur, training);
  return score_conv_->forward(*cur);
}

Tensor Discriminator::backward(const Tensor& gy, bool param_grads) {
  Tensor g = score_conv_->backward(gy, param_grads);
  for (int i = static_cast<int>(blocks_.size()) - 1; i >= 0; --i)
    g = blocks_[i]->backward(g, param_grads);
  return g;
}

PatchScoreMap Discriminator::score(const Tensor& x) {
  const Tensor& logits = forward(x, /*training=*/false);
  PatchScoreMap map;
  map.scores = logits;
  for (float& v : map.scores.vec()) v = 1.0f / (1.0f + std::exp(-v));
  return map;
}

int Discriminator::patch_map_size() const {
  int sz = spec_.input_resolution;
  for (const auto& b : blocks_) sz = b->conv.out_size(sz);
  return score_conv_->out_size(sz);
}

}  // namespace ps2man
