#include "ps2man/generator.hpp"

#include <cctype>
#include <sstream>

namespace ps2man {

using nn::Conv2d;
using nn::ConvTranspose2d;
using nn::Norm2d;
using nn::PadMode;

// ---------------------------------------------------------------------------
// token parsing

namespace {

std::string trim(const std::string& s) {
  size_t a = s.find_first_not_of(" \t");
  size_t b = s.find_last_not_of(" \t");
  return a == std::string::npos ? "" : s.substr(a, b - a + 1);
}

int parse_int(const std::string& s, const std::string& token) {
  if (s.empty()) throw std::invalid_argument("bad generator token: " + token);
  for (char ch : s)
    if (!std::isdigit(static_cast<unsigned char>(ch)))
      throw std::invalid_argument("bad generator token: " + token);
  return std::stoi(s);
}

}  // namespace

std::vector<GeneratorStagePlan> parse_generator_tokens(
    const std::string& tokens) {
  std::vector<GeneratorStagePlan> plan;
  std::stringstream ss(tokens);
  std::string raw;
  while (std::getline(ss, raw, ',')) {
    std::string t = trim(raw);
    if (t.empty()) continue;
    GeneratorStagePlan p;
    if (t.rfind("C7S1-", 0) == 0) {
      p.kind = GeneratorStagePlan::Kind::Conv7;
      p.channels = parse_int(t.substr(5), t);
    } else if (t.rfind("C3-", 0) == 0) {
      p.kind = GeneratorStagePlan::Kind::Conv3Down;
      p.channels = parse_int(t.substr(3), t);
    } else if (t.rfind("RB", 0) == 0) {
      // RB256x9 (accept the multiplication sign too)
      std::string body = t.substr(2);
      size_t sep = body.find('x');
      size_t seplen = 1;
      if (sep == std::string::npos) {
        sep = body.find("\xc3\x97");  // UTF-8 multiplication sign
        seplen = 2;
      }
      if (sep == std::string::npos)
        throw std::invalid_argument("bad generator token: " + t);
      p.kind = GeneratorStagePlan::Kind::ResBlocks;
      p.channels = parse_int(body.substr(0, sep), t);
      p.count = parse_int(body.substr(sep + seplen), t);
    } else if (t.rfind("TC", 0) == 0) {
      p.kind = GeneratorStagePlan::Kind::Tconv;
      p.channels = parse_int(t.substr(2), t);
    } else {
      throw std::invalid_argument("bad generator token: " + t);
    }
    plan.push_back(p);
  }
  if (plan.empty())
    throw std::invalid_argument("generator spec has no tokens");
  if (plan.back().kind != GeneratorStagePlan::Kind::Conv7 ||
      plan.back().channels != 3)
    throw std::invalid_argument("generator spec must end with C7S1-3");
  plan.back().kind = GeneratorStagePlan::Kind::Output;
  return plan;
}

// ---------------------------------------------------------------------------
// trunk stages

struct Generator::Stage {
  virtual ~Stage() = default;
  virtual const Tensor& forward(const Tensor& x, bool training) = 0;
  virtual Tensor backward(const Tensor& gy, bool param_grads) = 0;
  virtual void register_into(nn::ParamRegistry& reg,
                             const std::string& prefix) = 0;
  virtual int out_channels() const = 0;
  virtual int out_size(int in) const = 0;
};

namespace {

struct ConvNormRelu final : Generator::Stage {
  Conv2d conv;
  Norm2d norm;

  ConvNormRelu(int in_ch, int out_ch, int k, int stride, int pad, PadMode pm,
               nn::NormKind nk)
      : conv(in_ch, out_ch, k, stride, pad, pm), norm(out_ch, nk) {}

  const Tensor& forward(const Tensor& x, bool training) override {
    norm.forward(conv.forward(x), training);
    nn::relu_inplace(norm.output_mutable());
    return norm.output();
  }
  Tensor backward(const Tensor& gy, bool pg) override {
    Tensor g = nn::relu_backward(gy, norm.output());
    g = norm.backward(g, pg);
    return conv.backward(g, pg);
  }
  void register_into(nn::ParamRegistry& reg, const std::string& p) override {
    conv.register_into(reg, p + ".conv");
    norm.register_into(reg, p + ".norm");
  }
  int out_channels() const override { return conv.out_channels(); }
  int out_size(int in) const override { return conv.out_size(in); }
};

struct TconvNormRelu final : Generator::Stage {
  ConvTranspose2d tconv;
  Norm2d norm;

  TconvNormRelu(int in_ch, int out_ch, nn::NormKind nk)
      : tconv(in_ch, out_ch, 3, 2, 1, 1), norm(out_ch, nk) {}

  const Tensor& forward(const Tensor& x, bool training) override {
    norm.forward(tconv.forward(x), training);
    nn::relu_inplace(norm.output_mutable());
    return norm.output();
  }
  Tensor backward(const Tensor& gy, bool pg) override {
    Tensor g = nn::relu_backward(gy, norm.output());
    g = norm.backward(g, pg);
    return tconv.backward(g, pg);
  }
  void register_into(nn::ParamRegistry& reg, const std::string& p) override {
    tconv.register_into(reg, p + ".tconv");
    norm.register_into(reg, p + ".norm");
  }
  int out_channels() const override { return tconv.out_channels(); }
  int out_size(int in) const override { return tconv.out_size(in); }
};

// Two 3x3 convs with normalization, ReLU after the first only, additive
// identity skip. Reflect padding keeps the spatial size.
struct ResBlock final : Generator::Stage {
  Conv2d conv1, conv2;
  Norm2d norm1, norm2;
  const Tensor* x_ = nullptr;

  ResBlock(int ch, nn::NormKind nk)
      : conv1(ch, ch, 3, 1, 1, PadMode::Reflect),
        conv2(ch, ch, 3, 1, 1, PadMode::Reflect),
        norm1(ch, nk), norm2(ch, nk) {}

  const Tensor& forward(const Tensor& x, bool training) override {
    x_ = &x;
    norm1.forward(conv1.forward(x), training);
    nn::relu_inplace(norm1.output_mutable());
    norm2.forward(conv2.forward(norm1.output()), training);
    axpy(norm2.output_mutable(), 1.0f, x);
    return norm2.output();
  }
  Tensor backward(const Tensor& gy, bool pg) override {
    Tensor g = norm2.backward(gy, pg);
    g = conv2.backward(g, pg);
    g = nn::relu_backward(g, norm1.output());
    g = norm1.backward(g, pg);
    g = conv1.backward(g, pg);
    axpy(g, 1.0f, gy);  // skip path
    return g;
  }
  void register_into(nn::ParamRegistry& reg, const std::string& p) override {
    conv1.register_into(reg, p + ".conv1");
    norm1.register_into(reg, p + ".norm1");
    conv2.register_into(reg, p + ".conv2");
    norm2.register_into(reg, p + ".norm2");
  }
  int out_channels() const override { return conv1.out_channels(); }
  int out_size(int in) const override { return in; }
};

struct OutputConvTanh final : Generator::Stage {
  Conv2d conv;

  OutputConvTanh(int in_ch)
      : conv(in_ch, 3, 7, 1, 3, PadMode::Reflect) {}

  const Tensor& forward(const Tensor& x, bool) override {
    conv.forward(x);
    nn::tanh_inplace(conv.output_mutable());
    return conv.output();
  }
  Tensor backward(const Tensor& gy, bool pg) override {
    Tensor g = nn::tanh_backward(gy, conv.output());
    return conv.backward(g, pg);
  }
  void register_into(nn::ParamRegistry& reg, const std::string& p) override {
    conv.register_into(reg, p + ".conv");
  }
  int out_channels() const override { return 3; }
  int out_size(int in) const override { return in; }
};

}  // namespace

// 3x3 conv + tanh image head tapping a trunk activation.
struct Generator::Head {
  Conv2d conv;
  explicit Head(int in_ch) : conv(in_ch, 3, 3, 1, 1, PadMode::Zero) {}

  const Tensor& forward(const Tensor& x) {
    conv.forward(x);
    nn::tanh_inplace(conv.output_mutable());
    return conv.output();
  }
  Tensor backward(const Tensor& gy, bool pg) {
    Tensor g = nn::tanh_backward(gy, conv.output());
    return conv.backward(g, pg);
  }
};

// ---------------------------------------------------------------------------
// Generator

Generator::Generator(const GeneratorSpec& spec, Rng& rng) : spec_(spec) {
  auto plan = parse_generator_tokens(spec.tokens);

  int ch = 3;
  int first_tconv = -1;
  for (size_t i = 0; i < plan.size(); ++i) {
    const auto& p = plan[i];
    switch (p.kind) {
      case GeneratorStagePlan::Kind::Conv7:
        trunk_.push_back(std::make_unique<ConvNormRelu>(
            ch, p.channels, 7, 1, 3, PadMode::Reflect, spec.norm));
        break;
      case GeneratorStagePlan::Kind::Conv3Down:
        trunk_.push_back(std::make_unique<ConvNormRelu>(
            ch, p.channels, 3, 2, 1, PadMode::Zero, spec.norm));
        break;
      case GeneratorStagePlan::Kind::ResBlocks:
        if (p.channels != ch)
          throw std::invalid_argument(
              "residual block width does not match trunk width");
        for (int r = 0; r < p.count; ++r)
          trunk_.push_back(std::make_unique<ResBlock>(ch, spec.norm));
        break;
      case GeneratorStagePlan::Kind::Tconv:
        if (first_tconv < 0) first_tconv = static_cast<int>(trunk_.size());
        trunk_.push_back(
            std::make_unique<TconvNormRelu>(ch, p.channels, spec.norm));
        break;
      case GeneratorStagePlan::Kind::Output:
        trunk_.push_back(std::make_unique<OutputConvTanh>(ch));
        break;
    }
    if (p.kind != GeneratorStagePlan::Kind::Output) ch = p.channels;
    else ch = 3;
  }

  if (first_tconv <= 0)
    throw std::invalid_argument("generator spec needs a TC decoder stage");
  tap1_ = first_tconv - 1;
  tap2_ = first_tconv;

  // head channel widths come from the tapped stages
  head1_ = std::make_unique<Head>(trunk_[tap1_]->out_channels());
  head2_ = std::make_unique<Head>(trunk_[tap2_]->out_channels());

  // resolution bookkeeping and the three-output contract
  int sz = spec.input_resolution;
  std::vector<int> sizes;
  for (auto& st : trunk_) {
    sz = st->out_size(sz);
    sizes.push_back(sz);
  }
  head_res_ = {sizes[tap1_], sizes[tap2_], sizes.back()};
  if (head_res_[0] * 4 != spec.input_resolution ||
      head_res_[1] * 2 != spec.input_resolution ||
      head_res_[2] != spec.input_resolution)
    throw std::invalid_argument(
        "generator spec does not yield outputs at 1/4, 1/2 and full "
        "resolution");

  for (size_t i = 0; i < trunk_.size(); ++i)
    trunk_[i]->register_into(reg_, "trunk" + std::to_string(i));
  head1_->conv.register_into(reg_, "head1.conv");
  head2_->conv.register_into(reg_, "head2.conv");

  nn::init_weights(reg_, rng);
}

Generator::~Generator() = default;

GeneratorOutput Generator::forward(const Tensor& x, bool training) {
  if (x.c() != 3 || x.h() != spec_.input_resolution ||
      x.w() != spec_.input_resolution)
    throw std::invalid_argument("generator expects 3x" +
                                std::to_string(spec_.input_resolution) + "x" +
                                std::to_string(spec_.input_resolution) +
                                " input, got " + x.shape_str());

  stage_out_.clear();
  const Tensor* cur = &x;
  for (auto& st : trunk_) {
    cur = &st->forward(*cur, training);
    stage_out_.push_back(cur);
  }
  GeneratorOutput out;
  out.levels[0] = head1_->forward(*stage_out_[tap1_]);
  out.levels[1] = head2_->forward(*stage_out_[tap2_]);
  out.levels[2] = *stage_out_.back();
  return out;
}

Tensor Generator::backward(const std::array<Tensor, 3>& grad_levels,
                           bool param_grads) {
  if (stage_out_.empty())
    throw std::logic_error("Generator::backward before forward");

  Tensor g;  // gradient w.r.t. the current stage output
  if (!grad_levels[2].empty()) g = grad_levels[2];
  for (int i = static_cast<int>(trunk_.size()) - 1; i >= 0; --i) {
    if (g.empty()) {
      g = Tensor(stage_out_[i]->n(), stage_out_[i]->c(), stage_out_[i]->h(),
                 stage_out_[i]->w());
    }
    if (i == tap2_ && !grad_levels[1].empty())
      axpy(g, 1.0f, head2_->backward(grad_levels[1], param_grads));
    if (i == tap1_ && !grad_levels[0].empty())
      axpy(g, 1.0f, head1_->backward(grad_levels[0], param_grads));
    g = trunk_[i]->backward(g, param_grads);
  }
  return g;
}

std::vector<std::array<int, 3>> Generator::trunk_shape_trace() const {
  std::vector<std::array<int, 3>> trace;
  int sz = spec_.input_resolution;
  for (const auto& st : trunk_) {
    sz = st->out_size(sz);
    trace.push_back({st->out_channels(), sz, sz});
  }
  return trace;
}

}  // namespace ps2man
