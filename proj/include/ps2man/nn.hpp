#pragma once

#include <memory>
#include <string>
#include <vector>

#include "ps2man/rng.hpp"
#include "ps2man/tensor.hpp"

namespace ps2man::nn {

enum class PadMode { Zero, Reflect };
enum class NormKind { Batch, Instance };

enum class ParamKind { ConvWeight, ConvBias, NormScale, NormShift };

/// Trainable parameter slot: weight values plus a gradient accumulator of
/// the same size. Registered by name so optimizers and checkpoints can walk
/// every network in a stable order.
struct ParamRef {
  std::string name;
  ParamKind kind;
  std::vector<float>* w;
  std::vector<float>* g;
};

/// Non-trainable state that still belongs in a checkpoint (running
/// normalization statistics).
struct BufferRef {
  std::string name;
  std::vector<float>* v;
};

class ParamRegistry {
 public:
  void add(std::string name, ParamKind kind, std::vector<float>* w,
           std::vector<float>* g) {
    params_.push_back({std::move(name), kind, w, g});
  }
  void add_buffer(std::string name, std::vector<float>* v) {
    buffers_.push_back({std::move(name), v});
  }
  const std::vector<ParamRef>& params() const { return params_; }
  const std::vector<BufferRef>& buffers() const { return buffers_; }

  size_t param_count() const {
    size_t n = 0;
    for (const auto& p : params_) n += p.w->size();
    return n;
  }
  void zero_grads() {
    for (auto& p : params_)
      std::fill(p.g->begin(), p.g->end(), 0.0f);
  }

 private:
  std::vector<ParamRef> params_;
  std::vector<BufferRef> buffers_;
};

/// 2-D convolution with im2col + GEMM forward/backward. Padding is applied
/// implicitly inside the patch gather, so reflect mode needs no extra
/// buffer. The layer keeps a pointer to its forward input; callers must keep
/// that tensor alive until backward() runs.
class Conv2d {
 public:
  Conv2d(int in_ch, int out_ch, int kernel, int stride, int pad,
         PadMode mode = PadMode::Zero);

  const Tensor& forward(const Tensor& x);
  /// Returns grad w.r.t. input; accumulates parameter grads when asked.
  Tensor backward(const Tensor& gy, bool param_grads = true);

  void register_into(ParamRegistry& reg, const std::string& prefix);
  const Tensor& output() const { return y_; }
  Tensor& output_mutable() { return y_; }
  int out_channels() const { return out_ch_; }
  int out_size(int in) const { return (in + 2 * pad_ - k_) / stride_ + 1; }

  std::vector<float>& weights() { return w_; }
  std::vector<float>& bias() { return b_; }

 private:
  int in_ch_, out_ch_, k_, stride_, pad_;
  PadMode mode_;
  std::vector<float> w_, gw_;  // (out_ch) x (in_ch*k*k), row-major
  std::vector<float> b_, gb_;
  const Tensor* x_ = nullptr;
  Tensor y_;
};

/// Fractionally-strided (transposed) convolution, the exact adjoint of a
/// stride-2 convolution. Weight layout (in_ch) x (out_ch*k*k) row-major.
class ConvTranspose2d {
 public:
  ConvTranspose2d(int in_ch, int out_ch, int kernel, int stride, int pad,
                  int out_pad);

  const Tensor& forward(const Tensor& x);
  Tensor backward(const Tensor& gy, bool param_grads = true);

  void register_into(ParamRegistry& reg, const std::string& prefix);
  const Tensor& output() const { return y_; }
  int out_channels() const { return out_ch_; }
  int out_size(int in) const {
    return (in - 1) * stride_ - 2 * pad_ + k_ + out_pad_;
  }

  std::vector<float>& weights() { return w_; }

 private:
  int in_ch_, out_ch_, k_, stride_, pad_, out_pad_;
  std::vector<float> w_, gw_;
  std::vector<float> b_, gb_;
  const Tensor* x_ = nullptr;
  Tensor y_;
};

/// Channel normalization. Batch mode normalizes over N*H*W and tracks
/// running statistics for inference; instance mode normalizes each sample's
/// plane independently and always uses current statistics.
class Norm2d {
 public:
  Norm2d(int channels, NormKind kind);

  const Tensor& forward(const Tensor& x, bool training);
  Tensor backward(const Tensor& gy, bool param_grads = true);

  void register_into(ParamRegistry& reg, const std::string& prefix);
  const Tensor& output() const { return y_; }
  Tensor& output_mutable() { return y_; }

  std::vector<float>& scale() { return gamma_; }
  std::vector<float>& shift() { return beta_; }

 private:
  int ch_;
  NormKind kind_;
  float eps_ = 1e-5f;
  float momentum_ = 0.1f;
  std::vector<float> gamma_, ggamma_, beta_, gbeta_;
  std::vector<float> running_mean_, running_var_;
  // saved statistics from the last training-mode forward, one entry per
  // normalization group (channel, or sample*channel for instance mode)
  std::vector<float> mu_, istd_;
  const Tensor* x_ = nullptr;
  Tensor y_;
  bool trained_forward_ = false;
};

/// ReLU applied in place on the caller's tensor; the mask for backward is
/// recovered from the activated values.
void relu_inplace(Tensor& t);
Tensor relu_backward(const Tensor& gy, const Tensor& y);

void leaky_relu_inplace(Tensor& t, float slope);
Tensor leaky_relu_backward(const Tensor& gy, const Tensor& y, float slope);

void tanh_inplace(Tensor& t);
Tensor tanh_backward(const Tensor& gy, const Tensor& y);

/// Draw fresh weights: convolution kernels ~ N(0, 0.02^2) with zero biases,
/// normalization scales ~ N(1, 0.02^2) with zero shifts.
void init_weights(ParamRegistry& reg, Rng& rng);

}  // namespace ps2man::nn
