#include "ps2man/nn.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <cstring>

#if defined(__GLIBC__)
#include <malloc.h>
#endif

namespace ps2man::nn {

namespace {

#if defined(__GLIBC__)
// Multi-megabyte activation buffers are allocated and freed every step;
// keep them in the heap instead of round-tripping through mmap, which
// costs a page-zeroing fault storm per iteration.
struct MallocTuning {
  MallocTuning() {
    mallopt(M_MMAP_THRESHOLD, 1 << 30);
    mallopt(M_TRIM_THRESHOLD, 1 << 30);
  }
};
const MallocTuning g_malloc_tuning;
#endif

using RowMat = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapRow = Eigen::Map<RowMat>;
using MapRowC = Eigen::Map<const RowMat>;

thread_local std::vector<float> g_col;   // patch matrix scratch
thread_local std::vector<float> g_col2;  // second scratch for backward

inline int reflect(int i, int n) {
  // mirror without repeating the edge sample: -1 -> 1, n -> n-2
  while (i < 0 || i >= n) {
    if (i < 0) i = -i;
    else i = 2 * n - 2 - i;
  }
  return i;
}

// Gather k*k patches of a single sample into a (c*k*k) x (oh*ow) matrix,
// row-major: row (ch, ky, kx) holds that tap for every output position, so
// the inner loops stream over whole image rows.
// Only output rows [oy0, oy1) are gathered; the tile's columns are indexed
// from the tile start so the matrix is (c*k*k) x ((oy1-oy0)*ow).
void im2col(const float* x, int c, int h, int w, int k, int stride, int pad,
            PadMode mode, int oh, int ow, int oy0, int oy1, float* col) {
  const size_t tile_cols = static_cast<size_t>(oy1 - oy0) * ow;
  #pragma omp parallel for schedule(static)
  for (int ch = 0; ch < c; ++ch) {
    const float* plane = x + static_cast<size_t>(ch) * h * w;
    for (int ky = 0; ky < k; ++ky)
      for (int kx = 0; kx < k; ++kx) {
        float* row =
            col + (static_cast<size_t>(ch) * k * k + ky * k + kx) * tile_cols;
        for (int oy = oy0; oy < oy1; ++oy) {
          const int iy = oy * stride - pad + ky;
          float* dst = row + static_cast<size_t>(oy - oy0) * ow;
          if (iy < 0 || iy >= h) {
            if (mode == PadMode::Zero) {
              std::memset(dst, 0, sizeof(float) * ow);
              continue;
            }
          }
          const float* srow =
              plane + static_cast<size_t>(mode == PadMode::Zero
                                              ? iy
                                              : reflect(iy, h)) * w;
          const int ix0 = kx - pad;
          if (stride == 1) {
            // contiguous span, ragged ends handled separately
            const int lo = std::max(0, -ix0);
            const int hi = std::min(ow, w - ix0);
            for (int ox = lo - 1; ox >= 0; --ox)
              dst[ox] = mode == PadMode::Zero ? 0.0f
                                              : srow[reflect(ix0 + ox, w)];
            if (hi > lo)
              std::memcpy(dst + lo, srow + ix0 + lo,
                          sizeof(float) * (hi - lo));
            for (int ox = std::max(hi, lo); ox < ow; ++ox)
              dst[ox] = mode == PadMode::Zero ? 0.0f
                                              : srow[reflect(ix0 + ox, w)];
          } else {
            for (int ox = 0; ox < ow; ++ox) {
              const int ix = ox * stride + ix0;
              if (ix >= 0 && ix < w) dst[ox] = srow[ix];
              else
                dst[ox] = mode == PadMode::Zero ? 0.0f : srow[reflect(ix, w)];
            }
          }
        }
      }
  }
}

// Adjoint of im2col: scatter-add the tap rows back onto the input plane.
void col2im(const float* col, int c, int h, int w, int k, int stride, int pad,
            PadMode mode, int oh, int ow, int oy0, int oy1, float* gx) {
  const size_t tile_cols = static_cast<size_t>(oy1 - oy0) * ow;
  #pragma omp parallel for schedule(static)
  for (int ch = 0; ch < c; ++ch) {
    float* plane = gx + static_cast<size_t>(ch) * h * w;
    for (int ky = 0; ky < k; ++ky)
      for (int kx = 0; kx < k; ++kx) {
        const float* row =
            col + (static_cast<size_t>(ch) * k * k + ky * k + kx) * tile_cols;
        for (int oy = oy0; oy < oy1; ++oy) {
          const int iy = oy * stride - pad + ky;
          const float* src = row + static_cast<size_t>(oy - oy0) * ow;
          if ((iy < 0 || iy >= h) && mode == PadMode::Zero) continue;
          float* drow =
              plane + static_cast<size_t>(mode == PadMode::Zero
                                              ? iy
                                              : reflect(iy, h)) * w;
          const int ix0 = kx - pad;
          if (stride == 1) {
            const int lo = std::max(0, -ix0);
            const int hi = std::min(ow, w - ix0);
            if (mode == PadMode::Reflect)
              for (int ox = 0; ox < lo; ++ox)
                drow[reflect(ix0 + ox, w)] += src[ox];
            for (int ox = lo; ox < hi; ++ox) drow[ix0 + ox] += src[ox];
            if (mode == PadMode::Reflect)
              for (int ox = std::max(hi, lo); ox < ow; ++ox)
                drow[reflect(ix0 + ox, w)] += src[ox];
          } else {
            for (int ox = 0; ox < ow; ++ox) {
              const int ix = ox * stride + ix0;
              if (ix >= 0 && ix < w) drow[ix] += src[ox];
              else if (mode == PadMode::Reflect)
                drow[reflect(ix, w)] += src[ox];
            }
          }
        }
      }
  }
}


// Rows per column tile: bounded scratch keeps the patch matrix cache
// resident. The constant is part of the numerics contract (weight-grad
// accumulation order), so it never adapts to the machine.
constexpr size_t kColTileFloats = size_t(1.5 * 1024 * 1024);

inline int tile_rows(int K, int ow, int oh) {
  const int rows = int(std::max<size_t>(1, kColTileFloats / (size_t(K) * ow)));
  return std::min(rows, oh);
}

using StrideMap = Eigen::Map<RowMat, 0, Eigen::OuterStride<>>;
using StrideMapC = Eigen::Map<const RowMat, 0, Eigen::OuterStride<>>;

}  // namespace

// ---------------------------------------------------------------------------
// Conv2d

Conv2d::Conv2d(int in_ch, int out_ch, int kernel, int stride, int pad,
               PadMode mode)
    : in_ch_(in_ch), out_ch_(out_ch), k_(kernel), stride_(stride), pad_(pad),
      mode_(mode),
      w_(static_cast<size_t>(out_ch) * in_ch * kernel * kernel, 0.0f),
      gw_(w_.size(), 0.0f), b_(out_ch, 0.0f), gb_(out_ch, 0.0f) {}

const Tensor& Conv2d::forward(const Tensor& x) {
  if (x.c() != in_ch_)
    throw std::invalid_argument("Conv2d: expected " + std::to_string(in_ch_) +
                                " channels, got " + x.shape_str());
  const int oh = out_size(x.h()), ow = out_size(x.w());
  x_ = &x;
  y_.resize(x.n(), out_ch_, oh, ow);

  const int K = in_ch_ * k_ * k_;
  const size_t hw = static_cast<size_t>(oh) * ow;
  const int tile = tile_rows(K, ow, oh);
  g_col.resize(static_cast<size_t>(K) * tile * ow);
  MapRowC wm(w_.data(), out_ch_, K);
  for (int n = 0; n < x.n(); ++n) {
    for (int oy0 = 0; oy0 < oh; oy0 += tile) {
      const int oy1 = std::min(oh, oy0 + tile);
      const size_t tn = static_cast<size_t>(oy1 - oy0) * ow;
      im2col(x.plane(n, 0), in_ch_, x.h(), x.w(), k_, stride_, pad_, mode_,
             oh, ow, oy0, oy1, g_col.data());
      MapRowC cm(g_col.data(), K, tn);
      StrideMap ym(y_.plane(n, 0) + size_t(oy0) * ow, out_ch_, tn,
                   Eigen::OuterStride<>(long(hw)));
      ym.noalias() = wm * cm;
      for (int c = 0; c < out_ch_; ++c) ym.row(c).array() += b_[c];
    }
  }
  return y_;
}

Tensor Conv2d::backward(const Tensor& gy, bool param_grads) {
  const Tensor& x = *x_;
  check_same_shape(gy, y_, "Conv2d::backward");
  const int oh = gy.h(), ow = gy.w();
  const int K = in_ch_ * k_ * k_;
  const size_t hw = static_cast<size_t>(oh) * ow;
  const int tile = tile_rows(K, ow, oh);

  Tensor gx(x.n(), x.c(), x.h(), x.w());
  g_col.resize(static_cast<size_t>(K) * tile * ow);
  g_col2.resize(static_cast<size_t>(K) * tile * ow);
  MapRowC wm(w_.data(), out_ch_, K);
  MapRow gwm(gw_.data(), out_ch_, K);
  for (int n = 0; n < x.n(); ++n) {
    for (int oy0 = 0; oy0 < oh; oy0 += tile) {
      const int oy1 = std::min(oh, oy0 + tile);
      const size_t tn = static_cast<size_t>(oy1 - oy0) * ow;
      StrideMapC gym(gy.plane(n, 0) + size_t(oy0) * ow, out_ch_, tn,
                     Eigen::OuterStride<>(long(hw)));
      // input gradient
      MapRow gcol(g_col2.data(), K, tn);
      gcol.noalias() = wm.transpose() * gym;
      col2im(g_col2.data(), in_ch_, x.h(), x.w(), k_, stride_, pad_, mode_,
             oh, ow, oy0, oy1, gx.plane(n, 0));
      if (param_grads) {
        im2col(x.plane(n, 0), in_ch_, x.h(), x.w(), k_, stride_, pad_, mode_,
               oh, ow, oy0, oy1, g_col.data());
        MapRowC cm(g_col.data(), K, tn);
        gwm.noalias() += gym * cm.transpose();
      }
    }
    if (param_grads) {
      // plain double accumulation: Eigen's vectorized sum reorders with
      // buffer alignment, which breaks bitwise reproducibility
      for (int c = 0; c < out_ch_; ++c) {
        const float* p = gy.plane(n, c);
        double acc = 0.0;
        for (size_t i = 0; i < hw; ++i) acc += p[i];
        gb_[c] += static_cast<float>(acc);
      }
    }
  }
  return gx;
}

void Conv2d::register_into(ParamRegistry& reg, const std::string& prefix) {
  reg.add(prefix + ".weight", ParamKind::ConvWeight, &w_, &gw_);
  reg.add(prefix + ".bias", ParamKind::ConvBias, &b_, &gb_);
}

// ---------------------------------------------------------------------------
// ConvTranspose2d

ConvTranspose2d::ConvTranspose2d(int in_ch, int out_ch, int kernel, int stride,
                                 int pad, int out_pad)
    : in_ch_(in_ch), out_ch_(out_ch), k_(kernel), stride_(stride), pad_(pad),
      out_pad_(out_pad),
      w_(static_cast<size_t>(in_ch) * out_ch * kernel * kernel, 0.0f),
      gw_(w_.size(), 0.0f), b_(out_ch, 0.0f), gb_(out_ch, 0.0f) {}

const Tensor& ConvTranspose2d::forward(const Tensor& x) {
  if (x.c() != in_ch_)
    throw std::invalid_argument("ConvTranspose2d: expected " +
                                std::to_string(in_ch_) + " channels, got " +
                                x.shape_str());
  const int oh = out_size(x.h()), ow = out_size(x.w());
  x_ = &x;
  y_.resize(x.n(), out_ch_, oh, ow);

  const int K = out_ch_ * k_ * k_;
  const size_t hw_in = static_cast<size_t>(x.h()) * x.w();
  const int tile = tile_rows(K, x.w(), x.h());
  g_col.resize(static_cast<size_t>(K) * tile * x.w());
  MapRowC wm(w_.data(), in_ch_, K);
  for (int n = 0; n < x.n(); ++n) {
    for (int iy0 = 0; iy0 < x.h(); iy0 += tile) {
      const int iy1 = std::min(x.h(), iy0 + tile);
      const size_t tn = static_cast<size_t>(iy1 - iy0) * x.w();
      StrideMapC xm(x.plane(n, 0) + size_t(iy0) * x.w(), in_ch_, tn,
                    Eigen::OuterStride<>(long(hw_in)));
      MapRow cm(g_col.data(), K, tn);
      cm.noalias() = wm.transpose() * xm;
      // scatter: input positions play the role of conv output positions
      col2im(g_col.data(), out_ch_, oh, ow, k_, stride_, pad_, PadMode::Zero,
             x.h(), x.w(), iy0, iy1, y_.plane(n, 0));
    }
    float* yp = y_.plane(n, 0);
    for (int c = 0; c < out_ch_; ++c) {
      float bv = b_[c];
      float* p = yp + static_cast<size_t>(c) * oh * ow;
      for (size_t i = 0; i < static_cast<size_t>(oh) * ow; ++i) p[i] += bv;
    }
  }
  return y_;
}

Tensor ConvTranspose2d::backward(const Tensor& gy, bool param_grads) {
  const Tensor& x = *x_;
  check_same_shape(gy, y_, "ConvTranspose2d::backward");
  const int K = out_ch_ * k_ * k_;
  const size_t hw_in = static_cast<size_t>(x.h()) * x.w();

  Tensor gx(x.n(), x.c(), x.h(), x.w());
  const int tile = tile_rows(K, x.w(), x.h());
  g_col.resize(static_cast<size_t>(K) * tile * x.w());
  MapRowC wm(w_.data(), in_ch_, K);
  MapRow gwm(gw_.data(), in_ch_, K);
  for (int n = 0; n < x.n(); ++n) {
    for (int iy0 = 0; iy0 < x.h(); iy0 += tile) {
      const int iy1 = std::min(x.h(), iy0 + tile);
      const size_t tn = static_cast<size_t>(iy1 - iy0) * x.w();
      im2col(gy.plane(n, 0), out_ch_, gy.h(), gy.w(), k_, stride_, pad_,
             PadMode::Zero, x.h(), x.w(), iy0, iy1, g_col.data());
      MapRowC cm(g_col.data(), K, tn);
      StrideMap gxm(gx.plane(n, 0) + size_t(iy0) * x.w(), in_ch_, tn,
                    Eigen::OuterStride<>(long(hw_in)));
      gxm.noalias() = wm * cm;
      if (param_grads) {
        StrideMapC xm(x.plane(n, 0) + size_t(iy0) * x.w(), in_ch_, tn,
                      Eigen::OuterStride<>(long(hw_in)));
        gwm.noalias() += xm * cm.transpose();
      }
    }
    if (param_grads) {
      const float* gyp = gy.plane(n, 0);
      for (int c = 0; c < out_ch_; ++c) {
        const float* p = gyp + static_cast<size_t>(c) * gy.h() * gy.w();
        double acc = 0.0;
        for (size_t i = 0; i < static_cast<size_t>(gy.h()) * gy.w(); ++i)
          acc += p[i];
        gb_[c] += static_cast<float>(acc);
      }
    }
  }
  return gx;
}

void ConvTranspose2d::register_into(ParamRegistry& reg,
                                    const std::string& prefix) {
  reg.add(prefix + ".weight", ParamKind::ConvWeight, &w_, &gw_);
  reg.add(prefix + ".bias", ParamKind::ConvBias, &b_, &gb_);
}

// ---------------------------------------------------------------------------
// Norm2d

Norm2d::Norm2d(int channels, NormKind kind)
    : ch_(channels), kind_(kind), gamma_(channels, 1.0f),
      ggamma_(channels, 0.0f), beta_(channels, 0.0f), gbeta_(channels, 0.0f),
      running_mean_(channels, 0.0f), running_var_(channels, 1.0f) {}

const Tensor& Norm2d::forward(const Tensor& x, bool training) {
  if (x.c() != ch_) throw std::invalid_argument("Norm2d: channel mismatch");
  x_ = &x;
  y_.resize(x.n(), x.c(), x.h(), x.w());
  const size_t plane = static_cast<size_t>(x.h()) * x.w();

  if (kind_ == NormKind::Batch) {
    trained_forward_ = training;
    mu_.assign(ch_, 0.0f);
    istd_.assign(ch_, 0.0f);
    const double count = double(x.n()) * plane;
    for (int c = 0; c < ch_; ++c) {
      double mean, var;
      if (training) {
        double s = 0.0, s2 = 0.0;
        for (int n = 0; n < x.n(); ++n) {
          const float* p = x.plane(n, c);
          for (size_t i = 0; i < plane; ++i) {
            s += p[i];
            s2 += double(p[i]) * p[i];
          }
        }
        mean = s / count;
        var = std::max(0.0, s2 / count - mean * mean);
        running_mean_[c] = (1.0f - momentum_) * running_mean_[c] +
                           momentum_ * float(mean);
        double unbiased = count > 1 ? var * count / (count - 1) : var;
        running_var_[c] = (1.0f - momentum_) * running_var_[c] +
                          momentum_ * float(unbiased);
      } else {
        mean = running_mean_[c];
        var = running_var_[c];
      }
      const float m = float(mean);
      const float is = 1.0f / std::sqrt(float(var) + eps_);
      mu_[c] = m;
      istd_[c] = is;
      const float a = gamma_[c] * is;
      const float b = beta_[c] - a * m;
      for (int n = 0; n < x.n(); ++n) {
        const float* p = x.plane(n, c);
        float* q = y_.plane(n, c);
        for (size_t i = 0; i < plane; ++i) q[i] = a * p[i] + b;
      }
    }
  } else {
    // instance mode uses per-sample statistics in both phases
    trained_forward_ = true;
    mu_.assign(static_cast<size_t>(x.n()) * ch_, 0.0f);
    istd_.assign(mu_.size(), 0.0f);
    for (int n = 0; n < x.n(); ++n)
      for (int c = 0; c < ch_; ++c) {
        const float* p = x.plane(n, c);
        double s = 0.0, s2 = 0.0;
        for (size_t i = 0; i < plane; ++i) {
          s += p[i];
          s2 += double(p[i]) * p[i];
        }
        const double mean = s / double(plane);
        const double var = std::max(0.0, s2 / double(plane) - mean * mean);
        const float m = float(mean);
        const float is = 1.0f / std::sqrt(float(var) + eps_);
        mu_[static_cast<size_t>(n) * ch_ + c] = m;
        istd_[static_cast<size_t>(n) * ch_ + c] = is;
        const float a = gamma_[c] * is;
        const float b = beta_[c] - a * m;
        float* q = y_.plane(n, c);
        for (size_t i = 0; i < plane; ++i) q[i] = a * p[i] + b;
      }
  }
  return y_;
}

Tensor Norm2d::backward(const Tensor& gy, bool param_grads) {
  const Tensor& x = *x_;
  check_same_shape(gy, y_, "Norm2d::backward");
  Tensor gx(x.n(), x.c(), x.h(), x.w());
  const size_t plane = static_cast<size_t>(x.h()) * x.w();

  if (kind_ == NormKind::Batch) {
    const double count = double(x.n()) * plane;
    for (int c = 0; c < ch_; ++c) {
      const float m = mu_[c], is = istd_[c];
      double sum_gy = 0.0, sum_gy_xhat = 0.0;
      for (int n = 0; n < x.n(); ++n) {
        const float* gp = gy.plane(n, c);
        const float* xp = x.plane(n, c);
        for (size_t i = 0; i < plane; ++i) {
          const float xhat = (xp[i] - m) * is;
          sum_gy += gp[i];
          sum_gy_xhat += double(gp[i]) * xhat;
        }
      }
      if (param_grads) {
        ggamma_[c] += float(sum_gy_xhat);
        gbeta_[c] += float(sum_gy);
      }
      const float a = gamma_[c] * is;
      if (trained_forward_) {
        const float mean_gy = float(sum_gy / count);
        const float mean_gy_xhat = float(sum_gy_xhat / count);
        for (int n = 0; n < x.n(); ++n) {
          const float* gp = gy.plane(n, c);
          const float* xp = x.plane(n, c);
          float* q = gx.plane(n, c);
          for (size_t i = 0; i < plane; ++i) {
            const float xhat = (xp[i] - m) * is;
            q[i] = a * (gp[i] - mean_gy - xhat * mean_gy_xhat);
          }
        }
      } else {
        // inference statistics are constants
        for (int n = 0; n < x.n(); ++n) {
          const float* gp = gy.plane(n, c);
          float* q = gx.plane(n, c);
          for (size_t i = 0; i < plane; ++i) q[i] = a * gp[i];
        }
      }
    }
  } else {
    for (int n = 0; n < x.n(); ++n)
      for (int c = 0; c < ch_; ++c) {
        const float m = mu_[static_cast<size_t>(n) * ch_ + c];
        const float is = istd_[static_cast<size_t>(n) * ch_ + c];
        const float* gp = gy.plane(n, c);
        const float* xp = x.plane(n, c);
        double sum_gy = 0.0, sum_gy_xhat = 0.0;
        for (size_t i = 0; i < plane; ++i) {
          const float xhat = (xp[i] - m) * is;
          sum_gy += gp[i];
          sum_gy_xhat += double(gp[i]) * xhat;
        }
        if (param_grads) {
          ggamma_[c] += float(sum_gy_xhat);
          gbeta_[c] += float(sum_gy);
        }
        const float a = gamma_[c] * is;
        const float mean_gy = float(sum_gy / double(plane));
        const float mean_gy_xhat = float(sum_gy_xhat / double(plane));
        float* q = gx.plane(n, c);
        for (size_t i = 0; i < plane; ++i) {
          const float xhat = (xp[i] - m) * is;
          q[i] = a * (gp[i] - mean_gy - xhat * mean_gy_xhat);
        }
      }
  }
  return gx;
}

void Norm2d::register_into(ParamRegistry& reg, const std::string& prefix) {
  reg.add(prefix + ".scale", ParamKind::NormScale, &gamma_, &ggamma_);
  reg.add(prefix + ".shift", ParamKind::NormShift, &beta_, &gbeta_);
  reg.add_buffer(prefix + ".running_mean", &running_mean_);
  reg.add_buffer(prefix + ".running_var", &running_var_);
}

// ---------------------------------------------------------------------------
// activations

void relu_inplace(Tensor& t) {
  for (float& v : t.vec()) v = v > 0.0f ? v : 0.0f;
}

Tensor relu_backward(const Tensor& gy, const Tensor& y) {
  check_same_shape(gy, y, "relu_backward");
  Tensor gx(gy.n(), gy.c(), gy.h(), gy.w());
  const float* gp = gy.data();
  const float* yp = y.data();
  float* q = gx.data();
  for (size_t i = 0; i < gy.size(); ++i) q[i] = yp[i] > 0.0f ? gp[i] : 0.0f;
  return gx;
}

void leaky_relu_inplace(Tensor& t, float slope) {
  for (float& v : t.vec()) v = v > 0.0f ? v : slope * v;
}

Tensor leaky_relu_backward(const Tensor& gy, const Tensor& y, float slope) {
  check_same_shape(gy, y, "leaky_relu_backward");
  Tensor gx(gy.n(), gy.c(), gy.h(), gy.w());
  const float* gp = gy.data();
  const float* yp = y.data();
  float* q = gx.data();
  for (size_t i = 0; i < gy.size(); ++i)
    q[i] = yp[i] > 0.0f ? gp[i] : slope * gp[i];
  return gx;
}

void tanh_inplace(Tensor& t) {
  for (float& v : t.vec()) v = std::tanh(v);
}

Tensor tanh_backward(const Tensor& gy, const Tensor& y) {
  check_same_shape(gy, y, "tanh_backward");
  Tensor gx(gy.n(), gy.c(), gy.h(), gy.w());
  const float* gp = gy.data();
  const float* yp = y.data();
  float* q = gx.data();
  for (size_t i = 0; i < gy.size(); ++i) q[i] = gp[i] * (1.0f - yp[i] * yp[i]);
  return gx;
}

void init_weights(ParamRegistry& reg, Rng& rng) {
  for (const auto& p : reg.params()) {
    switch (p.kind) {
      case ParamKind::ConvWeight:
        for (float& v : *p.w) v = rng.normal(0.0f, 0.02f);
        break;
      case ParamKind::NormScale:
        for (float& v : *p.w) v = rng.normal(1.0f, 0.02f);
        break;
      case ParamKind::ConvBias:
      case ParamKind::NormShift:
        std::fill(p.w->begin(), p.w->end(), 0.0f);
        break;
    }
  }
}

}  // namespace ps2man::nn
