#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace ps2man {

/// Dense float tensor in NCHW layout. The batch dimension is always
/// explicit so the same code paths serve single images (n == 1) and
/// batches.
class Tensor {
 public:
  Tensor() = default;
  Tensor(int n, int c, int h, int w)
      : n_(n), c_(c), h_(h), w_(w),
        v_(static_cast<size_t>(n) * c * h * w, 0.0f) {
    if (n < 0 || c < 0 || h < 0 || w < 0)
      throw std::invalid_argument("Tensor: negative dimension");
  }

  static Tensor image(int c, int h, int w) { return Tensor(1, c, h, w); }

  int n() const { return n_; }
  int c() const { return c_; }
  int h() const { return h_; }
  int w() const { return w_; }
  size_t size() const { return v_.size(); }
  bool empty() const { return v_.empty(); }

  float* data() { return v_.data(); }
  const float* data() const { return v_.data(); }
  std::vector<float>& vec() { return v_; }
  const std::vector<float>& vec() const { return v_; }

  float& at(int n, int c, int y, int x) {
    return v_[((static_cast<size_t>(n) * c_ + c) * h_ + y) * w_ + x];
  }
  float at(int n, int c, int y, int x) const {
    return v_[((static_cast<size_t>(n) * c_ + c) * h_ + y) * w_ + x];
  }

  float* plane(int n, int c) {
    return v_.data() + (static_cast<size_t>(n) * c_ + c) * h_ * w_;
  }
  const float* plane(int n, int c) const {
    return v_.data() + (static_cast<size_t>(n) * c_ + c) * h_ * w_;
  }

  bool same_shape(const Tensor& o) const {
    return n_ == o.n_ && c_ == o.c_ && h_ == o.h_ && w_ == o.w_;
  }
  std::string shape_str() const {
    return std::to_string(n_) + "x" + std::to_string(c_) + "x" +
           std::to_string(h_) + "x" + std::to_string(w_);
  }

  void resize(int n, int c, int h, int w) {
    n_ = n; c_ = c; h_ = h; w_ = w;
    v_.assign(static_cast<size_t>(n) * c * h * w, 0.0f);
  }
  void zero() { std::fill(v_.begin(), v_.end(), 0.0f); }
  void fill(float value) { std::fill(v_.begin(), v_.end(), value); }

 private:
  int n_ = 0, c_ = 0, h_ = 0, w_ = 0;
  std::vector<float> v_;
};

inline void check_same_shape(const Tensor& a, const Tensor& b,
                             const char* what) {
  if (!a.same_shape(b))
    throw std::invalid_argument(std::string(what) + ": shape mismatch " +
                                a.shape_str() + " vs " + b.shape_str());
}

/// a += s * b
inline void axpy(Tensor& a, float s, const Tensor& b) {
  check_same_shape(a, b, "axpy");
  float* pa = a.data();
  const float* pb = b.data();
  for (size_t i = 0; i < a.size(); ++i) pa[i] += s * pb[i];
}

inline void scale(Tensor& a, float s) {
  for (float& v : a.vec()) v *= s;
}

inline void clamp(Tensor& a, float lo, float hi) {
  for (float& v : a.vec()) v = std::min(hi, std::max(lo, v));
}

inline bool all_finite(const Tensor& a) {
  for (float v : a.vec())
    if (!std::isfinite(v)) return false;
  return true;
}

inline double mean_abs_diff(const Tensor& a, const Tensor& b) {
  check_same_shape(a, b, "mean_abs_diff");
  double acc = 0.0;
  const float* pa = a.data();
  const float* pb = b.data();
  for (size_t i = 0; i < a.size(); ++i) acc += std::abs(double(pa[i]) - pb[i]);
  return a.size() ? acc / double(a.size()) : 0.0;
}

inline double max_abs_diff(const Tensor& a, const Tensor& b) {
  check_same_shape(a, b, "max_abs_diff");
  double m = 0.0;
  const float* pa = a.data();
  const float* pb = b.data();
  for (size_t i = 0; i < a.size(); ++i)
    m = std::max(m, std::abs(double(pa[i]) - pb[i]));
  return m;
}

/// Mirror every row of every channel plane (left-right flip).
inline Tensor flip_horizontal(const Tensor& t) {
  Tensor out(t.n(), t.c(), t.h(), t.w());
  for (int n = 0; n < t.n(); ++n)
    for (int c = 0; c < t.c(); ++c) {
      const float* src = t.plane(n, c);
      float* dst = out.plane(n, c);
      for (int y = 0; y < t.h(); ++y)
        for (int x = 0; x < t.w(); ++x)
          dst[y * t.w() + x] = src[y * t.w() + (t.w() - 1 - x)];
    }
  return out;
}

}  // namespace ps2man
