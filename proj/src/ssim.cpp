#include "ps2man/metrics.hpp"

#include <cmath>
#include <vector>

namespace ps2man {

namespace {

constexpr int kWindow = 11;
constexpr double kSigma = 1.5;
constexpr double kK1 = 0.01;
constexpr double kK2 = 0.03;
constexpr double kL = 255.0;

std::vector<double> gaussian_taps() {
  std::vector<double> w(kWindow);
  const int half = kWindow / 2;
  double sum = 0.0;
  for (int i = 0; i < kWindow; ++i) {
    const double d = i - half;
    w[i] = std::exp(-d * d / (2.0 * kSigma * kSigma));
    sum += w[i];
  }
  for (double& v : w) v /= sum;
  return w;
}

// Separable valid-region Gaussian filter of an H x W plane.
std::vector<double> filter_valid(const std::vector<double>& img, int h, int w,
                                 const std::vector<double>& taps, int& oh,
                                 int& ow) {
  const int k = static_cast<int>(taps.size());
  ow = w - k + 1;
  oh = h - k + 1;
  std::vector<double> tmp(static_cast<size_t>(h) * ow);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < ow; ++x) {
      double acc = 0.0;
      for (int i = 0; i < k; ++i) acc += taps[i] * img[size_t(y) * w + x + i];
      tmp[size_t(y) * ow + x] = acc;
    }
  std::vector<double> out(static_cast<size_t>(oh) * ow);
  for (int y = 0; y < oh; ++y)
    for (int x = 0; x < ow; ++x) {
      double acc = 0.0;
      for (int i = 0; i < k; ++i) acc += taps[i] * tmp[size_t(y + i) * ow + x];
      out[size_t(y) * ow + x] = acc;
    }
  return out;
}

}  // namespace

double ssim(const Tensor& x, const Tensor& y) {
  check_same_shape(x, y, "ssim");
  if (x.c() != 1 || x.n() != 1)
    throw std::invalid_argument("ssim expects single-channel images");
  if (x.h() < kWindow || x.w() < kWindow)
    throw std::invalid_argument("ssim needs at least an 11x11 image");

  const int h = x.h(), w = x.w();
  const size_t np = static_cast<size_t>(h) * w;
  std::vector<double> a(np), b(np), aa(np), bb(np), ab(np);
  for (size_t i = 0; i < np; ++i) {
    a[i] = x.data()[i];
    b[i] = y.data()[i];
    aa[i] = a[i] * a[i];
    bb[i] = b[i] * b[i];
    ab[i] = a[i] * b[i];
  }

  const auto taps = gaussian_taps();
  int oh = 0, ow = 0;
  const auto mu1 = filter_valid(a, h, w, taps, oh, ow);
  const auto mu2 = filter_valid(b, h, w, taps, oh, ow);
  const auto saa = filter_valid(aa, h, w, taps, oh, ow);
  const auto sbb = filter_valid(bb, h, w, taps, oh, ow);
  const auto sab = filter_valid(ab, h, w, taps, oh, ow);

  const double c1 = (kK1 * kL) * (kK1 * kL);
  const double c2 = (kK2 * kL) * (kK2 * kL);
  double acc = 0.0;
  const size_t n = static_cast<size_t>(oh) * ow;
  for (size_t i = 0; i < n; ++i) {
    const double m1 = mu1[i], m2 = mu2[i];
    const double s1 = saa[i] - m1 * m1;
    const double s2 = sbb[i] - m2 * m2;
    const double s12 = sab[i] - m1 * m2;
    acc += ((2.0 * m1 * m2 + c1) * (2.0 * s12 + c2)) /
           ((m1 * m1 + m2 * m2 + c1) * (s1 + s2 + c2));
  }
  return acc / double(n);
}

}  // namespace ps2man
