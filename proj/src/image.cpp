#include "ps2man/image.hpp"

#include <opencv2/imgcodecs.hpp>
#include <opencv2/core.hpp>

#include <algorithm>
#include <cmath>

namespace ps2man {

Tensor load_image_rgb(const std::string& path) {
  cv::Mat img = cv::imread(path, cv::IMREAD_COLOR);
  if (img.empty())
    throw std::runtime_error("cannot read image: " + path);
  Tensor t(1, 3, img.rows, img.cols);
  for (int y = 0; y < img.rows; ++y) {
    const cv::Vec3b* row = img.ptr<cv::Vec3b>(y);
    for (int x = 0; x < img.cols; ++x) {
      t.at(0, 0, y, x) = row[x][2];  // OpenCV stores BGR
      t.at(0, 1, y, x) = row[x][1];
      t.at(0, 2, y, x) = row[x][0];
    }
  }
  return t;
}

void save_image_png(const Tensor& t, const std::string& path) {
  if (t.n() != 1 || t.c() != 3)
    throw std::invalid_argument("save_image_png expects a 1x3xHxW tensor");
  cv::Mat img(t.h(), t.w(), CV_8UC3);
  auto to_byte = [](float v) {
    double x = std::floor((double(v) + 1.0) * 127.5 + 0.5);
    return static_cast<uchar>(std::clamp(x, 0.0, 255.0));
  };
  for (int y = 0; y < t.h(); ++y) {
    cv::Vec3b* row = img.ptr<cv::Vec3b>(y);
    for (int x = 0; x < t.w(); ++x) {
      row[x][2] = to_byte(t.at(0, 0, y, x));
      row[x][1] = to_byte(t.at(0, 1, y, x));
      row[x][0] = to_byte(t.at(0, 2, y, x));
    }
  }
  if (!cv::imwrite(path, img))
    throw std::runtime_error("cannot write image: " + path);
}

Tensor to_unit_range(const Tensor& t255) {
  Tensor out = t255;
  for (float& v : out.vec()) v = v / 127.5f - 1.0f;
  return out;
}

Tensor from_unit_range(const Tensor& unit) {
  Tensor out = unit;
  for (float& v : out.vec()) v = (v + 1.0f) * 127.5f;
  return out;
}

Tensor luminance255(const Tensor& unit) {
  if (unit.n() != 1)
    throw std::invalid_argument("luminance255 expects a single image");
  Tensor out(1, 1, unit.h(), unit.w());
  const size_t plane = static_cast<size_t>(unit.h()) * unit.w();
  if (unit.c() == 1) {
    const float* p = unit.plane(0, 0);
    float* q = out.plane(0, 0);
    for (size_t i = 0; i < plane; ++i) q[i] = (p[i] + 1.0f) * 127.5f;
    return out;
  }
  if (unit.c() != 3)
    throw std::invalid_argument("luminance255 expects 1 or 3 channels");
  const float* r = unit.plane(0, 0);
  const float* g = unit.plane(0, 1);
  const float* b = unit.plane(0, 2);
  float* q = out.plane(0, 0);
  for (size_t i = 0; i < plane; ++i) {
    float y = 0.299f * r[i] + 0.587f * g[i] + 0.114f * b[i];
    q[i] = (y + 1.0f) * 127.5f;
  }
  return out;
}

namespace {

// Catmull-Rom (a = -0.5)
inline double cubic_kernel(double t) {
  t = std::abs(t);
  if (t < 1.0) return 1.0 + t * t * (1.5 * t - 2.5);
  if (t < 2.0) return 2.0 - t * (4.0 - t * (2.5 - 0.5 * t));
  return 0.0;
}

struct ResampleTaps {
  std::vector<int> start;      // first source index per output index
  std::vector<double> weight;  // taps per output index, flattened
  int ntaps;
};

ResampleTaps make_taps(int in_size, int out_size) {
  const double scale = double(in_size) / double(out_size);
  const double support_scale = std::max(1.0, scale);
  const double support = 2.0 * support_scale;
  ResampleTaps taps;
  taps.ntaps = static_cast<int>(std::ceil(support)) * 2 + 1;
  taps.start.resize(out_size);
  taps.weight.assign(static_cast<size_t>(out_size) * taps.ntaps, 0.0);
  for (int o = 0; o < out_size; ++o) {
    const double center = (o + 0.5) * scale - 0.5;
    int lo = static_cast<int>(std::floor(center - support + 0.5));
    taps.start[o] = lo;
    double sum = 0.0;
    for (int k = 0; k < taps.ntaps; ++k) {
      double w = cubic_kernel((lo + k - center) / support_scale);
      taps.weight[static_cast<size_t>(o) * taps.ntaps + k] = w;
      sum += w;
    }
    if (sum != 0.0)
      for (int k = 0; k < taps.ntaps; ++k)
        taps.weight[static_cast<size_t>(o) * taps.ntaps + k] /= sum;
  }
  return taps;
}

inline int clamp_index(int i, int n) { return std::clamp(i, 0, n - 1); }

}  // namespace

Tensor resize_bicubic(const Tensor& t, int out_h, int out_w) {
  if (t.h() == out_h && t.w() == out_w) return t;
  const ResampleTaps tx = make_taps(t.w(), out_w);
  const ResampleTaps ty = make_taps(t.h(), out_h);

  Tensor out(t.n(), t.c(), out_h, out_w);
  std::vector<double> rowbuf(static_cast<size_t>(t.h()) * out_w);
  for (int n = 0; n < t.n(); ++n)
    for (int c = 0; c < t.c(); ++c) {
      const float* src = t.plane(n, c);
      // horizontal pass
      for (int y = 0; y < t.h(); ++y) {
        const float* srow = src + static_cast<size_t>(y) * t.w();
        double* drow = rowbuf.data() + static_cast<size_t>(y) * out_w;
        for (int x = 0; x < out_w; ++x) {
          const double* w = tx.weight.data() + static_cast<size_t>(x) * tx.ntaps;
          double acc = 0.0;
          for (int k = 0; k < tx.ntaps; ++k)
            acc += w[k] * srow[clamp_index(tx.start[x] + k, t.w())];
          drow[x] = acc;
        }
      }
      // vertical pass
      float* dst = out.plane(n, c);
      for (int y = 0; y < out_h; ++y) {
        const double* w = ty.weight.data() + static_cast<size_t>(y) * ty.ntaps;
        for (int x = 0; x < out_w; ++x) {
          double acc = 0.0;
          for (int k = 0; k < ty.ntaps; ++k)
            acc += w[k] *
                   rowbuf[static_cast<size_t>(clamp_index(ty.start[y] + k,
                                                          t.h())) * out_w + x];
          dst[static_cast<size_t>(y) * out_w + x] = static_cast<float>(acc);
        }
      }
    }
  return out;
}

Tensor warp_affine_bilinear(const Tensor& src, const double m[6], int out_h,
                            int out_w) {
  // invert the forward 2x3 matrix
  const double det = m[0] * m[4] - m[1] * m[3];
  if (std::abs(det) < 1e-12)
    throw std::invalid_argument("warp_affine_bilinear: singular transform");
  const double ia = m[4] / det, ib = -m[1] / det;
  const double ic = -m[3] / det, id = m[0] / det;
  const double itx = -(ia * m[2] + ib * m[5]);
  const double ity = -(ic * m[2] + id * m[5]);

  Tensor out(src.n(), src.c(), out_h, out_w);
  for (int n = 0; n < src.n(); ++n)
    for (int c = 0; c < src.c(); ++c) {
      const float* sp = src.plane(n, c);
      float* dp = out.plane(n, c);
      for (int y = 0; y < out_h; ++y)
        for (int x = 0; x < out_w; ++x) {
          const double sx = ia * x + ib * y + itx;
          const double sy = ic * x + id * y + ity;
          const int x0 = static_cast<int>(std::floor(sx));
          const int y0 = static_cast<int>(std::floor(sy));
          const double fx = sx - x0, fy = sy - y0;
          auto sample = [&](int yy, int xx) {
            return double(sp[static_cast<size_t>(clamp_index(yy, src.h())) *
                                 src.w() +
                             clamp_index(xx, src.w())]);
          };
          const double v =
              (1 - fy) * ((1 - fx) * sample(y0, x0) + fx * sample(y0, x0 + 1)) +
              fy * ((1 - fx) * sample(y0 + 1, x0) + fx * sample(y0 + 1, x0 + 1));
          dp[static_cast<size_t>(y) * out_w + x] = static_cast<float>(v);
        }
    }
  return out;
}

}  // namespace ps2man
