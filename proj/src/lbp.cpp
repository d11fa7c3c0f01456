#include "ps2man/metrics.hpp"

#include <array>
#include <cmath>

namespace ps2man {

namespace {

// Circular neighbor order starting east, counter-clockwise.
constexpr int kNbrY[8] = {0, -1, -1, -1, 0, 1, 1, 1};
constexpr int kNbrX[8] = {1, 1, 0, -1, -1, -1, 0, 1};

int transitions(int code) {
  int t = 0;
  for (int b = 0; b < 8; ++b) {
    const int cur = (code >> b) & 1;
    const int nxt = (code >> ((b + 1) % 8)) & 1;
    t += cur != nxt;
  }
  return t;
}

// Map the 256 patterns to 59 bins: the 58 uniform patterns (at most two
// 0/1 transitions around the circle) keep their own bins in ascending code
// order; everything else shares the last bin.
std::array<int, 256> uniform_table() {
  std::array<int, 256> table{};
  int next = 0;
  for (int code = 0; code < 256; ++code)
    table[code] = transitions(code) <= 2 ? next++ : -1;
  for (int code = 0; code < 256; ++code)
    if (table[code] < 0) table[code] = next;
  return table;
}

}  // namespace

std::vector<double> lbp_features(const Tensor& gray255,
                                 const LbpParams& params) {
  if (gray255.c() != 1 || gray255.n() != 1)
    throw std::invalid_argument("lbp_features expects a single gray image");
  const int h = gray255.h(), w = gray255.w();
  if (h < 3 || w < 3)
    throw std::invalid_argument("lbp_features needs at least 3x3 pixels");

  static const std::array<int, 256> table = uniform_table();
  constexpr int kBins = 59;
  const int grid = params.grid;

  std::vector<double> feat(size_t(grid) * grid * kBins, 0.0);
  const float* img = gray255.plane(0, 0);

  // strict comparison: flat neighborhoods produce the all-zero pattern
  for (int y = 1; y < h - 1; ++y)
    for (int x = 1; x < w - 1; ++x) {
      const float center = img[size_t(y) * w + x];
      int code = 0;
      for (int b = 0; b < 8; ++b)
        if (img[size_t(y + kNbrY[b]) * w + (x + kNbrX[b])] > center)
          code |= 1 << b;
      const int cy = std::min(grid - 1, y * grid / h);
      const int cx = std::min(grid - 1, x * grid / w);
      feat[(size_t(cy) * grid + cx) * kBins + table[code]] += 1.0;
    }

  for (int cell = 0; cell < grid * grid; ++cell) {
    double sum = 0.0;
    for (int b = 0; b < kBins; ++b) sum += feat[size_t(cell) * kBins + b];
    if (sum > 0.0)
      for (int b = 0; b < kBins; ++b) feat[size_t(cell) * kBins + b] /= sum;
  }
  return feat;
}

double cosine_distance(const std::vector<double>& u,
                       const std::vector<double>& v) {
  if (u.size() != v.size())
    throw std::invalid_argument("cosine_distance: dimension mismatch");
  double dot = 0.0, nu = 0.0, nv = 0.0;
  for (size_t i = 0; i < u.size(); ++i) {
    dot += u[i] * v[i];
    nu += u[i] * u[i];
    nv += v[i] * v[i];
  }
  if (nu <= 0.0 || nv <= 0.0)
    throw std::invalid_argument("cosine_distance: zero-norm vector");
  return 1.0 - dot / (std::sqrt(nu) * std::sqrt(nv));
}

}  // namespace ps2man
