#pragma once

#include <string>
#include <vector>

#include "ps2man/tensor.hpp"

namespace ps2man {

/// Mean local structural similarity of two luminance images in [0,255].
/// 11x11 Gaussian window (sigma 1.5), K1 = 0.01, K2 = 0.03, L = 255,
/// evaluated on the valid (fully-overlapping) region.
double ssim(const Tensor& x, const Tensor& y);

/// Feature similarity of two luminance images in [0,255]: phase congruency
/// from a 4-scale x 4-orientation log-Gabor bank combined with gradient
/// magnitude similarity, weighted by the max phase congruency map.
/// T1 = 0.85, T2 = 160.
double fsim(const Tensor& x, const Tensor& y);

/// Uniform local binary patterns, 8 neighbors at radius 1, histogrammed
/// over an 8x8 cell grid with per-cell L1 normalization. 59 bins per cell,
/// 3776 dimensions for the default grid.
struct LbpParams {
  int grid = 8;
};
std::vector<double> lbp_features(const Tensor& gray255,
                                 const LbpParams& params = {});

/// 1 - cos(u, v), in [0, 2]. Throws on zero-norm input.
double cosine_distance(const std::vector<double>& u,
                       const std::vector<double>& v);

/// Rank-k identification rates of probes against a gallery.
struct CmcCurve {
  std::vector<double> rank_rates;  // index k-1 = rate at rank k

  double rank(int k) const { return rank_rates.at(k - 1); }
};

struct LabeledFeature {
  std::string identity;
  std::vector<double> feature;
};

/// rank_k = fraction of probes whose true identity sits among the k nearest
/// gallery entries under cosine distance; ties broken by gallery order.
/// Every probe identity must appear exactly once in the gallery.
CmcCurve cmc(const std::vector<LabeledFeature>& probes,
             const std::vector<LabeledFeature>& gallery);

}  // namespace ps2man
