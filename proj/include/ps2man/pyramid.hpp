#pragma once

#include <array>

#include "ps2man/tensor.hpp"

namespace ps2man {

/// One image at the three supervision resolutions. level3 is the source
/// image itself; the coarser levels are antialiased bicubic downsamples.
struct ResolutionPyramid {
  Tensor level1;  // 3 x 64 x 64
  Tensor level2;  // 3 x 128 x 128
  Tensor level3;  // 3 x 256 x 256

  const Tensor& level(int i) const {
    switch (i) {
      case 0: return level1;
      case 1: return level2;
      default: return level3;
    }
  }
};

/// Builds the pyramid from a [-1,1] image; the top level is an exact copy.
/// Downsampled values are clamped back into [-1,1] (the cubic kernel can
/// overshoot by a few percent at hard edges).
ResolutionPyramid make_pyramid(const Tensor& image);

}  // namespace ps2man
