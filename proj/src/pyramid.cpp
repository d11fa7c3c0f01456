#include "ps2man/pyramid.hpp"

#include "ps2man/image.hpp"

namespace ps2man {

ResolutionPyramid make_pyramid(const Tensor& image) {
  ResolutionPyramid pyr;
  pyr.level3 = image;
  pyr.level2 = resize_bicubic(image, image.h() / 2, image.w() / 2);
  pyr.level1 = resize_bicubic(image, image.h() / 4, image.w() / 4);
  clamp(pyr.level2, -1.0f, 1.0f);
  clamp(pyr.level1, -1.0f, 1.0f);
  return pyr;
}

}  // namespace ps2man
