#pragma once

#include <cstdint>
#include <string>

#include "ps2man/tensor.hpp"

namespace ps2man {

/// Writes a small procedurally generated paired dataset under `dir`:
/// photos/ with face-like images, sketches/ with edge-filtered versions,
/// and landmarks.txt with the true eye positions. Each identity carries a
/// distinct stripe texture (orientation x frequency), so texture features
/// separate identities cleanly.
void make_synthetic_dataset(const std::string& dir, int identities,
                            uint64_t seed = 7);

/// One synthetic photo in [0,255] RGB with its eye coordinates, without
/// touching the filesystem. identity selects the texture.
struct SyntheticFace {
  Tensor image;  // 1x3xHxW
  double left_eye_x, left_eye_y, right_eye_x, right_eye_y;
};
SyntheticFace make_synthetic_face(int identity, uint64_t seed = 7);

/// Sobel-magnitude "pencil" rendering of a photo, white background.
Tensor sketch_from_photo(const Tensor& photo255);

}  // namespace ps2man
