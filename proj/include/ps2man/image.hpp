#pragma once

#include <string>

#include "ps2man/tensor.hpp"

namespace ps2man {

/// Decode an image file into a 1x3xHxW tensor of RGB values in [0, 255].
/// Grayscale files are replicated across the three channels.
Tensor load_image_rgb(const std::string& path);

/// Encode a 1x3xHxW tensor in [-1, 1] as an 8-bit PNG. Mapping is
/// (v + 1) * 127.5 with round-half-up, clamped to [0, 255].
void save_image_png(const Tensor& t, const std::string& path);

/// [0,255] -> [-1,1] via v / 127.5 - 1.
Tensor to_unit_range(const Tensor& t255);

/// [-1,1] -> [0,255] (no rounding).
Tensor from_unit_range(const Tensor& unit);

/// BT.601 luma of a 3-channel [-1,1] tensor, returned as 1xHxW in [0,255].
/// Single-channel inputs are passed through the same range mapping, which
/// makes the transform idempotent on already-gray data.
Tensor luminance255(const Tensor& unit);

/// Separable resampling with a Catmull-Rom cubic kernel. Downscaling widens
/// the kernel support by the scale factor, which is what keeps the result
/// alias-free; upscaling is plain bicubic interpolation.
Tensor resize_bicubic(const Tensor& t, int out_h, int out_w);

/// Inverse-mapped bilinear warp: for each output pixel, sample the source at
/// inv(M) * (x, y) where M is the 2x3 forward affine matrix (row-major
/// {a, b, tx, c, d, ty}). Out-of-bounds samples clamp to the border.
Tensor warp_affine_bilinear(const Tensor& src, const double m[6], int out_h,
                            int out_w);

}  // namespace ps2man
