#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "ps2man/pyramid.hpp"
#include "ps2man/rng.hpp"
#include "ps2man/tensor.hpp"

namespace ps2man {

/// Eye centers in source-image pixel coordinates; left/right in image
/// coordinates (left_eye.x < right_eye.x).
struct LandmarkAnnotation {
  std::string image_id;
  double left_eye_x = 0, left_eye_y = 0;
  double right_eye_x = 0, right_eye_y = 0;
};

/// One identity's aligned photo/sketch pair as model-ready tensors.
struct PairedSample {
  std::string identity;
  Tensor photo;   // 1x3x256x256 in [-1,1]
  Tensor sketch;  // 1x3x256x256 in [-1,1]
  std::string split;
};

struct DatasetSplit {
  std::string name;
  std::vector<PairedSample> samples;
  bool augmentation_enabled = false;
};

struct DatasetSplits {
  DatasetSplit train, val, test;
};

/// Requested split sizes. An unset shuffle_seed keeps identities in
/// lexicographic order before the first-N partition.
struct SplitSpec {
  int train = 60;
  int val = 28;
  int test = 100;
  std::optional<uint64_t> shuffle_seed;
};

/// Where the eye centers land inside the crop, with the crop geometry.
struct AlignmentGeometry {
  double left_eye_x = 75, left_eye_y = 125;
  double right_eye_x = 125, right_eye_y = 125;
  int crop_width = 200;
  int crop_height = 250;
  int model_resolution = 256;
};

/// Augmentation knobs. flip_double makes the loader enumerate each training
/// pair in both orientations every epoch instead of flipping at random.
struct AugmentParams {
  double noise_amplitude = 0.02;
  double flip_probability = 0.5;
  bool flip_double = true;
};

/// Similarity-align (rotate + scale + translate) so the eye centers land on
/// the canonical positions, then crop. Input and output are [0,255] RGB.
/// Throws on a degenerate (zero inter-ocular distance) annotation.
Tensor align_and_crop(const Tensor& image, const LandmarkAnnotation& marks,
                      const AlignmentGeometry& geom = {});

/// Anisotropic resize of a [0,255] crop to model resolution, mapped into
/// [-1,1].
Tensor to_model_resolution(const Tensor& cropped, int resolution = 256);

/// Scan `<root>/photos`, `<root>/sketches` and `<root>/landmarks.txt`,
/// align and pair everything, and partition into the requested splits.
/// Every photo must have a sketch and a landmark line; violations and
/// oversized split requests are hard errors.
DatasetSplits load_dataset(const std::string& root_dir, const SplitSpec& spec,
                           const AlignmentGeometry& geom = {});

/// Parses `landmarks.txt` lines of the form `<id> <lx> <ly> <rx> <ry>`.
std::map<std::string, LandmarkAnnotation> load_landmarks(
    const std::string& path);

/// Joint horizontal flip (photo and sketch together) with the given
/// probability, then additive uniform noise in [-a, a] clamped to [-1,1].
PairedSample augment(const PairedSample& sample, Rng& rng,
                     const AugmentParams& params);

/// Flip photo and sketch together; an involution.
PairedSample flip_sample(const PairedSample& sample);

/// What one optimization step consumes: clean targets plus noised copies
/// that feed the generators.
struct TrainBatch {
  Tensor photo, sketch;        // clean, used to build target pyramids
  Tensor photo_in, sketch_in;  // generator inputs (noise applied)
  std::string identity;
  bool flipped = false;
};

/// Deterministic batch source: get(epoch, index) depends only on the seed
/// and its arguments, so prefetching can never reorder the sample stream.
class BatchStream {
 public:
  BatchStream(const DatasetSplit& split, const AugmentParams& params,
              uint64_t seed);

  int batches_per_epoch() const;
  TrainBatch get(int epoch, int index) const;

 private:
  const DatasetSplit* split_;
  AugmentParams params_;
  uint64_t seed_;
};

}  // namespace ps2man
