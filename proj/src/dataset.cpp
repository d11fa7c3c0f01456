#include "ps2man/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>

#include "ps2man/image.hpp"

namespace fs = std::filesystem;

namespace ps2man {

Tensor align_and_crop(const Tensor& image, const LandmarkAnnotation& marks,
                      const AlignmentGeometry& geom) {
  const double sx = marks.right_eye_x - marks.left_eye_x;
  const double sy = marks.right_eye_y - marks.left_eye_y;
  const double src_dist = std::hypot(sx, sy);
  if (src_dist < 1e-9)
    throw std::invalid_argument("align_and_crop: zero inter-ocular distance" +
                                (marks.image_id.empty()
                                     ? std::string()
                                     : " for identity '" + marks.image_id +
                                           "'"));

  // similarity transform as a complex multiplication: dst = q * src + t
  const double dx = geom.right_eye_x - geom.left_eye_x;
  const double dy = geom.right_eye_y - geom.left_eye_y;
  const double denom = src_dist * src_dist;
  const double qa = (dx * sx + dy * sy) / denom;   // scale*cos
  const double qb = (dy * sx - dx * sy) / denom;   // scale*sin
  const double tx = geom.left_eye_x - (qa * marks.left_eye_x -
                                       qb * marks.left_eye_y);
  const double ty = geom.left_eye_y - (qb * marks.left_eye_x +
                                       qa * marks.left_eye_y);
  const double m[6] = {qa, -qb, tx, qb, qa, ty};
  return warp_affine_bilinear(image, m, geom.crop_height, geom.crop_width);
}

Tensor to_model_resolution(const Tensor& cropped, int resolution) {
  Tensor resized = resize_bicubic(cropped, resolution, resolution);
  Tensor out = to_unit_range(resized);
  clamp(out, -1.0f, 1.0f);
  return out;
}

std::map<std::string, LandmarkAnnotation> load_landmarks(
    const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open landmark file: " + path);
  std::map<std::string, LandmarkAnnotation> marks;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ss(line);
    LandmarkAnnotation a;
    if (!(ss >> a.image_id >> a.left_eye_x >> a.left_eye_y >> a.right_eye_x >>
          a.right_eye_y))
      throw std::runtime_error("malformed landmark line " +
                               std::to_string(lineno) + " in " + path);
    if (a.left_eye_x >= a.right_eye_x)
      throw std::runtime_error("landmarks for identity '" + a.image_id +
                               "': left eye must be left of right eye");
    marks[a.image_id] = a;
  }
  return marks;
}

namespace {

bool is_raster(const fs::path& p) {
  std::string ext = p.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(),
                 [](unsigned char c) { return std::tolower(c); });
  return ext == ".png" || ext == ".jpg" || ext == ".jpeg" || ext == ".bmp";
}

std::map<std::string, std::string> scan_images(const fs::path& dir) {
  std::map<std::string, std::string> found;
  if (!fs::is_directory(dir)) return found;
  for (const auto& e : fs::directory_iterator(dir))
    if (e.is_regular_file() && is_raster(e.path()))
      found[e.path().stem().string()] = e.path().string();
  return found;
}

PairedSample make_sample(const std::string& id, const std::string& photo_path,
                         const std::string& sketch_path,
                         const LandmarkAnnotation& marks,
                         const AlignmentGeometry& geom) {
  PairedSample s;
  s.identity = id;
  Tensor photo = load_image_rgb(photo_path);
  Tensor sketch = load_image_rgb(sketch_path);
  for (double x : {marks.left_eye_x, marks.right_eye_x})
    for (double y : {marks.left_eye_y, marks.right_eye_y})
      if (x < 0 || y < 0 || x >= photo.w() || y >= photo.h())
        throw std::runtime_error("landmarks out of bounds for identity '" +
                                 id + "'");
  s.photo = to_model_resolution(align_and_crop(photo, marks, geom),
                                geom.model_resolution);
  s.sketch = to_model_resolution(align_and_crop(sketch, marks, geom),
                                 geom.model_resolution);
  return s;
}

}  // namespace

DatasetSplits load_dataset(const std::string& root_dir, const SplitSpec& spec,
                           const AlignmentGeometry& geom) {
  const fs::path root(root_dir);
  if (!fs::is_directory(root))
    throw std::runtime_error("dataset root does not exist: " + root_dir);

  auto photos = scan_images(root / "photos");
  auto sketches = scan_images(root / "sketches");
  auto marks = load_landmarks((root / "landmarks.txt").string());

  if (photos.empty())
    throw std::runtime_error("no paired samples found under " + root_dir);

  std::vector<std::string> ids;
  for (const auto& [id, path] : photos) {
    if (!sketches.count(id))
      throw std::runtime_error("missing sketch for identity '" + id + "'");
    if (!marks.count(id))
      throw std::runtime_error("missing landmarks for identity '" + id + "'");
    ids.push_back(id);
  }
  std::sort(ids.begin(), ids.end());

  const size_t want = size_t(spec.train) + spec.val + spec.test;
  if (want > ids.size())
    throw std::runtime_error(
        "split sizes (" + std::to_string(spec.train) + "+" +
        std::to_string(spec.val) + "+" + std::to_string(spec.test) +
        ") exceed available pairs (" + std::to_string(ids.size()) + ")");

  if (spec.shuffle_seed) {
    Rng rng(*spec.shuffle_seed);
    for (size_t i = ids.size(); i > 1; --i)
      std::swap(ids[i - 1], ids[rng.next_index(i)]);
  }

  DatasetSplits out;
  out.train.name = "train";
  out.train.augmentation_enabled = true;
  out.val.name = "val";
  out.test.name = "test";

  size_t k = 0;
  auto take = [&](DatasetSplit& split, int count) {
    split.samples.reserve(count);
    for (int i = 0; i < count; ++i, ++k) {
      const std::string& id = ids[k];
      PairedSample s =
          make_sample(id, photos[id], sketches[id], marks[id], geom);
      s.split = split.name;
      split.samples.push_back(std::move(s));
    }
  };
  take(out.train, spec.train);
  take(out.val, spec.val);
  take(out.test, spec.test);
  return out;
}

PairedSample flip_sample(const PairedSample& sample) {
  PairedSample out = sample;
  out.photo = flip_horizontal(sample.photo);
  out.sketch = flip_horizontal(sample.sketch);
  return out;
}

PairedSample augment(const PairedSample& sample, Rng& rng,
                     const AugmentParams& params) {
  PairedSample out = rng.bernoulli(params.flip_probability)
                         ? flip_sample(sample)
                         : sample;
  if (params.noise_amplitude > 0.0) {
    const float a = static_cast<float>(params.noise_amplitude);
    for (float& v : out.photo.vec()) v += rng.uniform(-a, a);
    for (float& v : out.sketch.vec()) v += rng.uniform(-a, a);
    clamp(out.photo, -1.0f, 1.0f);
    clamp(out.sketch, -1.0f, 1.0f);
  }
  return out;
}

// ---------------------------------------------------------------------------
// BatchStream

BatchStream::BatchStream(const DatasetSplit& split, const AugmentParams& params,
                         uint64_t seed)
    : split_(&split), params_(params), seed_(seed) {
  if (!split.augmentation_enabled) {
    params_.noise_amplitude = 0.0;
    params_.flip_probability = 0.0;
    params_.flip_double = false;
  }
}

int BatchStream::batches_per_epoch() const {
  const int n = static_cast<int>(split_->samples.size());
  return params_.flip_double ? 2 * n : n;
}

TrainBatch BatchStream::get(int epoch, int index) const {
  const int per_epoch = batches_per_epoch();
  if (index < 0 || index >= per_epoch)
    throw std::out_of_range("BatchStream: index out of range");

  // epoch-keyed shuffle of serve slots
  Rng order_rng = Rng(seed_).split(0x0bde7, epoch);
  std::vector<int> slots(per_epoch);
  std::iota(slots.begin(), slots.end(), 0);
  for (size_t i = slots.size(); i > 1; --i)
    std::swap(slots[i - 1], slots[order_rng.next_index(i)]);

  const int slot = slots[index];
  const int n = static_cast<int>(split_->samples.size());
  const int sample_idx = params_.flip_double ? slot % n : slot;
  const PairedSample& base = split_->samples[sample_idx];

  Rng item_rng = Rng(seed_).split(0xa06, epoch, index);
  bool flip = params_.flip_double ? slot >= n
                                  : item_rng.bernoulli(params_.flip_probability);

  TrainBatch b;
  b.identity = base.identity;
  b.flipped = flip;
  b.photo = flip ? flip_horizontal(base.photo) : base.photo;
  b.sketch = flip ? flip_horizontal(base.sketch) : base.sketch;
  b.photo_in = b.photo;
  b.sketch_in = b.sketch;
  if (params_.noise_amplitude > 0.0) {
    const float a = static_cast<float>(params_.noise_amplitude);
    for (float& v : b.photo_in.vec()) v += item_rng.uniform(-a, a);
    for (float& v : b.sketch_in.vec()) v += item_rng.uniform(-a, a);
    clamp(b.photo_in, -1.0f, 1.0f);
    clamp(b.sketch_in, -1.0f, 1.0f);
  }
  return b;
}

}  // namespace ps2man
