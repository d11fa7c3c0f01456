#include "ps2man/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>

#include "ps2man/image.hpp"
#include "ps2man/rng.hpp"

namespace fs = std::filesystem;

namespace ps2man {

namespace {

constexpr int kRawW = 240;
constexpr int kRawH = 280;

inline void set_rgb(Tensor& img, int y, int x, float r, float g, float b) {
  img.at(0, 0, y, x) = r;
  img.at(0, 1, y, x) = g;
  img.at(0, 2, y, x) = b;
}

}  // namespace

SyntheticFace make_synthetic_face(int identity, uint64_t seed) {
  Rng rng = Rng(seed).split(0xface, uint64_t(identity));

  // per-identity texture: orientation x frequency grid
  const double angle = (identity % 4) * M_PI / 4.0;
  const double period = 4.0 * std::pow(2.0, (identity / 4) % 4);
  const double ca = std::cos(angle), sa = std::sin(angle);

  const float skin_r = 170 + rng.uniform(-30, 40);
  const float skin_g = 130 + rng.uniform(-30, 40);
  const float skin_b = 100 + rng.uniform(-30, 40);
  const float bg = 210 + rng.uniform(-25, 25);

  const double cx = kRawW / 2.0 + rng.uniform(-6, 6);
  const double cy = kRawH / 2.0 + rng.uniform(-6, 6);
  const double rx = 70 + rng.uniform(-8, 8);
  const double ry = 95 + rng.uniform(-8, 8);
  const double eye_dx = 30 + rng.uniform(-3, 3);
  const double eye_y = cy - 18 + rng.uniform(-3, 3);

  SyntheticFace face;
  face.image = Tensor(1, 3, kRawH, kRawW);
  face.left_eye_x = cx - eye_dx;
  face.right_eye_x = cx + eye_dx;
  face.left_eye_y = face.right_eye_y = eye_y;

  for (int y = 0; y < kRawH; ++y)
    for (int x = 0; x < kRawW; ++x) {
      const double nx = (x - cx) / rx, ny = (y - cy) / ry;
      if (nx * nx + ny * ny <= 1.0) {
        const double phase = 2.0 * M_PI * (ca * x + sa * y) / period;
        const float mod = 1.0f + 0.35f * float(std::sin(phase));
        set_rgb(face.image, y, x, std::clamp(skin_r * mod, 0.0f, 255.0f),
                std::clamp(skin_g * mod, 0.0f, 255.0f),
                std::clamp(skin_b * mod, 0.0f, 255.0f));
      } else {
        const float shade = bg - 20.0f * float(y) / kRawH;
        set_rgb(face.image, y, x, shade, shade, shade + 10);
      }
    }

  auto disk = [&](double ex, double ey, double r, float v) {
    for (int y = int(ey - r); y <= int(ey + r); ++y)
      for (int x = int(ex - r); x <= int(ex + r); ++x) {
        if (y < 0 || y >= kRawH || x < 0 || x >= kRawW) continue;
        if ((x - ex) * (x - ex) + (y - ey) * (y - ey) <= r * r)
          set_rgb(face.image, y, x, v, v, v);
      }
  };
  disk(face.left_eye_x, face.left_eye_y, 6, 30);
  disk(face.right_eye_x, face.right_eye_y, 6, 30);
  // mouth
  for (int y = int(cy + 40); y < int(cy + 48); ++y)
    for (int x = int(cx - 22); x <= int(cx + 22); ++x)
      if (y >= 0 && y < kRawH && x >= 0 && x < kRawW)
        set_rgb(face.image, y, x, 90, 40, 40);

  return face;
}

Tensor sketch_from_photo(const Tensor& photo255) {
  const int h = photo255.h(), w = photo255.w();
  std::vector<double> luma(size_t(h) * w);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      luma[size_t(y) * w + x] = 0.299 * photo255.at(0, 0, y, x) +
                                0.587 * photo255.at(0, 1, y, x) +
                                0.114 * photo255.at(0, 2, y, x);

  Tensor sketch(1, 3, h, w);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      double gx = 0.0, gy = 0.0;
      if (y > 0 && y < h - 1 && x > 0 && x < w - 1) {
        auto at = [&](int yy, int xx) { return luma[size_t(yy) * w + xx]; };
        gx = (at(y - 1, x + 1) + 2 * at(y, x + 1) + at(y + 1, x + 1)) -
             (at(y - 1, x - 1) + 2 * at(y, x - 1) + at(y + 1, x - 1));
        gy = (at(y + 1, x - 1) + 2 * at(y + 1, x) + at(y + 1, x + 1)) -
             (at(y - 1, x - 1) + 2 * at(y - 1, x) + at(y - 1, x + 1));
      }
      const double mag = std::min(255.0, std::hypot(gx, gy) * 0.8);
      const float v = float(255.0 - mag);
      sketch.at(0, 0, y, x) = v;
      sketch.at(0, 1, y, x) = v;
      sketch.at(0, 2, y, x) = v;
    }
  return sketch;
}

void make_synthetic_dataset(const std::string& dir, int identities,
                            uint64_t seed) {
  fs::create_directories(fs::path(dir) / "photos");
  fs::create_directories(fs::path(dir) / "sketches");
  std::ofstream marks(fs::path(dir) / "landmarks.txt");

  for (int id = 0; id < identities; ++id) {
    char name[16];
    std::snprintf(name, sizeof name, "id%03d", id);
    SyntheticFace face = make_synthetic_face(id, seed);
    Tensor sketch = sketch_from_photo(face.image);

    // save_image_png expects [-1,1]
    Tensor photo_unit = to_unit_range(face.image);
    Tensor sketch_unit = to_unit_range(sketch);
    save_image_png(photo_unit,
                   (fs::path(dir) / "photos" / (std::string(name) + ".png"))
                       .string());
    save_image_png(sketch_unit,
                   (fs::path(dir) / "sketches" / (std::string(name) + ".png"))
                       .string());
    marks << name << " " << face.left_eye_x << " " << face.left_eye_y << " "
          << face.right_eye_x << " " << face.right_eye_y << "\n";
  }
}

}  // namespace ps2man
