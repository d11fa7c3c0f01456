#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "ps2man/image.hpp"
#include "ps2man/synthesis.hpp"
#include "ps2man/synthetic.hpp"

namespace fs = std::filesystem;
using namespace ps2man;

namespace {

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name) {
    path = fs::temp_directory_path() / name;
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

TrainConfig small_config(const std::string& out_dir) {
  TrainConfig cfg;
  cfg.generator_tokens = "C7S1-8,C3-12,C3-16,RB16x1,TC12,TC8,C7S1-3";
  cfg.discriminator_tokens = "C8-C12-C16-C16";
  cfg.replay_buffer_capacity = 0;
  cfg.out_dir = out_dir;
  return cfg;
}

size_t count_lines(const fs::path& p) {
  std::ifstream f(p);
  size_t n = 0;
  std::string line;
  while (std::getline(f, line)) ++n;
  return n;
}

}  // namespace

TEST_CASE("inference is deterministic, bounded, and composable") {
  TempDir dir("ps2man_synth_infer");
  Trainer t(small_config(dir.path.string()));

  SyntheticFace f = make_synthetic_face(2);
  Tensor photo = to_model_resolution(f.image);

  Tensor s1 = t.infer_photo_to_sketch(photo);
  Tensor s2 = t.infer_photo_to_sketch(photo);
  CHECK(s1.vec() == s2.vec());
  CHECK(s1.shape_str() == "1x3x256x256");
  for (float v : s1.vec()) {
    CHECK(std::isfinite(v));
    CHECK(v > -1.0f);
    CHECK(v < 1.0f);
  }

  // cycle composition runs without error on an untrained model
  Tensor back = t.infer_sketch_to_photo(s1);
  CHECK(back.shape_str() == "1x3x256x256");
  CHECK(all_finite(back));
}

TEST_CASE("png save maps the range with round-half-up") {
  TempDir dir("ps2man_png");
  Tensor img(1, 3, 8, 8);
  img.fill(-1.0f);
  img.at(0, 0, 0, 0) = 1.0f;
  img.at(0, 1, 0, 1) = 0.0f;  // -> 127.5 + 0.5 -> 128
  const std::string path = (dir.path / "t.png").string();
  save_image_png(img, path);
  Tensor loaded = load_image_rgb(path);
  CHECK(loaded.at(0, 0, 0, 0) == 255.0f);
  CHECK(loaded.at(0, 1, 0, 1) == 128.0f);
  CHECK(loaded.at(0, 2, 5, 5) == 0.0f);
}

TEST_CASE("synthesize_directory over a flat folder") {
  TempDir in("ps2man_synth_in");
  TempDir out("ps2man_synth_out");
  TempDir run("ps2man_synth_run");

  for (int i = 0; i < 3; ++i) {
    SyntheticFace f = make_synthetic_face(i);
    save_image_png(to_unit_range(f.image),
                   (in.path / ("img" + std::to_string(i) + ".png")).string());
  }
  // an unreadable impostor
  std::ofstream(in.path / "broken.png") << "not a png";

  Trainer t(small_config(run.path.string()));
  SynthesisManifest manifest =
      synthesize_directory(t, "cafebabe", in.path.string(),
                           Direction::PhotoToSketch, out.path.string());

  REQUIRE(manifest.rows.size() == 4);
  size_t produced = 0, skipped = 0;
  for (const auto& r : manifest.rows) {
    CHECK(r.direction == "photo2sketch");
    CHECK(r.checkpoint_hash == "cafebabe");
    if (r.output_path.empty()) {
      ++skipped;
      CHECK(fs::path(r.input_path).filename() == "broken.png");
    } else {
      ++produced;
      CHECK(fs::exists(r.output_path));
      CHECK(fs::path(r.output_path).extension() == ".png");
    }
  }
  CHECK(produced == 3);
  CHECK(skipped == 1);

  // distinct inputs map to distinct outputs
  std::set<std::string> outputs;
  for (const auto& r : manifest.rows)
    if (!r.output_path.empty()) outputs.insert(r.output_path);
  CHECK(outputs.size() == produced);

  CHECK(fs::exists(manifest.manifest_path));
  CHECK(count_lines(manifest.manifest_path) == 5);  // header + 4 rows
  CHECK(fs::exists(out.path / "grid.png"));

  // empty directory: empty manifest, success
  TempDir empty_in("ps2man_synth_empty");
  TempDir empty_out("ps2man_synth_empty_out");
  SynthesisManifest none =
      synthesize_directory(t, "cafebabe", empty_in.path.string(),
                           Direction::SketchToPhoto, empty_out.path.string());
  CHECK(none.rows.empty());
  CHECK(fs::exists(none.manifest_path));
}

TEST_CASE("synthesis leaves checkpoint and inputs untouched") {
  TempDir dirs("ps2man_synth_ro");
  Trainer t(small_config(dirs.path.string()));
  const std::string ckpt = (dirs.path / "c.bin").string();
  t.save_checkpoint(ckpt);
  const std::string hash_before = file_hash_hex(ckpt);

  fs::create_directories(dirs.path / "in");
  SyntheticFace f = make_synthetic_face(1);
  const std::string input = (dirs.path / "in" / "a.png").string();
  save_image_png(to_unit_range(f.image), input);
  const std::string input_hash_before = file_hash_hex(input);

  Trainer t2(small_config(dirs.path.string()));
  t2.load_checkpoint(ckpt);
  synthesize_directory(t2, hash_before, (dirs.path / "in").string(),
                       Direction::PhotoToSketch,
                       (dirs.path / "out").string());

  CHECK(file_hash_hex(ckpt) == hash_before);
  CHECK(file_hash_hex(input) == input_hash_before);
}

TEST_CASE("direction parsing") {
  CHECK(parse_direction("photo2sketch") == Direction::PhotoToSketch);
  CHECK(parse_direction("sketch2photo") == Direction::SketchToPhoto);
  CHECK_THROWS_AS(parse_direction("backwards"), std::invalid_argument);
}
