#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "ps2man/synthetic.hpp"
#include "ps2man/trainer.hpp"

namespace fs = std::filesystem;
using namespace ps2man;

namespace {

// Narrow recipe: same topology and resolutions as the production networks
// but a few channels wide, so trainer mechanics run in milliseconds.
TrainConfig small_config(const std::string& out_dir) {
  TrainConfig cfg;
  cfg.generator_tokens = "C7S1-8,C3-12,C3-16,RB16x2,TC12,TC8,C7S1-3";
  cfg.discriminator_tokens = "C8-C12-C16-C16";
  cfg.replay_buffer_capacity = 4;
  cfg.out_dir = out_dir;
  cfg.augment.noise_amplitude = 0.0;
  cfg.augment.flip_double = false;
  cfg.augment.flip_probability = 0.0;
  return cfg;
}

TrainBatch toy_batch(uint64_t seed) {
  SyntheticFace f = make_synthetic_face(int(seed % 16), seed);
  TrainBatch b;
  b.photo = to_model_resolution(f.image);
  b.sketch = to_model_resolution(sketch_from_photo(f.image));
  b.photo_in = b.photo;
  b.sketch_in = b.sketch;
  b.identity = "toy" + std::to_string(seed);
  return b;
}

DatasetSplits toy_splits(int train_n, int val_n) {
  DatasetSplits data;
  data.train.name = "train";
  data.train.augmentation_enabled = true;
  data.val.name = "val";
  for (int i = 0; i < train_n + val_n; ++i) {
    SyntheticFace f = make_synthetic_face(i);
    PairedSample s;
    s.identity = "s" + std::to_string(i);
    s.photo = to_model_resolution(f.image);
    s.sketch = to_model_resolution(sketch_from_photo(f.image));
    s.split = i < train_n ? "train" : "val";
    (i < train_n ? data.train : data.val).samples.push_back(std::move(s));
  }
  return data;
}

std::vector<float> snapshot(nn::ParamRegistry& reg) {
  std::vector<float> all;
  for (const auto& p : reg.params())
    all.insert(all.end(), p.w->begin(), p.w->end());
  return all;
}

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name) {
    path = fs::temp_directory_path() / name;
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

}  // namespace

TEST_CASE("learning rate schedule") {
  TrainConfig cfg;  // 100 constant + 100 decay, 2e-4
  CHECK(lr_at_epoch(cfg, 1) == doctest::Approx(2e-4));
  CHECK(lr_at_epoch(cfg, 50) == doctest::Approx(2e-4));
  CHECK(lr_at_epoch(cfg, 100) == doctest::Approx(2e-4));
  CHECK(lr_at_epoch(cfg, 150) == doctest::Approx(1e-4));
  CHECK(lr_at_epoch(cfg, 200) == doctest::Approx(0.0));
  double prev = 1e9;
  for (int e = 1; e <= 200; ++e) {
    const double lr = lr_at_epoch(cfg, e);
    CHECK(lr <= prev + 1e-15);
    prev = lr;
  }
  CHECK_THROWS_AS(lr_at_epoch(cfg, 0), std::out_of_range);
  CHECK_THROWS_AS(lr_at_epoch(cfg, 201), std::out_of_range);

  TrainConfig flat;
  flat.epochs_constant = 7;
  flat.epochs_decay = 0;
  for (int e = 1; e <= 7; ++e)
    CHECK(lr_at_epoch(flat, e) == doctest::Approx(flat.base_lr));
}

TEST_CASE("config validation") {
  TrainConfig cfg;
  cfg.level_mask = LevelMask::from_resolutions({64, 128});
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg = TrainConfig();
  cfg.base_lr = -1.0;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg = TrainConfig();
  cfg.weights.eta[1] = -0.1;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  CHECK_THROWS_AS(LevelMask::from_resolutions({512}), std::invalid_argument);
  CHECK(LevelMask::from_resolutions({256}).to_string() == "256");
}

TEST_CASE("replay buffer semantics") {
  Rng rng(1);
  Tensor img(1, 3, 4, 4);

  ReplayBuffer off(0);
  img.fill(3.0f);
  Tensor out = off.push_sample(img, rng);
  CHECK(out.vec() == img.vec());
  CHECK(off.size() == 0);

  ReplayBuffer buf(50);
  for (int i = 0; i < 10; ++i) {
    img.fill(float(i));
    Tensor got = buf.push_sample(img, rng);
    CHECK(got.vec() == img.vec());  // fill phase returns the incoming fake
  }
  CHECK(buf.size() == 10);

  for (int i = 10; i < 50; ++i) {
    img.fill(float(i));
    buf.push_sample(img, rng);
  }
  CHECK(buf.size() == 50);

  int swaps = 0;
  const int pushes = 10000;
  for (int i = 0; i < pushes; ++i) {
    img.fill(float(1000 + i));
    Tensor got = buf.push_sample(img, rng);
    CHECK(buf.size() == 50);
    if (got.vec() != img.vec()) ++swaps;
  }
  const double frac = double(swaps) / pushes;
  CHECK(frac > 0.45);
  CHECK(frac < 0.55);
}

TEST_CASE("train step: determinism and loss accounting") {
  TempDir dir("ps2man_step_test");
  TrainConfig cfg = small_config(dir.path.string());
  Trainer t1(cfg), t2(cfg);
  TrainBatch batch = toy_batch(1);

  StepBreakdowns b1 = t1.train_step(batch);
  StepBreakdowns b2 = t2.train_step(batch);
  CHECK(b1.g.total == b2.g.total);
  CHECK(b1.d.total == b2.d.total);
  CHECK(snapshot(t1.generator_a().registry()) ==
        snapshot(t2.generator_a().registry()));
  CHECK(snapshot(t1.discriminator(0, 2).registry()) ==
        snapshot(t2.discriminator(0, 2).registry()));

  // the breakdown total is the weighted sum of its own components
  double total = 0.0;
  for (int i = 0; i < 3; ++i)
    total += b1.g.gan_a[i] + b1.g.gan_b[i] +
             cfg.weights.lambda[i] * (b1.g.syn_a[i] + b1.g.syn_b[i]) +
             cfg.weights.eta[i] * (b1.g.cyc_a[i] + b1.g.cyc_b[i]);
  CHECK(std::abs(total - b1.g.total) < 1e-6);
  for (int i = 0; i < 3; ++i) {
    CHECK(b1.g.gan_a[i] > 0.0);
    CHECK(b1.d.syn_a[i] == 0.0);
  }
}

TEST_CASE("ablation: masked discriminators are frozen bit-exactly") {
  TempDir dir("ps2man_ablate_test");
  TrainConfig cfg = small_config(dir.path.string());
  cfg.level_mask = LevelMask::from_resolutions({256});
  Trainer t(cfg);

  auto d64_before = snapshot(t.discriminator(0, 0).registry());
  auto d128_before = snapshot(t.discriminator(1, 1).registry());
  auto d256_before = snapshot(t.discriminator(0, 2).registry());

  StepBreakdowns bd;
  for (uint64_t i = 0; i < 3; ++i) bd = t.train_step(toy_batch(i));

  CHECK(bd.g.gan_a[0] == 0.0);
  CHECK(bd.g.gan_a[1] == 0.0);
  CHECK(bd.g.gan_b[0] == 0.0);
  CHECK(bd.g.gan_a[2] > 0.0);
  CHECK(bd.d.gan_a[0] == 0.0);
  CHECK(bd.d.gan_a[2] > 0.0);

  CHECK(snapshot(t.discriminator(0, 0).registry()) == d64_before);
  CHECK(snapshot(t.discriminator(1, 1).registry()) == d128_before);
  CHECK(snapshot(t.discriminator(0, 2).registry()) != d256_before);

  // heads stay live: all three levels still produce outputs
  GeneratorOutput out = t.generator_a().forward(toy_batch(5).photo, false);
  for (const auto& level : out.levels) CHECK(all_finite(level));
}

TEST_CASE("non-finite loss aborts with the term name") {
  TempDir dir("ps2man_abort_test");
  TrainConfig cfg = small_config(dir.path.string());
  Trainer t(cfg);
  TrainBatch bad = toy_batch(1);
  bad.sketch.data()[0] = std::numeric_limits<float>::quiet_NaN();
  CHECK_THROWS_WITH_AS(t.train_step(bad), doctest::Contains("syn_b"),
                       TrainAbort);
}

TEST_CASE("checkpoints round-trip bit-exactly") {
  TempDir dir("ps2man_ckpt_test");
  TrainConfig cfg = small_config(dir.path.string());
  Trainer t(cfg);
  for (uint64_t i = 0; i < 2; ++i) t.train_step(toy_batch(i));

  const std::string p1 = (dir.path / "a.bin").string();
  const std::string p2 = (dir.path / "b.bin").string();
  t.save_checkpoint(p1);

  Trainer t2(cfg);
  t2.load_checkpoint(p1);
  t2.save_checkpoint(p2);

  std::ifstream f1(p1, std::ios::binary), f2(p2, std::ios::binary);
  std::vector<char> c1((std::istreambuf_iterator<char>(f1)), {});
  std::vector<char> c2((std::istreambuf_iterator<char>(f2)), {});
  CHECK(c1 == c2);

  TrainConfig other = cfg;
  other.seed = 999;
  Trainer t3(other);
  CHECK_THROWS_AS(t3.load_checkpoint(p1), std::runtime_error);
}

TEST_CASE("fit: resume reproduces the uninterrupted run exactly") {
  DatasetSplits data = toy_splits(2, 1);

  TempDir full_dir("ps2man_fit_full");
  TrainConfig full_cfg = small_config(full_dir.path.string());
  full_cfg.epochs_constant = 2;
  full_cfg.epochs_decay = 2;
  full_cfg.checkpoint_every = 2;
  Trainer full(full_cfg);
  auto history = full.fit(data);
  CHECK(full.epoch() == 4);
  CHECK(fs::exists(full_dir.path / "ckpt_last.bin"));
  CHECK(fs::exists(full_dir.path / "ckpt_best.bin"));
  CHECK(fs::exists(full_dir.path / "ckpt_e2.bin"));
  CHECK(fs::exists(full_dir.path / "train_log.jsonl"));
  CHECK(!history.empty());

  // stop after two epochs, then resume from the checkpoint
  TempDir part_dir("ps2man_fit_part");
  TrainConfig part_cfg = full_cfg;
  part_cfg.out_dir = part_dir.path.string();
  part_cfg.epochs_constant = 2;
  part_cfg.epochs_decay = 0;
  Trainer part(part_cfg);
  part.fit(data);
  CHECK(part.epoch() == 2);

  TrainConfig resume_cfg = full_cfg;
  resume_cfg.out_dir = part_dir.path.string();
  Trainer resumed(resume_cfg);
  resumed.load_checkpoint((part_dir.path / "ckpt_last.bin").string());
  CHECK(resumed.epoch() == 2);
  resumed.fit(data);
  CHECK(resumed.epoch() == 4);

  CHECK(snapshot(resumed.generator_a().registry()) ==
        snapshot(full.generator_a().registry()));
  CHECK(snapshot(resumed.generator_b().registry()) ==
        snapshot(full.generator_b().registry()));
  CHECK(snapshot(resumed.discriminator(1, 2).registry()) ==
        snapshot(full.discriminator(1, 2).registry()));
}

TEST_CASE("instance normalization and alternate gan modes run a step") {
  TempDir dir("ps2man_variants");
  for (auto mode : {GanMode::LeastSquares, GanMode::Saturating}) {
    TrainConfig cfg = small_config(dir.path.string());
    cfg.norm = nn::NormKind::Instance;
    cfg.gan_mode = mode;
    Trainer t(cfg);
    StepBreakdowns bd = t.train_step(toy_batch(3));
    CHECK(std::isfinite(bd.g.total));
    CHECK(std::isfinite(bd.d.total));
    CHECK(bd.g.syn_b[2] > 0.0);
  }
}

TEST_CASE("empty validation split is tolerated by fit") {
  DatasetSplits data = toy_splits(1, 0);
  TempDir dir("ps2man_fit_noval");
  TrainConfig cfg = small_config(dir.path.string());
  cfg.epochs_constant = 1;
  cfg.epochs_decay = 0;
  Trainer t(cfg);
  auto history = t.fit(data);
  CHECK(t.epoch() == 1);
  CHECK(!history.empty());
}
