#include "ps2man/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "ps2man/metrics.hpp"
#include "ps2man/image.hpp"
#include "ps2man/serialize.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace ps2man {

namespace {
constexpr int kLevelRes[3] = {64, 128, 256};
constexpr uint32_t kCheckpointMagic = 0x50533243;  // "PS2C"
constexpr uint32_t kCheckpointVersion = 1;
}  // namespace

LevelMask LevelMask::from_resolutions(const std::vector<int>& res) {
  LevelMask m;
  m.active = {false, false, false};
  for (int r : res) {
    if (r == 64) m.active[0] = true;
    else if (r == 128) m.active[1] = true;
    else if (r == 256) m.active[2] = true;
    else
      throw std::invalid_argument("level mask entries must be 64/128/256");
  }
  return m;
}

std::string LevelMask::to_string() const {
  std::string s;
  for (int i = 2; i >= 0; --i)
    if (active[i]) {
      if (!s.empty()) s += ",";
      s += std::to_string(kLevelRes[i]);
    }
  return s;
}

void TrainConfig::validate() const {
  if (base_lr < 0) throw std::invalid_argument("base_lr must be >= 0");
  if (epochs_constant < 0 || epochs_decay < 0)
    throw std::invalid_argument("epoch counts must be >= 0");
  if (total_epochs() < 1)
    throw std::invalid_argument("training needs at least one epoch");
  if (batch_size < 1) throw std::invalid_argument("batch_size must be >= 1");
  if (!level_mask.active[0] && !level_mask.active[1] && !level_mask.active[2])
    throw std::invalid_argument("level mask must keep at least one level");
  if (!level_mask.active[2])
    throw std::invalid_argument("the full-resolution level cannot be masked");
  if (replay_buffer_capacity < 0)
    throw std::invalid_argument("replay_buffer_capacity must be >= 0");
  for (int i = 0; i < 3; ++i)
    if (weights.lambda[i] < 0 || weights.eta[i] < 0)
      throw std::invalid_argument("loss weights must be nonnegative");
}

double lr_at_epoch(const TrainConfig& cfg, int epoch) {
  if (epoch < 1 || epoch > cfg.total_epochs())
    throw std::out_of_range("epoch " + std::to_string(epoch) +
                            " outside schedule [1, " +
                            std::to_string(cfg.total_epochs()) + "]");
  if (epoch <= cfg.epochs_constant || cfg.epochs_decay == 0)
    return cfg.base_lr;
  return cfg.base_lr * double(cfg.total_epochs() - epoch) /
         double(cfg.epochs_decay);
}

Trainer::Trainer(const TrainConfig& cfg) : cfg_(cfg) {
  cfg_.validate();
  Rng master(cfg_.seed);

  GeneratorSpec gspec;
  gspec.tokens = cfg_.generator_tokens;
  gspec.norm = cfg_.norm;
  Rng rga = master.split(0x6a, 0);
  Rng rgb = master.split(0x6a, 1);
  g_a_ = std::make_unique<Generator>(gspec, rga);
  g_b_ = std::make_unique<Generator>(gspec, rgb);

  for (int dir = 0; dir < 2; ++dir)
    for (int lv = 0; lv < 3; ++lv) {
      DiscriminatorSpec dspec;
      dspec.tokens = cfg_.discriminator_tokens;
      dspec.input_resolution = kLevelRes[lv];
      dspec.norm = cfg_.norm;
      Rng rd = master.split(0xd1, dir, lv);
      d_[dir][lv] = std::make_unique<Discriminator>(dspec, rd);
      buffers_[dir][lv] = ReplayBuffer(cfg_.replay_buffer_capacity);
    }

  opt_g_a_ = std::make_unique<Adam>(g_a_->registry(), cfg_.adam_beta1,
                                    cfg_.adam_beta2);
  opt_g_b_ = std::make_unique<Adam>(g_b_->registry(), cfg_.adam_beta1,
                                    cfg_.adam_beta2);
  for (int dir = 0; dir < 2; ++dir)
    for (int lv = 0; lv < 3; ++lv)
      opt_d_[dir][lv] = std::make_unique<Adam>(d_[dir][lv]->registry(),
                                               cfg_.adam_beta1,
                                               cfg_.adam_beta2);
  lr_ = cfg_.base_lr;
}

void Trainer::check_finite(double v, const char* term) const {
  if (!std::isfinite(v))
    throw TrainAbort(std::string("non-finite loss term ") + term +
                     " at step " + std::to_string(step_ + 1));
}

StepBreakdowns Trainer::train_step(const TrainBatch& batch) {
  const LossWeights& w = cfg_.weights;
  LossParts parts;

  ResolutionPyramid pyr_a = make_pyramid(batch.photo);
  ResolutionPyramid pyr_b = make_pyramid(batch.sketch);

  // Stash the fakes for the discriminator phase before the generators
  // change. Values only; no graph survives.
  std::array<std::array<Tensor, 3>, 2> detached;

  // --- generator phase, chain A: photo -> sketch -> photo -----------------
  {
    GeneratorOutput fake_b = g_a_->forward(batch.photo_in, true);
    GeneratorOutput rec_a = g_b_->forward(fake_b.levels[2], true);

    auto syn = synthesis_loss(fake_b, pyr_b);
    auto cyc = cycle_loss(rec_a, pyr_a);

    std::array<Tensor, 3> grec;
    for (int i = 0; i < 3; ++i)
      grec[i] = l1_grad(rec_a.levels[i], pyr_a.level(i), w.eta[i]);
    Tensor g_into_fake3 = g_b_->backward(grec, true);

    std::array<Tensor, 3> gfake;
    for (int i = 0; i < 3; ++i) {
      gfake[i] = l1_grad(fake_b.levels[i], pyr_b.level(i), w.lambda[i]);
      detached[0][i] = fake_b.levels[i];
      if (cfg_.level_mask.at(i)) {
        Tensor gadv;
        const double gl = adversarial_loss_g(*d_[0][i], fake_b.levels[i],
                                             cfg_.gan_mode, &gadv);
        check_finite(gl, "gan_a");
        parts.gan_a[i] = gl;
        axpy(gfake[i], 1.0f, gadv);
      } else {
        parts.gan_a[i] = 0.0;
      }
      check_finite(syn[i], "syn_b");
      check_finite(cyc[i], "cyc_a");
      parts.syn_b[i] = syn[i];
      parts.cyc_a[i] = cyc[i];
    }
    axpy(gfake[2], 1.0f, g_into_fake3);
    g_a_->backward(gfake, true);
  }

  // --- generator phase, chain B: sketch -> photo -> sketch ----------------
  {
    GeneratorOutput fake_a = g_b_->forward(batch.sketch_in, true);
    GeneratorOutput rec_b = g_a_->forward(fake_a.levels[2], true);

    auto syn = synthesis_loss(fake_a, pyr_a);
    auto cyc = cycle_loss(rec_b, pyr_b);

    std::array<Tensor, 3> grec;
    for (int i = 0; i < 3; ++i)
      grec[i] = l1_grad(rec_b.levels[i], pyr_b.level(i), w.eta[i]);
    Tensor g_into_fake3 = g_a_->backward(grec, true);

    std::array<Tensor, 3> gfake;
    for (int i = 0; i < 3; ++i) {
      gfake[i] = l1_grad(fake_a.levels[i], pyr_a.level(i), w.lambda[i]);
      detached[1][i] = fake_a.levels[i];
      if (cfg_.level_mask.at(i)) {
        Tensor gadv;
        const double gl = adversarial_loss_g(*d_[1][i], fake_a.levels[i],
                                             cfg_.gan_mode, &gadv);
        check_finite(gl, "gan_b");
        parts.gan_b[i] = gl;
        axpy(gfake[i], 1.0f, gadv);
      } else {
        parts.gan_b[i] = 0.0;
      }
      check_finite(syn[i], "syn_a");
      check_finite(cyc[i], "cyc_b");
      parts.syn_a[i] = syn[i];
      parts.cyc_b[i] = cyc[i];
    }
    axpy(gfake[2], 1.0f, g_into_fake3);
    g_b_->backward(gfake, true);
  }

  opt_g_a_->step(lr_);
  opt_g_b_->step(lr_);
  g_a_->registry().zero_grads();
  g_b_->registry().zero_grads();

  StepBreakdowns out;
  out.g = total_objective(parts, w);
  check_finite(out.g.total, "total");

  // --- discriminator phase -------------------------------------------------
  LossParts dparts;
  Rng buf_rng = Rng(cfg_.seed).split(0xb0f, uint64_t(step_));
  for (int dir = 0; dir < 2; ++dir)
    for (int i = 0; i < 3; ++i) {
      auto& slot = dir == 0 ? dparts.gan_a[i] : dparts.gan_b[i];
      if (!cfg_.level_mask.at(i)) {
        slot = 0.0;
        continue;
      }
      const Tensor& real = dir == 0 ? pyr_b.level(i) : pyr_a.level(i);
      Tensor fake = buffers_[dir][i].push_sample(detached[dir][i], buf_rng);
      const double dl =
          adversarial_loss_d(*d_[dir][i], real, fake, cfg_.gan_mode, true);
      check_finite(dl, dir == 0 ? "d_gan_a" : "d_gan_b");
      slot = dl;
      opt_d_[dir][i]->step(lr_);
      d_[dir][i]->registry().zero_grads();
    }
  for (int i = 0; i < 3; ++i) {
    dparts.syn_a[i] = dparts.syn_b[i] = 0.0;
    dparts.cyc_a[i] = dparts.cyc_b[i] = 0.0;
  }
  out.d = total_objective(dparts, w);

  ++step_;
  return out;
}

// ---------------------------------------------------------------------------
// fit

namespace {

json breakdown_json(const LossBreakdown& b) {
  return json{{"gan_a", b.gan_a}, {"gan_b", b.gan_b}, {"syn_a", b.syn_a},
              {"syn_b", b.syn_b}, {"cyc_a", b.cyc_a}, {"cyc_b", b.cyc_b},
              {"total", b.total}};
}

void atomic_copy_file(const fs::path& from, const fs::path& to) {
  fs::path tmp = to;
  tmp += ".tmp";
  fs::copy_file(from, tmp, fs::copy_options::overwrite_existing);
  fs::rename(tmp, to);
}

Tensor stack_images(const std::vector<const Tensor*>& parts) {
  const Tensor& first = *parts.front();
  Tensor out(int(parts.size()), first.c(), first.h(), first.w());
  const size_t stride = first.size();
  for (size_t i = 0; i < parts.size(); ++i)
    std::copy(parts[i]->data(), parts[i]->data() + stride,
              out.data() + i * stride);
  return out;
}

TrainBatch stack_batches(const std::vector<TrainBatch>& items) {
  if (items.size() == 1) return items.front();
  std::vector<const Tensor*> p, s, pi, si;
  for (const auto& b : items) {
    p.push_back(&b.photo);
    s.push_back(&b.sketch);
    pi.push_back(&b.photo_in);
    si.push_back(&b.sketch_in);
  }
  TrainBatch out;
  out.photo = stack_images(p);
  out.sketch = stack_images(s);
  out.photo_in = stack_images(pi);
  out.sketch_in = stack_images(si);
  out.identity = items.front().identity + "+";
  return out;
}

}  // namespace

std::vector<CheckpointInfo> Trainer::fit(const DatasetSplits& data) {
  if (data.train.samples.empty())
    throw std::runtime_error("fit: empty training split");
  fs::create_directories(cfg_.out_dir);

  std::ofstream log(fs::path(cfg_.out_dir) / "train_log.jsonl",
                    std::ios::app);
  BatchStream stream(data.train, cfg_.augment, cfg_.seed);

  std::vector<CheckpointInfo> history;
  const int first_epoch = epoch_ + 1;
  for (int epoch = first_epoch; epoch <= cfg_.total_epochs(); ++epoch) {
    lr_ = lr_at_epoch(cfg_, epoch);
    const int nb = stream.batches_per_epoch();
    for (int i = 0; i < nb; i += cfg_.batch_size) {
      std::vector<TrainBatch> items;
      for (int j = i; j < std::min(nb, i + cfg_.batch_size); ++j)
        items.push_back(stream.get(epoch, j));
      StepBreakdowns bd = train_step(stack_batches(items));
      json rec = {{"step", step_}, {"epoch", epoch}, {"lr", lr_},
                  {"g", breakdown_json(bd.g)}, {"d", breakdown_json(bd.d)}};
      log << rec.dump() << "\n";
    }
    log.flush();
    epoch_ = epoch;

    const double val =
        data.val.samples.empty() ? 0.0 : validation_ssim(data.val);
    json vrec = {{"epoch", epoch}, {"val_ssim", val}};
    log << vrec.dump() << "\n";
    log.flush();

    const fs::path last = fs::path(cfg_.out_dir) / "ckpt_last.bin";
    save_checkpoint(last.string());
    if (cfg_.checkpoint_every > 0 && epoch % cfg_.checkpoint_every == 0) {
      const fs::path periodic =
          fs::path(cfg_.out_dir) / ("ckpt_e" + std::to_string(epoch) + ".bin");
      atomic_copy_file(last, periodic);
      history.push_back({periodic.string(), epoch, val});
    }
    if (val > best_val_) {
      best_val_ = val;
      atomic_copy_file(last, fs::path(cfg_.out_dir) / "ckpt_best.bin");
    }
  }
  history.push_back({(fs::path(cfg_.out_dir) / "ckpt_last.bin").string(),
                     epoch_, best_val_});
  return history;
}

// ---------------------------------------------------------------------------
// inference & validation

Tensor Trainer::infer_photo_to_sketch(const Tensor& photo) {
  return g_a_->forward(photo, /*training=*/false).levels[2];
}

Tensor Trainer::infer_sketch_to_photo(const Tensor& sketch) {
  return g_b_->forward(sketch, /*training=*/false).levels[2];
}

double Trainer::validation_ssim(const DatasetSplit& val) {
  if (val.samples.empty())
    throw std::invalid_argument("validation_ssim: empty split");
  double acc = 0.0;
  for (const auto& s : val.samples) {
    Tensor fake_sketch = infer_photo_to_sketch(s.photo);
    Tensor fake_photo = infer_sketch_to_photo(s.sketch);
    acc += ssim(luminance255(fake_sketch), luminance255(s.sketch));
    acc += ssim(luminance255(fake_photo), luminance255(s.photo));
  }
  return acc / (2.0 * double(val.samples.size()));
}

// ---------------------------------------------------------------------------
// checkpointing

namespace {

void write_registry(BinWriter& w, const nn::ParamRegistry& reg) {
  w.u64(reg.params().size());
  for (const auto& p : reg.params()) {
    w.str(p.name);
    w.floats(*p.w);
  }
  w.u64(reg.buffers().size());
  for (const auto& b : reg.buffers()) {
    w.str(b.name);
    w.floats(*b.v);
  }
}

void read_registry(BinReader& r, nn::ParamRegistry& reg) {
  const size_t np = r.u64();
  if (np != reg.params().size())
    throw std::runtime_error("checkpoint: parameter count mismatch");
  for (const auto& p : reg.params()) {
    const std::string name = r.str();
    if (name != p.name)
      throw std::runtime_error("checkpoint: unexpected parameter " + name);
    auto vals = r.floats();
    if (vals.size() != p.w->size())
      throw std::runtime_error("checkpoint: size mismatch for " + name);
    *p.w = std::move(vals);
  }
  const size_t nb = r.u64();
  if (nb != reg.buffers().size())
    throw std::runtime_error("checkpoint: buffer count mismatch");
  for (const auto& b : reg.buffers()) {
    const std::string name = r.str();
    if (name != b.name)
      throw std::runtime_error("checkpoint: unexpected buffer " + name);
    auto vals = r.floats();
    if (vals.size() != b.v->size())
      throw std::runtime_error("checkpoint: size mismatch for " + name);
    *b.v = std::move(vals);
  }
}

void write_adam(BinWriter& w, Adam& opt) {
  w.i64(opt.steps_taken());
  w.u64(opt.first_moments().size());
  for (auto& m : opt.first_moments()) w.floats(m);
  for (auto& v : opt.second_moments()) w.floats(v);
}

void read_adam(BinReader& r, Adam& opt) {
  opt.set_steps_taken(r.i64());
  const size_t n = r.u64();
  if (n != opt.first_moments().size())
    throw std::runtime_error("checkpoint: optimizer state mismatch");
  for (auto& m : opt.first_moments()) m = r.floats();
  for (auto& v : opt.second_moments()) v = r.floats();
}

void write_buffer(BinWriter& w, const ReplayBuffer& buf) {
  w.u64(buf.pool().size());
  for (const auto& t : buf.pool()) {
    w.u32(uint32_t(t.n()));
    w.u32(uint32_t(t.c()));
    w.u32(uint32_t(t.h()));
    w.u32(uint32_t(t.w()));
    w.floats(t.vec());
  }
}

void read_buffer(BinReader& r, ReplayBuffer& buf) {
  buf.pool().clear();
  const size_t n = r.u64();
  for (size_t i = 0; i < n; ++i) {
    const int tn = int(r.u32()), tc = int(r.u32());
    const int th = int(r.u32()), tw = int(r.u32());
    Tensor t(tn, tc, th, tw);
    t.vec() = r.floats();
    buf.pool().push_back(std::move(t));
  }
}

}  // namespace

void Trainer::save_checkpoint(const std::string& path) const {
  const std::string tmp = path + ".tmp";
  {
    BinWriter w(tmp);
    w.u32(kCheckpointMagic);
    w.u32(kCheckpointVersion);
    w.u64(cfg_.config_hash);
    w.i64(epoch_);
    w.i64(step_);
    w.u64(cfg_.seed);
    w.f64(best_val_);
    write_registry(w, g_a_->registry());
    write_registry(w, g_b_->registry());
    for (int dir = 0; dir < 2; ++dir)
      for (int lv = 0; lv < 3; ++lv)
        write_registry(w, d_[dir][lv]->registry());
    write_adam(w, *opt_g_a_);
    write_adam(w, *opt_g_b_);
    for (int dir = 0; dir < 2; ++dir)
      for (int lv = 0; lv < 3; ++lv) write_adam(w, *opt_d_[dir][lv]);
    for (int dir = 0; dir < 2; ++dir)
      for (int lv = 0; lv < 3; ++lv) write_buffer(w, buffers_[dir][lv]);
    if (!w.good()) throw std::runtime_error("checkpoint write failed: " + path);
  }
  fs::rename(tmp, path);
}

void Trainer::load_checkpoint(const std::string& path) {
  BinReader r(path);
  if (r.u32() != kCheckpointMagic)
    throw std::runtime_error("not a checkpoint file: " + path);
  if (r.u32() != kCheckpointVersion)
    throw std::runtime_error("unsupported checkpoint version: " + path);
  const uint64_t hash = r.u64();
  if (cfg_.config_hash != 0 && hash != 0 && hash != cfg_.config_hash)
    throw std::runtime_error(
        "checkpoint was written under a different configuration");
  epoch_ = int(r.i64());
  step_ = r.i64();
  const uint64_t seed = r.u64();
  if (seed != cfg_.seed)
    throw std::runtime_error("checkpoint seed differs from configured seed");
  best_val_ = r.f64();
  read_registry(r, g_a_->registry());
  read_registry(r, g_b_->registry());
  for (int dir = 0; dir < 2; ++dir)
    for (int lv = 0; lv < 3; ++lv) read_registry(r, d_[dir][lv]->registry());
  read_adam(r, *opt_g_a_);
  read_adam(r, *opt_g_b_);
  for (int dir = 0; dir < 2; ++dir)
    for (int lv = 0; lv < 3; ++lv) read_adam(r, *opt_d_[dir][lv]);
  for (int dir = 0; dir < 2; ++dir)
    for (int lv = 0; lv < 3; ++lv) read_buffer(r, buffers_[dir][lv]);
}

}  // namespace ps2man
