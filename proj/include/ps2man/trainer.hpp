#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "ps2man/adam.hpp"
#include "ps2man/dataset.hpp"
#include "ps2man/discriminator.hpp"
#include "ps2man/generator.hpp"
#include "ps2man/objective.hpp"
#include "ps2man/replay_buffer.hpp"

namespace ps2man {

/// Which supervision levels get adversarial feedback. Heads and L1 terms
/// stay active at every level; masking a level only silences its
/// discriminators.
struct LevelMask {
  std::array<bool, 3> active{true, true, true};  // 64, 128, 256

  bool at(int level_index) const { return active[level_index]; }
  static LevelMask from_resolutions(const std::vector<int>& res);
  std::string to_string() const;
};

struct TrainConfig {
  int epochs_constant = 100;
  int epochs_decay = 100;
  double base_lr = 2e-4;
  double adam_beta1 = 0.5;
  double adam_beta2 = 0.999;
  int batch_size = 1;
  LossWeights weights;
  LevelMask level_mask;
  int replay_buffer_capacity = 50;
  uint64_t seed = 1;
  GanMode gan_mode = GanMode::NonSaturating;
  nn::NormKind norm = nn::NormKind::Batch;
  AugmentParams augment;
  int checkpoint_every = 5;
  std::string generator_tokens =
      "C7S1-64,C3-128,C3-256,RB256x9,TC64,TC32,C7S1-3";
  std::string discriminator_tokens = "C64-C128-C256-C512";
  std::string out_dir = "ps2man_out";
  uint64_t config_hash = 0;

  int total_epochs() const { return epochs_constant + epochs_decay; }
  void validate() const;
};

/// base_lr through the constant phase, then linear decay to zero by the
/// final epoch. Epochs are 1-based; out-of-range is an error.
double lr_at_epoch(const TrainConfig& cfg, int epoch);

struct StepBreakdowns {
  LossBreakdown g;  // generator phase: adversarial + L1 + cycle terms
  LossBreakdown d;  // discriminator phase: per-level real/fake losses
};

struct CheckpointInfo {
  std::string path;
  int epoch = 0;
  double val_ssim = 0.0;
};

/// Thrown when a loss term stops being finite; carries the term name.
struct TrainAbort : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Owns both generators, the six discriminators, their optimizers and
/// replay buffers, and runs the alternating update.
class Trainer {
 public:
  explicit Trainer(const TrainConfig& cfg);

  /// One generator update (both directions jointly), then one update per
  /// active discriminator on buffered detached fakes.
  StepBreakdowns train_step(const TrainBatch& batch);

  /// Full schedule over the train split with per-epoch validation SSIM,
  /// JSONL step logging, and periodic/best/last checkpoints in out_dir.
  std::vector<CheckpointInfo> fit(const DatasetSplits& data);

  void save_checkpoint(const std::string& path) const;
  void load_checkpoint(const std::string& path);

  /// Level-3 output of the photo->sketch generator in inference mode.
  Tensor infer_photo_to_sketch(const Tensor& photo);
  Tensor infer_sketch_to_photo(const Tensor& sketch);

  /// Mean level-3 SSIM over both directions of a validation split.
  double validation_ssim(const DatasetSplit& val);

  Generator& generator_a() { return *g_a_; }
  Generator& generator_b() { return *g_b_; }
  /// direction 0 judges synthesized sketches, 1 judges synthesized photos.
  Discriminator& discriminator(int direction, int level_index) {
    return *d_[direction][level_index];
  }
  ReplayBuffer& replay_buffer(int direction, int level_index) {
    return buffers_[direction][level_index];
  }

  const TrainConfig& config() const { return cfg_; }
  int epoch() const { return epoch_; }
  int64_t global_step() const { return step_; }
  double current_lr() const { return lr_; }
  void set_lr(double lr) { lr_ = lr; }
  double best_val_ssim() const { return best_val_; }

 private:
  void check_finite(double v, const char* term) const;

  TrainConfig cfg_;
  std::unique_ptr<Generator> g_a_, g_b_;
  std::array<std::array<std::unique_ptr<Discriminator>, 3>, 2> d_;
  std::unique_ptr<Adam> opt_g_a_, opt_g_b_;
  std::array<std::array<std::unique_ptr<Adam>, 3>, 2> opt_d_;
  std::array<std::array<ReplayBuffer, 3>, 2> buffers_{
      std::array<ReplayBuffer, 3>{ReplayBuffer(0), ReplayBuffer(0),
                                  ReplayBuffer(0)},
      std::array<ReplayBuffer, 3>{ReplayBuffer(0), ReplayBuffer(0),
                                  ReplayBuffer(0)}};
  double lr_ = 0.0;
  int epoch_ = 0;      // last completed epoch
  int64_t step_ = 0;   // completed optimization steps
  double best_val_ = -1.0;
};

}  // namespace ps2man
