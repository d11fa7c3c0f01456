#pragma once

#include <string>
#include <vector>

#include "ps2man/dataset.hpp"
#include "ps2man/metrics.hpp"
#include "ps2man/trainer.hpp"

namespace ps2man {

struct IqaRow {
  std::string image_id;
  std::string direction;  // "photo-synthesis" or "sketch-synthesis"
  double ssim = 0.0;
  double fsim = 0.0;
};

struct IqaReport {
  std::vector<IqaRow> rows;
  double mean_ssim_photo = 0.0, mean_fsim_photo = 0.0;
  double mean_ssim_sketch = 0.0, mean_fsim_sketch = 0.0;
};

struct EvaluationReport {
  IqaReport iqa;
  CmcCurve sketch_matching;  // synthesized sketches vs real-sketch gallery
  CmcCurve photo_matching;   // synthesized photos vs real-photo gallery
};

/// Published CUHK/CUFSF results, kept as context constants for summary
/// reports; matching rates are percentages over the test probes.
namespace reference {

inline constexpr double kCuhkSsimPhoto = 0.7915;
inline constexpr double kCuhkSsimSketch = 0.6156;
inline constexpr double kCuhkFsimPhoto = 0.8062;
inline constexpr double kCuhkFsimSketch = 0.7361;

// single / two / three supervision levels (SSIM, photo synthesis)
inline constexpr double kCuhkAblationSsimPhoto[3] = {0.7626, 0.7851, 0.7915};

inline constexpr double kCuhkRank1Photo = 100.0;
inline constexpr double kCuhkRank1Sketch = 99.0;
inline constexpr double kCufsfRank1Photo = 47.0;
inline constexpr double kCufsfRank1Sketch = 51.0;

}  // namespace reference

/// Synthesize both directions over a test split, score SSIM/FSIM against
/// ground truth, run both LBP matching protocols, and drop iqa.csv,
/// cmc.csv and summary.csv into out_dir.
EvaluationReport evaluate_run(Trainer& trainer, const DatasetSplit& test,
                              const std::string& out_dir,
                              const LbpParams& lbp = {});

}  // namespace ps2man
