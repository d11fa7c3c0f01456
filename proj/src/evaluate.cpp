#include "ps2man/evaluate.hpp"

#include <filesystem>
#include <fstream>

#include "ps2man/image.hpp"

namespace fs = std::filesystem;

namespace ps2man {

EvaluationReport evaluate_run(Trainer& trainer, const DatasetSplit& test,
                              const std::string& out_dir,
                              const LbpParams& lbp) {
  if (test.samples.empty())
    throw std::invalid_argument("evaluate_run: empty test split");
  fs::create_directories(out_dir);

  EvaluationReport report;
  std::vector<LabeledFeature> synth_sketch_probes, real_sketch_gallery;
  std::vector<LabeledFeature> synth_photo_probes, real_photo_gallery;

  for (const auto& s : test.samples) {
    Tensor fake_sketch = trainer.infer_photo_to_sketch(s.photo);
    Tensor fake_photo = trainer.infer_sketch_to_photo(s.sketch);

    Tensor fake_sketch_y = luminance255(fake_sketch);
    Tensor fake_photo_y = luminance255(fake_photo);
    Tensor real_sketch_y = luminance255(s.sketch);
    Tensor real_photo_y = luminance255(s.photo);

    IqaRow sketch_row{s.identity, "sketch-synthesis",
                      ssim(fake_sketch_y, real_sketch_y),
                      fsim(fake_sketch_y, real_sketch_y)};
    IqaRow photo_row{s.identity, "photo-synthesis",
                     ssim(fake_photo_y, real_photo_y),
                     fsim(fake_photo_y, real_photo_y)};
    report.iqa.rows.push_back(sketch_row);
    report.iqa.rows.push_back(photo_row);

    synth_sketch_probes.push_back({s.identity, lbp_features(fake_sketch_y, lbp)});
    real_sketch_gallery.push_back({s.identity, lbp_features(real_sketch_y, lbp)});
    synth_photo_probes.push_back({s.identity, lbp_features(fake_photo_y, lbp)});
    real_photo_gallery.push_back({s.identity, lbp_features(real_photo_y, lbp)});
  }

  const double n = double(test.samples.size());
  for (const auto& r : report.iqa.rows) {
    if (r.direction == "photo-synthesis") {
      report.iqa.mean_ssim_photo += r.ssim / n;
      report.iqa.mean_fsim_photo += r.fsim / n;
    } else {
      report.iqa.mean_ssim_sketch += r.ssim / n;
      report.iqa.mean_fsim_sketch += r.fsim / n;
    }
  }

  report.sketch_matching = cmc(synth_sketch_probes, real_sketch_gallery);
  report.photo_matching = cmc(synth_photo_probes, real_photo_gallery);

  {
    std::ofstream f(fs::path(out_dir) / "iqa.csv");
    f << "image_id,direction,ssim,fsim\n";
    for (const auto& r : report.iqa.rows)
      f << r.image_id << "," << r.direction << "," << r.ssim << "," << r.fsim
        << "\n";
  }
  {
    std::ofstream f(fs::path(out_dir) / "cmc.csv");
    f << "protocol,k,rate\n";
    for (size_t k = 0; k < report.sketch_matching.rank_rates.size(); ++k)
      f << "sketch_matching," << k + 1 << ","
        << report.sketch_matching.rank_rates[k] << "\n";
    for (size_t k = 0; k < report.photo_matching.rank_rates.size(); ++k)
      f << "photo_matching," << k + 1 << ","
        << report.photo_matching.rank_rates[k] << "\n";
  }
  {
    std::ofstream f(fs::path(out_dir) / "summary.csv");
    f << "metric,value\n";
    f << "ssim_photo_synthesis," << report.iqa.mean_ssim_photo << "\n";
    f << "ssim_sketch_synthesis," << report.iqa.mean_ssim_sketch << "\n";
    f << "fsim_photo_synthesis," << report.iqa.mean_fsim_photo << "\n";
    f << "fsim_sketch_synthesis," << report.iqa.mean_fsim_sketch << "\n";
    f << "rank1_sketch_matching," << report.sketch_matching.rank(1) << "\n";
    f << "rank1_photo_matching," << report.photo_matching.rank(1) << "\n";
    f << "reference_cuhk_ssim_photo," << reference::kCuhkSsimPhoto << "\n";
    f << "reference_cuhk_ssim_sketch," << reference::kCuhkSsimSketch << "\n";
    f << "reference_cuhk_fsim_photo," << reference::kCuhkFsimPhoto << "\n";
    f << "reference_cuhk_fsim_sketch," << reference::kCuhkFsimSketch << "\n";
    f << "reference_cuhk_rank1_sketch_pct," << reference::kCuhkRank1Sketch
      << "\n";
    f << "reference_cufsf_rank1_sketch_pct," << reference::kCufsfRank1Sketch
      << "\n";
  }
  return report;
}

}  // namespace ps2man
