#include <CLI11.hpp>

#include <cstdlib>
#include <filesystem>
#include <iostream>

#include "ps2man/config.hpp"
#include "ps2man/evaluate.hpp"
#include "ps2man/synthesis.hpp"
#include "ps2man/trainer.hpp"

namespace fs = std::filesystem;
using namespace ps2man;

namespace {

std::string default_out_root() {
  if (const char* env = std::getenv("PS2MAN_OUT")) return env;
  return "ps2man_out";
}

ConfigFile load_config(const std::string& path,
                       const std::vector<std::string>& overrides,
                       std::optional<uint64_t> seed) {
  ConfigFile cfg = path.empty() ? ConfigFile() : ConfigFile::load(path);
  for (const auto& kv : overrides) cfg.apply_override(kv);
  if (seed) cfg.set("trainer.seed", std::to_string(*seed));
  return cfg;
}

RunConfig realize(ConfigFile& cfg, const std::string& out_dir) {
  RunConfig rc = RunConfig::from_config(cfg);
  rc.trainer.out_dir = out_dir;
  return rc;
}

int run_training(ConfigFile cfg, const std::string& out_dir, bool dry_run) {
  RunConfig rc = realize(cfg, out_dir);
  if (dry_run) {
    std::cout << cfg.serialize();
    return 0;
  }
  fs::create_directories(out_dir);
  cfg.save((fs::path(out_dir) / "config_resolved.cfg").string());

  DatasetSplits data = load_dataset(rc.dataset_root, rc.splits, rc.geometry);
  std::cout << "loaded " << data.train.samples.size() << "/"
            << data.val.samples.size() << "/" << data.test.samples.size()
            << " train/val/test pairs from " << rc.dataset_root << "\n";

  Trainer trainer(rc.trainer);
  const fs::path resume = fs::path(out_dir) / "ckpt_last.bin";
  if (fs::exists(resume)) {
    std::cout << "resuming from " << resume << "\n";
    trainer.load_checkpoint(resume.string());
  }
  auto history = trainer.fit(data);
  std::cout << "finished " << trainer.epoch() << " epochs, best val SSIM "
            << trainer.best_val_ssim() << "\n";
  for (const auto& h : history)
    std::cout << "  checkpoint " << h.path << " (epoch " << h.epoch << ")\n";
  return 0;
}

int cmd_train(const std::string& config_path,
              const std::vector<std::string>& overrides,
              std::optional<uint64_t> seed, std::string out_dir,
              bool dry_run) {
  if (out_dir.empty()) out_dir = default_out_root() + "/train";
  return run_training(load_config(config_path, overrides, seed), out_dir,
                      dry_run);
}

int cmd_ablate(const std::string& config_path,
               const std::vector<std::string>& overrides,
               std::optional<uint64_t> seed, std::string out_dir,
               bool dry_run) {
  if (out_dir.empty()) out_dir = default_out_root() + "/ablate";
  const char* mask_names[3] = {"d256", "d256_128", "d256_128_64"};
  const char* mask_values[3] = {"256", "256,128", "256,128,64"};

  struct Cell {
    double ssim_photo, ssim_sketch, fsim_photo, fsim_sketch;
  };
  std::vector<Cell> cells;

  for (int i = 0; i < 3; ++i) {
    ConfigFile cfg = load_config(config_path, overrides, seed);
    cfg.set("trainer.levels", mask_values[i]);
    const std::string run_dir = out_dir + "/" + mask_names[i];
    if (dry_run) {
      std::cout << "# configuration " << mask_names[i] << " -> " << run_dir
                << "\n" << cfg.serialize() << "\n";
      continue;
    }
    int rcode = run_training(cfg, run_dir, false);
    if (rcode != 0) return rcode;

    RunConfig rc = realize(cfg, run_dir);
    DatasetSplits data = load_dataset(rc.dataset_root, rc.splits, rc.geometry);
    Trainer trainer(rc.trainer);
    const fs::path best = fs::path(run_dir) / "ckpt_best.bin";
    const fs::path last = fs::path(run_dir) / "ckpt_last.bin";
    trainer.load_checkpoint(
        (fs::exists(best) ? best : last).string());
    EvaluationReport rep =
        evaluate_run(trainer, data.test, run_dir + "/eval", rc.lbp);
    cells.push_back({rep.iqa.mean_ssim_photo, rep.iqa.mean_ssim_sketch,
                     rep.iqa.mean_fsim_photo, rep.iqa.mean_fsim_sketch});
  }
  if (dry_run) return 0;

  std::ofstream table(fs::path(out_dir) / "ablation.csv");
  table << "metric,d256,d256_128,d256_128_64\n";
  const char* rows[4] = {"ssim_photo_synthesis", "ssim_sketch_synthesis",
                         "fsim_photo_synthesis", "fsim_sketch_synthesis"};
  for (int r = 0; r < 4; ++r) {
    table << rows[r];
    std::cout << rows[r];
    for (const auto& c : cells) {
      const double v = r == 0 ? c.ssim_photo
                       : r == 1 ? c.ssim_sketch
                       : r == 2 ? c.fsim_photo
                                : c.fsim_sketch;
      table << "," << v;
      std::cout << "\t" << v;
    }
    table << "\n";
    std::cout << "\n";
  }
  return 0;
}

int cmd_synth(const std::string& ckpt, const std::string& in_dir,
              const std::string& direction_str, std::string out_dir,
              std::string config_path,
              const std::vector<std::string>& overrides) {
  if (out_dir.empty()) out_dir = default_out_root() + "/synth";
  const Direction direction = parse_direction(direction_str);

  if (config_path.empty()) {
    const fs::path sibling =
        fs::path(ckpt).parent_path() / "config_resolved.cfg";
    if (fs::exists(sibling)) config_path = sibling.string();
  }
  ConfigFile cfg = load_config(config_path, overrides, std::nullopt);
  RunConfig rc = realize(cfg, out_dir);

  Trainer trainer(rc.trainer);
  trainer.load_checkpoint(ckpt);
  SynthesisOptions opts;
  opts.geometry = rc.geometry;
  auto manifest = synthesize_directory(trainer, file_hash_hex(ckpt), in_dir,
                                       direction, out_dir, opts);
  size_t ok = 0;
  for (const auto& r : manifest.rows) ok += !r.output_path.empty();
  std::cout << "synthesized " << ok << "/" << manifest.rows.size()
            << " images -> " << out_dir << "\n";
  return 0;
}

int cmd_eval(const std::string& ckpt, const std::string& config_path,
             std::string out_dir, const std::vector<std::string>& overrides) {
  if (out_dir.empty()) out_dir = default_out_root() + "/eval";
  std::string cpath = config_path;
  if (cpath.empty()) {
    const fs::path sibling =
        fs::path(ckpt).parent_path() / "config_resolved.cfg";
    if (fs::exists(sibling)) cpath = sibling.string();
  }
  ConfigFile cfg = load_config(cpath, overrides, std::nullopt);
  RunConfig rc = realize(cfg, out_dir);

  DatasetSplits data = load_dataset(rc.dataset_root, rc.splits, rc.geometry);
  Trainer trainer(rc.trainer);
  trainer.load_checkpoint(ckpt);
  EvaluationReport rep = evaluate_run(trainer, data.test, out_dir, rc.lbp);
  std::cout << "ssim photo " << rep.iqa.mean_ssim_photo << "  sketch "
            << rep.iqa.mean_ssim_sketch << "\n"
            << "fsim photo " << rep.iqa.mean_fsim_photo << "  sketch "
            << rep.iqa.mean_fsim_sketch << "\n"
            << "rank-1 sketch matching " << rep.sketch_matching.rank(1)
            << "  photo matching " << rep.photo_matching.rank(1) << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"photo<->sketch synthesis: training, inference, evaluation"};
  app.require_subcommand(1);

  std::string config_path, out_dir, ckpt, in_dir, direction;
  std::vector<std::string> overrides;
  std::optional<uint64_t> seed;
  bool dry_run = false;

  auto add_common = [&](CLI::App* cmd, bool with_config) {
    if (with_config)
      cmd->add_option("--config", config_path, "configuration file");
    cmd->add_option("--set", overrides,
                    "override a config key (section.key=value)");
    cmd->add_option("--out", out_dir, "output directory");
    cmd->add_option("--seed", seed, "override trainer.seed");
  };

  CLI::App* train = app.add_subcommand("train", "train a model");
  add_common(train, true);
  train->add_flag("--dry-run", dry_run, "print the resolved config and stop");

  CLI::App* ablate =
      app.add_subcommand("ablate", "train the three supervision variants");
  add_common(ablate, true);
  ablate->add_flag("--dry-run", dry_run,
                   "print the three resolved configs and stop");

  CLI::App* synth = app.add_subcommand("synth", "translate a directory");
  synth->add_option("--ckpt", ckpt, "checkpoint file")->required();
  synth->add_option("--in", in_dir, "input directory")->required();
  synth->add_option("--direction", direction, "photo2sketch | sketch2photo")
      ->required();
  add_common(synth, true);

  CLI::App* eval = app.add_subcommand("eval", "evaluate on the test split");
  eval->add_option("--ckpt", ckpt, "checkpoint file")->required();
  add_common(eval, true);

  CLI11_PARSE(app, argc, argv);

  try {
    if (app.got_subcommand(train))
      return cmd_train(config_path, overrides, seed, out_dir, dry_run);
    if (app.got_subcommand(ablate))
      return cmd_ablate(config_path, overrides, seed, out_dir, dry_run);
    if (app.got_subcommand(synth))
      return cmd_synth(ckpt, in_dir, direction, out_dir, config_path,
                       overrides);
    if (app.got_subcommand(eval))
      return cmd_eval(ckpt, config_path, out_dir, overrides);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
