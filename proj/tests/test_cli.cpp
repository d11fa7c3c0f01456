#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>

#include "ps2man/synthetic.hpp"

namespace fs = std::filesystem;
using namespace ps2man;

#ifndef PS2MAN_CLI_PATH
#error "PS2MAN_CLI_PATH must point at the ps2man binary"
#endif

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

int run_cli(const std::string& args, const fs::path& log) {
  const std::string cmd = std::string(PS2MAN_CLI_PATH) + " " + args + " >> " +
                          log.string() + " 2>&1";
  return std::system(cmd.c_str());
}

// narrow networks so three trainings stay quick
void write_small_config(const fs::path& path, const fs::path& data_root) {
  std::ofstream f(path);
  f << "[dataset]\nroot = " << data_root.string()
    << "\ntrain = 4\nval = 1\ntest = 1\n";
  f << "[model]\n"
       "generator_tokens = C7S1-8,C3-12,C3-16,RB16x1,TC12,TC8,C7S1-3\n"
       "discriminator_tokens = C8-C12-C16-C16\n";
  f << "[trainer]\nepochs_constant = 1\nepochs_decay = 1\n"
       "checkpoint_every = 2\nflip_double = false\nreplay_buffer = 2\n";
}

size_t count_lines(const fs::path& p) {
  std::ifstream f(p);
  std::string line;
  size_t n = 0;
  while (std::getline(f, line)) ++n;
  return n;
}

}  // namespace

TEST_CASE("ablate trains the three variants and writes the table") {
  TempDir dir("ps2man_cli_ablate");
  make_synthetic_dataset((dir.path / "data").string(), 6);
  write_small_config(dir.path / "small.cfg", dir.path / "data");

  const int rc = run_cli("ablate --config " + (dir.path / "small.cfg").string() +
                             " --out " + (dir.path / "ablate").string(),
                         dir.path / "cli.log");
  REQUIRE(rc == 0);

  for (const char* sub : {"d256", "d256_128", "d256_128_64"}) {
    CAPTURE(sub);
    CHECK(fs::exists(dir.path / "ablate" / sub / "ckpt_last.bin"));
    CHECK(fs::exists(dir.path / "ablate" / sub / "config_resolved.cfg"));
    CHECK(fs::exists(dir.path / "ablate" / sub / "eval" / "iqa.csv"));
    // the mask landed in the resolved config
    std::ifstream f(dir.path / "ablate" / sub / "config_resolved.cfg");
    std::string all((std::istreambuf_iterator<char>(f)), {});
    if (std::string(sub) == "d256")
      CHECK(all.find("levels = 256\n") != std::string::npos);
    if (std::string(sub) == "d256_128_64")
      CHECK(all.find("levels = 256,128,64") != std::string::npos);
  }

  // 4 metric rows x 3 configuration columns
  const fs::path table = dir.path / "ablate" / "ablation.csv";
  REQUIRE(fs::exists(table));
  CHECK(count_lines(table) == 5);
  std::ifstream f(table);
  std::string header;
  std::getline(f, header);
  CHECK(header == "metric,d256,d256_128,d256_128_64");
  std::string row;
  while (std::getline(f, row))
    CHECK(std::count(row.begin(), row.end(), ',') == 3);
}

TEST_CASE("exit codes: dry run zero, config errors nonzero") {
  TempDir dir("ps2man_cli_codes");
  make_synthetic_dataset((dir.path / "data").string(), 4);
  write_small_config(dir.path / "small.cfg", dir.path / "data");

  CHECK(run_cli("train --config " + (dir.path / "small.cfg").string() +
                    " --dry-run",
                dir.path / "cli.log") == 0);
  CHECK(run_cli("train --config " + (dir.path / "small.cfg").string() +
                    " --set trainer.no_such_knob=1 --dry-run",
                dir.path / "cli.log") != 0);
  CHECK(run_cli("train --config " + (dir.path / "missing.cfg").string(),
                dir.path / "cli.log") != 0);
  CHECK(run_cli("synth --ckpt nope.bin --in x --direction upwards --out y",
                dir.path / "cli.log") != 0);

  // the failure messages name the offending key / path
  std::ifstream f(dir.path / "cli.log");
  std::string all((std::istreambuf_iterator<char>(f)), {});
  CHECK(all.find("trainer.no_such_knob") != std::string::npos);
  CHECK(all.find("missing.cfg") != std::string::npos);
}

TEST_CASE("PS2MAN_OUT provides the default output root") {
  TempDir dir("ps2man_cli_envout");
  make_synthetic_dataset((dir.path / "data").string(), 6);
  write_small_config(dir.path / "small.cfg", dir.path / "data");

  setenv("PS2MAN_OUT", (dir.path / "envroot").string().c_str(), 1);
  const int rc = run_cli(
      "train --config " + (dir.path / "small.cfg").string(),
      dir.path / "cli.log");
  unsetenv("PS2MAN_OUT");
  REQUIRE(rc == 0);
  CHECK(fs::exists(dir.path / "envroot" / "train" / "ckpt_last.bin"));
}
