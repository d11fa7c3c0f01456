#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "ps2man/dataset.hpp"
#include "ps2man/metrics.hpp"
#include "ps2man/trainer.hpp"

namespace ps2man {

/// Flat key-value configuration with sections. Keys are addressed as
/// "section.key". Unknown keys are rejected by name so typos surface
/// immediately; every knob has a default, so an empty file is a valid
/// configuration.
class ConfigFile {
 public:
  ConfigFile();  // defaults only

  static ConfigFile load(const std::string& path);

  /// "section.key=value", the --set syntax.
  void apply_override(const std::string& assignment);
  void set(const std::string& key, const std::string& value);
  const std::string& get(const std::string& key) const;

  /// Render every key (defaults included) in canonical order.
  std::string serialize() const;
  void save(const std::string& path) const;
  uint64_t hash() const;  // FNV-1a over serialize()

 private:
  void check_known(const std::string& key) const;
  std::map<std::string, std::string> values_;
};

/// Typed view over a ConfigFile.
struct RunConfig {
  std::string dataset_root;
  SplitSpec splits;
  AlignmentGeometry geometry;
  TrainConfig trainer;
  LbpParams lbp;

  static RunConfig from_config(const ConfigFile& cfg);
};

}  // namespace ps2man
