#include "ps2man/config.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

namespace ps2man {

namespace {

const std::map<std::string, std::string>& default_values() {
  static const std::map<std::string, std::string> defaults = {
      {"dataset.root", ""},
      {"dataset.train", "60"},
      {"dataset.val", "28"},
      {"dataset.test", "100"},
      {"dataset.shuffle_seed", "none"},
      {"dataset.eye_left_x", "75"},
      {"dataset.eye_left_y", "125"},
      {"dataset.eye_right_x", "125"},
      {"dataset.eye_right_y", "125"},
      {"dataset.crop_width", "200"},
      {"dataset.crop_height", "250"},
      {"model.generator_tokens",
       "C7S1-64,C3-128,C3-256,RB256x9,TC64,TC32,C7S1-3"},
      {"model.discriminator_tokens", "C64-C128-C256-C512"},
      {"model.norm", "batch"},
      {"objective.lambda", "1.0"},
      {"objective.eta", "0.7"},
      {"objective.lambda1", ""},
      {"objective.lambda2", ""},
      {"objective.lambda3", ""},
      {"objective.eta1", ""},
      {"objective.eta2", ""},
      {"objective.eta3", ""},
      {"objective.gan_mode", "nonsaturating"},
      {"trainer.epochs_constant", "100"},
      {"trainer.epochs_decay", "100"},
      {"trainer.base_lr", "0.0002"},
      {"trainer.adam_beta1", "0.5"},
      {"trainer.adam_beta2", "0.999"},
      {"trainer.batch_size", "1"},
      {"trainer.levels", "256,128,64"},
      {"trainer.replay_buffer", "50"},
      {"trainer.seed", "1"},
      {"trainer.checkpoint_every", "5"},
      {"trainer.noise_amplitude", "0.02"},
      {"trainer.flip_probability", "0.5"},
      {"trainer.flip_double", "true"},
      {"metrics.lbp_grid", "8"},
  };
  return defaults;
}

std::string trim(const std::string& s) {
  size_t a = s.find_first_not_of(" \t\r");
  size_t b = s.find_last_not_of(" \t\r");
  return a == std::string::npos ? "" : s.substr(a, b - a + 1);
}

double to_double(const std::string& key, const std::string& v) {
  try {
    size_t pos = 0;
    double d = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return d;
  } catch (...) {
    throw std::runtime_error("config key " + key + ": bad number '" + v + "'");
  }
}

int to_int(const std::string& key, const std::string& v) {
  try {
    size_t pos = 0;
    int i = std::stoi(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return i;
  } catch (...) {
    throw std::runtime_error("config key " + key + ": bad integer '" + v +
                             "'");
  }
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw std::runtime_error("config key " + key + ": bad boolean '" + v + "'");
}

}  // namespace

ConfigFile::ConfigFile() : values_(default_values()) {}

void ConfigFile::check_known(const std::string& key) const {
  if (!default_values().count(key))
    throw std::runtime_error("unknown config key: " + key);
}

ConfigFile ConfigFile::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file: " + path);
  ConfigFile cfg;
  std::string line, section;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::string t = trim(line);
    if (t.empty() || t[0] == '#' || t[0] == ';') continue;
    if (t.front() == '[' && t.back() == ']') {
      section = trim(t.substr(1, t.size() - 2));
      continue;
    }
    const size_t eq = t.find('=');
    if (eq == std::string::npos)
      throw std::runtime_error(path + ":" + std::to_string(lineno) +
                               ": expected key = value");
    std::string key = trim(t.substr(0, eq));
    if (!section.empty()) key = section + "." + key;
    cfg.set(key, trim(t.substr(eq + 1)));
  }
  return cfg;
}

void ConfigFile::apply_override(const std::string& assignment) {
  const size_t eq = assignment.find('=');
  if (eq == std::string::npos)
    throw std::runtime_error("override must look like section.key=value: " +
                             assignment);
  std::string key = trim(assignment.substr(0, eq));
  if (key.find('.') == std::string::npos) {
    // bare key: accept it when exactly one section has it
    std::string match;
    for (const auto& [full, _] : default_values())
      if (full.substr(full.find('.') + 1) == key) {
        if (!match.empty())
          throw std::runtime_error("ambiguous config key '" + key +
                                   "': use section.key");
        match = full;
      }
    if (match.empty()) throw std::runtime_error("unknown config key: " + key);
    key = match;
  }
  set(key, trim(assignment.substr(eq + 1)));
}

void ConfigFile::set(const std::string& key, const std::string& value) {
  check_known(key);
  values_[key] = value;
}

const std::string& ConfigFile::get(const std::string& key) const {
  check_known(key);
  return values_.at(key);
}

std::string ConfigFile::serialize() const {
  std::ostringstream out;
  std::string section;
  for (const auto& [key, value] : values_) {
    const size_t dot = key.find('.');
    const std::string sec = key.substr(0, dot);
    if (sec != section) {
      if (!section.empty()) out << "\n";
      out << "[" << sec << "]\n";
      section = sec;
    }
    out << key.substr(dot + 1) << " = " << value << "\n";
  }
  return out.str();
}

void ConfigFile::save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write config: " + path);
  out << serialize();
}

uint64_t ConfigFile::hash() const {
  const std::string s = serialize();
  uint64_t h = 1469598103934665603ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

RunConfig RunConfig::from_config(const ConfigFile& cfg) {
  RunConfig rc;
  rc.dataset_root = cfg.get("dataset.root");
  rc.splits.train = to_int("dataset.train", cfg.get("dataset.train"));
  rc.splits.val = to_int("dataset.val", cfg.get("dataset.val"));
  rc.splits.test = to_int("dataset.test", cfg.get("dataset.test"));
  if (cfg.get("dataset.shuffle_seed") != "none")
    rc.splits.shuffle_seed = static_cast<uint64_t>(
        to_int("dataset.shuffle_seed", cfg.get("dataset.shuffle_seed")));

  rc.geometry.left_eye_x = to_double("dataset.eye_left_x", cfg.get("dataset.eye_left_x"));
  rc.geometry.left_eye_y = to_double("dataset.eye_left_y", cfg.get("dataset.eye_left_y"));
  rc.geometry.right_eye_x = to_double("dataset.eye_right_x", cfg.get("dataset.eye_right_x"));
  rc.geometry.right_eye_y = to_double("dataset.eye_right_y", cfg.get("dataset.eye_right_y"));
  rc.geometry.crop_width = to_int("dataset.crop_width", cfg.get("dataset.crop_width"));
  rc.geometry.crop_height = to_int("dataset.crop_height", cfg.get("dataset.crop_height"));

  TrainConfig& t = rc.trainer;
  t.generator_tokens = cfg.get("model.generator_tokens");
  t.discriminator_tokens = cfg.get("model.discriminator_tokens");
  const std::string norm = cfg.get("model.norm");
  if (norm == "batch") t.norm = nn::NormKind::Batch;
  else if (norm == "instance") t.norm = nn::NormKind::Instance;
  else throw std::runtime_error("model.norm must be batch or instance");

  const double lambda = to_double("objective.lambda", cfg.get("objective.lambda"));
  const double eta = to_double("objective.eta", cfg.get("objective.eta"));
  t.weights.lambda = {lambda, lambda, lambda};
  t.weights.eta = {eta, eta, eta};
  const char* lkeys[3] = {"objective.lambda1", "objective.lambda2",
                          "objective.lambda3"};
  const char* ekeys[3] = {"objective.eta1", "objective.eta2",
                          "objective.eta3"};
  for (int i = 0; i < 3; ++i) {
    if (!cfg.get(lkeys[i]).empty())
      t.weights.lambda[i] = to_double(lkeys[i], cfg.get(lkeys[i]));
    if (!cfg.get(ekeys[i]).empty())
      t.weights.eta[i] = to_double(ekeys[i], cfg.get(ekeys[i]));
  }

  const std::string mode = cfg.get("objective.gan_mode");
  if (mode == "nonsaturating") t.gan_mode = GanMode::NonSaturating;
  else if (mode == "saturating") t.gan_mode = GanMode::Saturating;
  else if (mode == "leastsquares") t.gan_mode = GanMode::LeastSquares;
  else
    throw std::runtime_error(
        "objective.gan_mode must be nonsaturating, saturating or "
        "leastsquares");

  t.epochs_constant = to_int("trainer.epochs_constant", cfg.get("trainer.epochs_constant"));
  t.epochs_decay = to_int("trainer.epochs_decay", cfg.get("trainer.epochs_decay"));
  t.base_lr = to_double("trainer.base_lr", cfg.get("trainer.base_lr"));
  t.adam_beta1 = to_double("trainer.adam_beta1", cfg.get("trainer.adam_beta1"));
  t.adam_beta2 = to_double("trainer.adam_beta2", cfg.get("trainer.adam_beta2"));
  t.batch_size = to_int("trainer.batch_size", cfg.get("trainer.batch_size"));

  std::vector<int> levels;
  std::stringstream ls(cfg.get("trainer.levels"));
  std::string item;
  while (std::getline(ls, item, ','))
    if (!trim(item).empty()) levels.push_back(to_int("trainer.levels", trim(item)));
  t.level_mask = LevelMask::from_resolutions(levels);

  t.replay_buffer_capacity = to_int("trainer.replay_buffer", cfg.get("trainer.replay_buffer"));
  t.seed = static_cast<uint64_t>(to_int("trainer.seed", cfg.get("trainer.seed")));
  t.checkpoint_every = to_int("trainer.checkpoint_every", cfg.get("trainer.checkpoint_every"));
  t.augment.noise_amplitude = to_double("trainer.noise_amplitude", cfg.get("trainer.noise_amplitude"));
  t.augment.flip_probability = to_double("trainer.flip_probability", cfg.get("trainer.flip_probability"));
  t.augment.flip_double = to_bool("trainer.flip_double", cfg.get("trainer.flip_double"));
  t.config_hash = cfg.hash();

  rc.lbp.grid = to_int("metrics.lbp_grid", cfg.get("metrics.lbp_grid"));
  rc.trainer.validate();
  return rc;
}

}  // namespace ps2man
