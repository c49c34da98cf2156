#include "ungap/runconfig.hpp"

#include <fstream>
#include <sstream>

#include "ungap/errors.hpp"

namespace ungap {
namespace {

bool parse_bool(const std::string& v, const std::string& key) {
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw InvalidConfigError("config: key '" + key + "' expects a boolean, got '" + v + "'");
}

int parse_int(const std::string& v, const std::string& key) {
  try {
    size_t pos = 0;
    int out = std::stoi(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return out;
  } catch (const std::exception&) {
    throw InvalidConfigError("config: key '" + key + "' expects an integer, got '" + v + "'");
  }
}

double parse_double(const std::string& v, const std::string& key) {
  try {
    size_t pos = 0;
    double out = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return out;
  } catch (const std::exception&) {
    throw InvalidConfigError("config: key '" + key + "' expects a number, got '" + v + "'");
  }
}

std::uint64_t parse_u64(const std::string& v, const std::string& key) {
  try {
    size_t pos = 0;
    unsigned long long out = std::stoull(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return out;
  } catch (const std::exception&) {
    throw InvalidConfigError("config: key '" + key + "' expects an unsigned integer, got '" +
                             v + "'");
  }
}

std::string trim(const std::string& s) {
  size_t a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  size_t b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

}  // namespace

void RunConfig::validate() const {
  model.validate();
  train.validate();
  if (!(threshold > 0.0 && threshold < 1.0)) {
    throw InvalidConfigError("config: eval.threshold must lie in (0,1)");
  }
}

const std::vector<ConfigKeyDoc>& config_key_docs() {
  static const std::vector<ConfigKeyDoc> docs = {
      {"model.preset", "architecture preset: tiny or xception_like (resets preset defaults)"},
      {"model.input_size", "square input resolution the network accepts"},
      {"model.in_channels", "input channel count (grayscale inputs are replicated)"},
      {"model.base_channels", "channel width of the first encoder stage"},
      {"model.encoder_depth", "number of stride-2 encoder stages"},
      {"model.enable_hm", "heteroscedastic head emitting y_hat_aux and log-variance s"},
      {"model.enable_upfm", "uncertainty-driven feature modulation (requires enable_hm)"},
      {"model.enable_bdh", "dual-branch boundary-aware detection head"},
      {"model.upfm_hidden_channels", "hidden width of the modulation generator"},
      {"model.upfm_input", "modulation input: log_variance or variance"},
      {"model.s_clamp_min", "lower clamp for predicted log-variance"},
      {"model.s_clamp_max", "upper clamp for predicted log-variance"},
      {"train.learning_rate", "Adam step size"},
      {"train.batch_size", "samples per optimization step"},
      {"train.epochs", "passes over the training set"},
      {"train.beta", "beta-NLL exponent in [0,1]"},
      {"train.w1", "weight of the aleatoric loss term"},
      {"train.w2", "weight of the boundary loss term"},
      {"train.w3", "weight of the segmentation loss term"},
      {"train.seed", "run seed; derives all shuffle/augment streams"},
      {"train.train_size", "square crop size fed to the network"},
      {"train.checkpoint_every", "epoch interval for periodic checkpoints (0 = final only)"},
      {"train.augment", "apply the random crop + one-of augmentation pipeline"},
      {"train.boundary_width", "morphological gradient radius for boundary ground truth"},
      {"train.dice_eps", "dice loss smoothing constant"},
      {"data.dir", "dataset root containing images/ and masks/"},
      {"out.dir", "output directory for checkpoints, logs and exports"},
      {"eval.threshold", "probability threshold for binarizing predictions"},
  };
  return docs;
}

void apply_config_kv(RunConfig& cfg, const std::string& key, const std::string& value) {
  if (key == "model.preset") {
    Preset p = preset_from_string(value);
    cfg.model = ModelConfig::for_preset(p, cfg.model.input_size);
    return;
  }
  if (key == "model.input_size") { cfg.model.input_size = parse_int(value, key); return; }
  if (key == "model.in_channels") { cfg.model.in_channels = parse_int(value, key); return; }
  if (key == "model.base_channels") { cfg.model.base_channels = parse_int(value, key); return; }
  if (key == "model.encoder_depth") { cfg.model.encoder_depth = parse_int(value, key); return; }
  if (key == "model.enable_hm") { cfg.model.enable_hm = parse_bool(value, key); return; }
  if (key == "model.enable_upfm") { cfg.model.enable_upfm = parse_bool(value, key); return; }
  if (key == "model.enable_bdh") { cfg.model.enable_bdh = parse_bool(value, key); return; }
  if (key == "model.upfm_hidden_channels") {
    cfg.model.upfm_hidden_channels = parse_int(value, key);
    return;
  }
  if (key == "model.upfm_input") {
    cfg.model.upfm_input = upfm_input_from_string(value);
    return;
  }
  if (key == "model.s_clamp_min") { cfg.model.s_clamp_min = parse_double(value, key); return; }
  if (key == "model.s_clamp_max") { cfg.model.s_clamp_max = parse_double(value, key); return; }
  if (key == "train.learning_rate") {
    cfg.train.learning_rate = parse_double(value, key);
    return;
  }
  if (key == "train.batch_size") { cfg.train.batch_size = parse_int(value, key); return; }
  if (key == "train.epochs") { cfg.train.epochs = parse_int(value, key); return; }
  if (key == "train.beta") { cfg.train.beta = parse_double(value, key); return; }
  if (key == "train.w1") { cfg.train.loss_weights.w1 = parse_double(value, key); return; }
  if (key == "train.w2") { cfg.train.loss_weights.w2 = parse_double(value, key); return; }
  if (key == "train.w3") { cfg.train.loss_weights.w3 = parse_double(value, key); return; }
  if (key == "train.seed") { cfg.train.seed = parse_u64(value, key); return; }
  if (key == "train.train_size") { cfg.train.train_size = parse_int(value, key); return; }
  if (key == "train.checkpoint_every") {
    cfg.train.checkpoint_every = parse_int(value, key);
    return;
  }
  if (key == "train.augment") { cfg.train.augment = parse_bool(value, key); return; }
  if (key == "train.boundary_width") {
    cfg.train.boundary_width = parse_int(value, key);
    return;
  }
  if (key == "train.dice_eps") { cfg.train.dice_eps = parse_double(value, key); return; }
  if (key == "data.dir") { cfg.data_dir = value; return; }
  if (key == "out.dir") { cfg.out_dir = value; return; }
  if (key == "eval.threshold") { cfg.threshold = parse_double(value, key); return; }
  throw InvalidConfigError("config: unknown key '" + key + "'");
}

void apply_config_file(RunConfig& cfg, const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file: " + path);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    size_t hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    size_t eq = line.find('=');
    if (eq == std::string::npos) {
      throw InvalidConfigError("config: line " + std::to_string(lineno) + " of " + path +
                               " is not key=value: '" + line + "'");
    }
    apply_config_kv(cfg, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
}

RunConfig parse_config_file(const std::string& path) {
  RunConfig cfg;
  apply_config_file(cfg, path);
  return cfg;
}

std::string render_config(const RunConfig& cfg) {
  std::ostringstream os;
  os.precision(17);
  os << "model.preset = " << to_string(cfg.model.preset) << "\n";
  os << "model.input_size = " << cfg.model.input_size << "\n";
  os << "model.in_channels = " << cfg.model.in_channels << "\n";
  os << "model.base_channels = " << cfg.model.base_channels << "\n";
  os << "model.encoder_depth = " << cfg.model.encoder_depth << "\n";
  os << "model.enable_hm = " << (cfg.model.enable_hm ? "true" : "false") << "\n";
  os << "model.enable_upfm = " << (cfg.model.enable_upfm ? "true" : "false") << "\n";
  os << "model.enable_bdh = " << (cfg.model.enable_bdh ? "true" : "false") << "\n";
  os << "model.upfm_hidden_channels = " << cfg.model.upfm_hidden_channels << "\n";
  os << "model.upfm_input = " << to_string(cfg.model.upfm_input) << "\n";
  os << "model.s_clamp_min = " << cfg.model.s_clamp_min << "\n";
  os << "model.s_clamp_max = " << cfg.model.s_clamp_max << "\n";
  os << "train.learning_rate = " << cfg.train.learning_rate << "\n";
  os << "train.batch_size = " << cfg.train.batch_size << "\n";
  os << "train.epochs = " << cfg.train.epochs << "\n";
  os << "train.beta = " << cfg.train.beta << "\n";
  os << "train.w1 = " << cfg.train.loss_weights.w1 << "\n";
  os << "train.w2 = " << cfg.train.loss_weights.w2 << "\n";
  os << "train.w3 = " << cfg.train.loss_weights.w3 << "\n";
  os << "train.seed = " << cfg.train.seed << "\n";
  os << "train.train_size = " << cfg.train.train_size << "\n";
  os << "train.checkpoint_every = " << cfg.train.checkpoint_every << "\n";
  os << "train.augment = " << (cfg.train.augment ? "true" : "false") << "\n";
  os << "train.boundary_width = " << cfg.train.boundary_width << "\n";
  os << "train.dice_eps = " << cfg.train.dice_eps << "\n";
  if (!cfg.data_dir.empty()) os << "data.dir = " << cfg.data_dir << "\n";
  if (!cfg.out_dir.empty()) os << "out.dir = " << cfg.out_dir << "\n";
  os << "eval.threshold = " << cfg.threshold << "\n";
  return os.str();
}

void write_config_file(const RunConfig& cfg, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write config file: " + path);
  out << render_config(cfg);
}

}  // namespace ungap
