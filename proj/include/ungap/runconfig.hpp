#pragma once

#include <string>
#include <vector>

#include "ungap/model.hpp"
#include "ungap/train.hpp"

namespace ungap {

// Merged model + training + path settings, loadable from a key=value text
// file ('#' starts a comment). Unknown keys are rejected; every key carries
// a one-line description for --help.
struct RunConfig {
  ModelConfig model;
  TrainConfig train;
  std::string data_dir;
  std::string out_dir;
  double threshold = 0.5;

  void validate() const;
};

struct ConfigKeyDoc {
  std::string key;
  std::string doc;
};

const std::vector<ConfigKeyDoc>& config_key_docs();

// Applies one key=value pair. "model.preset" resets the preset-dependent
// architecture fields, so later keys can still override them.
void apply_config_kv(RunConfig& cfg, const std::string& key, const std::string& value);

void apply_config_file(RunConfig& cfg, const std::string& path);
RunConfig parse_config_file(const std::string& path);

// Full key=value dump; parsing it back reproduces the config exactly.
std::string render_config(const RunConfig& cfg);
void write_config_file(const RunConfig& cfg, const std::string& path);

}  // namespace ungap
