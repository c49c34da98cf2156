#pragma once

#include <cstdint>
#include <memory>
#include <string>

#include "ungap/losses.hpp"
#include "ungap/model.hpp"

namespace ungap {

struct CheckpointMeta {
  int epoch = 0;
  LossWeights loss_weights;
  double beta = 0.5;
  std::uint64_t seed = 0;
};

// Binary weight blob at `path` plus a JSON sidecar at `path + ".json"`
// holding {model_config, epoch, loss_weights, beta, seed}.
void save_checkpoint(const UngapNet& net, const CheckpointMeta& meta, const std::string& path);

struct LoadedCheckpoint {
  ModelConfig config;
  CheckpointMeta meta;
  std::unique_ptr<UngapNet> net;
};

LoadedCheckpoint load_checkpoint(const std::string& path);

// Loads weights into an existing net; its architecture must match the
// sidecar's model_config or the first differing field is named in the error.
CheckpointMeta load_checkpoint_into(UngapNet& net, const std::string& path);

}  // namespace ungap
