#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "ungap/dataset.hpp"
#include "ungap/losses.hpp"
#include "ungap/model.hpp"

namespace ungap {

struct TrainConfig {
  double learning_rate = 2e-4;
  int batch_size = 32;
  int epochs = 1500;
  double beta = 0.5;
  LossWeights loss_weights;
  std::uint64_t seed = 0;
  int train_size = 400;
  int checkpoint_every = 0;  // 0 keeps only the final checkpoint
  bool augment = true;
  int boundary_width = 2;
  double dice_eps = 1.0;
  std::string out_dir;  // when set, checkpoints and run logs land here

  void validate() const;
};

struct EpochRecord {
  int epoch = 0;
  double l_aleatory = 0.0;
  double l_boundary = 0.0;
  double l_segmentation = 0.0;
  double l_final = 0.0;
  double train_f1 = 0.0;
};

struct RunLog {
  std::vector<EpochRecord> records;

  std::string to_csv() const;
  std::string to_json() const;
  void write(const std::string& dir) const;  // run_log.csv + run_log.json
};

// Reflect-pads below `size` and center-crops above it.
Tensor deterministic_view(const Tensor& grid, int size);

struct PredMaps {
  Tensor seg_prob;
  std::optional<Tensor> boundary_prob;
  std::optional<Tensor> s;
};

// Deterministic no-augmentation forward of one record (image replicated to
// the model's input channel count, view fitted to `size`).
PredMaps predict_record(UngapNet& net, const SampleRecord& rec, int size);

double train_micro_f1(UngapNet& net, const std::vector<SampleRecord>& data, int size,
                      double threshold = 0.5);

// One optimization run. Loss terms of disabled modules are recorded as 0 and
// excluded from the gradient. A non-finite term aborts with the last finished
// epoch's weights saved (when out_dir is set) and an error naming the term.
RunLog train(UngapNet& net, const TrainConfig& cfg, const std::vector<SampleRecord>& data);

}  // namespace ungap
