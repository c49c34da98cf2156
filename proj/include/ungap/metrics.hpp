#pragma once

#include <optional>
#include <string>
#include <vector>

#include "ungap/tensor.hpp"

namespace ungap {

struct MetricsReport {
  unsigned long long tp = 0, fp = 0, fn = 0, tn = 0;
  double precision = 0.0, recall = 0.0, f1 = 0.0;
  double threshold = 0.5;
  bool precision_defined = true;
  bool recall_defined = true;
  bool f1_defined = true;

  std::string to_json() const;
  static std::string csv_header();
  std::string to_csv_row() const;
};

// Micro-aggregated confusion over all pixels of all pairs; predictions
// binarize at `pred > threshold`. Zero-denominator metrics report 0 with the
// matching defined-flag cleared.
MetricsReport micro_metrics(const std::vector<Tensor>& pred_probs,
                            const std::vector<Tensor>& targets, double threshold = 0.5);

struct CorrelationResult {
  double rho = 0.0;
  bool undefined = false;
};

// Spearman rank correlation between exp(s) and noise sigma over all pixels.
// Ties get averaged ranks; a constant side flags the result undefined.
CorrelationResult uncertainty_noise_correlation(const std::vector<Tensor>& s_maps,
                                                const std::vector<Tensor>& sigma_maps);

struct SparsificationCurve {
  std::vector<double> fractions_removed;
  std::vector<double> residual_error;

  std::string to_csv() const;
};

// Removes the highest-exp(s) fraction k/steps (k = 0..steps-1) of pixels and
// reports mean absolute error |pred - target| on the retained pixels.
SparsificationCurve sparsification(const std::vector<Tensor>& pred_probs,
                                   const std::vector<Tensor>& targets,
                                   const std::vector<Tensor>& s_maps, int steps);

struct MapSet {
  std::optional<Tensor> seg_prob;
  std::optional<Tensor> boundary_prob;
  std::optional<Tensor> uncertainty;  // exp(s)
};

// For each present map writes <name>.png (heatmap), <name>.f32 (raw grid)
// and <name>.json (shape, min, max, constant flag).
void export_maps(const MapSet& maps, const std::string& dir);

}  // namespace ungap
