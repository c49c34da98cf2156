#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ungap/tensor.hpp"

namespace ungap {

struct GenConfig {
  int size = 64;
  int crack_count_min = 1;
  int crack_count_max = 3;
  int width_min = 1;
  int width_max = 3;
  int noise_regions = 2;
  double sigma_min = 0.0;
  double sigma_max = 0.15;
  double darken_min = 0.35;  // crack contrast against the local background
  double darken_max = 0.6;
  double coverage_min = 0.005;
  double coverage_max = 0.15;

  void validate() const;
};

struct SyntheticScene {
  Tensor image;        // (1,1,S,S) noisy render in [0,1]
  Tensor clean;        // (1,1,S,S) noiseless render
  Tensor mask;         // (1,1,S,S) binary, crack = 1
  Tensor noise_sigma;  // (1,1,S,S) per-pixel injected noise std
  std::uint64_t seed = 0;
};

// Deterministic given (seed, cfg). Background, cracks, noise regions and the
// noise draw each consume an independent sub-seeded stream, so sigma (0,0)
// reproduces the noiseless render bit for bit.
SyntheticScene generate_scene(std::uint64_t seed, const GenConfig& cfg);

// Writes root/{images,masks,noise_sigma}/scene_NNNN.* for each scene.
// Masks are 8-bit PNGs, sigma grids raw f32 with a JSON shape sidecar.
void export_scenes(const std::string& root, const std::vector<SyntheticScene>& scenes);

}  // namespace ungap
