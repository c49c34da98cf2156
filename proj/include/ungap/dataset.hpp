#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "ungap/synthetic.hpp"
#include "ungap/tensor.hpp"

namespace ungap {

struct SampleRecord {
  std::string name;
  Tensor image;  // (1,C,H,W) in [0,1]
  Tensor mask;   // (1,1,H,W) binary
  std::optional<Tensor> boundary;
  std::optional<Tensor> noise_sigma;
};

// Reads root/{images,masks[,noise_sigma]} with filename-matched pairs,
// sorted by name. Masks binarize at >127/255. Orphans and size mismatches
// raise errors naming the offending files.
std::vector<SampleRecord> load_dataset(const std::string& root);

SampleRecord scene_to_record(const SyntheticScene& scene, const std::string& name);

// Morphological gradient: dilation(mask, width) XOR erosion(mask, width)
// with a square structuring element of radius `width`. Outside pixels count
// as background.
Tensor boundary_from_mask(const Tensor& mask, int width = 2);

enum class AugmentOp { rotation, brightness_contrast, gaussian_blur };

struct AugmentPlan {
  int crop_x = 0;
  int crop_y = 0;
  AugmentOp op = AugmentOp::rotation;
  double angle_deg = 0.0;
  double brightness = 0.0;
  double contrast = 1.0;
  double blur_sigma = 1.0;
};

AugmentPlan make_augment_plan(std::uint64_t seed, int src_h, int src_w, int train_size);

std::pair<Tensor, Tensor> apply_augment_plan(const AugmentPlan& plan, const Tensor& image,
                                             const Tensor& mask, int train_size);

// Random crop to train_size then exactly one of rotation (both grids,
// nearest-neighbor for the mask), brightness-contrast (image only), or
// Gaussian blur (image only). Deterministic given seed.
std::pair<Tensor, Tensor> augment(const Tensor& image, const Tensor& mask, std::uint64_t seed,
                                  int train_size);

// Shared raster helpers, exposed for tests.
Tensor reflect_pad_to(const Tensor& grid, int min_h, int min_w);
Tensor crop(const Tensor& grid, int y0, int x0, int h, int w);
Tensor rotate(const Tensor& grid, double angle_deg, bool bilinear);
Tensor gaussian_blur(const Tensor& grid, double sigma);

}  // namespace ungap
