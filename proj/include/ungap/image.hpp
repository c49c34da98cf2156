#pragma once

#include <string>

#include "ungap/tensor.hpp"

namespace ungap {

// PNG <-> tensor helpers. Tensors are (1,C,H,W) with values in [0,1];
// C is 1 (gray) or 3 (rgb). 16-bit and paletted PNGs are folded to 8-bit.
Tensor read_png(const std::string& path);
void write_png(const std::string& path, const Tensor& image);

// Raw 32-bit float grid (little-endian, row-major), used for noise-sigma and
// exported map files. The JSON shape sidecar is written by the caller.
void write_f32(const std::string& path, const Tensor& grid);
Tensor read_f32(const std::string& path, int h, int w);

// Maps a scalar grid (1,1,H,W) to an RGB heatmap (1,3,H,W). Values are
// min-max normalized per grid; a constant grid maps to the low end.
Tensor heatmap(const Tensor& grid);

// Replicates or truncates channels so the result has exactly `channels`.
Tensor to_channels(const Tensor& image, int channels);

// Grayscale (1,1,H,W) from any channel count (mean over channels).
Tensor to_gray(const Tensor& image);

}  // namespace ungap
