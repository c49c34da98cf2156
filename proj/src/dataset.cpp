#include "ungap/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <map>
#include <vector>

#include "ungap/errors.hpp"
#include "ungap/image.hpp"
#include "ungap/random.hpp"

namespace fs = std::filesystem;

namespace ungap {
namespace {

void require_binary(const Tensor& mask, const std::string& what) {
  for (double v : mask.data) {
    if (v != 0.0 && v != 1.0) {
      throw InvalidInputError(what + " must be binary (0/1), found " + std::to_string(v));
    }
  }
}

int reflect_index(int i, int n) {
  if (n == 1) return 0;
  int period = 2 * (n - 1);
  i = ((i % period) + period) % period;
  return i < n ? i : period - i;
}

}  // namespace

std::vector<SampleRecord> load_dataset(const std::string& root) {
  fs::path images_dir = fs::path(root) / "images";
  fs::path masks_dir = fs::path(root) / "masks";
  if (!fs::is_directory(images_dir) || !fs::is_directory(masks_dir)) {
    throw IoError("dataset root must contain images/ and masks/: " + root);
  }

  std::map<std::string, fs::path> images, masks;
  for (const auto& e : fs::directory_iterator(images_dir)) {
    if (e.path().extension() == ".png") images[e.path().stem().string()] = e.path();
  }
  for (const auto& e : fs::directory_iterator(masks_dir)) {
    if (e.path().extension() == ".png") masks[e.path().stem().string()] = e.path();
  }
  for (const auto& [name, path] : images) {
    if (!masks.count(name)) {
      throw IoError("image without matching mask: " + path.string());
    }
  }
  for (const auto& [name, path] : masks) {
    if (!images.count(name)) {
      throw IoError("mask without matching image: " + path.string());
    }
  }

  fs::path sigma_dir = fs::path(root) / "noise_sigma";
  std::vector<SampleRecord> records;
  for (const auto& [name, img_path] : images) {
    SampleRecord rec;
    rec.name = name;
    rec.image = read_png(img_path.string());
    Tensor raw_mask = to_gray(read_png(masks[name].string()));
    if (raw_mask.h != rec.image.h || raw_mask.w != rec.image.w) {
      throw InvalidInputError("size mismatch between " + img_path.string() + " (" +
                              rec.image.shape_str() + ") and " + masks[name].string() + " (" +
                              raw_mask.shape_str() + ")");
    }
    rec.mask = Tensor(1, 1, raw_mask.h, raw_mask.w);
    for (size_t i = 0; i < raw_mask.data.size(); ++i) {
      rec.mask.data[i] = raw_mask.data[i] > 127.0 / 255.0 ? 1.0 : 0.0;
    }
    if (fs::is_directory(sigma_dir)) {
      fs::path f32 = sigma_dir / (name + ".f32");
      if (fs::exists(f32)) {
        rec.noise_sigma = read_f32(f32.string(), rec.image.h, rec.image.w);
      }
    }
    records.push_back(std::move(rec));
  }
  return records;
}

SampleRecord scene_to_record(const SyntheticScene& scene, const std::string& name) {
  SampleRecord rec;
  rec.name = name;
  rec.image = scene.image;
  rec.mask = scene.mask;
  rec.noise_sigma = scene.noise_sigma;
  return rec;
}

Tensor boundary_from_mask(const Tensor& mask, int width) {
  if (mask.n != 1 || mask.c != 1) {
    throw InvalidInputError("boundary_from_mask expects a (1,1,H,W) mask, got " +
                            mask.shape_str());
  }
  if (width < 1) throw InvalidInputError("boundary width must be >= 1");
  require_binary(mask, "boundary_from_mask input");

  Tensor out(1, 1, mask.h, mask.w);
  for (int y = 0; y < mask.h; ++y) {
    for (int x = 0; x < mask.w; ++x) {
      double dil = 0.0;
      double ero = 1.0;
      for (int dy = -width; dy <= width; ++dy) {
        for (int dx = -width; dx <= width; ++dx) {
          int yy = y + dy;
          int xx = x + dx;
          double v = 0.0;
          if (yy >= 0 && xx >= 0 && yy < mask.h && xx < mask.w) v = mask.at(0, 0, yy, xx);
          dil = std::max(dil, v);
          ero = std::min(ero, v);
        }
      }
      out.at(0, 0, y, x) = dil != ero ? 1.0 : 0.0;
    }
  }
  return out;
}

Tensor reflect_pad_to(const Tensor& grid, int min_h, int min_w) {
  if (grid.h >= min_h && grid.w >= min_w) return grid;
  int out_h = std::max(grid.h, min_h);
  int out_w = std::max(grid.w, min_w);
  int off_y = (out_h - grid.h) / 2;
  int off_x = (out_w - grid.w) / 2;
  Tensor out(grid.n, grid.c, out_h, out_w);
  for (int n = 0; n < grid.n; ++n) {
    for (int c = 0; c < grid.c; ++c) {
      for (int y = 0; y < out_h; ++y) {
        int sy = reflect_index(y - off_y, grid.h);
        for (int x = 0; x < out_w; ++x) {
          int sx = reflect_index(x - off_x, grid.w);
          out.at(n, c, y, x) = grid.at(n, c, sy, sx);
        }
      }
    }
  }
  return out;
}

Tensor crop(const Tensor& grid, int y0, int x0, int h, int w) {
  if (y0 < 0 || x0 < 0 || y0 + h > grid.h || x0 + w > grid.w) {
    throw InvalidInputError("crop window out of bounds");
  }
  Tensor out(grid.n, grid.c, h, w);
  for (int n = 0; n < grid.n; ++n) {
    for (int c = 0; c < grid.c; ++c) {
      for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
          out.at(n, c, y, x) = grid.at(n, c, y0 + y, x0 + x);
        }
      }
    }
  }
  return out;
}

Tensor rotate(const Tensor& grid, double angle_deg, bool bilinear) {
  if (angle_deg == 0.0) return grid;
  double rad = angle_deg * M_PI / 180.0;
  double ca = std::cos(rad);
  double sa = std::sin(rad);
  double cy = (grid.h - 1) / 2.0;
  double cx = (grid.w - 1) / 2.0;
  Tensor out(grid.n, grid.c, grid.h, grid.w);
  for (int n = 0; n < grid.n; ++n) {
    for (int c = 0; c < grid.c; ++c) {
      for (int y = 0; y < grid.h; ++y) {
        for (int x = 0; x < grid.w; ++x) {
          // Inverse map into the source, clamped to the edge.
          double dx = x - cx;
          double dy = y - cy;
          double sx = ca * dx + sa * dy + cx;
          double sy = -sa * dx + ca * dy + cy;
          sx = std::clamp(sx, 0.0, grid.w - 1.0);
          sy = std::clamp(sy, 0.0, grid.h - 1.0);
          if (bilinear) {
            int x0 = static_cast<int>(sx);
            int y0 = static_cast<int>(sy);
            int x1 = std::min(x0 + 1, grid.w - 1);
            int y1 = std::min(y0 + 1, grid.h - 1);
            double tx = sx - x0;
            double ty = sy - y0;
            out.at(n, c, y, x) = grid.at(n, c, y0, x0) * (1 - ty) * (1 - tx) +
                                 grid.at(n, c, y0, x1) * (1 - ty) * tx +
                                 grid.at(n, c, y1, x0) * ty * (1 - tx) +
                                 grid.at(n, c, y1, x1) * ty * tx;
          } else {
            int xn = static_cast<int>(std::lround(sx));
            int yn = static_cast<int>(std::lround(sy));
            out.at(n, c, y, x) = grid.at(n, c, yn, xn);
          }
        }
      }
    }
  }
  return out;
}

Tensor gaussian_blur(const Tensor& grid, double sigma) {
  if (sigma <= 0.0) return grid;
  int radius = std::max(1, static_cast<int>(std::ceil(2.5 * sigma)));
  std::vector<double> kernel(2 * radius + 1);
  double sum = 0.0;
  for (int i = -radius; i <= radius; ++i) {
    kernel[i + radius] = std::exp(-0.5 * i * i / (sigma * sigma));
    sum += kernel[i + radius];
  }
  for (auto& k : kernel) k /= sum;

  Tensor tmp(grid.n, grid.c, grid.h, grid.w);
  Tensor out(grid.n, grid.c, grid.h, grid.w);
  for (int n = 0; n < grid.n; ++n) {
    for (int c = 0; c < grid.c; ++c) {
      for (int y = 0; y < grid.h; ++y) {
        for (int x = 0; x < grid.w; ++x) {
          double acc = 0.0;
          for (int i = -radius; i <= radius; ++i) {
            acc += kernel[i + radius] * grid.at(n, c, y, reflect_index(x + i, grid.w));
          }
          tmp.at(n, c, y, x) = acc;
        }
      }
      for (int y = 0; y < grid.h; ++y) {
        for (int x = 0; x < grid.w; ++x) {
          double acc = 0.0;
          for (int i = -radius; i <= radius; ++i) {
            acc += kernel[i + radius] * tmp.at(n, c, reflect_index(y + i, grid.h), x);
          }
          out.at(n, c, y, x) = acc;
        }
      }
    }
  }
  return out;
}

AugmentPlan make_augment_plan(std::uint64_t seed, int src_h, int src_w, int train_size) {
  auto rng = make_rng(seed);
  AugmentPlan plan;
  int pad_h = std::max(src_h, train_size);
  int pad_w = std::max(src_w, train_size);
  plan.crop_y = pad_h > train_size ? uniform_int(rng, 0, pad_h - train_size) : 0;
  plan.crop_x = pad_w > train_size ? uniform_int(rng, 0, pad_w - train_size) : 0;
  int pick = uniform_int(rng, 0, 2);
  plan.op = pick == 0   ? AugmentOp::rotation
            : pick == 1 ? AugmentOp::brightness_contrast
                        : AugmentOp::gaussian_blur;
  plan.angle_deg = uniform(rng, -30.0, 30.0);
  plan.brightness = uniform(rng, -0.15, 0.15);
  plan.contrast = uniform(rng, 0.8, 1.2);
  plan.blur_sigma = uniform(rng, 0.5, 1.5);
  return plan;
}

std::pair<Tensor, Tensor> apply_augment_plan(const AugmentPlan& plan, const Tensor& image,
                                             const Tensor& mask, int train_size) {
  if (image.h != mask.h || image.w != mask.w) {
    throw InvalidInputError("augment: image " + image.shape_str() + " and mask " +
                            mask.shape_str() + " differ in spatial size");
  }
  if (train_size < 1) throw InvalidInputError("augment: train_size must be positive");
  require_binary(mask, "augment mask");

  Tensor img = reflect_pad_to(image, train_size, train_size);
  Tensor msk = reflect_pad_to(mask, train_size, train_size);
  img = crop(img, plan.crop_y, plan.crop_x, train_size, train_size);
  msk = crop(msk, plan.crop_y, plan.crop_x, train_size, train_size);

  switch (plan.op) {
    case AugmentOp::rotation:
      img = rotate(img, plan.angle_deg, true);
      msk = rotate(msk, plan.angle_deg, false);
      break;
    case AugmentOp::brightness_contrast:
      for (auto& v : img.data) {
        v = std::clamp((v - 0.5) * plan.contrast + 0.5 + plan.brightness, 0.0, 1.0);
      }
      break;
    case AugmentOp::gaussian_blur:
      img = gaussian_blur(img, plan.blur_sigma);
      break;
  }
  return {std::move(img), std::move(msk)};
}

std::pair<Tensor, Tensor> augment(const Tensor& image, const Tensor& mask, std::uint64_t seed,
                                  int train_size) {
  AugmentPlan plan = make_augment_plan(seed, image.h, image.w, train_size);
  return apply_augment_plan(plan, image, mask, train_size);
}

}  // namespace ungap
