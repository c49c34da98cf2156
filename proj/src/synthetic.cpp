#include "ungap/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <vector>

#include <nlohmann/json.hpp>

#include "ungap/errors.hpp"
#include "ungap/image.hpp"
#include "ungap/random.hpp"

namespace fs = std::filesystem;

namespace ungap {
namespace {

constexpr std::uint64_t kStreamBackground = 0x11;
constexpr std::uint64_t kStreamCracks = 0x22;
constexpr std::uint64_t kStreamRegions = 0x33;
constexpr std::uint64_t kStreamNoise = 0x44;

// Smoothed random field: coarse uniform grid upsampled bilinearly.
Tensor background_field(std::uint64_t seed, int size) {
  auto rng = make_rng(derive_seed(seed, kStreamBackground));
  int cell = 8;
  int gw = size / cell + 2;
  std::vector<double> coarse(static_cast<size_t>(gw) * gw);
  for (auto& v : coarse) v = uniform(rng, 0.0, 1.0);

  Tensor bg(1, 1, size, size);
  for (int y = 0; y < size; ++y) {
    double fy = static_cast<double>(y) / cell;
    int y0 = static_cast<int>(fy);
    double ty = fy - y0;
    for (int x = 0; x < size; ++x) {
      double fx = static_cast<double>(x) / cell;
      int x0 = static_cast<int>(fx);
      double tx = fx - x0;
      double v00 = coarse[static_cast<size_t>(y0) * gw + x0];
      double v01 = coarse[static_cast<size_t>(y0) * gw + x0 + 1];
      double v10 = coarse[static_cast<size_t>(y0 + 1) * gw + x0];
      double v11 = coarse[static_cast<size_t>(y0 + 1) * gw + x0 + 1];
      double v = v00 * (1 - ty) * (1 - tx) + v01 * (1 - ty) * tx + v10 * ty * (1 - tx) +
                 v11 * ty * tx;
      bg.at(0, 0, y, x) = 0.45 + 0.35 * v;
    }
  }

  // Illumination gradient across a random direction.
  double phi = uniform(rng, 0.0, 2.0 * M_PI);
  double amp = uniform(rng, 0.0, 0.08);
  double cx = (size - 1) / 2.0;
  double cy = (size - 1) / 2.0;
  for (int y = 0; y < size; ++y) {
    for (int x = 0; x < size; ++x) {
      double proj = ((x - cx) * std::cos(phi) + (y - cy) * std::sin(phi)) / size;
      double v = bg.at(0, 0, y, x) + amp * 2.0 * proj;
      bg.at(0, 0, y, x) = std::clamp(v, 0.05, 0.95);
    }
  }
  return bg;
}

void stamp_disk(Tensor& darkness, Tensor& mask, double px, double py, int width,
                double darken) {
  int size = darkness.h;
  double r = width / 2.0;
  int lo = static_cast<int>(std::floor(-r)) - 1;
  int hi = static_cast<int>(std::ceil(r)) + 1;
  for (int dy = lo; dy <= hi; ++dy) {
    for (int dx = lo; dx <= hi; ++dx) {
      int x = static_cast<int>(std::lround(px)) + dx;
      int y = static_cast<int>(std::lround(py)) + dy;
      if (x < 0 || y < 0 || x >= size || y >= size) continue;
      if (dx * dx + dy * dy > r * r + 1e-12) continue;
      darkness.at(0, 0, y, x) = std::max(darkness.at(0, 0, y, x), darken);
      mask.at(0, 0, y, x) = 1.0;
    }
  }
}

void draw_crack(std::mt19937_64& rng, Tensor& darkness, Tensor& mask, const GenConfig& cfg) {
  int size = cfg.size;
  double x = uniform(rng, 0.1 * size, 0.9 * size);
  double y = uniform(rng, 0.1 * size, 0.9 * size);
  double theta = uniform(rng, 0.0, 2.0 * M_PI);
  int steps = uniform_int(rng, static_cast<int>(0.6 * size), static_cast<int>(1.4 * size));
  double darken = uniform(rng, cfg.darken_min, cfg.darken_max);
  int width = uniform_int(rng, cfg.width_min, cfg.width_max);
  for (int i = 0; i < steps; ++i) {
    if (i % 8 == 0 && i > 0) width = uniform_int(rng, cfg.width_min, cfg.width_max);
    stamp_disk(darkness, mask, x, y, width, darken);
    theta += uniform(rng, -0.3, 0.3);
    x += std::cos(theta);
    y += std::sin(theta);
    if (x < 1 || y < 1 || x > size - 2 || y > size - 2) break;
  }
}

struct Rect {
  int x0, y0, x1, y1;  // half-open
  long area() const { return static_cast<long>(x1 - x0) * (y1 - y0); }
};

Tensor region_sigma_field(std::uint64_t seed, const GenConfig& cfg) {
  auto rng = make_rng(derive_seed(seed, kStreamRegions));
  std::vector<Rect> rects = {{0, 0, cfg.size, cfg.size}};
  while (static_cast<int>(rects.size()) < cfg.noise_regions) {
    size_t big = 0;
    for (size_t i = 1; i < rects.size(); ++i) {
      if (rects[i].area() > rects[big].area()) big = i;
    }
    Rect r = rects[big];
    double t = uniform(rng, 0.35, 0.65);
    if (r.x1 - r.x0 >= r.y1 - r.y0) {
      int cut = r.x0 + std::max(1, static_cast<int>((r.x1 - r.x0) * t));
      cut = std::min(cut, r.x1 - 1);
      rects[big] = {r.x0, r.y0, cut, r.y1};
      rects.push_back({cut, r.y0, r.x1, r.y1});
    } else {
      int cut = r.y0 + std::max(1, static_cast<int>((r.y1 - r.y0) * t));
      cut = std::min(cut, r.y1 - 1);
      rects[big] = {r.x0, r.y0, r.x1, cut};
      rects.push_back({r.x0, cut, r.x1, r.y1});
    }
  }

  // Evenly spaced sigmas over the configured range, shuffled over regions.
  int n = cfg.noise_regions;
  std::vector<double> sigmas(n);
  for (int i = 0; i < n; ++i) {
    sigmas[i] = n == 1 ? 0.5 * (cfg.sigma_min + cfg.sigma_max)
                       : cfg.sigma_min + (cfg.sigma_max - cfg.sigma_min) * i / (n - 1);
  }
  for (int i = n - 1; i > 0; --i) {
    int j = uniform_int(rng, 0, i);
    std::swap(sigmas[i], sigmas[j]);
  }

  Tensor field(1, 1, cfg.size, cfg.size);
  for (int i = 0; i < n; ++i) {
    const Rect& r = rects[i];
    for (int y = r.y0; y < r.y1; ++y) {
      for (int x = r.x0; x < r.x1; ++x) {
        field.at(0, 0, y, x) = sigmas[i];
      }
    }
  }
  return field;
}

}  // namespace

void GenConfig::validate() const {
  if (size < 16) throw InvalidConfigError("gen: size must be at least 16");
  if (crack_count_min < 1 || crack_count_max < crack_count_min) {
    throw InvalidConfigError("gen: crack count range is invalid");
  }
  if (width_min < 1 || width_max > 5 || width_max < width_min) {
    throw InvalidConfigError("gen: crack width range must sit within [1,5]");
  }
  if (noise_regions < 1) throw InvalidConfigError("gen: noise_regions must be positive");
  if (sigma_min < 0.0 || sigma_max < sigma_min) {
    throw InvalidConfigError("gen: sigma range is invalid");
  }
  if (darken_min <= 0.0 || darken_max < darken_min || darken_max >= 1.0) {
    throw InvalidConfigError("gen: darken range must sit within (0,1)");
  }
  if (coverage_min < 0.0 || coverage_max <= coverage_min || coverage_max > 1.0) {
    throw InvalidConfigError("gen: coverage range is invalid");
  }
}

SyntheticScene generate_scene(std::uint64_t seed, const GenConfig& cfg) {
  cfg.validate();
  int size = cfg.size;
  Tensor bg = background_field(seed, size);

  Tensor darkness(1, 1, size, size);
  Tensor mask(1, 1, size, size);
  double total = static_cast<double>(size) * size;
  for (int attempt = 0; attempt < 64; ++attempt) {
    darkness = Tensor(1, 1, size, size);
    mask = Tensor(1, 1, size, size);
    auto rng = make_rng(derive_seed(seed, kStreamCracks, static_cast<std::uint64_t>(attempt)));
    int count = uniform_int(rng, cfg.crack_count_min, cfg.crack_count_max);
    for (int k = 0; k < count; ++k) draw_crack(rng, darkness, mask, cfg);
    // Grow with extra cracks if under-covered before giving up on the attempt.
    for (int extra = 0; extra < 6 && mask.sum() / total < cfg.coverage_min; ++extra) {
      draw_crack(rng, darkness, mask, cfg);
    }
    double coverage = mask.sum() / total;
    if (coverage >= cfg.coverage_min && coverage <= cfg.coverage_max) break;
  }
  double coverage = mask.sum() / total;
  if (coverage < cfg.coverage_min || coverage > cfg.coverage_max) {
    throw InvalidConfigError("gen: could not reach mask coverage in [" +
                             std::to_string(cfg.coverage_min) + ", " +
                             std::to_string(cfg.coverage_max) + "]; got " +
                             std::to_string(coverage));
  }

  SyntheticScene scene;
  scene.seed = seed;
  scene.mask = mask;
  scene.clean = Tensor(1, 1, size, size);
  for (int y = 0; y < size; ++y) {
    for (int x = 0; x < size; ++x) {
      scene.clean.at(0, 0, y, x) = bg.at(0, 0, y, x) * (1.0 - darkness.at(0, 0, y, x));
    }
  }

  scene.noise_sigma = region_sigma_field(seed, cfg);

  auto rng = make_rng(derive_seed(seed, kStreamNoise));
  scene.image = Tensor(1, 1, size, size);
  for (int y = 0; y < size; ++y) {
    for (int x = 0; x < size; ++x) {
      double g = gaussian(rng);
      double v = scene.clean.at(0, 0, y, x) + scene.noise_sigma.at(0, 0, y, x) * g;
      scene.image.at(0, 0, y, x) = std::clamp(v, 0.0, 1.0);
    }
  }
  return scene;
}

void export_scenes(const std::string& root, const std::vector<SyntheticScene>& scenes) {
  fs::create_directories(fs::path(root) / "images");
  fs::create_directories(fs::path(root) / "masks");
  fs::create_directories(fs::path(root) / "noise_sigma");
  for (size_t i = 0; i < scenes.size(); ++i) {
    char name[32];
    std::snprintf(name, sizeof(name), "scene_%04zu", i);
    const SyntheticScene& s = scenes[i];
    write_png((fs::path(root) / "images" / (std::string(name) + ".png")).string(), s.image);
    write_png((fs::path(root) / "masks" / (std::string(name) + ".png")).string(), s.mask);
    std::string sigma_base = (fs::path(root) / "noise_sigma" / name).string();
    write_f32(sigma_base + ".f32", s.noise_sigma);
    nlohmann::json side = {{"height", s.noise_sigma.h},
                           {"width", s.noise_sigma.w},
                           {"dtype", "float32"},
                           {"order", "row-major"}};
    std::ofstream out(sigma_base + ".json");
    if (!out) throw IoError("cannot write sigma sidecar for " + std::string(name));
    out << side.dump(2) << "\n";
  }
}

}  // namespace ungap
