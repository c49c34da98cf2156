#include <doctest.h>

#include <unistd.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "ungap/dataset.hpp"
#include "ungap/errors.hpp"
#include "ungap/image.hpp"
#include "ungap/random.hpp"
#include "ungap/synthetic.hpp"

using namespace ungap;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir(const std::string& tag) {
    path = fs::temp_directory_path() / ("ungap_test_" + tag + "_" + std::to_string(::getpid()));
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

Tensor constant_grid(int h, int w, double v) {
  Tensor t(1, 1, h, w);
  std::fill(t.data.begin(), t.data.end(), v);
  return t;
}

// Brute-force morphological gradient with a (2w+1)^2 square window,
// out-of-bounds pixels treated as background.
Tensor boundary_oracle(const Tensor& mask, int width) {
  Tensor out(1, 1, mask.h, mask.w);
  for (int y = 0; y < mask.h; ++y) {
    for (int x = 0; x < mask.w; ++x) {
      bool any = false, all = true;
      for (int dy = -width; dy <= width; ++dy) {
        for (int dx = -width; dx <= width; ++dx) {
          int yy = y + dy, xx = x + dx;
          bool v = yy >= 0 && xx >= 0 && yy < mask.h && xx < mask.w &&
                   mask.at(0, 0, yy, xx) != 0.0;
          any = any || v;
          all = all && v;
        }
      }
      out.at(0, 0, y, x) = (any && !all) ? 1.0 : 0.0;
    }
  }
  return out;
}

}  // namespace

TEST_SUITE("data") {

TEST_CASE("scene generation is deterministic and respects its contracts") {
  GenConfig cfg;
  SyntheticScene a = generate_scene(7, cfg);
  SyntheticScene b = generate_scene(7, cfg);
  CHECK(a.image.data == b.image.data);
  CHECK(a.mask.data == b.mask.data);
  CHECK(a.noise_sigma.data == b.noise_sigma.data);

  SyntheticScene c = generate_scene(8, cfg);
  CHECK(a.image.data != c.image.data);

  // coverage stays inside the configured band (seed 7, defaults)
  double cov = 0.0;
  for (double v : a.mask.data) cov += v;
  cov /= static_cast<double>(a.mask.numel());
  CHECK(cov >= 0.005);
  CHECK(cov <= 0.15);

  for (double v : a.image.data) {
    CHECK(v >= 0.0);
    CHECK(v <= 1.0);
  }
}

TEST_CASE("zero sigma reproduces the noiseless render bit for bit") {
  GenConfig cfg;
  cfg.sigma_min = 0.0;
  cfg.sigma_max = 0.0;
  SyntheticScene s = generate_scene(123, cfg);
  for (double v : s.noise_sigma.data) CHECK(v == 0.0);
  CHECK(s.image.data == s.clean.data);

  // the noiseless render is unchanged when noise is enabled on the same seed
  GenConfig noisy = cfg;
  noisy.sigma_max = 0.15;
  SyntheticScene sn = generate_scene(123, noisy);
  CHECK(sn.clean.data == s.clean.data);
  CHECK(sn.image.data != sn.clean.data);
}

TEST_CASE("cracks darken the noiseless render") {
  GenConfig cfg;
  for (std::uint64_t seed : {1ull, 2ull, 3ull}) {
    SyntheticScene s = generate_scene(seed, cfg);
    double crack_sum = 0.0, crack_n = 0.0, bg_sum = 0.0, bg_n = 0.0;
    for (std::size_t i = 0; i < s.mask.data.size(); ++i) {
      if (s.mask.data[i] != 0.0) {
        crack_sum += s.clean.data[i];
        crack_n += 1.0;
      } else {
        bg_sum += s.clean.data[i];
        bg_n += 1.0;
      }
    }
    REQUIRE(crack_n > 0.0);
    CHECK(crack_sum / crack_n < bg_sum / bg_n);
  }
}

TEST_CASE("injected noise matches its per-region sigma within 15 percent") {
  GenConfig cfg;
  cfg.size = 128;  // regions comfortably >= 32x32
  cfg.sigma_min = 0.05;
  cfg.sigma_max = 0.15;
  SyntheticScene s = generate_scene(42, cfg);

  // collect residuals per distinct sigma, excluding crack pixels where the
  // clean render already varies
  std::vector<double> sigmas;
  for (double v : s.noise_sigma.data)
    if (std::find(sigmas.begin(), sigmas.end(), v) == sigmas.end()) sigmas.push_back(v);
  REQUIRE(sigmas.size() == 2);

  for (double sigma : sigmas) {
    double sq = 0.0, n = 0.0;
    for (std::size_t i = 0; i < s.image.data.size(); ++i) {
      if (s.noise_sigma.data[i] != sigma || s.mask.data[i] != 0.0) continue;
      // clipping at [0,1] distorts the residual; interior pixels only
      if (s.image.data[i] <= 0.001 || s.image.data[i] >= 0.999) continue;
      double r = s.image.data[i] - s.clean.data[i];
      sq += r * r;
      n += 1.0;
    }
    REQUIRE(n >= 32.0 * 32.0);
    double emp = std::sqrt(sq / n);
    CHECK(emp == doctest::Approx(sigma).epsilon(0.15));
  }
}

TEST_CASE("two noise regions span the sigma range exactly") {
  GenConfig cfg;  // noise_regions = 2, sigma in [0, 0.15]
  SyntheticScene s = generate_scene(99, cfg);
  double lo = 1e9, hi = -1e9;
  for (double v : s.noise_sigma.data) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  CHECK(lo == 0.0);
  CHECK(hi == doctest::Approx(0.15).epsilon(1e-12));
}

TEST_CASE("generator validates its ranges") {
  GenConfig cfg;
  cfg.width_max = 9;
  CHECK_THROWS_AS(cfg.validate(), InvalidConfigError);
  cfg = GenConfig{};
  cfg.sigma_min = -0.1;
  CHECK_THROWS_AS(cfg.validate(), InvalidConfigError);
  cfg = GenConfig{};
  cfg.crack_count_min = 0;
  CHECK_THROWS_AS(cfg.validate(), InvalidConfigError);
  cfg = GenConfig{};
  cfg.darken_min = 0.0;
  CHECK_THROWS_AS(cfg.validate(), InvalidConfigError);
  cfg = GenConfig{};
  cfg.size = 8;
  CHECK_THROWS_AS(cfg.validate(), InvalidConfigError);
}

TEST_CASE("boundary extraction matches the brute-force oracle") {
  SUBCASE("all-zero mask stays all zero") {
    Tensor m = constant_grid(12, 12, 0.0);
    Tensor b = boundary_from_mask(m, 2);
    for (double v : b.data) CHECK(v == 0.0);
  }
  SUBCASE("full-frame mask leaves only the border erosion band") {
    Tensor m = constant_grid(12, 12, 1.0);
    int width = 2;
    Tensor b = boundary_from_mask(m, width);
    Tensor oracle = boundary_oracle(m, width);
    CHECK(b.data == oracle.data);
    // interior pixels are untouched, border band is marked
    CHECK(b.at(0, 0, 6, 6) == 0.0);
    CHECK(b.at(0, 0, 0, 0) == 1.0);
    CHECK(b.at(0, 0, 1, 6) == 1.0);
  }
  SUBCASE("centered square, width 1") {
    Tensor m = constant_grid(16, 16, 0.0);
    for (int y = 5; y < 11; ++y)
      for (int x = 5; x < 11; ++x) m.at(0, 0, y, x) = 1.0;
    Tensor b = boundary_from_mask(m, 1);
    Tensor oracle = boundary_oracle(m, 1);
    CHECK(b.data == oracle.data);
  }
  SUBCASE("random masks, widths 1..3") {
    auto rng = make_rng(5150);
    for (int rep = 0; rep < 10; ++rep) {
      Tensor m(1, 1, 14, 14);
      for (auto& v : m.data) v = uniform(rng, 0.0, 1.0) < 0.3 ? 1.0 : 0.0;
      for (int width = 1; width <= 3; ++width) {
        Tensor b = boundary_from_mask(m, width);
        Tensor oracle = boundary_oracle(m, width);
        CHECK(b.data == oracle.data);
      }
    }
  }
  SUBCASE("band intersects both sides of an internal edge") {
    SyntheticScene s = generate_scene(3, GenConfig{});
    Tensor b = boundary_from_mask(s.mask, 2);
    bool on_crack = false, on_bg = false;
    for (std::size_t i = 0; i < b.data.size(); ++i) {
      if (b.data[i] == 0.0) continue;
      (s.mask.data[i] != 0.0 ? on_crack : on_bg) = true;
    }
    CHECK(on_crack);
    CHECK(on_bg);
  }
  SUBCASE("non-binary input is rejected") {
    Tensor m = constant_grid(8, 8, 0.5);
    CHECK_THROWS_AS(boundary_from_mask(m, 1), InvalidInputError);
    Tensor ok = constant_grid(8, 8, 0.0);
    CHECK_THROWS_AS(boundary_from_mask(ok, 0), InvalidInputError);
  }
}

TEST_CASE("augmentation preserves size, binarity and determinism") {
  SyntheticScene s = generate_scene(17, GenConfig{});

  for (std::uint64_t seed = 0; seed < 12; ++seed) {
    auto [im, mk] = augment(s.image, s.mask, seed, 48);
    CHECK(im.h == 48);
    CHECK(im.w == 48);
    CHECK(mk.h == 48);
    CHECK(mk.w == 48);
    for (double v : mk.data) CHECK((v == 0.0 || v == 1.0));
    for (double v : im.data) {
      CHECK(v >= 0.0);
      CHECK(v <= 1.0);
    }
    auto [im2, mk2] = augment(s.image, s.mask, seed, 48);
    CHECK(im.data == im2.data);
    CHECK(mk.data == mk2.data);
  }
}

TEST_CASE("an identity plan on an exact-size input is a no-op") {
  SyntheticScene s = generate_scene(23, GenConfig{});
  AugmentPlan plan;  // crop at (0,0), 0-degree rotation
  auto [im, mk] = apply_augment_plan(plan, s.image, s.mask, 64);
  CHECK(im.data == s.image.data);
  CHECK(mk.data == s.mask.data);
}

TEST_CASE("augmentation pads small sources by reflection") {
  SyntheticScene s = generate_scene(29, GenConfig{});
  auto [im, mk] = augment(s.image, s.mask, 3, 96);  // source is 64
  CHECK(im.h == 96);
  CHECK(mk.w == 96);
  for (double v : mk.data) CHECK((v == 0.0 || v == 1.0));
}

TEST_CASE("fixed-seed augmentation fixture") {
  // Pinned output summary: guards against silent pipeline drift. The values
  // were produced by this implementation and re-checked against the plan
  // fields (crop window, op choice) by hand.
  SyntheticScene s = generate_scene(31, GenConfig{});
  AugmentPlan plan = make_augment_plan(90210, s.image.h, s.image.w, 48);
  auto [im, mk] = apply_augment_plan(plan, s.image, s.mask, 48);

  double im_sum = 0.0, mk_sum = 0.0;
  for (double v : im.data) im_sum += v;
  for (double v : mk.data) mk_sum += v;

  INFO("plan op=", static_cast<int>(plan.op), " crop=(", plan.crop_y, ",", plan.crop_x, ")");
  CHECK(plan.op == AugmentOp::gaussian_blur);
  CHECK(plan.crop_y == 14);
  CHECK(plan.crop_x == 14);
  CHECK(im_sum == doctest::Approx(1359.426318408455).epsilon(1e-12));
  CHECK(mk_sum == 257.0);
}

TEST_CASE("rotation keeps shapes and a 0-degree rotation is exact") {
  SyntheticScene s = generate_scene(37, GenConfig{});
  Tensor r0 = rotate(s.image, 0.0, true);
  CHECK(r0.data == s.image.data);
  Tensor r = rotate(s.image, 17.0, true);
  CHECK(r.h == s.image.h);
  CHECK(r.w == s.image.w);
  CHECK(r.data != s.image.data);
}

TEST_CASE("reflect padding and cropping are inverses on the original window") {
  SyntheticScene s = generate_scene(41, GenConfig{});
  Tensor padded = reflect_pad_to(s.image, 80, 80);
  CHECK(padded.h == 80);
  CHECK(padded.w == 80);
  int oy = (80 - 64) / 2, ox = (80 - 64) / 2;
  Tensor back = crop(padded, oy, ox, 64, 64);
  CHECK(back.data == s.image.data);
  CHECK_THROWS_AS(crop(padded, 60, 60, 64, 64), InvalidInputError);
}

TEST_CASE("dataset export and reload round-trips scenes") {
  TempDir dir("roundtrip");
  GenConfig cfg;
  std::vector<SyntheticScene> scenes;
  for (std::uint64_t i = 0; i < 3; ++i) scenes.push_back(generate_scene(100 + i, cfg));
  export_scenes(dir.path.string(), scenes);

  auto records = load_dataset(dir.path.string());
  REQUIRE(records.size() == 3);
  CHECK(records[0].name == "scene_0000");
  CHECK(records[2].name == "scene_0002");

  for (std::size_t i = 0; i < 3; ++i) {
    REQUIRE(records[i].noise_sigma.has_value());
    // mask PNG round-trip is exact (binary), image within 8-bit quantization
    CHECK(records[i].mask.data == scenes[i].mask.data);
    double max_err = 0.0;
    for (std::size_t j = 0; j < records[i].image.data.size(); ++j)
      max_err = std::max(max_err,
                         std::abs(records[i].image.data[j] - scenes[i].image.data[j]));
    CHECK(max_err <= 0.5 / 255.0 + 1e-12);
    // sigma grids are stored as f32
    for (std::size_t j = 0; j < records[i].noise_sigma->data.size(); ++j)
      CHECK(records[i].noise_sigma->data[j] ==
            doctest::Approx(scenes[i].noise_sigma.data[j]).epsilon(1e-6));
  }
}

TEST_CASE("load_dataset validates directory structure and pairing") {
  SUBCASE("empty dataset loads as an empty list") {
    TempDir dir("empty");
    fs::create_directories(dir.path / "images");
    fs::create_directories(dir.path / "masks");
    CHECK(load_dataset(dir.path.string()).empty());
  }
  SUBCASE("missing layout is rejected") {
    TempDir dir("nolayout");
    CHECK_THROWS_AS(load_dataset(dir.path.string()), IoError);
  }
  SUBCASE("an orphan image names the unmatched file") {
    TempDir dir("orphan");
    GenConfig cfg;
    export_scenes(dir.path.string(), {generate_scene(1, cfg), generate_scene(2, cfg)});
    fs::remove(dir.path / "masks" / "scene_0001.png");
    CHECK_THROWS_WITH_AS(load_dataset(dir.path.string()),
                         doctest::Contains("scene_0001"), IoError);
  }
  SUBCASE("a size mismatch names both files") {
    TempDir dir("mismatch");
    GenConfig small;
    small.size = 32;
    SyntheticScene a = generate_scene(1, GenConfig{});
    SyntheticScene b = generate_scene(1, small);
    export_scenes(dir.path.string(), {a});
    write_png((dir.path / "masks" / "scene_0000.png").string(), b.mask);
    try {
      load_dataset(dir.path.string());
      FAIL("expected a size-mismatch error");
    } catch (const InvalidInputError& e) {
      std::string msg = e.what();
      CHECK(msg.find("images") != std::string::npos);
      CHECK(msg.find("masks") != std::string::npos);
      CHECK(msg.find("scene_0000") != std::string::npos);
    }
  }
  SUBCASE("masks binarize at 127/255") {
    TempDir dir("binarize");
    fs::create_directories(dir.path / "images");
    fs::create_directories(dir.path / "masks");
    Tensor img = constant_grid(16, 16, 0.5);
    Tensor mask(1, 1, 16, 16);
    for (int x = 0; x < 16; ++x) {
      mask.at(0, 0, 0, x) = 127.0 / 255.0;  // at the threshold: background
      mask.at(0, 0, 1, x) = 128.0 / 255.0;  // above: crack
    }
    write_png((dir.path / "images" / "a.png").string(), img);
    write_png((dir.path / "masks" / "a.png").string(), mask);
    auto records = load_dataset(dir.path.string());
    REQUIRE(records.size() == 1);
    for (int x = 0; x < 16; ++x) {
      CHECK(records[0].mask.at(0, 0, 0, x) == 0.0);
      CHECK(records[0].mask.at(0, 0, 1, x) == 1.0);
    }
  }
}

TEST_CASE("scene_to_record carries all grids") {
  SyntheticScene s = generate_scene(55, GenConfig{});
  SampleRecord rec = scene_to_record(s, "probe");
  CHECK(rec.name == "probe");
  CHECK(rec.image.data == s.image.data);
  CHECK(rec.mask.data == s.mask.data);
  REQUIRE(rec.noise_sigma.has_value());
  CHECK(rec.noise_sigma->data == s.noise_sigma.data);
}

}  // TEST_SUITE
