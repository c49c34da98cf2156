#include <doctest.h>

#include <unistd.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <vector>

#include "ungap/errors.hpp"
#include "ungap/image.hpp"
#include "ungap/metrics.hpp"
#include "ungap/random.hpp"

using namespace ungap;
namespace fs = std::filesystem;

namespace {

Tensor grid_from(const std::vector<double>& v, int h, int w) {
  Tensor t(1, 1, h, w);
  REQUIRE(static_cast<std::size_t>(h * w) == v.size());
  t.data = v;
  return t;
}

Tensor random_probs(std::mt19937_64& rng, int h, int w) {
  Tensor t(1, 1, h, w);
  for (auto& v : t.data) v = uniform(rng, 0.0, 1.0);
  return t;
}

Tensor random_mask(std::mt19937_64& rng, int h, int w, double p = 0.3) {
  Tensor t(1, 1, h, w);
  for (auto& v : t.data) v = uniform(rng, 0.0, 1.0) < p ? 1.0 : 0.0;
  return t;
}

// Reference Spearman with averaged tie ranks, straight from the definition.
double spearman_oracle(std::vector<double> a, std::vector<double> b) {
  auto ranks = [](const std::vector<double>& v) {
    std::vector<std::size_t> idx(v.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(), [&](std::size_t i, std::size_t j) { return v[i] < v[j]; });
    std::vector<double> r(v.size());
    std::size_t i = 0;
    while (i < idx.size()) {
      std::size_t j = i;
      while (j + 1 < idx.size() && v[idx[j + 1]] == v[idx[i]]) ++j;
      double avg = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
      for (std::size_t k = i; k <= j; ++k) r[idx[k]] = avg;
      i = j + 1;
    }
    return r;
  };
  std::vector<double> ra = ranks(a), rb = ranks(b);
  double ma = std::accumulate(ra.begin(), ra.end(), 0.0) / ra.size();
  double mb = std::accumulate(rb.begin(), rb.end(), 0.0) / rb.size();
  double num = 0.0, da = 0.0, db = 0.0;
  for (std::size_t i = 0; i < ra.size(); ++i) {
    num += (ra[i] - ma) * (rb[i] - mb);
    da += (ra[i] - ma) * (ra[i] - ma);
    db += (rb[i] - mb) * (rb[i] - mb);
  }
  return num / std::sqrt(da * db);
}

}  // namespace

TEST_SUITE("metrics") {

TEST_CASE("perfect predictions give unit scores") {
  auto rng = make_rng(1);
  Tensor mask = random_mask(rng, 16, 16);
  MetricsReport r = micro_metrics({mask}, {mask}, 0.5);
  CHECK(r.precision == 1.0);
  CHECK(r.recall == 1.0);
  CHECK(r.f1 == 1.0);
  CHECK(r.fp == 0);
  CHECK(r.fn == 0);
}

TEST_CASE("confusion counts match brute-force counting on 100 random instances") {
  auto rng = make_rng(2);
  for (int rep = 0; rep < 100; ++rep) {
    Tensor pred = random_probs(rng, 16, 16);
    Tensor mask = random_mask(rng, 16, 16);
    double thr = uniform(rng, 0.05, 0.95);
    MetricsReport r = micro_metrics({pred}, {mask}, thr);

    unsigned long long tp = 0, fp = 0, fn = 0, tn = 0;
    for (int i = 0; i < 256; ++i) {
      bool p = pred.data[static_cast<std::size_t>(i)] > thr;
      bool t = mask.data[static_cast<std::size_t>(i)] != 0.0;
      if (p && t) ++tp;
      else if (p && !t) ++fp;
      else if (!p && t) ++fn;
      else ++tn;
    }
    REQUIRE(r.tp == tp);
    REQUIRE(r.fp == fp);
    REQUIRE(r.fn == fn);
    REQUIRE(r.tn == tn);

    if (tp + fp > 0) CHECK(r.precision == doctest::Approx(double(tp) / double(tp + fp)).epsilon(1e-15));
    if (tp + fn > 0) CHECK(r.recall == doctest::Approx(double(tp) / double(tp + fn)).epsilon(1e-15));
  }
}

TEST_CASE("micro aggregation pools pixels across images") {
  Tensor p1 = grid_from({0.9, 0.1, 0.9, 0.1}, 2, 2);
  Tensor t1 = grid_from({1.0, 0.0, 0.0, 1.0}, 2, 2);
  Tensor p2 = grid_from({0.9, 0.9, 0.1, 0.1}, 2, 2);
  Tensor t2 = grid_from({1.0, 1.0, 1.0, 0.0}, 2, 2);
  MetricsReport r = micro_metrics({p1, p2}, {t1, t2}, 0.5);
  CHECK(r.tp == 3);
  CHECK(r.fp == 1);
  CHECK(r.fn == 2);
  CHECK(r.tn == 2);
  CHECK(r.precision == doctest::Approx(0.75).epsilon(1e-15));
  CHECK(r.recall == doctest::Approx(0.6).epsilon(1e-15));
}

TEST_CASE("f1 is the harmonic mean of its own precision and recall") {
  auto rng = make_rng(3);
  for (int rep = 0; rep < 20; ++rep) {
    Tensor pred = random_probs(rng, 12, 12);
    Tensor mask = random_mask(rng, 12, 12);
    MetricsReport r = micro_metrics({pred}, {mask}, 0.5);
    if (!r.f1_defined) continue;
    double expect = 2.0 * r.precision * r.recall / (r.precision + r.recall);
    CHECK(r.f1 == doctest::Approx(expect).epsilon(1e-12));
  }
}

TEST_CASE("raising the threshold never increases recall") {
  auto rng = make_rng(4);
  Tensor pred = random_probs(rng, 16, 16);
  Tensor mask = random_mask(rng, 16, 16);
  double last = 1.0;
  for (double thr : {0.1, 0.3, 0.5, 0.7, 0.9}) {
    MetricsReport r = micro_metrics({pred}, {mask}, thr);
    CHECK(r.recall <= last + 1e-15);
    last = r.recall;
  }
}

TEST_CASE("zero-denominator metrics report zero and clear their flags") {
  Tensor none = grid_from({0.1, 0.1, 0.1, 0.1}, 2, 2);
  Tensor empty = grid_from({0.0, 0.0, 0.0, 0.0}, 2, 2);
  MetricsReport r = micro_metrics({none}, {empty}, 0.5);
  CHECK(r.precision == 0.0);
  CHECK(r.recall == 0.0);
  CHECK(r.f1 == 0.0);
  CHECK_FALSE(r.precision_defined);
  CHECK_FALSE(r.recall_defined);
  CHECK_FALSE(r.f1_defined);
}

TEST_CASE("micro_metrics validates its inputs") {
  Tensor p = grid_from({0.5, 0.5, 0.5, 0.5}, 2, 2);
  Tensor t = grid_from({1.0, 0.0, 1.0, 0.0}, 2, 2);
  CHECK_THROWS_AS(micro_metrics({p}, {t}, 0.0), InvalidInputError);
  CHECK_THROWS_AS(micro_metrics({p}, {t}, 1.0), InvalidInputError);
  CHECK_THROWS_AS(micro_metrics({}, {}, 0.5), InvalidInputError);
  CHECK_THROWS_AS(micro_metrics({p}, {t, t}, 0.5), InvalidInputError);
  Tensor small = grid_from({1.0}, 1, 1);
  CHECK_THROWS_AS(micro_metrics({p}, {small}, 0.5), InvalidInputError);
}

TEST_CASE("reported precision and recall reproduce the reported f1") {
  // published operating points for the strongest detector rows
  double p = 0.7794, r = 0.7260;
  double f1 = 2.0 * p * r / (p + r);
  CHECK(f1 * 100.0 == doctest::Approx(75.18).epsilon(0.0005));
  CHECK(std::abs(f1 * 100.0 - 75.19) < 0.05);
}

TEST_CASE("rank correlation recovers exact monotone relations") {
  auto rng = make_rng(5);
  Tensor sigma(1, 1, 8, 8);
  for (auto& v : sigma.data) v = uniform(rng, 0.0, 0.2);
  Tensor s(1, 1, 8, 8);
  for (std::size_t i = 0; i < s.data.size(); ++i)
    s.data[i] = std::log(sigma.data[i] * sigma.data[i] + 1e-9);
  CorrelationResult c = uncertainty_noise_correlation({s}, {sigma});
  CHECK_FALSE(c.undefined);
  CHECK(c.rho == doctest::Approx(1.0).epsilon(1e-12));

  for (auto& v : s.data) v = -v;  // reverse the order
  CorrelationResult inv = uncertainty_noise_correlation({s}, {sigma});
  CHECK(inv.rho < -0.999);
}

TEST_CASE("shuffled pairing decorrelates") {
  auto rng = make_rng(6);
  Tensor sigma(1, 1, 100, 100);
  for (auto& v : sigma.data) v = uniform(rng, 0.0, 0.2);
  Tensor s(1, 1, 100, 100);
  for (auto& v : s.data) v = uniform(rng, -5.0, 5.0);
  CorrelationResult c = uncertainty_noise_correlation({s}, {sigma});
  CHECK_FALSE(c.undefined);
  CHECK(std::abs(c.rho) < 0.05);
}

TEST_CASE("a constant side makes the correlation undefined") {
  Tensor sigma(1, 1, 4, 4);
  std::fill(sigma.data.begin(), sigma.data.end(), 0.1);
  auto rng = make_rng(7);
  Tensor s = random_probs(rng, 4, 4);
  CorrelationResult c = uncertainty_noise_correlation({s}, {sigma});
  CHECK(c.undefined);
  CHECK(c.rho == 0.0);
}

TEST_CASE("tie handling matches the averaged-rank oracle") {
  auto rng = make_rng(8);
  for (int rep = 0; rep < 10; ++rep) {
    Tensor s(1, 1, 6, 6), sigma(1, 1, 6, 6);
    // coarse quantization forces heavy ties on both sides
    for (auto& v : s.data) v = std::floor(uniform(rng, 0.0, 4.0));
    for (auto& v : sigma.data) v = std::floor(uniform(rng, 0.0, 3.0)) * 0.05;
    bool s_const = std::all_of(s.data.begin(), s.data.end(),
                               [&](double v) { return v == s.data[0]; });
    bool g_const = std::all_of(sigma.data.begin(), sigma.data.end(),
                               [&](double v) { return v == sigma.data[0]; });
    CorrelationResult c = uncertainty_noise_correlation({s}, {sigma});
    if (s_const || g_const) {
      CHECK(c.undefined);
      continue;
    }
    std::vector<double> es(s.data.size());
    for (std::size_t i = 0; i < es.size(); ++i) es[i] = std::exp(s.data[i]);
    CHECK(c.rho == doctest::Approx(spearman_oracle(es, sigma.data)).epsilon(1e-12));
  }
}

TEST_CASE("correlation pools pixels across maps") {
  // constant per map, varying across maps: only cross-map pooling can see it
  Tensor s1(1, 1, 2, 2), s2(1, 1, 2, 2), g1(1, 1, 2, 2), g2(1, 1, 2, 2);
  std::fill(s1.data.begin(), s1.data.end(), -4.0);
  std::fill(s2.data.begin(), s2.data.end(), -1.0);
  std::fill(g1.data.begin(), g1.data.end(), 0.0);
  std::fill(g2.data.begin(), g2.data.end(), 0.15);
  CorrelationResult c = uncertainty_noise_correlation({s1, s2}, {g1, g2});
  CHECK_FALSE(c.undefined);
  CHECK(c.rho == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("sparsification of a perfectly ranked map is non-increasing") {
  auto rng = make_rng(9);
  Tensor target = random_mask(rng, 16, 16);
  Tensor pred = random_probs(rng, 16, 16);
  Tensor s(1, 1, 16, 16);
  for (std::size_t i = 0; i < s.data.size(); ++i)
    s.data[i] = std::log(std::abs(pred.data[i] - target.data[i]) + 1e-9);
  SparsificationCurve curve = sparsification({pred}, {target}, {s}, 10);
  REQUIRE(curve.residual_error.size() == 10);
  for (std::size_t k = 1; k < curve.residual_error.size(); ++k)
    CHECK(curve.residual_error[k] <= curve.residual_error[k - 1] + 1e-12);
  CHECK(curve.fractions_removed.front() == 0.0);
  CHECK(curve.fractions_removed.back() == doctest::Approx(0.9).epsilon(1e-12));
}

TEST_CASE("a flat uncertainty map keeps the error roughly flat") {
  auto rng = make_rng(10);
  Tensor target = random_mask(rng, 24, 24);
  Tensor pred = random_probs(rng, 24, 24);
  Tensor s(1, 1, 24, 24);
  std::fill(s.data.begin(), s.data.end(), -2.0);
  SparsificationCurve curve = sparsification({pred}, {target}, {s}, 5);
  double base = curve.residual_error[0];
  for (double e : curve.residual_error) CHECK(e == doctest::Approx(base).epsilon(0.15));
}

TEST_CASE("sparsification matches a brute-force oracle") {
  auto rng = make_rng(11);
  Tensor target = random_mask(rng, 8, 8);
  Tensor pred = random_probs(rng, 8, 8);
  Tensor s(1, 1, 8, 8);
  for (auto& v : s.data) v = uniform(rng, -6.0, 2.0);

  int steps = 4;
  SparsificationCurve curve = sparsification({pred}, {target}, {s}, steps);

  std::vector<std::size_t> order(64);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (s.data[a] != s.data[b]) return s.data[a] > s.data[b];
    return a < b;
  });
  for (int k = 0; k < steps; ++k) {
    std::size_t removed = static_cast<std::size_t>(64.0 * k / steps);
    double sum = 0.0;
    for (std::size_t i = removed; i < 64; ++i)
      sum += std::abs(pred.data[order[i]] - target.data[order[i]]);
    double expect = sum / static_cast<double>(64 - removed);
    CHECK(curve.residual_error[static_cast<std::size_t>(k)] ==
          doctest::Approx(expect).epsilon(1e-12));
  }
}

TEST_CASE("sparsification needs at least two steps") {
  Tensor t = grid_from({0.0, 1.0, 0.0, 1.0}, 2, 2);
  CHECK_THROWS_AS(sparsification({t}, {t}, {t}, 1), InvalidInputError);
}

TEST_CASE("map export writes png, raw grid and sidecar") {
  fs::path dir = fs::temp_directory_path() /
                 ("ungap_test_maps_" + std::to_string(::getpid()));
  fs::remove_all(dir);

  auto rng = make_rng(12);
  MapSet maps;
  maps.seg_prob = random_probs(rng, 16, 16);
  maps.uncertainty = random_probs(rng, 16, 16);
  export_maps(maps, dir.string());

  CHECK(fs::exists(dir / "seg_prob.png"));
  CHECK(fs::exists(dir / "seg_prob.f32"));
  CHECK(fs::exists(dir / "seg_prob.json"));
  CHECK(fs::exists(dir / "uncertainty.f32"));
  CHECK_FALSE(fs::exists(dir / "boundary_prob.f32"));

  // raw grid round-trips through f32 exactly
  Tensor back = read_f32((dir / "seg_prob.f32").string(), 16, 16);
  for (std::size_t i = 0; i < back.data.size(); ++i)
    CHECK(back.data[i] == doctest::Approx(maps.seg_prob->data[i]).epsilon(1e-7));

  std::ifstream sidecar(dir / "seg_prob.json");
  std::string json((std::istreambuf_iterator<char>(sidecar)),
                   std::istreambuf_iterator<char>());
  CHECK(json.find("\"height\"") != std::string::npos);
  CHECK(json.find("\"constant\"") != std::string::npos);

  fs::remove_all(dir);
}

TEST_CASE("constant maps are flagged and render to the low anchor") {
  fs::path dir = fs::temp_directory_path() /
                 ("ungap_test_const_" + std::to_string(::getpid()));
  fs::remove_all(dir);

  MapSet maps;
  Tensor flat(1, 1, 8, 8);
  std::fill(flat.data.begin(), flat.data.end(), 0.42);
  maps.uncertainty = flat;
  export_maps(maps, dir.string());

  std::ifstream sidecar(dir / "uncertainty.json");
  std::string json((std::istreambuf_iterator<char>(sidecar)),
                   std::istreambuf_iterator<char>());
  CHECK(json.find("\"constant\": true") != std::string::npos);

  fs::remove_all(dir);
}

TEST_CASE("heatmap output is rgb in range") {
  auto rng = make_rng(13);
  Tensor probs = random_probs(rng, 8, 8);
  Tensor hm = heatmap(probs);
  CHECK(hm.c == 3);
  CHECK(hm.h == 8);
  for (double v : hm.data) {
    CHECK(v >= 0.0);
    CHECK(v <= 1.0);
  }
}

TEST_CASE("report serialization carries the confusion counts") {
  auto rng = make_rng(14);
  Tensor pred = random_probs(rng, 8, 8);
  Tensor mask = random_mask(rng, 8, 8);
  MetricsReport r = micro_metrics({pred}, {mask}, 0.5);
  std::string json = r.to_json();
  CHECK(json.find("\"tp\": " + std::to_string(r.tp)) != std::string::npos);
  CHECK(json.find("\"threshold\"") != std::string::npos);
  std::string row = r.to_csv_row();
  std::string header = MetricsReport::csv_header();
  CHECK(std::count(row.begin(), row.end(), ',') ==
        std::count(header.begin(), header.end(), ','));
}

}  // TEST_SUITE
