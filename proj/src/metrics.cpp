#include "ungap/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>

#include <nlohmann/json.hpp>

#include "ungap/errors.hpp"
#include "ungap/image.hpp"

namespace fs = std::filesystem;

namespace ungap {
namespace {

void require_matched(const std::vector<Tensor>& a, const std::vector<Tensor>& b,
                     const char* what) {
  if (a.empty()) throw InvalidInputError(std::string(what) + ": empty input");
  if (a.size() != b.size()) {
    throw InvalidInputError(std::string(what) + ": list lengths differ (" +
                            std::to_string(a.size()) + " vs " + std::to_string(b.size()) + ")");
  }
  for (size_t i = 0; i < a.size(); ++i) {
    if (!a[i].same_shape(b[i])) {
      throw InvalidInputError(std::string(what) + ": shape mismatch at index " +
                              std::to_string(i) + ": " + a[i].shape_str() + " vs " +
                              b[i].shape_str());
    }
  }
}

// Average-rank transform (ties share the mean of their rank span).
std::vector<double> ranks_of(const std::vector<double>& v) {
  std::vector<size_t> idx(v.size());
  std::iota(idx.begin(), idx.end(), size_t{0});
  std::sort(idx.begin(), idx.end(), [&](size_t a, size_t b) { return v[a] < v[b]; });
  std::vector<double> ranks(v.size());
  size_t i = 0;
  while (i < idx.size()) {
    size_t j = i;
    while (j + 1 < idx.size() && v[idx[j + 1]] == v[idx[i]]) ++j;
    double r = 0.5 * (i + j) + 1.0;
    for (size_t k = i; k <= j; ++k) ranks[idx[k]] = r;
    i = j + 1;
  }
  return ranks;
}

}  // namespace

std::string MetricsReport::to_json() const {
  nlohmann::json j = {
      {"tp", tp},
      {"fp", fp},
      {"fn", fn},
      {"tn", tn},
      {"precision", precision},
      {"recall", recall},
      {"f1", f1},
      {"threshold", threshold},
      {"precision_defined", precision_defined},
      {"recall_defined", recall_defined},
      {"f1_defined", f1_defined},
  };
  return j.dump(2);
}

std::string MetricsReport::csv_header() {
  return "tp,fp,fn,tn,precision,recall,f1,threshold";
}

std::string MetricsReport::to_csv_row() const {
  std::ostringstream os;
  os.precision(10);
  os << tp << ',' << fp << ',' << fn << ',' << tn << ',' << precision << ',' << recall << ','
     << f1 << ',' << threshold;
  return os.str();
}

MetricsReport micro_metrics(const std::vector<Tensor>& pred_probs,
                            const std::vector<Tensor>& targets, double threshold) {
  require_matched(pred_probs, targets, "micro_metrics");
  if (!(threshold > 0.0 && threshold < 1.0)) {
    throw InvalidInputError("micro_metrics: threshold must lie in (0,1)");
  }

  MetricsReport r;
  r.threshold = threshold;
  for (size_t i = 0; i < pred_probs.size(); ++i) {
    const auto& p = pred_probs[i].data;
    const auto& t = targets[i].data;
    for (size_t k = 0; k < p.size(); ++k) {
      bool pred = p[k] > threshold;
      bool pos = t[k] != 0.0;
      if (pred && pos) ++r.tp;
      else if (pred && !pos) ++r.fp;
      else if (!pred && pos) ++r.fn;
      else ++r.tn;
    }
  }

  if (r.tp + r.fp > 0) {
    r.precision = static_cast<double>(r.tp) / static_cast<double>(r.tp + r.fp);
  } else {
    r.precision_defined = false;
  }
  if (r.tp + r.fn > 0) {
    r.recall = static_cast<double>(r.tp) / static_cast<double>(r.tp + r.fn);
  } else {
    r.recall_defined = false;
  }
  if (r.precision + r.recall > 0.0) {
    r.f1 = 2.0 * r.precision * r.recall / (r.precision + r.recall);
  } else {
    r.f1_defined = false;
  }
  return r;
}

CorrelationResult uncertainty_noise_correlation(const std::vector<Tensor>& s_maps,
                                                const std::vector<Tensor>& sigma_maps) {
  require_matched(s_maps, sigma_maps, "uncertainty_noise_correlation");

  std::vector<double> u, g;
  for (size_t i = 0; i < s_maps.size(); ++i) {
    for (double v : s_maps[i].data) u.push_back(std::exp(v));
    for (double v : sigma_maps[i].data) g.push_back(v);
  }

  CorrelationResult res;
  auto constant = [](const std::vector<double>& v) {
    return std::all_of(v.begin(), v.end(), [&](double x) { return x == v.front(); });
  };
  if (u.size() < 2 || constant(u) || constant(g)) {
    res.undefined = true;
    return res;
  }

  std::vector<double> ru = ranks_of(u);
  std::vector<double> rg = ranks_of(g);
  double n = static_cast<double>(ru.size());
  double mu = std::accumulate(ru.begin(), ru.end(), 0.0) / n;
  double mg = std::accumulate(rg.begin(), rg.end(), 0.0) / n;
  double num = 0.0, du = 0.0, dg = 0.0;
  for (size_t i = 0; i < ru.size(); ++i) {
    double a = ru[i] - mu;
    double b = rg[i] - mg;
    num += a * b;
    du += a * a;
    dg += b * b;
  }
  if (du == 0.0 || dg == 0.0) {
    res.undefined = true;
    return res;
  }
  res.rho = num / std::sqrt(du * dg);
  return res;
}

std::string SparsificationCurve::to_csv() const {
  std::ostringstream os;
  os.precision(10);
  os << "fraction_removed,residual_error\n";
  for (size_t i = 0; i < fractions_removed.size(); ++i) {
    os << fractions_removed[i] << ',' << residual_error[i] << '\n';
  }
  return os.str();
}

SparsificationCurve sparsification(const std::vector<Tensor>& pred_probs,
                                   const std::vector<Tensor>& targets,
                                   const std::vector<Tensor>& s_maps, int steps) {
  require_matched(pred_probs, targets, "sparsification");
  require_matched(pred_probs, s_maps, "sparsification");
  if (steps < 2) throw InvalidInputError("sparsification: steps must be >= 2");

  struct Px {
    double err;
    double s;
    size_t idx;
  };
  std::vector<Px> pixels;
  for (size_t i = 0; i < pred_probs.size(); ++i) {
    const auto& p = pred_probs[i].data;
    const auto& t = targets[i].data;
    const auto& s = s_maps[i].data;
    for (size_t k = 0; k < p.size(); ++k) {
      pixels.push_back({std::abs(p[k] - t[k]), s[k], pixels.size()});
    }
  }
  // Highest uncertainty first; index breaks ties deterministically.
  std::sort(pixels.begin(), pixels.end(), [](const Px& a, const Px& b) {
    if (a.s != b.s) return a.s > b.s;
    return a.idx < b.idx;
  });

  std::vector<double> suffix_sum(pixels.size() + 1, 0.0);
  for (size_t i = pixels.size(); i > 0; --i) {
    suffix_sum[i - 1] = suffix_sum[i] + pixels[i - 1].err;
  }

  SparsificationCurve curve;
  size_t total = pixels.size();
  for (int k = 0; k < steps; ++k) {
    size_t removed = total * static_cast<size_t>(k) / static_cast<size_t>(steps);
    size_t kept = total - removed;
    curve.fractions_removed.push_back(static_cast<double>(k) / steps);
    curve.residual_error.push_back(kept > 0 ? suffix_sum[removed] / static_cast<double>(kept)
                                            : 0.0);
  }
  return curve;
}

void export_maps(const MapSet& maps, const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (!fs::is_directory(dir)) throw IoError("cannot create export dir: " + dir);

  auto write_one = [&](const Tensor& grid, const std::string& name) {
    if (grid.n != 1 || grid.c != 1) {
      throw InvalidInputError("export_maps: " + name + " must be (1,1,H,W), got " +
                              grid.shape_str());
    }
    std::string base = (fs::path(dir) / name).string();
    write_png(base + ".png", heatmap(grid));
    write_f32(base + ".f32", grid);
    double lo = grid.min();
    double hi = grid.max();
    nlohmann::json side = {{"height", grid.h},   {"width", grid.w}, {"dtype", "float32"},
                           {"order", "row-major"}, {"min", lo},     {"max", hi},
                           {"constant", lo == hi}};
    std::ofstream out(base + ".json");
    if (!out) throw IoError("cannot write sidecar: " + base + ".json");
    out << side.dump(2) << "\n";
  };

  if (maps.seg_prob) write_one(*maps.seg_prob, "seg_prob");
  if (maps.boundary_prob) write_one(*maps.boundary_prob, "boundary_prob");
  if (maps.uncertainty) write_one(*maps.uncertainty, "uncertainty");
}

}  // namespace ungap
