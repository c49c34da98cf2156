#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "ungap/checkpoint.hpp"
#include "ungap/dataset.hpp"
#include "ungap/errors.hpp"
#include "ungap/image.hpp"
#include "ungap/losses.hpp"
#include "ungap/metrics.hpp"
#include "ungap/model.hpp"
#include "ungap/random.hpp"
#include "ungap/runconfig.hpp"
#include "ungap/synthetic.hpp"
#include "ungap/train.hpp"

namespace fs = std::filesystem;
using namespace ungap;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitRuntime = 2;

std::string config_keys_footer() {
  std::string out = "Config file keys (key = value, '#' comments):\n";
  for (const auto& d : config_key_docs()) {
    out += "  " + d.key;
    if (d.key.size() < 26) out += std::string(26 - d.key.size(), ' ');
    out += " " + d.doc + "\n";
  }
  return out;
}

// Desk-scale defaults; a config file and explicit flags override in that order.
RunConfig desk_defaults() {
  RunConfig cfg;
  cfg.model = ModelConfig::for_preset(Preset::tiny, 64);
  cfg.train.train_size = 64;
  cfg.train.batch_size = 4;
  cfg.train.epochs = 300;
  return cfg;
}

struct TrainFlags {
  std::string config_path, data_dir, out_dir, preset;
  std::uint64_t seed = 0;
  int epochs = 0, batch_size = 0, train_size = 0, checkpoint_every = 0;
  double lr = 0.0, beta = 0.0, w1 = 0.0, w2 = 0.0, w3 = 0.0;
  bool disable_hm = false, disable_upfm = false, disable_bdh = false;
  bool no_augment = false;
};

int run_generate(int n, const std::string& out, std::uint64_t seed, const GenConfig& gen,
                 bool force) {
  if (fs::exists(out) && !fs::is_empty(out) && !force) {
    std::cerr << "error: output directory " << out
              << " is not empty; pass --force to overwrite\n";
    return kExitUsage;
  }
  std::vector<SyntheticScene> scenes;
  scenes.reserve(n);
  for (int i = 0; i < n; ++i) {
    scenes.push_back(generate_scene(derive_seed(seed, 0xD5, static_cast<std::uint64_t>(i)), gen));
  }
  export_scenes(out, scenes);
  std::cout << "wrote " << n << " scenes under " << out << "\n";
  return kExitOk;
}

int run_train(const TrainFlags& f, const CLI::App* cmd) {
  RunConfig cfg = desk_defaults();
  if (!f.config_path.empty()) apply_config_file(cfg, f.config_path);

  auto passed = [&](const std::string& flag) { return cmd->count(flag) > 0; };
  if (passed("--data")) cfg.data_dir = f.data_dir;
  if (passed("--out")) cfg.out_dir = f.out_dir;
  if (passed("--seed")) cfg.train.seed = f.seed;
  if (passed("--preset")) {
    int size = cfg.model.input_size;
    cfg.model = ModelConfig::for_preset(preset_from_string(f.preset), size);
  }
  if (passed("--epochs")) cfg.train.epochs = f.epochs;
  if (passed("--batch-size")) cfg.train.batch_size = f.batch_size;
  if (passed("--train-size")) {
    cfg.train.train_size = f.train_size;
    cfg.model.input_size = f.train_size;
  }
  if (passed("--checkpoint-every")) cfg.train.checkpoint_every = f.checkpoint_every;
  if (passed("--lr")) cfg.train.learning_rate = f.lr;
  if (passed("--beta")) cfg.train.beta = f.beta;
  if (passed("--w1")) cfg.train.loss_weights.w1 = f.w1;
  if (passed("--w2")) cfg.train.loss_weights.w2 = f.w2;
  if (passed("--w3")) cfg.train.loss_weights.w3 = f.w3;
  if (f.disable_hm) cfg.model.enable_hm = false;
  if (f.disable_upfm) cfg.model.enable_upfm = false;
  if (f.disable_bdh) cfg.model.enable_bdh = false;
  if (cfg.model.enable_upfm && !cfg.model.enable_hm) cfg.model.enable_upfm = false;
  if (f.no_augment) cfg.train.augment = false;

  if (cfg.data_dir.empty()) {
    std::cerr << "error: no dataset; pass --data or set data.dir in the config\n";
    return kExitUsage;
  }
  if (cfg.out_dir.empty()) cfg.out_dir = "ungap_run";
  cfg.train.out_dir = cfg.out_dir;
  cfg.validate();

  std::vector<SampleRecord> data = load_dataset(cfg.data_dir);
  if (data.empty()) {
    std::cerr << "error: dataset at " << cfg.data_dir << " is empty\n";
    return kExitUsage;
  }

  fs::create_directories(cfg.out_dir);
  write_config_file(cfg, (fs::path(cfg.out_dir) / "config.txt").string());

  UngapNet net(cfg.model, cfg.train.seed);
  std::cout << "training " << to_string(cfg.model.preset) << " model ("
            << net.parameter_count() << " parameters) on " << data.size() << " samples for "
            << cfg.train.epochs << " epochs\n";
  RunLog log = train(net, cfg.train, data);
  const EpochRecord& last = log.records.back();
  std::cout << "final epoch " << last.epoch << ": L_final=" << last.l_final
            << " train_f1=" << last.train_f1 << "\n";
  std::cout << "checkpoint and logs under " << cfg.out_dir << "\n";
  return kExitOk;
}

int run_eval(const std::string& ckpt_path, const std::string& data_dir, const std::string& out,
             double threshold, int spars_steps) {
  LoadedCheckpoint ckpt = load_checkpoint(ckpt_path);
  std::vector<SampleRecord> data = load_dataset(data_dir);
  if (data.empty()) {
    std::cerr << "error: dataset at " << data_dir << " is empty\n";
    return kExitUsage;
  }

  int size = ckpt.config.input_size;
  std::vector<Tensor> preds, targets, s_maps, sigma_maps;
  bool have_sigma = true;
  for (const auto& rec : data) {
    PredMaps maps = predict_record(*ckpt.net, rec, size);
    preds.push_back(maps.seg_prob);
    targets.push_back(deterministic_view(rec.mask, size));
    if (maps.s) s_maps.push_back(*maps.s);
    if (rec.noise_sigma) {
      sigma_maps.push_back(deterministic_view(*rec.noise_sigma, size));
    } else {
      have_sigma = false;
    }
  }

  MetricsReport report = micro_metrics(preds, targets, threshold);
  std::cout << "precision=" << report.precision << " recall=" << report.recall
            << " f1=" << report.f1 << " (threshold " << threshold << ")\n";

  fs::create_directories(out);
  {
    std::ofstream js((fs::path(out) / "metrics.json").string());
    js << report.to_json() << "\n";
    std::ofstream csv((fs::path(out) / "metrics.csv").string());
    csv << MetricsReport::csv_header() << "\n" << report.to_csv_row() << "\n";
  }

  if (!s_maps.empty()) {
    SparsificationCurve curve = sparsification(preds, targets, s_maps, spars_steps);
    std::ofstream sc((fs::path(out) / "sparsification.csv").string());
    sc << curve.to_csv();
    if (have_sigma && sigma_maps.size() == s_maps.size()) {
      CorrelationResult corr = uncertainty_noise_correlation(s_maps, sigma_maps);
      if (corr.undefined) {
        std::cout << "uncertainty/noise correlation: undefined (constant input)\n";
      } else {
        std::cout << "uncertainty/noise correlation: " << corr.rho << "\n";
      }
    }
  }
  std::cout << "reports under " << out << "\n";
  return kExitOk;
}

int run_infer(const std::string& ckpt_path, const std::string& image_path,
              const std::string& out) {
  LoadedCheckpoint ckpt = load_checkpoint(ckpt_path);
  SampleRecord rec;
  rec.name = fs::path(image_path).stem().string();
  rec.image = read_png(image_path);
  rec.mask = Tensor(1, 1, rec.image.h, rec.image.w);

  PredMaps maps = predict_record(*ckpt.net, rec, ckpt.config.input_size);
  MapSet set;
  set.seg_prob = maps.seg_prob;
  set.boundary_prob = maps.boundary_prob;
  if (maps.s) {
    Tensor unc = *maps.s;
    for (double& v : unc.data) v = std::exp(v);
    set.uncertainty = unc;
  }
  export_maps(set, out);
  std::cout << "maps exported under " << out << "\n";
  return kExitOk;
}

int run_diagnose(std::vector<double> betas, double s_min, double s_max, int s_steps,
                 std::uint64_t seed) {
  if (betas.empty()) betas = {0.0, 0.25, 0.5, 0.75, 1.0};
  if (s_steps < 2 || s_max <= s_min) {
    std::cerr << "error: need s_max > s_min and at least 2 steps\n";
    return kExitUsage;
  }

  std::printf("attenuation ratio exp((beta-1)*s)\n%8s", "beta\\s");
  for (int i = 0; i < s_steps; ++i) {
    double s = s_min + (s_max - s_min) * i / (s_steps - 1);
    std::printf(" %9.2f", s);
  }
  std::printf("\n");
  for (double b : betas) {
    std::printf("%8.2f", b);
    for (int i = 0; i < s_steps; ++i) {
      double s = s_min + (s_max - s_min) * i / (s_steps - 1);
      std::printf(" %9.4f", attenuation_ratio(s, b));
    }
    std::printf("\n");
  }

  // Analytic gradients vs central finite differences on random batches.
  std::printf("\ngradient check (analytic vs central differences, step 1e-4):\n");
  double worst = 0.0;
  for (double b : betas) {
    auto rng = make_rng(derive_seed(seed, 0xDC, static_cast<std::uint64_t>(b * 1000)));
    PixelResidualBatch batch;
    batch.y = Tensor(2, 1, 6, 6);
    batch.y_hat = Tensor(2, 1, 6, 6);
    batch.s = Tensor(2, 1, 6, 6);
    for (auto& v : batch.y.data) v = uniform(rng, 0.0, 1.0) < 0.5 ? 0.0 : 1.0;
    for (auto& v : batch.y_hat.data) v = uniform(rng, 0.02, 0.98);
    for (auto& v : batch.s.data) v = uniform(rng, -3.0, 3.0);
    BetaConfig cfg;
    cfg.beta = b;
    auto [g_yhat, g_s] = beta_nll_grad(batch, cfg);

    // Probe the frozen-weight loss: the stop-gradient factor stays at the
    // base point, matching what the analytic gradient differentiates.
    Tensor w = beta_nll_weights(batch, cfg);
    const double fd_step = 1e-4;
    Tensor fd_yhat = Tensor::zeros_like(batch.y_hat);
    Tensor fd_s = Tensor::zeros_like(batch.s);
    for (size_t i = 0; i < batch.y_hat.data.size(); ++i) {
      PixelResidualBatch probe = batch;
      probe.y_hat.data[i] = batch.y_hat.data[i] + fd_step;
      double up = beta_nll_weighted(probe, cfg, w);
      probe.y_hat.data[i] = batch.y_hat.data[i] - fd_step;
      double dn = beta_nll_weighted(probe, cfg, w);
      fd_yhat.data[i] = (up - dn) / (2 * fd_step);
      probe.y_hat.data[i] = batch.y_hat.data[i];
      probe.s.data[i] = batch.s.data[i] + fd_step;
      up = beta_nll_weighted(probe, cfg, w);
      probe.s.data[i] = batch.s.data[i] - fd_step;
      dn = beta_nll_weighted(probe, cfg, w);
      fd_s.data[i] = (up - dn) / (2 * fd_step);
    }
    double err = std::max(relative_inf_diff(g_yhat, fd_yhat), relative_inf_diff(g_s, fd_s));
    worst = std::max(worst, err);
    std::printf("  beta=%.2f  max relative gradient error %.3e\n", b, err);
  }
  std::printf("worst case %.3e (tolerance 1e-4): %s\n", worst,
              worst <= 1e-4 ? "ok" : "FAILED");
  return worst <= 1e-4 ? kExitOk : kExitRuntime;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"ungap: uncertainty-guided crack segmentation pipeline"};
  app.require_subcommand(1);
  app.footer(config_keys_footer());

  // generate
  auto* gen_cmd = app.add_subcommand("generate", "write a synthetic crack dataset");
  int gen_n = 8;
  std::uint64_t gen_seed = 0;
  std::string gen_out;
  bool gen_force = false;
  GenConfig gen_cfg;
  gen_cmd->add_option("--n", gen_n, "number of scenes")->capture_default_str();
  gen_cmd->add_option("--out", gen_out, "output dataset directory")->required();
  gen_cmd->add_option("--seed", gen_seed, "generation seed")->capture_default_str();
  gen_cmd->add_option("--size", gen_cfg.size, "square scene size")->capture_default_str();
  gen_cmd->add_option("--crack-min", gen_cfg.crack_count_min, "min cracks per scene")
      ->capture_default_str();
  gen_cmd->add_option("--crack-max", gen_cfg.crack_count_max, "max cracks per scene")
      ->capture_default_str();
  gen_cmd->add_option("--width-min", gen_cfg.width_min, "min crack width (px)")
      ->capture_default_str();
  gen_cmd->add_option("--width-max", gen_cfg.width_max, "max crack width (px)")
      ->capture_default_str();
  gen_cmd->add_option("--noise-regions", gen_cfg.noise_regions, "piecewise noise regions")
      ->capture_default_str();
  gen_cmd->add_option("--sigma-min", gen_cfg.sigma_min, "lowest region noise std")
      ->capture_default_str();
  gen_cmd->add_option("--sigma-max", gen_cfg.sigma_max, "highest region noise std")
      ->capture_default_str();
  gen_cmd->add_option("--darken-min", gen_cfg.darken_min, "min crack darkening")
      ->capture_default_str();
  gen_cmd->add_option("--darken-max", gen_cfg.darken_max, "max crack darkening")
      ->capture_default_str();
  gen_cmd->add_flag("--force", gen_force, "overwrite a non-empty output directory");

  // train
  auto* train_cmd = app.add_subcommand("train", "optimize a model on a dataset");
  TrainFlags tf;
  train_cmd->add_option("--config", tf.config_path, "key=value config file");
  train_cmd->add_option("--data", tf.data_dir, "dataset root (images/ and masks/)");
  train_cmd->add_option("--out", tf.out_dir, "run output directory");
  train_cmd->add_option("--seed", tf.seed, "run seed");
  train_cmd->add_option("--preset", tf.preset, "tiny or xception_like")
      ->check(CLI::IsMember({"tiny", "xception_like"}));
  train_cmd->add_option("--epochs", tf.epochs, "training epochs");
  train_cmd->add_option("--batch-size", tf.batch_size, "batch size");
  train_cmd->add_option("--train-size", tf.train_size, "crop size == model input size");
  train_cmd->add_option("--checkpoint-every", tf.checkpoint_every, "periodic checkpoint epochs");
  train_cmd->add_option("--lr", tf.lr, "learning rate");
  train_cmd->add_option("--beta", tf.beta, "beta-NLL exponent");
  train_cmd->add_option("--w1", tf.w1, "aleatoric loss weight");
  train_cmd->add_option("--w2", tf.w2, "boundary loss weight");
  train_cmd->add_option("--w3", tf.w3, "segmentation loss weight");
  train_cmd->add_flag("--disable-hm", tf.disable_hm, "drop the heteroscedastic head");
  train_cmd->add_flag("--disable-upfm", tf.disable_upfm, "drop feature modulation");
  train_cmd->add_flag("--disable-bdh", tf.disable_bdh, "drop the dual-branch head");
  train_cmd->add_flag("--no-augment", tf.no_augment, "train without augmentation");

  // eval
  auto* eval_cmd = app.add_subcommand("eval", "score a checkpoint on a dataset");
  std::string eval_ckpt, eval_data, eval_out = "ungap_eval";
  double eval_threshold = 0.5;
  int eval_steps = 10;
  eval_cmd->add_option("--checkpoint", eval_ckpt, "checkpoint path")->required();
  eval_cmd->add_option("--data", eval_data, "dataset root")->required();
  eval_cmd->add_option("--out", eval_out, "report directory")->capture_default_str();
  eval_cmd->add_option("--threshold", eval_threshold, "binarization threshold")
      ->capture_default_str();
  eval_cmd->add_option("--sparsification-steps", eval_steps, "curve resolution")
      ->capture_default_str();

  // infer
  auto* infer_cmd = app.add_subcommand("infer", "export maps for one image");
  std::string infer_ckpt, infer_image, infer_out = "ungap_maps";
  infer_cmd->add_option("--checkpoint", infer_ckpt, "checkpoint path")->required();
  infer_cmd->add_option("--image", infer_image, "input PNG")->required();
  infer_cmd->add_option("--out", infer_out, "map directory")->capture_default_str();

  // diagnose
  auto* diag_cmd = app.add_subcommand("diagnose", "attenuation table and gradient check");
  std::vector<double> diag_betas;
  double diag_smin = -4.0, diag_smax = 4.0;
  int diag_steps = 9;
  std::uint64_t diag_seed = 0;
  diag_cmd->add_option("--beta", diag_betas, "beta values (repeatable)");
  diag_cmd->add_option("--s-min", diag_smin, "lowest log-variance")->capture_default_str();
  diag_cmd->add_option("--s-max", diag_smax, "highest log-variance")->capture_default_str();
  diag_cmd->add_option("--s-steps", diag_steps, "table columns")->capture_default_str();
  diag_cmd->add_option("--seed", diag_seed, "gradient check seed")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (gen_cmd->parsed()) return run_generate(gen_n, gen_out, gen_seed, gen_cfg, gen_force);
    if (train_cmd->parsed()) return run_train(tf, train_cmd);
    if (eval_cmd->parsed()) {
      return run_eval(eval_ckpt, eval_data, eval_out, eval_threshold, eval_steps);
    }
    if (infer_cmd->parsed()) return run_infer(infer_ckpt, infer_image, infer_out);
    if (diag_cmd->parsed()) {
      return run_diagnose(diag_betas, diag_smin, diag_smax, diag_steps, diag_seed);
    }
  } catch (const InvalidConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const InvalidInputError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitUsage;
}
