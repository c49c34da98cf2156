#include "ungap/train.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>

#include <nlohmann/json.hpp>

#include "ungap/autodiff.hpp"
#include "ungap/checkpoint.hpp"
#include "ungap/errors.hpp"
#include "ungap/image.hpp"
#include "ungap/metrics.hpp"
#include "ungap/nn.hpp"
#include "ungap/random.hpp"

namespace fs = std::filesystem;

namespace ungap {
namespace {

constexpr std::uint64_t kStreamShuffle = 0x51;
constexpr std::uint64_t kStreamAugment = 0x52;

Tensor stack_batch(const std::vector<Tensor>& grids) {
  const Tensor& first = grids.front();
  Tensor out(static_cast<int>(grids.size()), first.c, first.h, first.w);
  size_t per = first.data.size();
  for (size_t i = 0; i < grids.size(); ++i) {
    std::copy(grids[i].data.begin(), grids[i].data.end(), out.data.begin() + i * per);
  }
  return out;
}

double scalar_of(const VarPtr& v) { return v->value.data[0]; }

std::vector<Tensor> snapshot_params(const UngapNet& net) {
  std::vector<Tensor> snap;
  for (const auto& p : net.parameters()) snap.push_back(p.var->value);
  return snap;
}

void restore_params(UngapNet& net, const std::vector<Tensor>& snap) {
  auto& params = net.parameters();
  for (size_t i = 0; i < params.size(); ++i) params[i].var->value = snap[i];
}

}  // namespace

void TrainConfig::validate() const {
  if (learning_rate <= 0.0) throw InvalidConfigError("train: learning_rate must be positive");
  if (batch_size < 1) throw InvalidConfigError("train: batch_size must be positive");
  if (epochs < 1) throw InvalidConfigError("train: epochs must be positive");
  if (beta < 0.0 || beta > 1.0) throw InvalidConfigError("train: beta must lie in [0,1]");
  if (train_size < 1) throw InvalidConfigError("train: train_size must be positive");
  if (checkpoint_every < 0) throw InvalidConfigError("train: checkpoint_every must be >= 0");
  if (boundary_width < 1) throw InvalidConfigError("train: boundary_width must be >= 1");
  if (dice_eps <= 0.0) throw InvalidConfigError("train: dice_eps must be positive");
  loss_weights.validate();
}

std::string RunLog::to_csv() const {
  std::ostringstream os;
  os.precision(10);
  os << "epoch,l_aleatory,l_boundary,l_segmentation,l_final,train_f1\n";
  for (const auto& r : records) {
    os << r.epoch << ',' << r.l_aleatory << ',' << r.l_boundary << ',' << r.l_segmentation
       << ',' << r.l_final << ',' << r.train_f1 << '\n';
  }
  return os.str();
}

std::string RunLog::to_json() const {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& r : records) {
    arr.push_back({{"epoch", r.epoch},
                   {"l_aleatory", r.l_aleatory},
                   {"l_boundary", r.l_boundary},
                   {"l_segmentation", r.l_segmentation},
                   {"l_final", r.l_final},
                   {"train_f1", r.train_f1}});
  }
  return nlohmann::json{{"records", arr}}.dump(2);
}

void RunLog::write(const std::string& dir) const {
  fs::create_directories(dir);
  {
    std::ofstream out(fs::path(dir) / "run_log.csv");
    if (!out) throw IoError("cannot write run_log.csv under " + dir);
    out << to_csv();
  }
  std::ofstream out(fs::path(dir) / "run_log.json");
  if (!out) throw IoError("cannot write run_log.json under " + dir);
  out << to_json() << "\n";
}

Tensor deterministic_view(const Tensor& grid, int size) {
  Tensor padded = reflect_pad_to(grid, size, size);
  int y0 = (padded.h - size) / 2;
  int x0 = (padded.w - size) / 2;
  return crop(padded, y0, x0, size, size);
}

PredMaps predict_record(UngapNet& net, const SampleRecord& rec, int size) {
  Tensor image = deterministic_view(to_channels(rec.image, net.config().in_channels), size);
  ForwardResult res = net.forward(image);
  PredMaps maps;
  maps.seg_prob = res.seg_prob->value;
  if (res.boundary_prob) maps.boundary_prob = res.boundary_prob->value;
  if (res.s) maps.s = res.s->value;
  return maps;
}

double train_micro_f1(UngapNet& net, const std::vector<SampleRecord>& data, int size,
                      double threshold) {
  std::vector<Tensor> preds, targets;
  for (const auto& rec : data) {
    preds.push_back(predict_record(net, rec, size).seg_prob);
    targets.push_back(deterministic_view(rec.mask, size));
  }
  MetricsReport rep = micro_metrics(preds, targets, threshold);
  return rep.f1;
}

RunLog train(UngapNet& net, const TrainConfig& cfg, const std::vector<SampleRecord>& data) {
  cfg.validate();
  if (data.empty()) throw InvalidInputError("train: dataset is empty");
  if (net.config().input_size != cfg.train_size) {
    throw InvalidConfigError("train: train_size " + std::to_string(cfg.train_size) +
                             " does not match model input_size " +
                             std::to_string(net.config().input_size));
  }
  const ModelConfig& mc = net.config();
  BetaConfig beta_cfg{cfg.beta, mc.s_clamp_min, mc.s_clamp_max};

  std::vector<VarPtr> params;
  for (const auto& p : net.parameters()) params.push_back(p.var);
  AdamOptimizer opt(std::move(params), cfg.learning_rate);

  if (!cfg.out_dir.empty()) fs::create_directories(cfg.out_dir);

  auto save_meta = [&](int epoch) {
    CheckpointMeta meta;
    meta.epoch = epoch;
    meta.loss_weights = cfg.loss_weights;
    meta.beta = cfg.beta;
    meta.seed = cfg.seed;
    return meta;
  };

  std::vector<Tensor> last_good = snapshot_params(net);
  int last_good_epoch = 0;

  auto abort_diverged = [&](const std::string& term, int epoch, int batch) {
    if (!cfg.out_dir.empty()) {
      std::vector<Tensor> current = snapshot_params(net);
      restore_params(net, last_good);
      save_checkpoint(net, save_meta(last_good_epoch),
                      (fs::path(cfg.out_dir) / "checkpoint_last_good.ckpt").string());
      restore_params(net, current);
    }
    throw TrainingDivergedError(term + " became non-finite at epoch " + std::to_string(epoch) +
                                ", batch " + std::to_string(batch));
  };

  RunLog log;
  std::vector<size_t> order(data.size());
  std::iota(order.begin(), order.end(), size_t{0});

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    auto shuffle_rng =
        make_rng(derive_seed(cfg.seed, kStreamShuffle, static_cast<std::uint64_t>(epoch)));
    for (size_t i = order.size(); i > 1; --i) {
      size_t j = static_cast<size_t>(uniform_int(shuffle_rng, 0, static_cast<int>(i) - 1));
      std::swap(order[i - 1], order[j]);
    }

    double sum_al = 0.0, sum_bd = 0.0, sum_seg = 0.0, sum_total = 0.0;
    int batches = 0;

    for (size_t start = 0; start < order.size(); start += cfg.batch_size) {
      size_t end = std::min(order.size(), start + cfg.batch_size);
      std::vector<Tensor> images, masks, boundaries;
      for (size_t i = start; i < end; ++i) {
        const SampleRecord& rec = data[order[i]];
        Tensor img = to_channels(rec.image, mc.in_channels);
        Tensor msk = rec.mask;
        if (cfg.augment) {
          std::uint64_t aug_seed =
              derive_seed(derive_seed(cfg.seed, kStreamAugment, static_cast<std::uint64_t>(epoch)),
                          static_cast<std::uint64_t>(order[i]));
          std::tie(img, msk) = augment(img, msk, aug_seed, cfg.train_size);
        } else {
          img = deterministic_view(img, cfg.train_size);
          msk = deterministic_view(msk, cfg.train_size);
        }
        images.push_back(std::move(img));
        if (mc.enable_bdh) boundaries.push_back(boundary_from_mask(msk, cfg.boundary_width));
        masks.push_back(std::move(msk));
      }

      Tensor image_batch = stack_batch(images);
      Tensor mask_batch = stack_batch(masks);

      ForwardResult res = net.forward(image_batch);

      VarPtr l_al, l_bd;
      if (mc.enable_hm) l_al = beta_nll_var(res.y_hat_aux, res.s, mask_batch, beta_cfg);
      if (mc.enable_bdh) l_bd = dice_loss_var(res.boundary_prob, stack_batch(boundaries),
                                              cfg.dice_eps);
      VarPtr l_seg = dice_loss_var(res.seg_prob, mask_batch, cfg.dice_eps);
      VarPtr total = total_loss_var(l_al, l_bd, l_seg, cfg.loss_weights);

      double v_al = l_al ? scalar_of(l_al) : 0.0;
      double v_bd = l_bd ? scalar_of(l_bd) : 0.0;
      double v_seg = scalar_of(l_seg);
      double v_total = scalar_of(total);
      if (!std::isfinite(v_al)) abort_diverged("L_aleatory", epoch, batches);
      if (!std::isfinite(v_bd)) abort_diverged("L_boundary", epoch, batches);
      if (!std::isfinite(v_seg)) abort_diverged("L_segmentation", epoch, batches);
      if (!std::isfinite(v_total)) abort_diverged("L_final", epoch, batches);

      opt.zero_grad();
      backward(total);
      opt.step();

      sum_al += v_al;
      sum_bd += v_bd;
      sum_seg += v_seg;
      sum_total += v_total;
      ++batches;
    }

    EpochRecord rec;
    rec.epoch = epoch;
    rec.l_aleatory = sum_al / batches;
    rec.l_boundary = sum_bd / batches;
    rec.l_segmentation = sum_seg / batches;
    rec.l_final = sum_total / batches;
    rec.train_f1 = train_micro_f1(net, data, cfg.train_size);
    log.records.push_back(rec);

    last_good = snapshot_params(net);
    last_good_epoch = epoch;

    if (!cfg.out_dir.empty() && cfg.checkpoint_every > 0 && epoch % cfg.checkpoint_every == 0) {
      char name[48];
      std::snprintf(name, sizeof(name), "checkpoint_epoch%04d.ckpt", epoch);
      save_checkpoint(net, save_meta(epoch), (fs::path(cfg.out_dir) / name).string());
    }
  }

  if (!cfg.out_dir.empty()) {
    save_checkpoint(net, save_meta(cfg.epochs),
                    (fs::path(cfg.out_dir) / "checkpoint.ckpt").string());
    log.write(cfg.out_dir);
  }
  return log;
}

}  // namespace ungap
