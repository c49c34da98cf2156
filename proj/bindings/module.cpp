#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <cstring>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "ungap/checkpoint.hpp"
#include "ungap/dataset.hpp"
#include "ungap/errors.hpp"
#include "ungap/losses.hpp"
#include "ungap/metrics.hpp"
#include "ungap/model.hpp"
#include "ungap/random.hpp"
#include "ungap/synthetic.hpp"
#include "ungap/train.hpp"

namespace py = pybind11;
using namespace ungap;

namespace {

Tensor tensor_from_array(py::array_t<double, py::array::c_style | py::array::forcecast> arr) {
  py::buffer_info info = arr.request();
  int n = 1, c = 1, h = 1, w = 1;
  if (info.ndim == 2) {
    h = static_cast<int>(info.shape[0]);
    w = static_cast<int>(info.shape[1]);
  } else if (info.ndim == 3) {
    c = static_cast<int>(info.shape[0]);
    h = static_cast<int>(info.shape[1]);
    w = static_cast<int>(info.shape[2]);
  } else if (info.ndim == 4) {
    n = static_cast<int>(info.shape[0]);
    c = static_cast<int>(info.shape[1]);
    h = static_cast<int>(info.shape[2]);
    w = static_cast<int>(info.shape[3]);
  } else {
    throw InvalidInputError("expected a 2-D, 3-D or 4-D array");
  }
  Tensor t(n, c, h, w);
  std::memcpy(t.data.data(), info.ptr, t.data.size() * sizeof(double));
  return t;
}

py::array_t<double> array_from_tensor(const Tensor& t) {
  py::array_t<double> arr({t.n, t.c, t.h, t.w});
  std::memcpy(arr.mutable_data(), t.data.data(), t.data.size() * sizeof(double));
  return arr;
}

std::vector<Tensor> tensors_from_list(const py::list& list) {
  std::vector<Tensor> out;
  for (auto item : list) {
    out.push_back(tensor_from_array(
        py::cast<py::array_t<double, py::array::c_style | py::array::forcecast>>(item)));
  }
  return out;
}

class Model {
 public:
  Model(const ModelConfig& cfg, std::uint64_t seed) : net_(std::make_unique<UngapNet>(cfg, seed)) {}
  explicit Model(std::unique_ptr<UngapNet> net) : net_(std::move(net)) {}

  py::dict forward(py::array_t<double, py::array::c_style | py::array::forcecast> image) {
    ForwardResult res = net_->forward(tensor_from_array(std::move(image)));
    py::dict out;
    out["seg_prob"] = array_from_tensor(res.seg_prob->value);
    out["seg_logits"] = array_from_tensor(res.seg_logits->value);
    if (res.y_hat_aux) out["y_hat_aux"] = array_from_tensor(res.y_hat_aux->value);
    if (res.s) out["s"] = array_from_tensor(res.s->value);
    if (res.gamma) out["gamma"] = array_from_tensor(res.gamma->value);
    if (res.omega) out["omega"] = array_from_tensor(res.omega->value);
    if (res.boundary_prob) out["boundary_prob"] = array_from_tensor(res.boundary_prob->value);
    return out;
  }

  void save(const std::string& path, int epoch, double beta, std::uint64_t seed) {
    CheckpointMeta meta;
    meta.epoch = epoch;
    meta.beta = beta;
    meta.seed = seed;
    save_checkpoint(*net_, meta, path);
  }

  std::int64_t parameter_count() const { return net_->parameter_count(); }
  const ModelConfig& config() const { return net_->config(); }
  UngapNet& net() { return *net_; }

 private:
  std::unique_ptr<UngapNet> net_;
};

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Uncertainty-guided crack segmentation core";

  py::register_exception<InvalidInputError>(m, "InvalidInputError", PyExc_ValueError);
  py::register_exception<InvalidConfigError>(m, "InvalidConfigError", PyExc_ValueError);
  py::register_exception<IoError>(m, "IoError", PyExc_OSError);
  py::register_exception<TrainingDivergedError>(m, "TrainingDivergedError", PyExc_RuntimeError);

  py::class_<ModelConfig>(m, "ModelConfig")
      .def(py::init<>())
      .def_readwrite("input_size", &ModelConfig::input_size)
      .def_readwrite("in_channels", &ModelConfig::in_channels)
      .def_readwrite("base_channels", &ModelConfig::base_channels)
      .def_readwrite("encoder_depth", &ModelConfig::encoder_depth)
      .def_readwrite("enable_hm", &ModelConfig::enable_hm)
      .def_readwrite("enable_upfm", &ModelConfig::enable_upfm)
      .def_readwrite("enable_bdh", &ModelConfig::enable_bdh)
      .def_readwrite("upfm_hidden_channels", &ModelConfig::upfm_hidden_channels)
      .def_readwrite("s_clamp_min", &ModelConfig::s_clamp_min)
      .def_readwrite("s_clamp_max", &ModelConfig::s_clamp_max)
      .def_static(
          "preset",
          [](const std::string& name, int input_size) {
            return ModelConfig::for_preset(preset_from_string(name), input_size);
          },
          py::arg("name"), py::arg("input_size") = 64);

  m.def(
      "standard_nll",
      [](py::array_t<double> y, py::array_t<double> y_hat, py::array_t<double> s) {
        PixelResidualBatch b{tensor_from_array(std::move(y)), tensor_from_array(std::move(y_hat)),
                             tensor_from_array(std::move(s))};
        return standard_nll(b);
      },
      py::arg("y"), py::arg("y_hat"), py::arg("s"));

  m.def(
      "beta_nll",
      [](py::array_t<double> y, py::array_t<double> y_hat, py::array_t<double> s, double beta) {
        PixelResidualBatch b{tensor_from_array(std::move(y)), tensor_from_array(std::move(y_hat)),
                             tensor_from_array(std::move(s))};
        BetaConfig cfg;
        cfg.beta = beta;
        return beta_nll(b, cfg);
      },
      py::arg("y"), py::arg("y_hat"), py::arg("s"), py::arg("beta") = 0.5);

  m.def(
      "beta_nll_grad",
      [](py::array_t<double> y, py::array_t<double> y_hat, py::array_t<double> s, double beta) {
        PixelResidualBatch b{tensor_from_array(std::move(y)), tensor_from_array(std::move(y_hat)),
                             tensor_from_array(std::move(s))};
        BetaConfig cfg;
        cfg.beta = beta;
        auto [gy, gs] = beta_nll_grad(b, cfg);
        return py::make_tuple(array_from_tensor(gy), array_from_tensor(gs));
      },
      py::arg("y"), py::arg("y_hat"), py::arg("s"), py::arg("beta") = 0.5);

  m.def("attenuation_ratio", &attenuation_ratio, py::arg("s"), py::arg("beta"));

  m.def(
      "dice_loss",
      [](py::array_t<double> pred, py::array_t<double> target, double eps) {
        return dice_loss(tensor_from_array(std::move(pred)), tensor_from_array(std::move(target)),
                         eps);
      },
      py::arg("pred"), py::arg("target"), py::arg("eps") = 1.0);

  m.def(
      "generate_scene",
      [](std::uint64_t seed, int size, double sigma_min, double sigma_max, int noise_regions) {
        GenConfig cfg;
        cfg.size = size;
        cfg.sigma_min = sigma_min;
        cfg.sigma_max = sigma_max;
        cfg.noise_regions = noise_regions;
        SyntheticScene scene = generate_scene(seed, cfg);
        py::dict out;
        out["image"] = array_from_tensor(scene.image);
        out["clean"] = array_from_tensor(scene.clean);
        out["mask"] = array_from_tensor(scene.mask);
        out["noise_sigma"] = array_from_tensor(scene.noise_sigma);
        out["seed"] = scene.seed;
        return out;
      },
      py::arg("seed"), py::arg("size") = 64, py::arg("sigma_min") = 0.0,
      py::arg("sigma_max") = 0.15, py::arg("noise_regions") = 2);

  m.def(
      "generate_dataset",
      [](const std::string& root, int n, std::uint64_t seed, int size) {
        GenConfig cfg;
        cfg.size = size;
        std::vector<SyntheticScene> scenes;
        scenes.reserve(n);
        for (int i = 0; i < n; ++i) {
          scenes.push_back(
              generate_scene(derive_seed(seed, 0xD5, static_cast<std::uint64_t>(i)), cfg));
        }
        export_scenes(root, scenes);
      },
      py::arg("root"), py::arg("n"), py::arg("seed") = 0, py::arg("size") = 64);

  m.def(
      "boundary_from_mask",
      [](py::array_t<double> mask, int width) {
        return array_from_tensor(boundary_from_mask(tensor_from_array(std::move(mask)), width));
      },
      py::arg("mask"), py::arg("width") = 2);

  m.def(
      "augment",
      [](py::array_t<double> image, py::array_t<double> mask, std::uint64_t seed,
         int train_size) {
        auto [img, msk] = augment(tensor_from_array(std::move(image)),
                                  tensor_from_array(std::move(mask)), seed, train_size);
        return py::make_tuple(array_from_tensor(img), array_from_tensor(msk));
      },
      py::arg("image"), py::arg("mask"), py::arg("seed"), py::arg("train_size"));

  m.def(
      "micro_metrics",
      [](const py::list& preds, const py::list& targets, double threshold) {
        MetricsReport r = micro_metrics(tensors_from_list(preds), tensors_from_list(targets),
                                        threshold);
        py::dict out;
        out["tp"] = r.tp;
        out["fp"] = r.fp;
        out["fn"] = r.fn;
        out["tn"] = r.tn;
        out["precision"] = r.precision;
        out["recall"] = r.recall;
        out["f1"] = r.f1;
        out["threshold"] = r.threshold;
        return out;
      },
      py::arg("preds"), py::arg("targets"), py::arg("threshold") = 0.5);

  m.def(
      "uncertainty_noise_correlation",
      [](const py::list& s_maps, const py::list& sigma_maps) {
        CorrelationResult r =
            uncertainty_noise_correlation(tensors_from_list(s_maps), tensors_from_list(sigma_maps));
        return py::make_tuple(r.rho, r.undefined);
      },
      py::arg("s_maps"), py::arg("sigma_maps"));

  m.def(
      "sparsification",
      [](const py::list& preds, const py::list& targets, const py::list& s_maps, int steps) {
        SparsificationCurve c = sparsification(tensors_from_list(preds),
                                               tensors_from_list(targets),
                                               tensors_from_list(s_maps), steps);
        return py::make_tuple(c.fractions_removed, c.residual_error);
      },
      py::arg("preds"), py::arg("targets"), py::arg("s_maps"), py::arg("steps") = 10);

  py::class_<Model>(m, "Model")
      .def(py::init<const ModelConfig&, std::uint64_t>(), py::arg("config"), py::arg("seed") = 0)
      .def("forward", &Model::forward, py::arg("image"))
      .def("save", &Model::save, py::arg("path"), py::arg("epoch") = 0, py::arg("beta") = 0.5,
           py::arg("seed") = 0)
      .def_property_readonly("parameter_count", &Model::parameter_count)
      .def_static("load", [](const std::string& path) {
        LoadedCheckpoint ckpt = load_checkpoint(path);
        return std::make_unique<Model>(std::move(ckpt.net));
      });

  m.def(
      "train_on_directory",
      [](Model& model, const std::string& data_dir, int epochs, int batch_size, double lr,
         double beta, std::uint64_t seed, const std::string& out_dir) {
        TrainConfig cfg;
        cfg.epochs = epochs;
        cfg.batch_size = batch_size;
        cfg.learning_rate = lr;
        cfg.beta = beta;
        cfg.seed = seed;
        cfg.train_size = model.config().input_size;
        cfg.out_dir = out_dir;
        RunLog log = train(model.net(), cfg, load_dataset(data_dir));
        py::list records;
        for (const auto& r : log.records) {
          py::dict rec;
          rec["epoch"] = r.epoch;
          rec["l_aleatory"] = r.l_aleatory;
          rec["l_boundary"] = r.l_boundary;
          rec["l_segmentation"] = r.l_segmentation;
          rec["l_final"] = r.l_final;
          rec["train_f1"] = r.train_f1;
          records.append(rec);
        }
        return records;
      },
      py::arg("model"), py::arg("data_dir"), py::arg("epochs") = 5, py::arg("batch_size") = 4,
      py::arg("lr") = 2e-4, py::arg("beta") = 0.5, py::arg("seed") = 0, py::arg("out_dir") = "");
}
