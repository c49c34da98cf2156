#include "ungap/checkpoint.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>
#include <vector>

#include <nlohmann/json.hpp>

#include "ungap/errors.hpp"

namespace ungap {
namespace {

constexpr char kMagic[8] = {'U', 'N', 'G', 'A', 'P', 'C', 'K', '1'};

nlohmann::json config_to_json(const ModelConfig& c) {
  return {
      {"input_size", c.input_size},
      {"in_channels", c.in_channels},
      {"base_channels", c.base_channels},
      {"encoder_depth", c.encoder_depth},
      {"preset", to_string(c.preset)},
      {"enable_hm", c.enable_hm},
      {"enable_upfm", c.enable_upfm},
      {"enable_bdh", c.enable_bdh},
      {"upfm_hidden_channels", c.upfm_hidden_channels},
      {"upfm_input", to_string(c.upfm_input)},
      {"s_clamp_min", c.s_clamp_min},
      {"s_clamp_max", c.s_clamp_max},
  };
}

ModelConfig config_from_json(const nlohmann::json& j) {
  ModelConfig c;
  c.input_size = j.at("input_size").get<int>();
  c.in_channels = j.at("in_channels").get<int>();
  c.base_channels = j.at("base_channels").get<int>();
  c.encoder_depth = j.at("encoder_depth").get<int>();
  c.preset = preset_from_string(j.at("preset").get<std::string>());
  c.enable_hm = j.at("enable_hm").get<bool>();
  c.enable_upfm = j.at("enable_upfm").get<bool>();
  c.enable_bdh = j.at("enable_bdh").get<bool>();
  c.upfm_hidden_channels = j.at("upfm_hidden_channels").get<int>();
  c.upfm_input = upfm_input_from_string(j.at("upfm_input").get<std::string>());
  c.s_clamp_min = j.at("s_clamp_min").get<double>();
  c.s_clamp_max = j.at("s_clamp_max").get<double>();
  return c;
}

template <typename T>
void write_pod(std::ofstream& out, const T& v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_pod(std::ifstream& in, const std::string& path) {
  T v;
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) throw IoError("truncated checkpoint: " + path);
  return v;
}

void load_blob_into(UngapNet& net, const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint: " + path);
  char magic[8];
  in.read(magic, 8);
  if (!in || std::memcmp(magic, kMagic, 8) != 0) {
    throw IoError("not a checkpoint file (bad magic): " + path);
  }
  auto count = read_pod<std::uint32_t>(in, path);
  auto& params = net.parameters();
  if (count != params.size()) {
    throw IoError("checkpoint holds " + std::to_string(count) + " tensors but model has " +
                  std::to_string(params.size()));
  }
  for (auto& p : params) {
    auto name_len = read_pod<std::uint32_t>(in, path);
    std::string name(name_len, '\0');
    in.read(name.data(), name_len);
    if (!in) throw IoError("truncated checkpoint: " + path);
    if (name != p.name) {
      throw IoError("checkpoint tensor '" + name + "' does not match model parameter '" +
                    p.name + "'");
    }
    int dims[4];
    in.read(reinterpret_cast<char*>(dims), sizeof(dims));
    if (!in) throw IoError("truncated checkpoint: " + path);
    Tensor& value = p.var->value;
    if (dims[0] != value.n || dims[1] != value.c || dims[2] != value.h || dims[3] != value.w) {
      throw IoError("checkpoint tensor '" + name + "' has mismatched shape");
    }
    in.read(reinterpret_cast<char*>(value.data.data()),
            static_cast<std::streamsize>(value.data.size() * sizeof(double)));
    if (!in) throw IoError("truncated checkpoint: " + path);
  }
}

}  // namespace

void save_checkpoint(const UngapNet& net, const CheckpointMeta& meta, const std::string& path) {
  {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write checkpoint: " + path);
    out.write(kMagic, 8);
    const auto& params = net.parameters();
    write_pod(out, static_cast<std::uint32_t>(params.size()));
    for (const auto& p : params) {
      const Tensor& value = p.var->value;
      write_pod(out, static_cast<std::uint32_t>(p.name.size()));
      out.write(p.name.data(), static_cast<std::streamsize>(p.name.size()));
      int dims[4] = {value.n, value.c, value.h, value.w};
      out.write(reinterpret_cast<const char*>(dims), sizeof(dims));
      out.write(reinterpret_cast<const char*>(value.data.data()),
                static_cast<std::streamsize>(value.data.size() * sizeof(double)));
    }
    if (!out) throw IoError("write failed for checkpoint: " + path);
  }

  nlohmann::json side = {
      {"model_config", config_to_json(net.config())},
      {"epoch", meta.epoch},
      {"loss_weights", {{"w1", meta.loss_weights.w1},
                        {"w2", meta.loss_weights.w2},
                        {"w3", meta.loss_weights.w3}}},
      {"beta", meta.beta},
      {"seed", meta.seed},
  };
  std::ofstream out(path + ".json");
  if (!out) throw IoError("cannot write checkpoint sidecar: " + path + ".json");
  out << side.dump(2) << "\n";
}

LoadedCheckpoint load_checkpoint(const std::string& path) {
  std::ifstream side_in(path + ".json");
  if (!side_in) throw IoError("missing checkpoint sidecar: " + path + ".json");
  nlohmann::json side;
  try {
    side_in >> side;
  } catch (const nlohmann::json::exception& e) {
    throw IoError("corrupt checkpoint sidecar " + path + ".json: " + e.what());
  }

  LoadedCheckpoint loaded;
  try {
    loaded.config = config_from_json(side.at("model_config"));
    loaded.meta.epoch = side.at("epoch").get<int>();
    loaded.meta.loss_weights.w1 = side.at("loss_weights").at("w1").get<double>();
    loaded.meta.loss_weights.w2 = side.at("loss_weights").at("w2").get<double>();
    loaded.meta.loss_weights.w3 = side.at("loss_weights").at("w3").get<double>();
    loaded.meta.beta = side.at("beta").get<double>();
    loaded.meta.seed = side.at("seed").get<std::uint64_t>();
  } catch (const nlohmann::json::exception& e) {
    throw IoError("checkpoint sidecar missing fields in " + path + ".json: " + e.what());
  }

  loaded.net = std::make_unique<UngapNet>(loaded.config, loaded.meta.seed);
  load_blob_into(*loaded.net, path);
  return loaded;
}

CheckpointMeta load_checkpoint_into(UngapNet& net, const std::string& path) {
  LoadedCheckpoint loaded = load_checkpoint(path);
  std::string mismatch;
  if (!net.config().same_architecture(loaded.config, &mismatch)) {
    throw InvalidConfigError("checkpoint model_config mismatch on field '" + mismatch + "'");
  }
  auto& dst = net.parameters();
  auto& src = loaded.net->parameters();
  for (size_t i = 0; i < dst.size(); ++i) {
    dst[i].var->value = src[i].var->value;
  }
  return loaded.meta;
}

}  // namespace ungap
