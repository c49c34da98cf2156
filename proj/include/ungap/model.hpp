#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ungap/nn.hpp"

namespace ungap {

enum class Preset { tiny, xception_like };
enum class UpfmInput { log_variance, variance };

std::string to_string(Preset p);
std::string to_string(UpfmInput u);
Preset preset_from_string(const std::string& s);
UpfmInput upfm_input_from_string(const std::string& s);

struct ModelConfig {
    int input_size = 400;
    int in_channels = 3;
    int base_channels = 8;
    int encoder_depth = 3;  // number of stride-2 stages
    Preset preset = Preset::tiny;
    bool enable_hm = true;
    bool enable_upfm = true;
    bool enable_bdh = true;
    int upfm_hidden_channels = 16;
    UpfmInput upfm_input = UpfmInput::log_variance;
    double s_clamp_min = -7.0;
    double s_clamp_max = 7.0;

    static ModelConfig for_preset(Preset p, int input_size);
    void validate() const;
    bool same_architecture(const ModelConfig& o, std::string* first_mismatch = nullptr) const;
};

// All graph nodes produced by one forward pass. Maps for disabled modules are
// null: with every flag off only seg_prob / seg_logits / f_in / f_refined
// exist (and f_refined aliases f_in).
struct ForwardResult {
    VarPtr y_hat_aux;       // HM auxiliary probability
    VarPtr s;               // clamped log-variance map
    VarPtr gamma, omega;    // UPFM modulation parameters
    VarPtr f_in, f_refined; // decoder feature stream before/after modulation
    VarPtr boundary_logits, boundary_prob;
    VarPtr seg_logits, seg_prob;
};

// Encoder-decoder segmentation network with the Heteroscedastic Module,
// the uncertainty-driven affine feature modulator and the dual-branch
// boundary-aware head, each behind its ablation flag.
class UngapNet {
  public:
    UngapNet(const ModelConfig& cfg, std::uint64_t seed);

    const ModelConfig& config() const { return cfg_; }

    // Full pipeline. `image` is (N, in_channels, input_size, input_size).
    ForwardResult forward(const Tensor& image);

    // Component entry points (each stage is individually testable).
    std::vector<VarPtr> encode(const VarPtr& image) const;
    VarPtr decode(const std::vector<VarPtr>& features) const;
    std::pair<VarPtr, VarPtr> heteroscedastic_head(const VarPtr& f_in) const;  // (y_hat_aux, s)
    std::pair<VarPtr, VarPtr> upfm_generate(const VarPtr& h) const;            // (gamma, omega)
    static VarPtr upfm_modulate(const VarPtr& f_in, const VarPtr& gamma, const VarPtr& omega);
    // (boundary_logits, seg_branch_logits, fused_logits); first two are null
    // when the dual-branch head is disabled.
    std::tuple<VarPtr, VarPtr, VarPtr> boundary_head(const VarPtr& f_refined) const;

    std::vector<NamedParam>& parameters() { return params_; }
    const std::vector<NamedParam>& parameters() const { return params_; }
    std::int64_t parameter_count() const;
    void zero_grad();
    void zero_all_parameters();  // test helper: neutral network

  private:
    VarPtr conv_block(int stage, const VarPtr& x, bool strided) const;

    ModelConfig cfg_;
    // encoder: per stage an intra-stage conv and a strided conv (regular or
    // separable depending on preset)
    Conv2dLayer stem_;
    std::vector<Conv2dLayer> enc_same_, enc_down_;
    std::vector<SeparableConv2dLayer> enc_same_sep_, enc_down_sep_;
    // decoder: per up-level two 1x1 convs around the pool/relu
    std::vector<Conv2dLayer> dec_a_, dec_b_;
    Conv2dLayer hm_aux_, hm_s_;
    Conv2dLayer upfm_fc1_, upfm_fc2_;
    Conv2dLayer bnd_conv1_, bnd_conv2_;  // boundary branch
    Conv2dLayer seg_conv1_, seg_conv2_;  // segmentation branch (or single head)
    std::vector<NamedParam> params_;
};

}  // namespace ungap
