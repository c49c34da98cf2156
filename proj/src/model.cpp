#include "ungap/model.hpp"

#include <cmath>
#include <tuple>

#include "ungap/errors.hpp"
#include "ungap/random.hpp"

namespace ungap {

std::string to_string(Preset p) { return p == Preset::tiny ? "tiny" : "xception_like"; }

std::string to_string(UpfmInput u) {
    return u == UpfmInput::log_variance ? "log_variance" : "variance";
}

Preset preset_from_string(const std::string& s) {
    if (s == "tiny") return Preset::tiny;
    if (s == "xception_like") return Preset::xception_like;
    throw InvalidConfigError("unknown preset '" + s + "' (expected tiny|xception_like)");
}

UpfmInput upfm_input_from_string(const std::string& s) {
    if (s == "log_variance") return UpfmInput::log_variance;
    if (s == "variance") return UpfmInput::variance;
    throw InvalidConfigError("unknown upfm_input '" + s +
                             "' (expected log_variance|variance)");
}

ModelConfig ModelConfig::for_preset(Preset p, int input_size) {
    ModelConfig cfg;
    cfg.preset = p;
    cfg.input_size = input_size;
    if (p == Preset::tiny) {
        cfg.base_channels = 8;
        cfg.encoder_depth = 3;
        cfg.upfm_hidden_channels = 16;
    } else {
        cfg.base_channels = 16;
        cfg.encoder_depth = 5;
        cfg.upfm_hidden_channels = 16;
    }
    return cfg;
}

void ModelConfig::validate() const {
    if (input_size <= 0) throw InvalidConfigError("ModelConfig: input_size must be > 0");
    if (in_channels <= 0) throw InvalidConfigError("ModelConfig: in_channels must be > 0");
    if (base_channels <= 0) throw InvalidConfigError("ModelConfig: base_channels must be > 0");
    if (encoder_depth < 1) throw InvalidConfigError("ModelConfig: encoder_depth must be >= 1");
    if (upfm_hidden_channels <= 0)
        throw InvalidConfigError("ModelConfig: upfm_hidden_channels must be > 0");
    if (input_size % (1 << encoder_depth) != 0)
        throw InvalidConfigError("ModelConfig: input_size " + std::to_string(input_size) +
                                 " not divisible by 2^encoder_depth = " +
                                 std::to_string(1 << encoder_depth));
    if (enable_upfm && !enable_hm)
        throw InvalidConfigError("ModelConfig: enable_upfm requires enable_hm");
    if (!(s_clamp_min < s_clamp_max))
        throw InvalidConfigError("ModelConfig: s_clamp_min must be < s_clamp_max");
}

bool ModelConfig::same_architecture(const ModelConfig& o, std::string* first_mismatch) const {
    auto fail = [&](const char* field) {
        if (first_mismatch) *first_mismatch = field;
        return false;
    };
    if (input_size != o.input_size) return fail("input_size");
    if (in_channels != o.in_channels) return fail("in_channels");
    if (base_channels != o.base_channels) return fail("base_channels");
    if (encoder_depth != o.encoder_depth) return fail("encoder_depth");
    if (preset != o.preset) return fail("preset");
    if (enable_hm != o.enable_hm) return fail("enable_hm");
    if (enable_upfm != o.enable_upfm) return fail("enable_upfm");
    if (enable_bdh != o.enable_bdh) return fail("enable_bdh");
    if (upfm_hidden_channels != o.upfm_hidden_channels) return fail("upfm_hidden_channels");
    if (upfm_input != o.upfm_input) return fail("upfm_input");
    return true;
}

UngapNet::UngapNet(const ModelConfig& cfg, std::uint64_t seed) : cfg_(cfg) {
    cfg_.validate();
    auto rng = make_rng(derive_seed(seed, 0xFE47));
    const bool sep = cfg_.preset == Preset::xception_like;
    const int C = cfg_.base_channels;

    stem_ = Conv2dLayer(cfg_.in_channels, C, 3, 1, 1);
    stem_.init_he(rng);
    stem_.collect("encoder.stem", params_);

    int ch = C;
    for (int d = 0; d < cfg_.encoder_depth; ++d) {
        const std::string pfx = "encoder.stage" + std::to_string(d);
        if (sep) {
            enc_same_sep_.emplace_back(ch, ch, 1);
            enc_same_sep_.back().init_he(rng);
            enc_same_sep_.back().collect(pfx + ".same", params_);
            enc_down_sep_.emplace_back(ch, ch * 2, 2);
            enc_down_sep_.back().init_he(rng);
            enc_down_sep_.back().collect(pfx + ".down", params_);
        } else {
            enc_same_.emplace_back(ch, ch, 3, 1, 1);
            enc_same_.back().init_he(rng);
            enc_same_.back().collect(pfx + ".same", params_);
            enc_down_.emplace_back(ch, ch * 2, 3, 2, 1);
            enc_down_.back().init_he(rng);
            enc_down_.back().collect(pfx + ".down", params_);
        }
        ch *= 2;
    }

    // Deconvolution path: bilinear 2x + skip concat feeding the block
    // conv1x1 -> maxpool(3, stride 1) -> relu -> conv1x1.
    for (int d = cfg_.encoder_depth - 1; d >= 0; --d) {
        const int skip_ch = C << d;       // channels of encoder level d
        const int in_ch = (C << (d + 1)) + skip_ch;
        const std::string pfx = "decoder.up" + std::to_string(d);
        dec_a_.emplace_back(in_ch, skip_ch, 1, 1, 0);
        dec_a_.back().init_he(rng);
        dec_a_.back().collect(pfx + ".conv_a", params_);
        dec_b_.emplace_back(skip_ch, skip_ch, 1, 1, 0);
        dec_b_.back().init_he(rng);
        dec_b_.back().collect(pfx + ".conv_b", params_);
    }

    if (cfg_.enable_hm) {
        hm_aux_ = Conv2dLayer(C, 1, 1, 1, 0);
        hm_aux_.init_he(rng);
        hm_aux_.collect("hm.aux", params_);
        hm_s_ = Conv2dLayer(C, 1, 1, 1, 0);
        hm_s_.init_he(rng);
        hm_s_.collect("hm.s", params_);
    }
    if (cfg_.enable_upfm) {
        upfm_fc1_ = Conv2dLayer(1, cfg_.upfm_hidden_channels, 1, 1, 0);
        upfm_fc1_.init_he(rng);
        upfm_fc1_.collect("upfm.fc1", params_);
        upfm_fc2_ = Conv2dLayer(cfg_.upfm_hidden_channels, 2 * C, 1, 1, 0);
        upfm_fc2_.init_zero();  // identity modulation at start
        upfm_fc2_.collect("upfm.fc2", params_);
    }
    if (cfg_.enable_bdh) {
        bnd_conv1_ = Conv2dLayer(C, C, 3, 1, 1);
        bnd_conv1_.init_he(rng);
        bnd_conv1_.collect("bdh.boundary.conv1", params_);
        bnd_conv2_ = Conv2dLayer(C, 1, 3, 1, 1);
        bnd_conv2_.init_zero();
        bnd_conv2_.collect("bdh.boundary.conv2", params_);
        seg_conv1_ = Conv2dLayer(C, C, 3, 1, 1);
        seg_conv1_.init_he(rng);
        seg_conv1_.collect("bdh.seg.conv1", params_);
        seg_conv2_ = Conv2dLayer(C, 1, 3, 1, 1);
        seg_conv2_.init_zero();
        seg_conv2_.collect("bdh.seg.conv2", params_);
    } else {
        seg_conv1_ = Conv2dLayer(C, C, 3, 1, 1);
        seg_conv1_.init_he(rng);
        seg_conv1_.collect("head.conv1", params_);
        seg_conv2_ = Conv2dLayer(C, 1, 3, 1, 1);
        seg_conv2_.init_zero();
        seg_conv2_.collect("head.conv2", params_);
    }
}

std::vector<VarPtr> UngapNet::encode(const VarPtr& image) const {
    const Tensor& im = image->value;
    if (im.c != cfg_.in_channels)
        throw InvalidInputError("encode: expected " + std::to_string(cfg_.in_channels) +
                                " channels, got " + std::to_string(im.c));
    if (im.h != cfg_.input_size || im.w != cfg_.input_size)
        throw InvalidInputError("encode: image is " + std::to_string(im.h) + "x" +
                                std::to_string(im.w) + ", configured input_size is " +
                                std::to_string(cfg_.input_size));
    if (im.h % (1 << cfg_.encoder_depth) != 0)
        throw InvalidInputError("encode: size not divisible by 2^encoder_depth");
    const bool sep = cfg_.preset == Preset::xception_like;
    std::vector<VarPtr> feats;
    VarPtr x = relu(stem_.forward(image));
    feats.push_back(x);
    for (int d = 0; d < cfg_.encoder_depth; ++d) {
        x = sep ? relu(enc_same_sep_[d].forward(x)) : relu(enc_same_[d].forward(x));
        x = sep ? relu(enc_down_sep_[d].forward(x)) : relu(enc_down_[d].forward(x));
        feats.push_back(x);
    }
    return feats;
}

VarPtr UngapNet::decode(const std::vector<VarPtr>& features) const {
    if (static_cast<int>(features.size()) != cfg_.encoder_depth + 1)
        throw InvalidInputError("decode: expected " + std::to_string(cfg_.encoder_depth + 1) +
                                " feature levels, got " + std::to_string(features.size()));
    VarPtr x = features.back();
    for (int i = 0; i < cfg_.encoder_depth; ++i) {
        const int level = cfg_.encoder_depth - 1 - i;
        x = upsample_bilinear_2x(x);
        x = concat_channels(x, features[level]);
        x = dec_a_[i].forward(x);
        x = maxpool2d(x, 3, 1, 1);
        x = relu(x);
        x = dec_b_[i].forward(x);
    }
    return x;
}

std::pair<VarPtr, VarPtr> UngapNet::heteroscedastic_head(const VarPtr& f_in) const {
    if (!cfg_.enable_hm)
        throw InvalidConfigError("heteroscedastic_head called with enable_hm=false");
    VarPtr y_hat_aux = sigmoid(hm_aux_.forward(f_in));
    VarPtr s = clamp(hm_s_.forward(f_in), cfg_.s_clamp_min, cfg_.s_clamp_max);
    return {y_hat_aux, s};
}

std::pair<VarPtr, VarPtr> UngapNet::upfm_generate(const VarPtr& h) const {
    if (!cfg_.enable_upfm)
        throw InvalidConfigError("upfm_generate called with enable_upfm=false");
    if (h->value.c != 1)
        throw InvalidInputError("upfm_generate: h must have 1 channel, got " +
                                std::to_string(h->value.c));
    VarPtr mid = relu(upfm_fc1_.forward(h));
    VarPtr both = upfm_fc2_.forward(mid);
    const int C = cfg_.base_channels;
    return {slice_channels(both, 0, C), slice_channels(both, C, 2 * C)};
}

VarPtr UngapNet::upfm_modulate(const VarPtr& f_in, const VarPtr& gamma, const VarPtr& omega) {
    require_same_shape(f_in->value, gamma->value, "upfm_modulate f_in/gamma");
    require_same_shape(f_in->value, omega->value, "upfm_modulate f_in/omega");
    // F_refined = F_in (x) (1 + gamma) + omega
    return add(mul(f_in, add_scalar(gamma, 1.0)), omega);
}

std::tuple<VarPtr, VarPtr, VarPtr> UngapNet::boundary_head(const VarPtr& f_refined) const {
    VarPtr seg = seg_conv2_.forward(relu(seg_conv1_.forward(f_refined)));
    if (!cfg_.enable_bdh) return {nullptr, nullptr, seg};
    VarPtr bnd = bnd_conv2_.forward(relu(bnd_conv1_.forward(f_refined)));
    return {bnd, seg, add(bnd, seg)};
}

ForwardResult UngapNet::forward(const Tensor& image) {
    ForwardResult out;
    VarPtr x = make_constant(image);
    auto feats = encode(x);
    out.f_in = decode(feats);
    VarPtr f = out.f_in;
    if (cfg_.enable_hm) {
        auto [aux, s] = heteroscedastic_head(out.f_in);
        out.y_hat_aux = aux;
        out.s = s;
        if (cfg_.enable_upfm) {
            // Gradients flow through h: the segmentation loss reaches the
            // s-head via this path (closed loop).
            VarPtr h = cfg_.upfm_input == UpfmInput::log_variance ? s : vexp(s);
            auto [gamma, omega] = upfm_generate(h);
            out.gamma = gamma;
            out.omega = omega;
            f = upfm_modulate(out.f_in, gamma, omega);
        }
    }
    out.f_refined = f;
    auto [bnd_logits, seg_branch, fused] = boundary_head(f);
    out.seg_logits = fused;
    out.seg_prob = sigmoid(fused);
    if (cfg_.enable_bdh) {
        out.boundary_logits = bnd_logits;
        out.boundary_prob = sigmoid(bnd_logits);
    }
    return out;
}

std::int64_t UngapNet::parameter_count() const {
    std::int64_t n = 0;
    for (const auto& p : params_) n += p.var->value.numel();
    return n;
}

void UngapNet::zero_grad() {
    for (auto& p : params_) p.var->zero_grad();
}

void UngapNet::zero_all_parameters() {
    for (auto& p : params_)
        std::fill(p.var->value.data.begin(), p.var->value.data.end(), 0.0);
}

}  // namespace ungap
