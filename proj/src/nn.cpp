#include "ungap/nn.hpp"

#include <cmath>

#include "ungap/errors.hpp"

namespace ungap {

Conv2dLayer::Conv2dLayer(int in_ch, int out_ch, int kernel, int stride, int pad, int groups,
                         bool bias_flag)
    : in_ch_(in_ch), out_ch_(out_ch), kernel_(kernel), stride_(stride), pad_(pad),
      groups_(groups), has_bias_(bias_flag) {
    if (in_ch % groups != 0 || out_ch % groups != 0)
        throw InvalidConfigError("Conv2dLayer: channels not divisible by groups");
    weight = make_leaf(Tensor(out_ch, in_ch / groups, kernel, kernel), true);
    if (has_bias_) bias = make_leaf(Tensor(1, out_ch, 1, 1), true);
}

void Conv2dLayer::init_he(std::mt19937_64& rng) {
    const int fan_in = (in_ch_ / groups_) * kernel_ * kernel_;
    const double std = std::sqrt(2.0 / fan_in);
    std::normal_distribution<double> d(0.0, std);
    for (double& v : weight->value.data) v = d(rng);
    if (bias) std::fill(bias->value.data.begin(), bias->value.data.end(), 0.0);
}

void Conv2dLayer::init_zero() {
    std::fill(weight->value.data.begin(), weight->value.data.end(), 0.0);
    if (bias) std::fill(bias->value.data.begin(), bias->value.data.end(), 0.0);
}

VarPtr Conv2dLayer::forward(const VarPtr& x) const {
    return conv2d(x, weight, bias, stride_, pad_, groups_);
}

void Conv2dLayer::collect(const std::string& prefix, std::vector<NamedParam>& out) {
    out.push_back({prefix + ".weight", weight});
    if (bias) out.push_back({prefix + ".bias", bias});
}

SeparableConv2dLayer::SeparableConv2dLayer(int in_ch, int out_ch, int stride)
    : depthwise_(in_ch, in_ch, 3, stride, 1, in_ch, false),
      pointwise_(in_ch, out_ch, 1, 1, 0, 1, true) {}

void SeparableConv2dLayer::init_he(std::mt19937_64& rng) {
    depthwise_.init_he(rng);
    pointwise_.init_he(rng);
}

VarPtr SeparableConv2dLayer::forward(const VarPtr& x) const {
    return pointwise_.forward(depthwise_.forward(x));
}

void SeparableConv2dLayer::collect(const std::string& prefix, std::vector<NamedParam>& out) {
    depthwise_.collect(prefix + ".dw", out);
    pointwise_.collect(prefix + ".pw", out);
}

AdamOptimizer::AdamOptimizer(std::vector<VarPtr> params, double lr_, double beta1, double beta2,
                             double eps)
    : lr(lr_), params_(std::move(params)), beta1_(beta1), beta2_(beta2), eps_(eps) {
    for (const auto& p : params_) {
        m_.push_back(Tensor::zeros_like(p->value));
        v_.push_back(Tensor::zeros_like(p->value));
    }
}

void AdamOptimizer::step() {
    ++t_;
    const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    for (std::size_t pi = 0; pi < params_.size(); ++pi) {
        Var& p = *params_[pi];
        if (p.grad.numel() == 0) continue;  // untouched this step
        Tensor& m = m_[pi];
        Tensor& v = v_[pi];
        for (std::int64_t i = 0; i < p.value.numel(); ++i) {
            const double g = p.grad.data[i];
            m.data[i] = beta1_ * m.data[i] + (1.0 - beta1_) * g;
            v.data[i] = beta2_ * v.data[i] + (1.0 - beta2_) * g * g;
            const double mhat = m.data[i] / bc1;
            const double vhat = v.data[i] / bc2;
            p.value.data[i] -= lr * mhat / (std::sqrt(vhat) + eps_);
        }
    }
}

void AdamOptimizer::zero_grad() {
    for (auto& p : params_) p->zero_grad();
}

}  // namespace ungap
