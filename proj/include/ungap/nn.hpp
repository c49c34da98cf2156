#pragma once

#include <random>
#include <string>
#include <vector>

#include "ungap/autodiff.hpp"

namespace ungap {

struct NamedParam {
    std::string name;
    VarPtr var;
};

// 2-D convolution layer owning its weight/bias leaves.
class Conv2dLayer {
  public:
    Conv2dLayer() = default;
    Conv2dLayer(int in_ch, int out_ch, int kernel, int stride, int pad, int groups = 1,
                bool bias = true);

    void init_he(std::mt19937_64& rng);  // He-normal weights, zero bias
    void init_zero();

    VarPtr forward(const VarPtr& x) const;

    void collect(const std::string& prefix, std::vector<NamedParam>& out);

    int in_ch() const { return in_ch_; }
    int out_ch() const { return out_ch_; }
    VarPtr weight, bias;

  private:
    int in_ch_ = 0, out_ch_ = 0, kernel_ = 0, stride_ = 1, pad_ = 0, groups_ = 1;
    bool has_bias_ = true;
};

// Depthwise 3x3 followed by pointwise 1x1 (Xception-style separable conv).
class SeparableConv2dLayer {
  public:
    SeparableConv2dLayer() = default;
    SeparableConv2dLayer(int in_ch, int out_ch, int stride);

    void init_he(std::mt19937_64& rng);
    VarPtr forward(const VarPtr& x) const;
    void collect(const std::string& prefix, std::vector<NamedParam>& out);

  private:
    Conv2dLayer depthwise_, pointwise_;
};

// Adam with bias-corrected moment estimates.
class AdamOptimizer {
  public:
    AdamOptimizer(std::vector<VarPtr> params, double lr, double beta1 = 0.9,
                  double beta2 = 0.999, double eps = 1e-8);
    void step();
    void zero_grad();
    double lr;

  private:
    std::vector<VarPtr> params_;
    std::vector<Tensor> m_, v_;
    double beta1_, beta2_, eps_;
    std::int64_t t_ = 0;
};

}  // namespace ungap
