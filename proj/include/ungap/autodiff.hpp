#pragma once

#include <functional>
#include <memory>
#include <vector>

#include "ungap/tensor.hpp"

namespace ungap {

// Reverse-mode autodiff over Tensor-valued nodes. Each op builds a node that
// remembers its parents and a closure that scatters the node's gradient back
// into them. Graphs are rebuilt per forward pass; parameters are leaves that
// outlive the graph.
struct Var;
using VarPtr = std::shared_ptr<Var>;

struct Var {
    Tensor value;
    Tensor grad;  // allocated lazily on first accumulation
    bool requires_grad = false;
    std::vector<VarPtr> parents;
    std::function<void(Var&)> backward_fn;

    Tensor& ensure_grad() {
        if (grad.numel() == 0) grad = Tensor::zeros_like(value);
        return grad;
    }
    void zero_grad() {
        if (grad.numel() != 0) std::fill(grad.data.begin(), grad.data.end(), 0.0);
    }
};

VarPtr make_leaf(Tensor value, bool requires_grad = false);
VarPtr make_constant(Tensor value);

// Runs reverse accumulation from a scalar root (numel must be 1).
void backward(const VarPtr& root);

// ---- elementwise ----
VarPtr add(const VarPtr& a, const VarPtr& b);
VarPtr sub(const VarPtr& a, const VarPtr& b);
VarPtr mul(const VarPtr& a, const VarPtr& b);
VarPtr div(const VarPtr& a, const VarPtr& b);
VarPtr add_scalar(const VarPtr& a, double s);
VarPtr mul_scalar(const VarPtr& a, double s);
VarPtr vexp(const VarPtr& a);
VarPtr relu(const VarPtr& a);
VarPtr sigmoid(const VarPtr& a);
// Gradient passes where lo <= x <= hi, zero where clipped.
VarPtr clamp(const VarPtr& a, double lo, double hi);
// Value passes through; gradient does not (treated as a constant).
VarPtr stop_gradient(const VarPtr& a);

// ---- reductions ----
VarPtr sum_all(const VarPtr& a);   // -> scalar var
VarPtr mean_all(const VarPtr& a);  // -> scalar var

// ---- structural ----
VarPtr concat_channels(const VarPtr& a, const VarPtr& b);
VarPtr slice_channels(const VarPtr& a, int c0, int c1);  // [c0, c1)

// ---- spatial ----
// x: (N,Cin,H,W); weight: (Cout, Cin/groups, k, k); bias: (1,Cout,1,1) or null.
VarPtr conv2d(const VarPtr& x, const VarPtr& weight, const VarPtr& bias, int stride, int pad,
              int groups = 1);
VarPtr maxpool2d(const VarPtr& x, int kernel, int stride, int pad);
// Factor-2 bilinear upsampling, half-pixel centers (align_corners=false).
VarPtr upsample_bilinear_2x(const VarPtr& x);

}  // namespace ungap
