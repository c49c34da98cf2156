#pragma once

#include <utility>

#include "ungap/autodiff.hpp"
#include "ungap/tensor.hpp"

namespace ungap {

// Weights of the final loss combination
//   L_final = w1 * L_aleatory + w2 * L_boundary + w3 * L_segmentation
struct LossWeights {
    double w1 = 0.87;   // aleatoric
    double w2 = 0.13;   // boundary
    double w3 = 0.001;  // segmentation
    void validate() const;
};

// beta-NLL hyperparameters. s = log(sigma^2) is clamped to [s_clamp_min,
// s_clamp_max] before exponentiation so sigma^2 stays in a safe range.
struct BetaConfig {
    double beta = 0.5;
    double s_clamp_min = -7.0;
    double s_clamp_max = 7.0;
    void validate() const;
};

// One batch of per-pixel residual inputs: binary labels y, predicted
// probabilities y_hat, predicted log-variance s. Grids are (N,C,H,W) with
// identical shapes; the per-image pixel count is C*H*W.
struct PixelResidualBatch {
    Tensor y;
    Tensor y_hat;
    Tensor s;
    int images() const { return y.n; }
    std::int64_t pixels_per_image() const {
        return static_cast<std::int64_t>(y.c) * y.h * y.w;
    }
    void validate() const;
};

// Gaussian NLL without its constant term, averaged over all N*P pixels:
//   mean( 0.5 * exp(-s) * (y - y_hat)^2 + 0.5 * s )
double standard_nll(const PixelResidualBatch& batch);

// beta-NLL: each pixel's NLL term is scaled by the stop-gradient weight
// exp(beta * s). At beta = 0 this equals standard_nll exactly.
double beta_nll(const PixelResidualBatch& batch, const BetaConfig& cfg);

// Analytic gradients of beta_nll w.r.t. y_hat and s. These are the reference
// oracle the autodiff engine is checked against:
//   d/dy_hat = exp((beta-1)*s) * (y_hat - y) / (N*P)
//   d/ds     = exp(beta*s) * 0.5 * (1 - exp(-s) * (y - y_hat)^2) / (N*P)
std::pair<Tensor, Tensor> beta_nll_grad(const PixelResidualBatch& batch, const BetaConfig& cfg);

// Per-pixel stop-gradient weights exp(beta * clamp(s)) at the batch's state.
Tensor beta_nll_weights(const PixelResidualBatch& batch, const BetaConfig& cfg);

// beta_nll with the reweighting factor pinned to `w` instead of following s.
// Differentiating this function at w = beta_nll_weights(batch) is what the
// analytic gradients (and the autodiff graph, via its stop-gradient node)
// compute, so finite differences must probe this frozen-weight form.
double beta_nll_weighted(const PixelResidualBatch& batch, const BetaConfig& cfg,
                         const Tensor& w);

// Factor exp((beta-1)*s) scaling the prediction gradient at log-variance s
// relative to an s = 0 pixel. Diagnostic only.
double attenuation_ratio(double s, double beta);

// 1 - (2*sum(pred*target) + eps) / (sum(pred) + sum(target) + eps)
double dice_loss(const Tensor& pred, const Tensor& target, double eps = 1.0);

double total_loss(double aleatoric, double boundary, double segmentation, const LossWeights& w);

// ---- autodiff builders (same math, graph-valued; used by training) ----

// y_hat and s are graph nodes; y is a constant label grid.
VarPtr beta_nll_var(const VarPtr& y_hat, const VarPtr& s, const Tensor& y,
                    const BetaConfig& cfg);
VarPtr dice_loss_var(const VarPtr& pred, const Tensor& target, double eps = 1.0);
// Null terms are skipped (treated as absent, not zero-weighted).
VarPtr total_loss_var(const VarPtr& aleatoric, const VarPtr& boundary,
                      const VarPtr& segmentation, const LossWeights& w);

}  // namespace ungap
