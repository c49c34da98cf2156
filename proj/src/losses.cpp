#include "ungap/losses.hpp"

#include <cmath>
#include <string>

#include "ungap/errors.hpp"

namespace ungap {

void LossWeights::validate() const {
    if (w1 < 0.0 || w2 < 0.0 || w3 < 0.0)
        throw InvalidConfigError("LossWeights: weights must be >= 0, got (" +
                                 std::to_string(w1) + ", " + std::to_string(w2) + ", " +
                                 std::to_string(w3) + ")");
}

void BetaConfig::validate() const {
    if (beta < 0.0 || beta > 1.0)
        throw InvalidConfigError("BetaConfig: beta must be in [0,1], got " +
                                 std::to_string(beta));
    if (!(s_clamp_min < s_clamp_max))
        throw InvalidConfigError("BetaConfig: s_clamp_min must be < s_clamp_max");
}

void PixelResidualBatch::validate() const {
    require_same_shape(y, y_hat, "PixelResidualBatch y/y_hat");
    require_same_shape(y, s, "PixelResidualBatch y/s");
    if (y.numel() == 0) throw InvalidInputError("PixelResidualBatch: empty batch");
    for (double v : y.data)
        if (v != 0.0 && v != 1.0)
            throw InvalidInputError("PixelResidualBatch: y must be binary");
    for (double v : y_hat.data)
        if (v < 0.0 || v > 1.0)
            throw InvalidInputError("PixelResidualBatch: y_hat must be in [0,1]");
}

double standard_nll(const PixelResidualBatch& batch) {
    batch.validate();
    double acc = 0.0;
    for (std::int64_t i = 0; i < batch.y.numel(); ++i) {
        const double r = batch.y.data[i] - batch.y_hat.data[i];
        const double s = batch.s.data[i];
        acc += 0.5 * std::exp(-s) * r * r + 0.5 * s;
    }
    return acc / static_cast<double>(batch.y.numel());
}

double beta_nll(const PixelResidualBatch& batch, const BetaConfig& cfg) {
    batch.validate();
    cfg.validate();
    double acc = 0.0;
    for (std::int64_t i = 0; i < batch.y.numel(); ++i) {
        const double r = batch.y.data[i] - batch.y_hat.data[i];
        const double s =
            std::min(std::max(batch.s.data[i], cfg.s_clamp_min), cfg.s_clamp_max);
        const double w = std::exp(cfg.beta * s);
        acc += w * (0.5 * std::exp(-s) * r * r + 0.5 * s);
    }
    return acc / static_cast<double>(batch.y.numel());
}

std::pair<Tensor, Tensor> beta_nll_grad(const PixelResidualBatch& batch,
                                        const BetaConfig& cfg) {
    batch.validate();
    cfg.validate();
    Tensor gy = Tensor::zeros_like(batch.y_hat);
    Tensor gs = Tensor::zeros_like(batch.s);
    const double inv_np = 1.0 / static_cast<double>(batch.y.numel());
    for (std::int64_t i = 0; i < batch.y.numel(); ++i) {
        const double r = batch.y.data[i] - batch.y_hat.data[i];
        const double s_raw = batch.s.data[i];
        const double s = std::min(std::max(s_raw, cfg.s_clamp_min), cfg.s_clamp_max);
        gy.data[i] = std::exp((cfg.beta - 1.0) * s) * (batch.y_hat.data[i] - batch.y.data[i]) *
                     inv_np;
        // Clipped pixels contribute no s-gradient (clamp cuts the path).
        const bool pass = s_raw >= cfg.s_clamp_min && s_raw <= cfg.s_clamp_max;
        gs.data[i] = pass ? std::exp(cfg.beta * s) * 0.5 * (1.0 - std::exp(-s) * r * r) * inv_np
                          : 0.0;
    }
    return {std::move(gy), std::move(gs)};
}

Tensor beta_nll_weights(const PixelResidualBatch& batch, const BetaConfig& cfg) {
    batch.validate();
    cfg.validate();
    Tensor w = Tensor::zeros_like(batch.s);
    for (std::int64_t i = 0; i < batch.s.numel(); ++i) {
        const double s =
            std::min(std::max(batch.s.data[i], cfg.s_clamp_min), cfg.s_clamp_max);
        w.data[i] = std::exp(cfg.beta * s);
    }
    return w;
}

double beta_nll_weighted(const PixelResidualBatch& batch, const BetaConfig& cfg,
                         const Tensor& w) {
    batch.validate();
    cfg.validate();
    require_same_shape(batch.s, w, "beta_nll_weighted s/w");
    double acc = 0.0;
    for (std::int64_t i = 0; i < batch.y.numel(); ++i) {
        const double r = batch.y.data[i] - batch.y_hat.data[i];
        const double s =
            std::min(std::max(batch.s.data[i], cfg.s_clamp_min), cfg.s_clamp_max);
        acc += w.data[i] * (0.5 * std::exp(-s) * r * r + 0.5 * s);
    }
    return acc / static_cast<double>(batch.y.numel());
}

double attenuation_ratio(double s, double beta) { return std::exp((beta - 1.0) * s); }

double dice_loss(const Tensor& pred, const Tensor& target, double eps) {
    require_same_shape(pred, target, "dice_loss");
    if (eps <= 0.0) throw InvalidConfigError("dice_loss: eps must be > 0");
    double inter = 0.0, sp = 0.0, st = 0.0;
    for (std::int64_t i = 0; i < pred.numel(); ++i) {
        inter += pred.data[i] * target.data[i];
        sp += pred.data[i];
        st += target.data[i];
    }
    return 1.0 - (2.0 * inter + eps) / (sp + st + eps);
}

double total_loss(double aleatoric, double boundary, double segmentation,
                  const LossWeights& w) {
    w.validate();
    return w.w1 * aleatoric + w.w2 * boundary + w.w3 * segmentation;
}

VarPtr beta_nll_var(const VarPtr& y_hat, const VarPtr& s, const Tensor& y,
                    const BetaConfig& cfg) {
    cfg.validate();
    require_same_shape(y_hat->value, y, "beta_nll_var y_hat/y");
    require_same_shape(s->value, y, "beta_nll_var s/y");
    VarPtr s_cl = clamp(s, cfg.s_clamp_min, cfg.s_clamp_max);
    VarPtr yc = make_constant(y);
    VarPtr resid = sub(yc, y_hat);
    VarPtr sq = mul(resid, resid);
    // 0.5*exp(-s)*r^2 + 0.5*s
    VarPtr nll = add(mul_scalar(mul(vexp(mul_scalar(s_cl, -1.0)), sq), 0.5),
                     mul_scalar(s_cl, 0.5));
    // stop-gradient weight exp(beta*s): value participates, derivative does not
    VarPtr weight = stop_gradient(vexp(mul_scalar(s_cl, cfg.beta)));
    return mean_all(mul(weight, nll));
}

VarPtr dice_loss_var(const VarPtr& pred, const Tensor& target, double eps) {
    require_same_shape(pred->value, target, "dice_loss_var");
    if (eps <= 0.0) throw InvalidConfigError("dice_loss_var: eps must be > 0");
    VarPtr tc = make_constant(target);
    VarPtr inter = sum_all(mul(pred, tc));
    VarPtr denom = add_scalar(add(sum_all(pred), sum_all(tc)), eps);
    VarPtr num = add_scalar(mul_scalar(inter, 2.0), eps);
    return add_scalar(mul_scalar(div(num, denom), -1.0), 1.0);
}

VarPtr total_loss_var(const VarPtr& aleatoric, const VarPtr& boundary,
                      const VarPtr& segmentation, const LossWeights& w) {
    w.validate();
    VarPtr acc;
    auto add_term = [&acc](const VarPtr& term, double weight) {
        if (!term) return;
        VarPtr scaled = mul_scalar(term, weight);
        acc = acc ? add(acc, scaled) : scaled;
    };
    add_term(aleatoric, w.w1);
    add_term(boundary, w.w2);
    add_term(segmentation, w.w3);
    if (!acc) acc = make_constant(Tensor::scalar(0.0));
    return acc;
}

}  // namespace ungap
