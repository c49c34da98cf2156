#include "ungap/autodiff.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <unordered_set>

#include "ungap/errors.hpp"

namespace ungap {

namespace {

using MatrixRM = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapRM = Eigen::Map<MatrixRM>;
using ConstMapRM = Eigen::Map<const MatrixRM>;

VarPtr make_node(Tensor value, std::vector<VarPtr> parents, std::function<void(Var&)> fn) {
    auto v = std::make_shared<Var>();
    v->value = std::move(value);
    v->parents = std::move(parents);
    for (const auto& p : v->parents) {
        if (p->requires_grad) {
            v->requires_grad = true;
            break;
        }
    }
    if (v->requires_grad) v->backward_fn = std::move(fn);
    return v;
}

int conv_out_dim(int in, int k, int stride, int pad) { return (in + 2 * pad - k) / stride + 1; }

// Unpacks (C,H,W) of one image into a (C*k*k) x (Hout*Wout) column matrix.
void im2col(const double* src, int C, int H, int W, int k, int stride, int pad, int Hout,
            int Wout, double* col) {
    const int cols = Hout * Wout;
    for (int ci = 0; ci < C; ++ci) {
        for (int ky = 0; ky < k; ++ky) {
            for (int kx = 0; kx < k; ++kx) {
                double* row = col + (static_cast<std::size_t>(ci) * k * k + ky * k + kx) * cols;
                for (int oy = 0; oy < Hout; ++oy) {
                    const int iy = oy * stride - pad + ky;
                    if (iy < 0 || iy >= H) {
                        std::fill(row + oy * Wout, row + (oy + 1) * Wout, 0.0);
                        continue;
                    }
                    const double* srow = src + (static_cast<std::size_t>(ci) * H + iy) * W;
                    for (int ox = 0; ox < Wout; ++ox) {
                        const int ix = ox * stride - pad + kx;
                        row[oy * Wout + ox] = (ix < 0 || ix >= W) ? 0.0 : srow[ix];
                    }
                }
            }
        }
    }
}

// Scatters a column matrix back, accumulating into the (C,H,W) image.
void col2im_accum(const double* col, int C, int H, int W, int k, int stride, int pad, int Hout,
                  int Wout, double* dst) {
    const int cols = Hout * Wout;
    for (int ci = 0; ci < C; ++ci) {
        for (int ky = 0; ky < k; ++ky) {
            for (int kx = 0; kx < k; ++kx) {
                const double* row =
                    col + (static_cast<std::size_t>(ci) * k * k + ky * k + kx) * cols;
                for (int oy = 0; oy < Hout; ++oy) {
                    const int iy = oy * stride - pad + ky;
                    if (iy < 0 || iy >= H) continue;
                    double* drow = dst + (static_cast<std::size_t>(ci) * H + iy) * W;
                    for (int ox = 0; ox < Wout; ++ox) {
                        const int ix = ox * stride - pad + kx;
                        if (ix >= 0 && ix < W) drow[ix] += row[oy * Wout + ox];
                    }
                }
            }
        }
    }
}

}  // namespace

VarPtr make_leaf(Tensor value, bool requires_grad) {
    auto v = std::make_shared<Var>();
    v->value = std::move(value);
    v->requires_grad = requires_grad;
    return v;
}

VarPtr make_constant(Tensor value) { return make_leaf(std::move(value), false); }

void backward(const VarPtr& root) {
    if (root->value.numel() != 1)
        throw InvalidInputError("backward: root must be a scalar, got " + root->value.shape_str());
    // Iterative DFS producing children-before-parents order.
    std::vector<Var*> topo;
    std::unordered_set<Var*> visited;
    std::vector<std::pair<Var*, std::size_t>> stack;
    stack.emplace_back(root.get(), 0);
    visited.insert(root.get());
    while (!stack.empty()) {
        auto& [node, idx] = stack.back();
        if (idx < node->parents.size()) {
            Var* p = node->parents[idx++].get();
            if (p->requires_grad && !visited.count(p)) {
                visited.insert(p);
                stack.emplace_back(p, 0);
            }
        } else {
            topo.push_back(node);
            stack.pop_back();
        }
    }
    root->ensure_grad().data[0] = 1.0;
    for (auto it = topo.rbegin(); it != topo.rend(); ++it) {
        Var* node = *it;
        if (node->backward_fn && node->grad.numel() != 0) node->backward_fn(*node);
    }
}

// ---------------------------------------------------------------------------
// elementwise
// ---------------------------------------------------------------------------

VarPtr add(const VarPtr& a, const VarPtr& b) {
    require_same_shape(a->value, b->value, "add");
    Tensor out = a->value;
    for (std::int64_t i = 0; i < out.numel(); ++i) out.data[i] += b->value.data[i];
    return make_node(std::move(out), {a, b}, [a, b](Var& self) {
        if (a->requires_grad) {
            auto& g = a->ensure_grad();
            for (std::int64_t i = 0; i < g.numel(); ++i) g.data[i] += self.grad.data[i];
        }
        if (b->requires_grad) {
            auto& g = b->ensure_grad();
            for (std::int64_t i = 0; i < g.numel(); ++i) g.data[i] += self.grad.data[i];
        }
    });
}

VarPtr sub(const VarPtr& a, const VarPtr& b) {
    require_same_shape(a->value, b->value, "sub");
    Tensor out = a->value;
    for (std::int64_t i = 0; i < out.numel(); ++i) out.data[i] -= b->value.data[i];
    return make_node(std::move(out), {a, b}, [a, b](Var& self) {
        if (a->requires_grad) {
            auto& g = a->ensure_grad();
            for (std::int64_t i = 0; i < g.numel(); ++i) g.data[i] += self.grad.data[i];
        }
        if (b->requires_grad) {
            auto& g = b->ensure_grad();
            for (std::int64_t i = 0; i < g.numel(); ++i) g.data[i] -= self.grad.data[i];
        }
    });
}

VarPtr mul(const VarPtr& a, const VarPtr& b) {
    require_same_shape(a->value, b->value, "mul");
    Tensor out = a->value;
    for (std::int64_t i = 0; i < out.numel(); ++i) out.data[i] *= b->value.data[i];
    return make_node(std::move(out), {a, b}, [a, b](Var& self) {
        if (a->requires_grad) {
            auto& g = a->ensure_grad();
            for (std::int64_t i = 0; i < g.numel(); ++i)
                g.data[i] += self.grad.data[i] * b->value.data[i];
        }
        if (b->requires_grad) {
            auto& g = b->ensure_grad();
            for (std::int64_t i = 0; i < g.numel(); ++i)
                g.data[i] += self.grad.data[i] * a->value.data[i];
        }
    });
}

VarPtr div(const VarPtr& a, const VarPtr& b) {
    require_same_shape(a->value, b->value, "div");
    Tensor out = a->value;
    for (std::int64_t i = 0; i < out.numel(); ++i) out.data[i] /= b->value.data[i];
    return make_node(std::move(out), {a, b}, [a, b](Var& self) {
        if (a->requires_grad) {
            auto& g = a->ensure_grad();
            for (std::int64_t i = 0; i < g.numel(); ++i)
                g.data[i] += self.grad.data[i] / b->value.data[i];
        }
        if (b->requires_grad) {
            auto& g = b->ensure_grad();
            for (std::int64_t i = 0; i < g.numel(); ++i) {
                const double bv = b->value.data[i];
                g.data[i] -= self.grad.data[i] * a->value.data[i] / (bv * bv);
            }
        }
    });
}

VarPtr add_scalar(const VarPtr& a, double s) {
    Tensor out = a->value;
    for (double& v : out.data) v += s;
    return make_node(std::move(out), {a}, [a](Var& self) {
        auto& g = a->ensure_grad();
        for (std::int64_t i = 0; i < g.numel(); ++i) g.data[i] += self.grad.data[i];
    });
}

VarPtr mul_scalar(const VarPtr& a, double s) {
    Tensor out = a->value;
    for (double& v : out.data) v *= s;
    return make_node(std::move(out), {a}, [a, s](Var& self) {
        auto& g = a->ensure_grad();
        for (std::int64_t i = 0; i < g.numel(); ++i) g.data[i] += s * self.grad.data[i];
    });
}

VarPtr vexp(const VarPtr& a) {
    Tensor out = a->value;
    for (double& v : out.data) v = std::exp(v);
    return make_node(std::move(out), {a}, [a](Var& self) {
        auto& g = a->ensure_grad();
        for (std::int64_t i = 0; i < g.numel(); ++i)
            g.data[i] += self.grad.data[i] * self.value.data[i];
    });
}

VarPtr relu(const VarPtr& a) {
    Tensor out = a->value;
    for (double& v : out.data) v = v > 0.0 ? v : 0.0;
    return make_node(std::move(out), {a}, [a](Var& self) {
        auto& g = a->ensure_grad();
        for (std::int64_t i = 0; i < g.numel(); ++i)
            if (a->value.data[i] > 0.0) g.data[i] += self.grad.data[i];
    });
}

VarPtr sigmoid(const VarPtr& a) {
    Tensor out = a->value;
    for (double& v : out.data) {
        if (v >= 0.0) {
            v = 1.0 / (1.0 + std::exp(-v));
        } else {
            const double e = std::exp(v);
            v = e / (1.0 + e);
        }
    }
    return make_node(std::move(out), {a}, [a](Var& self) {
        auto& g = a->ensure_grad();
        for (std::int64_t i = 0; i < g.numel(); ++i) {
            const double s = self.value.data[i];
            g.data[i] += self.grad.data[i] * s * (1.0 - s);
        }
    });
}

VarPtr clamp(const VarPtr& a, double lo, double hi) {
    if (!(lo < hi)) throw InvalidConfigError("clamp: lo must be < hi");
    Tensor out = a->value;
    for (double& v : out.data) v = std::min(std::max(v, lo), hi);
    return make_node(std::move(out), {a}, [a, lo, hi](Var& self) {
        auto& g = a->ensure_grad();
        for (std::int64_t i = 0; i < g.numel(); ++i) {
            const double v = a->value.data[i];
            if (v >= lo && v <= hi) g.data[i] += self.grad.data[i];
        }
    });
}

VarPtr stop_gradient(const VarPtr& a) { return make_constant(a->value); }

// ---------------------------------------------------------------------------
// reductions
// ---------------------------------------------------------------------------

VarPtr sum_all(const VarPtr& a) {
    Tensor out = Tensor::scalar(a->value.sum());
    return make_node(std::move(out), {a}, [a](Var& self) {
        auto& g = a->ensure_grad();
        const double gv = self.grad.data[0];
        for (std::int64_t i = 0; i < g.numel(); ++i) g.data[i] += gv;
    });
}

VarPtr mean_all(const VarPtr& a) {
    return mul_scalar(sum_all(a), 1.0 / static_cast<double>(a->value.numel()));
}

// ---------------------------------------------------------------------------
// structural
// ---------------------------------------------------------------------------

VarPtr concat_channels(const VarPtr& a, const VarPtr& b) {
    const Tensor& av = a->value;
    const Tensor& bv = b->value;
    if (av.n != bv.n || av.h != bv.h || av.w != bv.w)
        throw InvalidInputError("concat_channels: incompatible shapes " + av.shape_str() +
                                " vs " + bv.shape_str());
    Tensor out(av.n, av.c + bv.c, av.h, av.w);
    const std::size_t plane = static_cast<std::size_t>(av.h) * av.w;
    for (int in = 0; in < av.n; ++in) {
        std::copy_n(av.ptr() + in * av.c * plane, av.c * plane,
                    out.ptr() + static_cast<std::size_t>(in) * out.c * plane);
        std::copy_n(bv.ptr() + in * bv.c * plane, bv.c * plane,
                    out.ptr() + (static_cast<std::size_t>(in) * out.c + av.c) * plane);
    }
    const int ca = av.c;
    return make_node(std::move(out), {a, b}, [a, b, ca, plane](Var& self) {
        const int cout = self.value.c;
        for (int in = 0; in < self.value.n; ++in) {
            const double* g = self.grad.ptr() + static_cast<std::size_t>(in) * cout * plane;
            if (a->requires_grad) {
                double* ga = a->ensure_grad().ptr() + static_cast<std::size_t>(in) * ca * plane;
                for (std::size_t i = 0; i < ca * plane; ++i) ga[i] += g[i];
            }
            if (b->requires_grad) {
                double* gb = b->ensure_grad().ptr() +
                             static_cast<std::size_t>(in) * (cout - ca) * plane;
                const double* gsrc = g + ca * plane;
                for (std::size_t i = 0; i < (cout - ca) * plane; ++i) gb[i] += gsrc[i];
            }
        }
    });
}

VarPtr slice_channels(const VarPtr& a, int c0, int c1) {
    const Tensor& av = a->value;
    if (c0 < 0 || c1 > av.c || c0 >= c1)
        throw InvalidInputError("slice_channels: bad range [" + std::to_string(c0) + "," +
                                std::to_string(c1) + ") for " + av.shape_str());
    Tensor out(av.n, c1 - c0, av.h, av.w);
    const std::size_t plane = static_cast<std::size_t>(av.h) * av.w;
    for (int in = 0; in < av.n; ++in)
        std::copy_n(av.ptr() + (static_cast<std::size_t>(in) * av.c + c0) * plane,
                    (c1 - c0) * plane,
                    out.ptr() + static_cast<std::size_t>(in) * out.c * plane);
    return make_node(std::move(out), {a}, [a, c0, plane](Var& self) {
        auto& g = a->ensure_grad();
        const int cs = self.value.c;
        for (int in = 0; in < self.value.n; ++in) {
            double* dst = g.ptr() + (static_cast<std::size_t>(in) * g.c + c0) * plane;
            const double* src = self.grad.ptr() + static_cast<std::size_t>(in) * cs * plane;
            for (std::size_t i = 0; i < cs * plane; ++i) dst[i] += src[i];
        }
    });
}

// ---------------------------------------------------------------------------
// spatial
// ---------------------------------------------------------------------------

VarPtr conv2d(const VarPtr& x, const VarPtr& weight, const VarPtr& bias, int stride, int pad,
              int groups) {
    const Tensor& xv = x->value;
    const Tensor& wv = weight->value;
    const int Cin = xv.c, Cout = wv.n, k = wv.h;
    if (wv.h != wv.w) throw InvalidInputError("conv2d: non-square kernel");
    if (Cin % groups != 0 || Cout % groups != 0)
        throw InvalidInputError("conv2d: channels not divisible by groups");
    if (wv.c != Cin / groups)
        throw InvalidInputError("conv2d: weight expects " + std::to_string(wv.c * groups) +
                                " input channels, got " + std::to_string(Cin));
    if (bias && (bias->value.c != Cout || bias->value.numel() != Cout))
        throw InvalidInputError("conv2d: bias shape mismatch");
    const int Hout = conv_out_dim(xv.h, k, stride, pad);
    const int Wout = conv_out_dim(xv.w, k, stride, pad);
    if (Hout <= 0 || Wout <= 0) throw InvalidInputError("conv2d: empty output");

    const int cg_in = Cin / groups, cg_out = Cout / groups;
    const int krows = cg_in * k * k;
    const int cols = Hout * Wout;
    const bool pointwise = (k == 1 && stride == 1 && pad == 0);

    Tensor out(xv.n, Cout, Hout, Wout);
    std::vector<double> colbuf(pointwise ? 0 : static_cast<std::size_t>(krows) * cols);
    for (int in = 0; in < xv.n; ++in) {
        for (int g = 0; g < groups; ++g) {
            const double* xg =
                xv.ptr() + (static_cast<std::size_t>(in) * Cin + g * cg_in) * xv.h * xv.w;
            const double* colp;
            if (pointwise) {
                colp = xg;
            } else {
                im2col(xg, cg_in, xv.h, xv.w, k, stride, pad, Hout, Wout, colbuf.data());
                colp = colbuf.data();
            }
            ConstMapRM W(wv.ptr() + static_cast<std::size_t>(g) * cg_out * krows, cg_out, krows);
            ConstMapRM col(colp, krows, cols);
            MapRM O(out.ptr() + (static_cast<std::size_t>(in) * Cout + g * cg_out) * cols, cg_out,
                    cols);
            O.noalias() = W * col;
        }
        if (bias) {
            for (int co = 0; co < Cout; ++co) {
                double* o = out.ptr() + (static_cast<std::size_t>(in) * Cout + co) * cols;
                const double bv = bias->value.data[co];
                for (int i = 0; i < cols; ++i) o[i] += bv;
            }
        }
    }

    std::vector<VarPtr> parents = bias ? std::vector<VarPtr>{x, weight, bias}
                                       : std::vector<VarPtr>{x, weight};
    return make_node(
        std::move(out), std::move(parents),
        [x, weight, bias, stride, pad, groups, k, cg_in, cg_out, krows](Var& self) {
            const Tensor& xv = x->value;
            const int Cin = xv.c, Cout = weight->value.n;
            const int Hout = self.value.h, Wout = self.value.w;
            const int cols = Hout * Wout;
            const bool pointwise = (k == 1 && stride == 1 && pad == 0);
            std::vector<double> colbuf(pointwise ? 0 : static_cast<std::size_t>(krows) * cols);
            std::vector<double> dcolbuf(static_cast<std::size_t>(krows) * cols);
            for (int in = 0; in < xv.n; ++in) {
                for (int g = 0; g < groups; ++g) {
                    ConstMapRM dO(self.grad.ptr() +
                                      (static_cast<std::size_t>(in) * Cout + g * cg_out) * cols,
                                  cg_out, cols);
                    if (weight->requires_grad) {
                        const double* xg = xv.ptr() + (static_cast<std::size_t>(in) * Cin +
                                                       g * cg_in) * xv.h * xv.w;
                        const double* colp;
                        if (pointwise) {
                            colp = xg;
                        } else {
                            im2col(xg, cg_in, xv.h, xv.w, k, stride, pad, Hout, Wout,
                                   colbuf.data());
                            colp = colbuf.data();
                        }
                        ConstMapRM col(colp, krows, cols);
                        MapRM dW(weight->ensure_grad().ptr() +
                                     static_cast<std::size_t>(g) * cg_out * krows,
                                 cg_out, krows);
                        dW.noalias() += dO * col.transpose();
                    }
                    if (x->requires_grad) {
                        ConstMapRM W(weight->value.ptr() +
                                         static_cast<std::size_t>(g) * cg_out * krows,
                                     cg_out, krows);
                        double* dxg = x->ensure_grad().ptr() +
                                      (static_cast<std::size_t>(in) * Cin + g * cg_in) * xv.h *
                                          xv.w;
                        if (pointwise) {
                            MapRM dX(dxg, krows, cols);
                            dX.noalias() += W.transpose() * dO;
                        } else {
                            MapRM dcol(dcolbuf.data(), krows, cols);
                            dcol.noalias() = W.transpose() * dO;
                            col2im_accum(dcolbuf.data(), cg_in, xv.h, xv.w, k, stride, pad, Hout,
                                         Wout, dxg);
                        }
                    }
                }
                if (bias && bias->requires_grad) {
                    auto& bg = bias->ensure_grad();
                    for (int co = 0; co < Cout; ++co) {
                        const double* g = self.grad.ptr() +
                                          (static_cast<std::size_t>(in) * Cout + co) * cols;
                        double s = 0.0;
                        for (int i = 0; i < cols; ++i) s += g[i];
                        bg.data[co] += s;
                    }
                }
            }
        });
}

VarPtr maxpool2d(const VarPtr& x, int kernel, int stride, int pad) {
    const Tensor& xv = x->value;
    const int Hout = conv_out_dim(xv.h, kernel, stride, pad);
    const int Wout = conv_out_dim(xv.w, kernel, stride, pad);
    if (Hout <= 0 || Wout <= 0) throw InvalidInputError("maxpool2d: empty output");
    Tensor out(xv.n, xv.c, Hout, Wout);
    auto argmax = std::make_shared<std::vector<std::int64_t>>(out.numel());
    std::int64_t oi = 0;
    for (int in = 0; in < xv.n; ++in) {
        for (int ci = 0; ci < xv.c; ++ci) {
            const double* plane = xv.ptr() + (static_cast<std::size_t>(in) * xv.c + ci) * xv.h *
                                                 xv.w;
            const std::int64_t base = (static_cast<std::int64_t>(in) * xv.c + ci) *
                                      static_cast<std::int64_t>(xv.h) * xv.w;
            for (int oy = 0; oy < Hout; ++oy) {
                for (int ox = 0; ox < Wout; ++ox, ++oi) {
                    double best = -std::numeric_limits<double>::infinity();
                    std::int64_t besti = -1;
                    for (int ky = 0; ky < kernel; ++ky) {
                        const int iy = oy * stride - pad + ky;
                        if (iy < 0 || iy >= xv.h) continue;
                        for (int kx = 0; kx < kernel; ++kx) {
                            const int ix = ox * stride - pad + kx;
                            if (ix < 0 || ix >= xv.w) continue;
                            const double v = plane[iy * xv.w + ix];
                            if (v > best) {
                                best = v;
                                besti = base + static_cast<std::int64_t>(iy) * xv.w + ix;
                            }
                        }
                    }
                    out.data[oi] = best;
                    (*argmax)[oi] = besti;
                }
            }
        }
    }
    return make_node(std::move(out), {x}, [x, argmax](Var& self) {
        auto& g = x->ensure_grad();
        for (std::int64_t i = 0; i < self.value.numel(); ++i)
            g.data[(*argmax)[i]] += self.grad.data[i];
    });
}

VarPtr upsample_bilinear_2x(const VarPtr& x) {
    const Tensor& xv = x->value;
    const int Hout = xv.h * 2, Wout = xv.w * 2;
    // Per-axis sample positions under half-pixel-center convention.
    struct Tap {
        int a, b;
        double wa, wb;
    };
    auto make_taps = [](int out, int in) {
        std::vector<Tap> taps(out);
        for (int o = 0; o < out; ++o) {
            const double s = (o + 0.5) / 2.0 - 0.5;
            int a = static_cast<int>(std::floor(s));
            const double frac = s - a;
            int b = a + 1;
            a = std::clamp(a, 0, in - 1);
            b = std::clamp(b, 0, in - 1);
            taps[o] = {a, b, 1.0 - frac, frac};
        }
        return taps;
    };
    auto ty = std::make_shared<std::vector<Tap>>(make_taps(Hout, xv.h));
    auto tx = std::make_shared<std::vector<Tap>>(make_taps(Wout, xv.w));

    Tensor out(xv.n, xv.c, Hout, Wout);
    for (int in = 0; in < xv.n; ++in) {
        for (int ci = 0; ci < xv.c; ++ci) {
            const double* sp = xv.ptr() + (static_cast<std::size_t>(in) * xv.c + ci) * xv.h * xv.w;
            double* dp = out.ptr() + (static_cast<std::size_t>(in) * out.c + ci) * Hout * Wout;
            for (int oy = 0; oy < Hout; ++oy) {
                const Tap& Y = (*ty)[oy];
                for (int ox = 0; ox < Wout; ++ox) {
                    const Tap& X = (*tx)[ox];
                    dp[oy * Wout + ox] = Y.wa * (X.wa * sp[Y.a * xv.w + X.a] +
                                                 X.wb * sp[Y.a * xv.w + X.b]) +
                                         Y.wb * (X.wa * sp[Y.b * xv.w + X.a] +
                                                 X.wb * sp[Y.b * xv.w + X.b]);
                }
            }
        }
    }
    return make_node(std::move(out), {x}, [x, ty, tx](Var& self) {
        auto& g = x->ensure_grad();
        const int Hin = x->value.h, Win = x->value.w;
        const int Hout = self.value.h, Wout = self.value.w;
        for (int in = 0; in < self.value.n; ++in) {
            for (int ci = 0; ci < self.value.c; ++ci) {
                double* gp = g.ptr() + (static_cast<std::size_t>(in) * g.c + ci) * Hin * Win;
                const double* dgo = self.grad.ptr() +
                                    (static_cast<std::size_t>(in) * self.value.c + ci) * Hout *
                                        Wout;
                for (int oy = 0; oy < Hout; ++oy) {
                    const Tap& Y = (*ty)[oy];
                    for (int ox = 0; ox < Wout; ++ox) {
                        const Tap& X = (*tx)[ox];
                        const double gv = dgo[oy * Wout + ox];
                        gp[Y.a * Win + X.a] += gv * Y.wa * X.wa;
                        gp[Y.a * Win + X.b] += gv * Y.wa * X.wb;
                        gp[Y.b * Win + X.a] += gv * Y.wb * X.wa;
                        gp[Y.b * Win + X.b] += gv * Y.wb * X.wb;
                    }
                }
            }
        }
    });
}

}  // namespace ungap
