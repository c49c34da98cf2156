#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace ungap {

// Dense NCHW tensor of doubles. Scalars are (1,1,1,1); 2-D grids live as
// (1,1,H,W). Double precision keeps the finite-difference gradient checks
// meaningful.
struct Tensor {
    int n = 0, c = 0, h = 0, w = 0;
    std::vector<double> data;

    Tensor() = default;
    Tensor(int n_, int c_, int h_, int w_, double fill = 0.0)
        : n(n_), c(c_), h(h_), w(w_), data(static_cast<std::size_t>(n_) * c_ * h_ * w_, fill) {}

    static Tensor scalar(double v) {
        Tensor t(1, 1, 1, 1);
        t.data[0] = v;
        return t;
    }
    static Tensor zeros_like(const Tensor& o) { return Tensor(o.n, o.c, o.h, o.w); }

    std::int64_t numel() const { return static_cast<std::int64_t>(n) * c * h * w; }
    bool same_shape(const Tensor& o) const {
        return n == o.n && c == o.c && h == o.h && w == o.w;
    }

    double& at(int in, int ic, int ih, int iw) {
        return data[((static_cast<std::size_t>(in) * c + ic) * h + ih) * w + iw];
    }
    double at(int in, int ic, int ih, int iw) const {
        return data[((static_cast<std::size_t>(in) * c + ic) * h + ih) * w + iw];
    }

    double* ptr() { return data.data(); }
    const double* ptr() const { return data.data(); }

    std::string shape_str() const;
    double min() const;
    double max() const;
    double sum() const;
    double abs_max() const;
    bool all_finite() const;
};

// Throws InvalidInputError with a message naming `what` on mismatch.
void require_same_shape(const Tensor& a, const Tensor& b, const char* what);

// max|a-b| / max(max|a|, max|b|, 1e-300); 0 when both grids vanish.
double relative_inf_diff(const Tensor& a, const Tensor& b);

}  // namespace ungap
