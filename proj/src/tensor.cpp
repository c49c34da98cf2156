#include "ungap/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "ungap/errors.hpp"

namespace ungap {

std::string Tensor::shape_str() const {
    std::ostringstream os;
    os << "(" << n << "," << c << "," << h << "," << w << ")";
    return os.str();
}

double Tensor::min() const {
    return data.empty() ? 0.0 : *std::min_element(data.begin(), data.end());
}

double Tensor::max() const {
    return data.empty() ? 0.0 : *std::max_element(data.begin(), data.end());
}

double Tensor::sum() const {
    double s = 0.0;
    for (double v : data) s += v;
    return s;
}

double Tensor::abs_max() const {
    double m = 0.0;
    for (double v : data) m = std::max(m, std::abs(v));
    return m;
}

bool Tensor::all_finite() const {
    for (double v : data)
        if (!std::isfinite(v)) return false;
    return true;
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* what) {
    if (!a.same_shape(b)) {
        throw InvalidInputError(std::string(what) + ": shape mismatch " + a.shape_str() +
                                " vs " + b.shape_str());
    }
}

double relative_inf_diff(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "relative_inf_diff");
    double num = 0.0;
    for (std::int64_t i = 0; i < a.numel(); ++i)
        num = std::max(num, std::abs(a.data[i] - b.data[i]));
    const double den = std::max({a.abs_max(), b.abs_max(), 1e-300});
    return num / den;
}

}  // namespace ungap
