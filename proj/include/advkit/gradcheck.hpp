#pragma once

#include <cmath>
#include <functional>

#include "advkit/tensor.hpp"

namespace advkit {

// Central-difference gradient estimate, the independent oracle used by the
// gradient tests. Evaluates f at x +- h*e_i per coordinate.
template <typename S>
Tensor<S> finite_difference_gradient(const std::function<S(const Tensor<S>&)>& f,
                                     const Tensor<S>& x, S h) {
    Tensor<S> grad(x.shape);
    Tensor<S> probe = x;
    for (std::size_t i = 0; i < x.numel(); ++i) {
        const S orig = probe[i];
        probe[i] = orig + h;
        const S fp = f(probe);
        probe[i] = orig - h;
        const S fm = f(probe);
        probe[i] = orig;
        if (!std::isfinite(static_cast<double>(fp)) || !std::isfinite(static_cast<double>(fm)))
            throw NumericError("finite differences hit a non-finite function value");
        grad[i] = (fp - fm) / (S(2) * h);
    }
    return grad;
}

// ||a - b||_2 / max(||a||_2, ||b||_2, floor)
template <typename S>
double relative_error(const Tensor<S>& a, const Tensor<S>& b) {
    double diff = 0, na = 0, nb = 0;
    for (std::size_t i = 0; i < a.numel(); ++i) {
        const double d = static_cast<double>(a[i]) - static_cast<double>(b[i]);
        diff += d * d;
        na += static_cast<double>(a[i]) * static_cast<double>(a[i]);
        nb += static_cast<double>(b[i]) * static_cast<double>(b[i]);
    }
    const double denom = std::sqrt(std::max(na, nb));
    if (denom < 1e-300) return std::sqrt(diff);
    return std::sqrt(diff) / denom;
}

// Relative agreement with an absolute floor: gradients smaller than atol are
// below what central differences can resolve against an O(1) function value.
template <typename S>
bool gradients_match(const Tensor<S>& oracle, const Tensor<S>& grad, double rtol = 1e-5,
                     double atol = 1e-9) {
    double diff = 0;
    for (std::size_t i = 0; i < oracle.numel(); ++i) {
        const double d = static_cast<double>(oracle[i]) - static_cast<double>(grad[i]);
        diff += d * d;
    }
    if (std::sqrt(diff) <= atol) return true;
    return relative_error(oracle, grad) < rtol;
}

} // namespace advkit
