#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

namespace advkit::kernels {

// Shared numeric kernels. The autodiff graph and the no-gradient fast paths
// both call these, so forward values agree bitwise between the two routes
// within one precision mode. Summation order is fixed (plain left-to-right
// accumulation); the build disables FP contraction.

// out[i] = sum_k A[i*k_dim + k] * x[k]
template <typename S>
void matvec(std::span<const S> a, std::size_t rows, std::size_t cols,
            std::span<const S> x, std::span<S> out) {
    for (std::size_t i = 0; i < rows; ++i) {
        S acc = S(0);
        const S* row = a.data() + i * cols;
        for (std::size_t k = 0; k < cols; ++k) acc += row[k] * x[k];
        out[i] = acc;
    }
}

// C[i,j] = sum_k A[i,k] * B[k,j]
template <typename S>
void matmul(std::span<const S> a, std::size_t m, std::size_t k,
            std::span<const S> b, std::size_t n, std::span<S> out) {
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            S acc = S(0);
            for (std::size_t kk = 0; kk < k; ++kk) acc += a[i * k + kk] * b[kk * n + j];
            out[i * n + j] = acc;
        }
    }
}

template <typename S>
void add(std::span<const S> a, std::span<const S> b, std::span<S> out) {
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] + b[i];
}

template <typename S>
void relu(std::span<const S> x, std::span<S> out) {
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] > S(0) ? x[i] : S(0);
}

// First index of the maximum value; ties resolve to the lowest index.
template <typename S>
std::size_t argmax(std::span<const S> x) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < x.size(); ++i)
        if (x[i] > x[best]) best = i;
    return best;
}

template <typename S>
std::size_t argmax_abs(std::span<const S> x) {
    std::size_t best = 0;
    S bv = x[0] < S(0) ? -x[0] : x[0];
    for (std::size_t i = 1; i < x.size(); ++i) {
        S v = x[i] < S(0) ? -x[i] : x[i];
        if (v > bv) {
            bv = v;
            best = i;
        }
    }
    return best;
}

// Max-subtracted softmax. The subtraction keeps exp() in range; it does not
// rescue underflow of non-max entries, so saturated logit gaps still map to
// exact {0,1} outputs in 32-bit.
template <typename S>
void stable_softmax(std::span<const S> z, std::span<S> out) {
    const S m = z[argmax(z)];
    S sum = S(0);
    for (std::size_t i = 0; i < z.size(); ++i) {
        out[i] = std::exp(z[i] - m);
        sum += out[i];
    }
    for (std::size_t i = 0; i < z.size(); ++i) out[i] /= sum;
}

template <typename S>
S norm_l2(std::span<const S> v) {
    S acc = S(0);
    for (const S x : v) acc += x * x;
    return std::sqrt(acc);
}

template <typename S>
S norm_l1(std::span<const S> v) {
    S acc = S(0);
    for (const S x : v) acc += x < S(0) ? -x : x;
    return acc;
}

template <typename S>
S norm_linf(std::span<const S> v) {
    S best = S(0);
    for (const S x : v) {
        S a = x < S(0) ? -x : x;
        if (a > best) best = a;
    }
    return best;
}

} // namespace advkit::kernels
