#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "streamkv/errors.hpp"

namespace streamkv {

using Vec = std::vector<float>;

inline constexpr float kNormEps = 1e-6f;

inline float dot(std::span<const float> a, std::span<const float> b) {
    float acc = 0.0f;
    for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
    return acc;
}

// out = W x, W row-major [rows x cols]. Accumulation is sequential over the
// input index; every forward path relies on this order being fixed.
inline void matvec(std::span<const float> w, std::size_t rows, std::size_t cols,
                   std::span<const float> x, std::span<float> out) {
    if (w.size() != rows * cols || x.size() != cols || out.size() != rows) {
        throw ShapeError("matvec: size mismatch");
    }
    for (std::size_t r = 0; r < rows; ++r) {
        const float* wr = w.data() + r * cols;
        float acc = 0.0f;
        for (std::size_t c = 0; c < cols; ++c) acc += wr[c] * x[c];
        out[r] = acc;
    }
}

// y = x / sqrt(mean(x^2) + eps). No learned scale.
inline void rmsnorm(std::span<const float> x, std::span<float> out) {
    if (x.size() != out.size()) throw ShapeError("rmsnorm: size mismatch");
    double ss = 0.0;
    for (float v : x) ss += static_cast<double>(v) * v;
    const float inv =
        1.0f / std::sqrt(static_cast<float>(ss / static_cast<double>(x.size())) + kNormEps);
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] * inv;
}

inline Vec rmsnormed(std::span<const float> x) {
    Vec y(x.size());
    rmsnorm(x, y);
    return y;
}

inline float silu(float v) { return v / (1.0f + std::exp(-v)); }

// In-place softmax with max subtraction; sums sequentially.
inline void softmax_inplace(std::span<float> s) {
    if (s.empty()) return;
    float m = s[0];
    for (float v : s) m = std::max(m, v);
    float sum = 0.0f;
    for (float& v : s) {
        v = std::exp(v - m);
        sum += v;
    }
    const float inv = 1.0f / sum;
    for (float& v : s) v *= inv;
}

}  // namespace streamkv
