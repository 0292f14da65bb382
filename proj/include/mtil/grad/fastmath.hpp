#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>

namespace mtil::grad {

// Polynomial expf (Cephes-style range reduction to 2^k * e^r). Max relative
// error ~2e-7; exp(0) == 1 exactly. Deterministic, branch-free apart from
// the clamp, and cheap enough for the softmax inner loops where libm expf
// dominates the training profile.
inline float fast_expf(float x) {
    x = std::min(88.3762626647949f, std::max(-87.3365478515625f, x));
    float fx = x * 1.44269504088896341f + 0.5f;
    const float fl = std::floor(fx);
    const int32_t n = static_cast<int32_t>(fl);
    x -= fl * 0.693359375f;
    x -= fl * -2.12194440e-4f;
    const float z = x * x;
    float y = 1.9875691500e-4f;
    y = y * x + 1.3981999507e-3f;
    y = y * x + 8.3334519073e-3f;
    y = y * x + 4.1665795894e-2f;
    y = y * x + 1.6666665459e-1f;
    y = y * x + 5.0000001201e-1f;
    y = y * z + x + 1.0f;
    const int32_t bits = (n + 127) << 23;
    float pow2n;
    std::memcpy(&pow2n, &bits, 4);
    return y * pow2n;
}

// Softmax-style exponentials: fast polynomial in single precision, exact
// libm in double precision (gradient-check paths run in double).
template <typename S>
inline S softmax_exp(S x) {
    return std::exp(x);
}

template <>
inline float softmax_exp<float>(float x) {
    return fast_expf(x);
}

}  // namespace mtil::grad
