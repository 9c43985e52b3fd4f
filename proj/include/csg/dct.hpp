#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "csg/tensor.hpp"

namespace csg {

/// 4-D DCT coefficients of a slice; same shape and element count as the source.
struct DctSpectrum {
    Tensor4 coefficients;
};

namespace dct_detail {

constexpr double kPi = 3.14159265358979323846;

/// Orthonormal DCT-II basis for one axis: row k, column n holds
/// alpha(k) cos(pi (n + 1/2) k / len) with alpha(0) = sqrt(1/len) and
/// alpha(k>0) = sqrt(2/len). The inverse transform is the transpose.
inline std::vector<double> basis(std::int64_t len) {
    std::vector<double> m(static_cast<std::size_t>(len * len));
    const double a0 = std::sqrt(1.0 / static_cast<double>(len));
    const double ak = std::sqrt(2.0 / static_cast<double>(len));
    for (std::int64_t k = 0; k < len; ++k) {
        const double alpha = (k == 0) ? a0 : ak;
        for (std::int64_t n = 0; n < len; ++n) {
            m[static_cast<std::size_t>(k * len + n)] =
                alpha * std::cos(kPi / static_cast<double>(len) *
                                 (static_cast<double>(n) + 0.5) * static_cast<double>(k));
        }
    }
    return m;
}

/// Apply a len x len matrix along one axis of the tensor: separable
/// evaluation, O(size * len) per axis instead of the quadruple sum.
inline Tensor4 apply_axis(const Tensor4& t, const std::vector<double>& m, int axis,
                          bool transposed) {
    const Shape4& s = t.shape();
    const std::int64_t len = s[axis];
    std::array<std::int64_t, 4> stride = {s[1] * s[2] * s[3], s[2] * s[3], s[3], 1};
    const std::int64_t axis_stride = stride[axis];

    Tensor4 out(s);
    std::array<std::int64_t, 4> idx = {0, 0, 0, 0};
    const std::int64_t outer = t.size() / len;
    const auto& src = t.data();
    auto& dst = out.data();
    for (std::int64_t o = 0; o < outer; ++o) {
        // Base offset of the current line (idx holds the non-axis indices).
        std::int64_t base = 0;
        for (int a = 0; a < 4; ++a)
            if (a != axis) base += idx[a] * stride[a];

        for (std::int64_t k = 0; k < len; ++k) {
            double sum = 0.0;
            for (std::int64_t n = 0; n < len; ++n) {
                const double w = transposed ? m[static_cast<std::size_t>(n * len + k)]
                                            : m[static_cast<std::size_t>(k * len + n)];
                sum += w * src[static_cast<std::size_t>(base + n * axis_stride)];
            }
            dst[static_cast<std::size_t>(base + k * axis_stride)] = sum;
        }

        // Advance the non-axis indices, last axis fastest.
        for (int a = 3; a >= 0; --a) {
            if (a == axis) continue;
            if (++idx[a] < s[a]) break;
            idx[a] = 0;
        }
    }
    return out;
}

}  // namespace dct_detail

/// Separable orthonormal DCT-II along all four axes.
inline DctSpectrum dct4(const Tensor4& slice) {
    Tensor4 t = slice;
    for (int axis = 0; axis < 4; ++axis) {
        t = dct_detail::apply_axis(t, dct_detail::basis(slice.shape()[axis]), axis, false);
    }
    return DctSpectrum{std::move(t)};
}

/// Exact inverse of dct4 under the orthonormal convention.
inline Tensor4 idct4(const DctSpectrum& spec) {
    Tensor4 t = spec.coefficients;
    for (int axis = 0; axis < 4; ++axis) {
        t = dct_detail::apply_axis(t, dct_detail::basis(t.shape()[axis]), axis, true);
    }
    return t;
}

}  // namespace csg
