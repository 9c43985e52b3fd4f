#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "csg/errors.hpp"
#include "csg/tensor.hpp"

namespace csg {

// Image batches are Tensor4 (batch, channels, height, width); filter sets are
// Tensor4 (out_channels, in_channels, kernel_h, kernel_w). Convolution is
// direct, stride 1, zero padded so output spatial size equals input spatial
// size (left/top padding (k-1)/2).

inline Tensor4 conv2d_forward(const Tensor4& input, const Tensor4& filters) {
    const Shape4& xs = input.shape();
    const Shape4& ws = filters.shape();
    if (xs[1] != ws[1]) {
        throw shape_error("conv2d_forward: input has " + std::to_string(xs[1]) +
                          " channels, filters expect " + std::to_string(ws[1]));
    }
    const std::int64_t batch = xs[0], ch = xs[1], height = xs[2], width = xs[3];
    const std::int64_t fcount = ws[0], kh = ws[2], kw = ws[3];
    const std::int64_t ph = (kh - 1) / 2, pw = (kw - 1) / 2;

    Tensor4 out({batch, fcount, height, width});
    for (std::int64_t n = 0; n < batch; ++n)
        for (std::int64_t f = 0; f < fcount; ++f)
            for (std::int64_t i = 0; i < height; ++i)
                for (std::int64_t j = 0; j < width; ++j) {
                    double sum = 0.0;
                    for (std::int64_t c = 0; c < ch; ++c)
                        for (std::int64_t p = 0; p < kh; ++p) {
                            const std::int64_t ii = i + p - ph;
                            if (ii < 0 || ii >= height) continue;
                            for (std::int64_t q = 0; q < kw; ++q) {
                                const std::int64_t jj = j + q - pw;
                                if (jj < 0 || jj >= width) continue;
                                sum += input(n, c, ii, jj) * filters(f, c, p, q);
                            }
                        }
                    out(n, f, i, j) = sum;
                }
    return out;
}

/// Exact gradients of conv2d_forward with respect to input and filters.
inline std::pair<Tensor4, Tensor4> conv2d_backward(const Tensor4& input, const Tensor4& filters,
                                                   const Tensor4& upstream) {
    const Shape4& xs = input.shape();
    const Shape4& ws = filters.shape();
    if (xs[1] != ws[1]) throw shape_error("conv2d_backward: channel mismatch");
    if (upstream.shape() != Shape4{xs[0], ws[0], xs[2], xs[3]}) {
        throw shape_error("conv2d_backward: upstream shape " +
                          shape_to_string(upstream.shape()) + " does not match output shape");
    }
    const std::int64_t batch = xs[0], ch = xs[1], height = xs[2], width = xs[3];
    const std::int64_t fcount = ws[0], kh = ws[2], kw = ws[3];
    const std::int64_t ph = (kh - 1) / 2, pw = (kw - 1) / 2;

    Tensor4 grad_input(xs);
    Tensor4 grad_filters(ws);
    for (std::int64_t n = 0; n < batch; ++n)
        for (std::int64_t f = 0; f < fcount; ++f)
            for (std::int64_t i = 0; i < height; ++i)
                for (std::int64_t j = 0; j < width; ++j) {
                    const double u = upstream(n, f, i, j);
                    if (u == 0.0) continue;
                    for (std::int64_t c = 0; c < ch; ++c)
                        for (std::int64_t p = 0; p < kh; ++p) {
                            const std::int64_t ii = i + p - ph;
                            if (ii < 0 || ii >= height) continue;
                            for (std::int64_t q = 0; q < kw; ++q) {
                                const std::int64_t jj = j + q - pw;
                                if (jj < 0 || jj >= width) continue;
                                grad_input(n, c, ii, jj) += u * filters(f, c, p, q);
                                grad_filters(f, c, p, q) += u * input(n, c, ii, jj);
                            }
                        }
                }
    return {std::move(grad_input), std::move(grad_filters)};
}

/// y = x W^T + b with x (batch, in), W (out, in), b (out).
inline Matrix fc_forward(const Matrix& x, const Matrix& w, const std::vector<double>& b) {
    if (x.cols() != w.cols()) {
        throw shape_error("fc_forward: input width " + std::to_string(x.cols()) +
                          " does not match weight width " + std::to_string(w.cols()));
    }
    if (static_cast<std::int64_t>(b.size()) != w.rows()) {
        throw shape_error("fc_forward: bias length does not match output size");
    }
    Matrix y(x.rows(), w.rows());
    for (std::int64_t n = 0; n < x.rows(); ++n)
        for (std::int64_t o = 0; o < w.rows(); ++o) {
            double sum = b[static_cast<std::size_t>(o)];
            for (std::int64_t k = 0; k < x.cols(); ++k) sum += x(n, k) * w(o, k);
            y(n, o) = sum;
        }
    return y;
}

struct FcGradients {
    Matrix grad_input;
    Matrix grad_weights;
    std::vector<double> grad_bias;
};

inline FcGradients fc_backward(const Matrix& x, const Matrix& w, const Matrix& upstream) {
    if (upstream.rows() != x.rows() || upstream.cols() != w.rows()) {
        throw shape_error("fc_backward: upstream shape mismatch");
    }
    FcGradients g{Matrix(x.rows(), x.cols()), Matrix(w.rows(), w.cols()),
                  std::vector<double>(static_cast<std::size_t>(w.rows()), 0.0)};
    for (std::int64_t n = 0; n < x.rows(); ++n)
        for (std::int64_t o = 0; o < w.rows(); ++o) {
            const double u = upstream(n, o);
            g.grad_bias[static_cast<std::size_t>(o)] += u;
            for (std::int64_t k = 0; k < x.cols(); ++k) {
                g.grad_input(n, k) += u * w(o, k);
                g.grad_weights(o, k) += u * x(n, k);
            }
        }
    return g;
}

inline Tensor4 relu_forward(const Tensor4& x) {
    Tensor4 y = x;
    for (double& v : y.data()) v = v > 0.0 ? v : 0.0;
    return y;
}

/// Gradient mask uses the pre-activation values; the derivative at 0 is 0.
inline Tensor4 relu_backward(const Tensor4& pre_activation, const Tensor4& upstream) {
    if (!pre_activation.same_shape(upstream)) {
        throw shape_error("relu_backward: shape mismatch");
    }
    Tensor4 g(pre_activation.shape());
    for (std::int64_t i = 0; i < g.size(); ++i) {
        g.data()[static_cast<std::size_t>(i)] =
            pre_activation.data()[static_cast<std::size_t>(i)] > 0.0
                ? upstream.data()[static_cast<std::size_t>(i)]
                : 0.0;
    }
    return g;
}

enum class LossKind { l2, cross_entropy };

namespace nn_detail {

inline void check_same(const Matrix& a, const Matrix& b, const char* who) {
    if (a.rows() != b.rows() || a.cols() != b.cols()) {
        throw shape_error(std::string(who) + ": prediction and target shapes differ");
    }
}

/// Row-wise softmax with the usual max subtraction.
inline Matrix softmax(const Matrix& logits) {
    Matrix p(logits.rows(), logits.cols());
    for (std::int64_t n = 0; n < logits.rows(); ++n) {
        double mx = logits(n, 0);
        for (std::int64_t k = 1; k < logits.cols(); ++k) mx = std::max(mx, logits(n, k));
        double z = 0.0;
        for (std::int64_t k = 0; k < logits.cols(); ++k) {
            p(n, k) = std::exp(logits(n, k) - mx);
            z += p(n, k);
        }
        for (std::int64_t k = 0; k < logits.cols(); ++k) p(n, k) /= z;
    }
    return p;
}

inline void check_distribution(const Matrix& target) {
    for (std::int64_t n = 0; n < target.rows(); ++n) {
        double sum = 0.0;
        for (std::int64_t k = 0; k < target.cols(); ++k) {
            if (target(n, k) < -1e-12) {
                throw value_error("cross_entropy: target row " + std::to_string(n) +
                                  " has a negative entry");
            }
            sum += target(n, k);
        }
        if (std::abs(sum - 1.0) > 1e-6) {
            throw value_error("cross_entropy: target row " + std::to_string(n) +
                              " does not sum to 1");
        }
    }
}

}  // namespace nn_detail

/// Mean over the batch of 0.5 ||pred - target||^2.
inline double l2_loss(const Matrix& pred, const Matrix& target) {
    nn_detail::check_same(pred, target, "l2_loss");
    double sum = 0.0;
    for (std::size_t i = 0; i < pred.data().size(); ++i) {
        const double d = pred.data()[i] - target.data()[i];
        sum += d * d;
    }
    return 0.5 * sum / static_cast<double>(pred.rows());
}

inline Matrix l2_loss_backward(const Matrix& pred, const Matrix& target) {
    nn_detail::check_same(pred, target, "l2_loss_backward");
    Matrix g(pred.rows(), pred.cols());
    const double inv = 1.0 / static_cast<double>(pred.rows());
    for (std::size_t i = 0; i < pred.data().size(); ++i) {
        g.data()[i] = (pred.data()[i] - target.data()[i]) * inv;
    }
    return g;
}

/// Softmax cross-entropy, mean over the batch. Targets must be probability
/// distributions per row (one-hot in the classification demos).
inline double cross_entropy_loss(const Matrix& logits, const Matrix& target) {
    nn_detail::check_same(logits, target, "cross_entropy_loss");
    nn_detail::check_distribution(target);
    const Matrix p = nn_detail::softmax(logits);
    double sum = 0.0;
    for (std::int64_t n = 0; n < logits.rows(); ++n) {
        for (std::int64_t k = 0; k < logits.cols(); ++k) {
            if (target(n, k) > 0.0) {
                sum -= target(n, k) * std::log(std::max(p(n, k), 1e-300));
            }
        }
    }
    return sum / static_cast<double>(logits.rows());
}

inline Matrix cross_entropy_backward(const Matrix& logits, const Matrix& target) {
    nn_detail::check_same(logits, target, "cross_entropy_backward");
    nn_detail::check_distribution(target);
    Matrix g = nn_detail::softmax(logits);
    const double inv = 1.0 / static_cast<double>(logits.rows());
    for (std::size_t i = 0; i < g.data().size(); ++i) {
        g.data()[i] = (g.data()[i] - target.data()[i]) * inv;
    }
    return g;
}

inline double loss_eval(LossKind kind, const Matrix& pred, const Matrix& target) {
    return kind == LossKind::l2 ? l2_loss(pred, target) : cross_entropy_loss(pred, target);
}

inline Matrix loss_backward(LossKind kind, const Matrix& pred, const Matrix& target) {
    return kind == LossKind::l2 ? l2_loss_backward(pred, target)
                                : cross_entropy_backward(pred, target);
}

}  // namespace csg
