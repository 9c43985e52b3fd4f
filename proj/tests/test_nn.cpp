#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "csg/nn.hpp"
#include "csg/rng.hpp"
#include "oracles.hpp"

using namespace csg;

namespace {

Tensor4 random_tensor(const Shape4& shape, Rng& rng) {
    Tensor4 t(shape);
    for (double& v : t.data()) v = rng.uniform(-1.0, 1.0);
    return t;
}

Matrix random_matrix(std::int64_t r, std::int64_t c, Rng& rng) {
    Matrix m(r, c);
    for (double& v : m.data()) v = rng.uniform(-1.0, 1.0);
    return m;
}

/// Direct quadruple-loop convolution, written independently of the library
/// implementation (explicit padded gather).
Tensor4 conv_oracle(const Tensor4& x, const Tensor4& w) {
    const auto& xs = x.shape();
    const auto& ws = w.shape();
    const std::int64_t ph = (ws[2] - 1) / 2, pw = (ws[3] - 1) / 2;
    Tensor4 y({xs[0], ws[0], xs[2], xs[3]});
    for (std::int64_t n = 0; n < xs[0]; ++n)
        for (std::int64_t f = 0; f < ws[0]; ++f)
            for (std::int64_t i = 0; i < xs[2]; ++i)
                for (std::int64_t j = 0; j < xs[3]; ++j) {
                    double acc = 0.0;
                    for (std::int64_t c = 0; c < xs[1]; ++c)
                        for (std::int64_t p = 0; p < ws[2]; ++p)
                            for (std::int64_t q = 0; q < ws[3]; ++q) {
                                const std::int64_t ii = i + p - ph, jj = j + q - pw;
                                const double xv = (ii >= 0 && ii < xs[2] && jj >= 0 && jj < xs[3])
                                                      ? x(n, c, ii, jj)
                                                      : 0.0;
                                acc += xv * w(f, c, p, q);
                            }
                    y(n, f, i, j) = acc;
                }
    return y;
}

}  // namespace

TEST_CASE("1x1 identity filter passes the input through") {
    Rng rng(103);
    const Tensor4 x = random_tensor({2, 1, 4, 4}, rng);
    Tensor4 w({1, 1, 1, 1});
    w(0, 0, 0, 0) = 1.0;
    CHECK(conv2d_forward(x, w).data() == x.data());

    const Tensor4 zero_w({3, 1, 3, 3});
    const Tensor4 zero_out = conv2d_forward(x, zero_w);
    for (double v : zero_out.data()) CHECK(v == 0.0);

    CHECK_THROWS_AS(conv2d_forward(x, Tensor4({1, 2, 3, 3})), shape_error);
}

TEST_CASE("conv2d_forward matches the direct-loop oracle") {
    Rng rng(107);
    for (int trial = 0; trial < 5; ++trial) {
        const Tensor4 x = random_tensor({2, 3, 5, 4}, rng);
        const Tensor4 w = random_tensor({4, 3, 3, 3}, rng);
        const Tensor4 got = conv2d_forward(x, w);
        const Tensor4 want = conv_oracle(x, w);
        for (std::int64_t i = 0; i < got.size(); ++i) {
            CHECK(std::abs(got.data()[i] - want.data()[i]) <= 1e-12);
        }
    }
}

TEST_CASE("conv2d_backward handles the scalar chain case") {
    Tensor4 x({1, 1, 1, 1}, {3.0});
    Tensor4 w({1, 1, 1, 1}, {-2.0});
    Tensor4 u({1, 1, 1, 1}, {0.5});
    auto [gx, gw] = conv2d_backward(x, w, u);
    CHECK(gx(0, 0, 0, 0) == Catch::Approx(0.5 * -2.0));
    CHECK(gw(0, 0, 0, 0) == Catch::Approx(0.5 * 3.0));

    Tensor4 zero_u({1, 1, 1, 1});
    auto [zx, zw] = conv2d_backward(x, w, zero_u);
    CHECK(zx(0, 0, 0, 0) == 0.0);
    CHECK(zw(0, 0, 0, 0) == 0.0);
}

TEST_CASE("conv2d_backward matches central finite differences") {
    Rng rng(109);
    Tensor4 x = random_tensor({2, 2, 4, 4}, rng);
    Tensor4 w = random_tensor({2, 2, 3, 3}, rng);
    const Tensor4 weights = random_tensor({2, 2, 4, 4}, rng);  // random functional

    auto eval = [&]() {
        const Tensor4 y = conv2d_forward(x, w);
        double sum = 0.0;
        for (std::int64_t i = 0; i < y.size(); ++i) sum += weights.data()[i] * y.data()[i];
        return sum;
    };
    auto [gx, gw] = conv2d_backward(x, w, weights);

    for (std::size_t i = 0; i < x.data().size(); ++i) {
        CHECK(oracle::grad_discrepancy(gx.data()[i], oracle::central_diff(x.data()[i], eval)) <=
              1e-6);
    }
    for (std::size_t i = 0; i < w.data().size(); ++i) {
        CHECK(oracle::grad_discrepancy(gw.data()[i], oracle::central_diff(w.data()[i], eval)) <=
              1e-6);
    }
}

TEST_CASE("fc forward/backward agree with finite differences") {
    Rng rng(113);
    Matrix x = random_matrix(3, 5, rng);
    Matrix w = random_matrix(4, 5, rng);
    std::vector<double> b(4);
    for (double& v : b) v = rng.uniform(-1, 1);
    const Matrix functional = random_matrix(3, 4, rng);

    auto eval = [&]() {
        const Matrix y = fc_forward(x, w, b);
        double sum = 0.0;
        for (std::size_t i = 0; i < y.data().size(); ++i) sum += functional.data()[i] * y.data()[i];
        return sum;
    };
    const FcGradients g = fc_backward(x, w, functional);

    for (std::size_t i = 0; i < x.data().size(); ++i) {
        CHECK(oracle::grad_discrepancy(g.grad_input.data()[i],
                                       oracle::central_diff(x.data()[i], eval)) <= 1e-6);
    }
    for (std::size_t i = 0; i < w.data().size(); ++i) {
        CHECK(oracle::grad_discrepancy(g.grad_weights.data()[i],
                                       oracle::central_diff(w.data()[i], eval)) <= 1e-6);
    }
    for (std::size_t i = 0; i < b.size(); ++i) {
        CHECK(oracle::grad_discrepancy(g.grad_bias[i], oracle::central_diff(b[i], eval)) <= 1e-6);
    }

    CHECK_THROWS_AS(fc_forward(x, random_matrix(4, 6, rng), b), shape_error);
}

TEST_CASE("relu zeroes negatives and defines the gradient at 0 as 0") {
    Tensor4 x({1, 1, 1, 4}, {-1.0, 0.0, 2.0, -0.5});
    CHECK(relu_forward(x).data() == std::vector<double>{0.0, 0.0, 2.0, 0.0});
    Tensor4 u({1, 1, 1, 4}, {5.0, 7.0, 11.0, 13.0});
    CHECK(relu_backward(x, u).data() == std::vector<double>{0.0, 0.0, 11.0, 0.0});
}

TEST_CASE("l2 loss is zero at the target and matches finite differences") {
    Rng rng(127);
    Matrix pred = random_matrix(4, 3, rng);
    CHECK(l2_loss(pred, pred) == 0.0);

    const Matrix target = random_matrix(4, 3, rng);
    auto eval = [&]() { return l2_loss(pred, target); };
    const Matrix g = l2_loss_backward(pred, target);
    for (std::size_t i = 0; i < pred.data().size(); ++i) {
        CHECK(oracle::grad_discrepancy(g.data()[i],
                                       oracle::central_diff(pred.data()[i], eval)) <= 1e-6);
    }
}

TEST_CASE("cross entropy vanishes on a growing matched logit spike") {
    Matrix target(1, 3);
    target(0, 1) = 1.0;
    double prev = 1e9;
    for (double spike : {2.0, 5.0, 10.0, 30.0}) {
        Matrix logits(1, 3);
        logits(0, 1) = spike;
        const double loss = cross_entropy_loss(logits, target);
        CHECK(loss < prev);
        prev = loss;
    }
    CHECK(prev < 1e-12);
}

TEST_CASE("cross entropy rejects non-distribution targets") {
    Matrix logits(2, 2);
    Matrix bad_sum(2, 2);
    bad_sum(0, 0) = 0.7;  // row 0 sums to 0.7
    bad_sum(1, 0) = 1.0;
    CHECK_THROWS_AS(cross_entropy_loss(logits, bad_sum), value_error);

    Matrix negative(2, 2);
    negative(0, 0) = 1.5;
    negative(0, 1) = -0.5;
    negative(1, 0) = 1.0;
    CHECK_THROWS_AS(cross_entropy_loss(logits, negative), value_error);
}

TEST_CASE("cross entropy gradient matches finite differences") {
    Rng rng(131);
    Matrix logits = random_matrix(5, 4, rng);
    Matrix target(5, 4);
    for (std::int64_t n = 0; n < 5; ++n) target(n, static_cast<std::int64_t>(rng.below(4))) = 1.0;

    auto eval = [&]() { return cross_entropy_loss(logits, target); };
    const Matrix g = cross_entropy_backward(logits, target);
    for (std::size_t i = 0; i < logits.data().size(); ++i) {
        CHECK(oracle::grad_discrepancy(g.data()[i],
                                       oracle::central_diff(logits.data()[i], eval)) <= 1e-6);
    }
}
