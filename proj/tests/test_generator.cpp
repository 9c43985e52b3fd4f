#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <filesystem>

#include "csg/generator.hpp"
#include "csg/rng.hpp"
#include "oracles.hpp"

using namespace csg;

namespace {

Tensor4 random_tensor(const Shape4& shape, Rng& rng) {
    Tensor4 t(shape);
    for (double& v : t.data()) v = rng.uniform(-1.0, 1.0);
    return t;
}

CodeVector random_code(std::int64_t n, Rng& rng) {
    CodeVector c;
    c.values.resize(static_cast<std::size_t>(n));
    for (double& v : c.values) v = rng.uniform(-1.0, 1.0);
    return c;
}

}  // namespace

TEST_CASE("init_csg is deterministic and sized by the slice shape") {
    const CsgMatrix a = init_csg(SliceShape{{16, 16, 3, 3}}, 128, 42);
    const CsgMatrix b = init_csg(SliceShape{{16, 16, 3, 3}}, 128, 42);
    CHECK(a.weights.data() == b.weights.data());
    CHECK(a.rows() == 2304);
    CHECK(a.code_size() == 128);
    CHECK(a.parameter_count() == 294912);

    const CsgMatrix c = init_csg(SliceShape{{12, 12, 3, 3}}, 72, 1);
    CHECK(c.rows() == 1296);
    CHECK(c.parameter_count() == 93312);

    const double bound = std::sqrt(6.0 / (2304.0 + 128.0));
    for (double v : a.weights.data()) CHECK(std::abs(v) < bound);
}

TEST_CASE("generate_slice handles the degenerate cases") {
    const CsgMatrix g = init_csg(SliceShape{{2, 2, 1, 1}}, 3, 7);

    CodeVector zero;
    zero.values = {0.0, 0.0, 0.0};
    const Tensor4 from_zero = generate_slice(g, zero);
    for (double v : from_zero.data()) CHECK(v == 0.0);

    const CsgMatrix single = init_csg(SliceShape{{2, 2, 1, 1}}, 1, 7);
    CodeVector two;
    two.values = {2.0};
    const Tensor4 scaled = generate_slice(single, two);
    for (std::int64_t r = 0; r < 4; ++r) {
        CHECK(scaled.data()[r] == Catch::Approx(2.0 * single.weights(r, 0)).margin(1e-15));
    }

    CodeVector wrong;
    wrong.values = {1.0};
    CHECK_THROWS_AS(generate_slice(g, wrong), shape_error);
}

TEST_CASE("generate_slice equals the naive matvec oracle") {
    Rng rng(19);
    const CsgMatrix g = init_csg(SliceShape{{3, 4, 2, 2}}, 9, 19);
    const CodeVector c = random_code(9, rng);
    const Tensor4 got = generate_slice(g, c);
    const auto want = oracle::matvec_naive(g.weights, c.values);
    for (std::size_t i = 0; i < want.size(); ++i) CHECK(std::abs(got.data()[i] - want[i]) <= 1e-12);
}

TEST_CASE("generate_slice is linear in the code") {
    Rng rng(29);
    const CsgMatrix g = init_csg(SliceShape{{4, 4, 3, 3}}, 8, 29);
    const CodeVector c1 = random_code(8, rng), c2 = random_code(8, rng);
    const double alpha = 1.25, beta = -0.5;
    CodeVector combo;
    combo.values.resize(8);
    for (int i = 0; i < 8; ++i) combo.values[i] = alpha * c1.values[i] + beta * c2.values[i];
    const Tensor4 lhs = generate_slice(g, combo);
    const Tensor4 s1 = generate_slice(g, c1), s2 = generate_slice(g, c2);
    for (std::int64_t i = 0; i < lhs.size(); ++i) {
        const double rhs = alpha * s1.data()[i] + beta * s2.data()[i];
        CHECK(std::abs(lhs.data()[i] - rhs) <= 1e-12 * std::max(1.0, std::abs(rhs)));
    }
}

TEST_CASE("generate_filterset composes per-slice generation with placement") {
    Rng rng(37);
    const SliceShape ss{{16, 16, 3, 3}};
    const CsgMatrix g = init_csg(ss, 16, 37);
    const SliceGrid grid = make_grid({32, 32, 3, 3}, ss);
    REQUIRE(grid.slice_count() == 4);

    std::vector<CodeVector> codes;
    for (int i = 0; i < 4; ++i) codes.push_back(random_code(16, rng));
    const Tensor4 filters = generate_filterset(g, codes, grid);

    // Manual placement oracle: generate each slice and copy it into position.
    Tensor4 manual({32, 32, 3, 3});
    for (std::int64_t i = 0; i < 4; ++i) {
        const Tensor4 s = generate_slice(g, codes[static_cast<std::size_t>(i)]);
        const auto origin = grid.origin_of(i);
        for (std::int64_t a = 0; a < 16; ++a)
            for (std::int64_t b = 0; b < 16; ++b)
                for (std::int64_t c = 0; c < 3; ++c)
                    for (std::int64_t d = 0; d < 3; ++d)
                        manual(origin[0] + a, origin[1] + b, c, d) = s(a, b, c, d);
    }
    CHECK(filters.data() == manual.data());

    // Single slice reduces to generate_slice; zero codes give zero filters.
    const SliceGrid one = make_grid({16, 16, 3, 3}, ss);
    CHECK(generate_filterset(g, {codes[0]}, one).data() == generate_slice(g, codes[0]).data());
    std::vector<CodeVector> zeros(4, CodeVector{std::vector<double>(16, 0.0)});
    const Tensor4 from_zeros = generate_filterset(g, zeros, grid);
    for (double v : from_zeros.data()) CHECK(v == 0.0);

    CHECK_THROWS_AS(generate_filterset(g, codes, one), shape_error);
}

TEST_CASE("csg_backward matches the scalar chain rule") {
    const CsgMatrix g = init_csg(SliceShape{{2, 1, 1, 1}}, 1, 5);
    CodeVector c;
    c.values = {1.5};
    Tensor4 upstream({2, 1, 1, 1}, {0.25, -2.0});

    const CsgGradients grads = csg_backward(g, c, upstream);
    const double a0 = g.weights(0, 0), a1 = g.weights(1, 0);
    CHECK(grads.grad_code[0] == Catch::Approx(a0 * 0.25 + a1 * -2.0).margin(1e-15));
    CHECK(grads.grad_weights(0, 0) == Catch::Approx(0.25 * 1.5).margin(1e-15));
    CHECK(grads.grad_weights(1, 0) == Catch::Approx(-2.0 * 1.5).margin(1e-15));

    Tensor4 zero({2, 1, 1, 1});
    const CsgGradients none = csg_backward(g, c, zero);
    CHECK(none.grad_code[0] == 0.0);
    CHECK(none.grad_weights(0, 0) == 0.0);
}

TEST_CASE("csg_backward matches central finite differences") {
    Rng rng(41);
    CsgMatrix g = init_csg(SliceShape{{3, 2, 2, 2}}, 5, 41);
    CodeVector c = random_code(5, rng);
    const Tensor4 weight = random_tensor({3, 2, 2, 2}, rng);

    // Scalar functional: <weight, generate_slice(g, c)>. Its gradient w.r.t.
    // the generator and the code is csg_backward with upstream = weight.
    auto eval = [&]() {
        const Tensor4 s = generate_slice(g, c);
        double sum = 0.0;
        for (std::int64_t i = 0; i < s.size(); ++i) sum += weight.data()[i] * s.data()[i];
        return sum;
    };
    const CsgGradients grads = csg_backward(g, c, weight);

    for (std::size_t k = 0; k < c.values.size(); ++k) {
        const double numeric = oracle::central_diff(c.values[k], eval);
        CHECK(oracle::grad_discrepancy(grads.grad_code[k], numeric) <= 1e-7);
    }
    for (std::size_t i = 0; i < g.weights.data().size(); ++i) {
        const double numeric = oracle::central_diff(g.weights.data()[i], eval);
        CHECK(oracle::grad_discrepancy(grads.grad_weights.data()[i], numeric) <= 1e-7);
    }
}

TEST_CASE("encode_slice recovers codes for slices in the column space") {
    Rng rng(43);
    const CsgMatrix g = init_csg(SliceShape{{16, 16, 3, 3}}, 128, 43);
    const CodeVector c0 = random_code(128, rng);
    const Tensor4 slice = generate_slice(g, c0);
    const CodeVector back = encode_slice(g, slice);
    for (std::size_t i = 0; i < back.values.size(); ++i) {
        CHECK(std::abs(back.values[i] - c0.values[i]) <= 1e-8);
    }

    const Tensor4 zero(g.slice_shape.as_shape());
    const CodeVector zero_code = encode_slice(g, zero);
    for (double v : zero_code.values) CHECK(std::abs(v) <= 1e-12);
}

TEST_CASE("encode_slice residual is orthogonal to the column space") {
    Rng rng(47);
    const CsgMatrix g = init_csg(SliceShape{{16, 16, 3, 3}}, 128, 47);
    const Tensor4 slice = random_tensor({16, 16, 3, 3}, rng);
    const CodeVector code = encode_slice(g, slice);
    const Tensor4 projected = generate_slice(g, code);

    std::vector<double> residual(static_cast<std::size_t>(slice.size()));
    for (std::int64_t i = 0; i < slice.size(); ++i) {
        residual[static_cast<std::size_t>(i)] = projected.data()[i] - slice.data()[i];
    }
    const std::vector<double> against_columns = matvec_transposed(g.weights, residual);
    for (double v : against_columns) CHECK(std::abs(v) <= 1e-8);

    // Projection idempotence: encode(generate(encode(s))) == encode(s).
    const CodeVector again = encode_slice(g, projected);
    for (std::size_t i = 0; i < again.values.size(); ++i) {
        CHECK(std::abs(again.values[i] - code.values[i]) <= 1e-8);
    }
}

TEST_CASE("encode_slice rejects a rank-deficient generator") {
    CsgMatrix g = init_csg(SliceShape{{2, 2, 1, 1}}, 3, 11);
    for (std::int64_t r = 0; r < g.rows(); ++r) g.weights(r, 2) = g.weights(r, 0);  // duplicate
    const Tensor4 slice({2, 2, 1, 1}, {1.0, 2.0, 3.0, 4.0});
    CHECK_THROWS_WITH(encode_slice(g, slice),
                      Catch::Matchers::ContainsSubstring("rank-deficient") &&
                          Catch::Matchers::ContainsSubstring("condition"));
}

TEST_CASE("generator and code bank files round-trip") {
    namespace fs = std::filesystem;
    Rng rng(53);
    const auto wpath = fs::temp_directory_path() / "csg_test_weights.csgt";
    const auto cpath = fs::temp_directory_path() / "csg_test_codes.csgt";

    const CsgMatrix g = init_csg(SliceShape{{4, 4, 3, 3}}, 8, 53);
    write_csg_file(wpath.string(), g);
    const CsgMatrix back = read_csg_file(wpath.string(), g.slice_shape);
    CHECK(back.weights.data() == g.weights.data());
    CHECK_THROWS_AS(read_csg_file(wpath.string(), SliceShape{{4, 4, 3, 1}}), shape_error);

    std::vector<CodeVector> bank = init_code_bank(8, 5, 53);
    write_code_bank_file(cpath.string(), bank);
    const auto bank_back = read_code_bank_file(cpath.string());
    REQUIRE(bank_back.size() == bank.size());
    for (std::size_t i = 0; i < bank.size(); ++i) CHECK(bank_back[i].values == bank[i].values);

    fs::remove(wpath);
    fs::remove(cpath);
}
