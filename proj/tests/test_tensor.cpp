#include <catch2/catch_amalgamated.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "csg/rng.hpp"
#include "csg/tensor.hpp"
#include "csg/tensor_io.hpp"
#include "oracles.hpp"

using namespace csg;

namespace {

Tensor4 random_tensor(const Shape4& shape, Rng& rng, double scale = 1.0) {
    Tensor4 t(shape);
    for (double& v : t.data()) v = rng.uniform(-scale, scale);
    return t;
}

std::filesystem::path temp_file(const std::string& name) {
    return std::filesystem::temp_directory_path() / name;
}

}  // namespace

TEST_CASE("vectorize follows row-major last-index-fastest order") {
    CHECK(vectorize(Tensor4({1, 1, 1, 1}, {7.0})) == std::vector<double>{7.0});

    Tensor4 t({1, 1, 2, 2}, {1.0, 2.0, 3.0, 4.0});
    CHECK(t(0, 0, 0, 0) == 1.0);
    CHECK(t(0, 0, 0, 1) == 2.0);
    CHECK(t(0, 0, 1, 0) == 3.0);
    CHECK(vectorize(t) == std::vector<double>{1.0, 2.0, 3.0, 4.0});

    Tensor4 u({2, 1, 1, 2});
    u(0, 0, 0, 0) = 1.0;
    u(0, 0, 0, 1) = 2.0;
    u(1, 0, 0, 0) = 3.0;
    u(1, 0, 0, 1) = 4.0;
    CHECK(vectorize(u) == std::vector<double>{1.0, 2.0, 3.0, 4.0});
}

TEST_CASE("devectorize inverts vectorize for random shapes") {
    Rng rng(11);
    for (int trial = 0; trial < 20; ++trial) {
        const Shape4 shape = {1 + static_cast<std::int64_t>(rng.below(4)),
                              1 + static_cast<std::int64_t>(rng.below(4)),
                              1 + static_cast<std::int64_t>(rng.below(3)),
                              1 + static_cast<std::int64_t>(rng.below(3))};
        const Tensor4 t = random_tensor(shape, rng);
        const Tensor4 back = devectorize(vectorize(t), shape);
        CHECK(back.data() == t.data());
    }
}

TEST_CASE("tensor construction rejects bad input") {
    CHECK_THROWS_AS(Tensor4({0, 1, 1, 1}), value_error);
    CHECK_THROWS_AS(Tensor4({1, 1, 1, 2}, {1.0}), shape_error);
    CHECK_THROWS_AS(Tensor4({1, 1, 1, 1}, {std::nan("")}), value_error);
}

TEST_CASE("matvec matches identity and zero cases") {
    Matrix eye(3, 3);
    for (int i = 0; i < 3; ++i) eye(i, i) = 1.0;
    CHECK(matvec(eye, {1.0, 2.0, 3.0}) == std::vector<double>{1.0, 2.0, 3.0});

    Matrix zero(2, 2);
    CHECK(matvec(zero, {5.0, -3.0}) == std::vector<double>{0.0, 0.0});

    CHECK_THROWS_AS(matvec(eye, {1.0, 2.0}), shape_error);
}

TEST_CASE("matvec agrees with the naive-loop oracle") {
    Rng rng(17);
    Matrix a(5, 3);
    for (double& v : a.data()) v = rng.uniform(-2.0, 2.0);
    std::vector<double> x = {rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)};
    const auto got = matvec(a, x);
    const auto want = oracle::matvec_naive(a, x);
    for (std::size_t i = 0; i < want.size(); ++i) {
        CHECK(std::abs(got[i] - want[i]) <= 1e-12);
    }
}

TEST_CASE("matvec is linear") {
    Rng rng(23);
    Matrix a(7, 4);
    for (double& v : a.data()) v = rng.uniform(-1.0, 1.0);
    std::vector<double> x(4), y(4);
    for (auto& v : x) v = rng.uniform(-1, 1);
    for (auto& v : y) v = rng.uniform(-1, 1);
    const double alpha = 0.7, beta = -1.3;

    std::vector<double> combo(4);
    for (int i = 0; i < 4; ++i) combo[i] = alpha * x[i] + beta * y[i];
    const auto lhs = matvec(a, combo);
    const auto ax = matvec(a, x);
    const auto ay = matvec(a, y);
    for (std::size_t i = 0; i < lhs.size(); ++i) {
        const double rhs = alpha * ax[i] + beta * ay[i];
        CHECK(std::abs(lhs[i] - rhs) <= 1e-12 * std::max(1.0, std::abs(rhs)));
    }
}

TEST_CASE("tensor file round-trip is bit-exact for f64") {
    const auto path = temp_file("csg_test_tensor.csgt");
    Tensor4 t({2, 2, 3, 3});
    for (std::int64_t i = 0; i < t.size(); ++i) t.data()[i] = static_cast<double>(i + 1);
    write_tensor_file(path.string(), t);
    const Tensor4 back = read_tensor_file(path.string());
    CHECK(back.shape() == t.shape());
    CHECK(back.data() == t.data());
    std::filesystem::remove(path);
}

TEST_CASE("f32 payloads survive with float precision") {
    const auto path = temp_file("csg_test_tensor_f32.csgt");
    Rng rng(5);
    const Tensor4 t = random_tensor({2, 3, 2, 2}, rng);
    write_tensor_file(path.string(), t, Dtype::f32);
    const Tensor4 back = read_tensor_file(path.string());
    for (std::int64_t i = 0; i < t.size(); ++i) {
        CHECK(back.data()[i] == static_cast<double>(static_cast<float>(t.data()[i])));
    }
    std::filesystem::remove(path);
}

TEST_CASE("corpus round-trip preserves all slices") {
    const auto path = temp_file("csg_test_corpus.csgt");
    Rng rng(31);
    std::vector<Tensor4> corpus;
    for (int i = 0; i < 10; ++i) corpus.push_back(random_tensor({16, 16, 3, 3}, rng));
    write_corpus_file(path.string(), corpus);
    const auto back = read_corpus_file(path.string());
    REQUIRE(back.size() == corpus.size());
    for (std::size_t i = 0; i < corpus.size(); ++i) CHECK(back[i].data() == corpus[i].data());
    std::filesystem::remove(path);
}

TEST_CASE("reader rejects malformed containers") {
    const auto path = temp_file("csg_test_bad.csgt");

    SECTION("bad magic") {
        std::ofstream(path, std::ios::binary) << "NOPE1234567890";
        CHECK_THROWS_WITH(read_tensor_file(path.string()),
                          Catch::Matchers::ContainsSubstring("bad magic"));
    }
    SECTION("truncated payload") {
        Tensor4 t({2, 2, 2, 2});
        write_tensor_file(path.string(), t);
        std::filesystem::resize_file(path, std::filesystem::file_size(path) - 9);
        CHECK_THROWS_WITH(read_tensor_file(path.string()),
                          Catch::Matchers::ContainsSubstring("truncated"));
    }
    SECTION("dimension overflow") {
        std::string bytes = "CSGT";
        bytes += '\x01';
        bytes += '\x00';  // version 1
        bytes += '\x02';  // f64
        bytes += '\x04';  // rank 4
        for (int d = 0; d < 4; ++d) {
            bytes += '\xff';
            bytes += '\xff';
            bytes += '\xff';
            bytes += '\x7f';
        }
        std::ofstream(path, std::ios::binary) << bytes;
        CHECK_THROWS_WITH(read_tensor_file(path.string()),
                          Catch::Matchers::ContainsSubstring("overflow"));
    }
    SECTION("non-finite payload") {
        Tensor4 t({1, 1, 1, 2});
        write_tensor_file(path.string(), t);
        std::fstream f(path, std::ios::binary | std::ios::in | std::ios::out);
        f.seekp(-8, std::ios::end);
        const std::uint64_t inf_bits = 0x7ff0000000000000ull;
        for (int b = 0; b < 8; ++b) f.put(static_cast<char>((inf_bits >> (8 * b)) & 0xff));
        f.close();
        CHECK_THROWS_WITH(read_tensor_file(path.string()),
                          Catch::Matchers::ContainsSubstring("non-finite"));
    }
    SECTION("rank mismatch between readers") {
        Tensor4 t({1, 1, 1, 2});
        write_tensor_file(path.string(), t);
        CHECK_THROWS_AS(read_corpus_file(path.string()), io_error);
    }
    std::filesystem::remove(path);
}
