#include <doctest.h>

#include <cmath>
#include <vector>

#include "sapr/rng.hpp"
#include "sapr/tensor.hpp"

using namespace sapr;

namespace {

Tensor random_tensor(Shape shape, std::uint64_t seed, double lo = -2.0, double hi = 2.0,
                     bool requires_grad = false) {
    RngStream rng(seed);
    std::size_t n = 1;
    for (auto e : shape) n *= e;
    std::vector<double> v(n);
    for (double& x : v) x = rng.uniform(lo, hi);
    return Tensor::from_vector(std::move(shape), std::move(v), requires_grad);
}

// Independent reference oracle: naive triple loop.
std::vector<double> matmul_reference(const Tensor& a, const Tensor& b) {
    const std::size_t m = a.extent(0), k = a.extent(1), n = b.extent(1);
    std::vector<double> out(m * n, 0.0);
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j)
            for (std::size_t kk = 0; kk < k; ++kk) out[i * n + j] += a.at(i, kk) * b.at(kk, j);
    return out;
}

} // namespace

TEST_CASE("matmul identity") {
    Tensor eye = Tensor::from_vector({2, 2}, {1, 0, 0, 1});
    Tensor b = Tensor::from_vector({2, 2}, {5, 6, 7, 8});
    Tensor out = matmul(eye, b);
    for (std::size_t i = 0; i < 4; ++i) CHECK(out.values()[i] == b.values()[i]);
}

TEST_CASE("matmul against hand value and triple-loop oracle") {
    Tensor a = Tensor::from_vector({2, 2}, {1, 2, 3, 4});
    Tensor b = Tensor::from_vector({2, 2}, {5, 6, 7, 8});
    Tensor out = matmul(a, b);
    CHECK(out.at(0, 0) == doctest::Approx(19).epsilon(1e-15));
    CHECK(out.at(0, 1) == doctest::Approx(22).epsilon(1e-15));
    CHECK(out.at(1, 0) == doctest::Approx(43).epsilon(1e-15));
    CHECK(out.at(1, 1) == doctest::Approx(50).epsilon(1e-15));

    Tensor ra = random_tensor({5, 7}, 1);
    Tensor rb = random_tensor({7, 3}, 2);
    Tensor rout = matmul(ra, rb);
    auto ref = matmul_reference(ra, rb);
    for (std::size_t i = 0; i < ref.size(); ++i)
        CHECK(rout.values()[i] == doctest::Approx(ref[i]).epsilon(1e-12));
}

TEST_CASE("matmul zero annihilates") {
    Tensor z = Tensor::zeros({3, 4});
    Tensor b = random_tensor({4, 2}, 3);
    Tensor out = matmul(z, b);
    for (double v : out.values()) CHECK(v == 0.0);
}

TEST_CASE("matmul shape error names both shapes") {
    Tensor a = Tensor::zeros({2, 3});
    Tensor b = Tensor::zeros({4, 5});
    try {
        matmul(a, b);
        FAIL("expected ShapeError");
    } catch (const ShapeError& e) {
        const std::string msg = e.what();
        CHECK(msg.find("[2x3]") != std::string::npos);
        CHECK(msg.find("[4x5]") != std::string::npos);
    }
}

TEST_CASE("softmax uniform row") {
    Tensor a = Tensor::from_vector({1, 4}, {3.7, 3.7, 3.7, 3.7});
    Tensor out = softmax_rows(a);
    for (double v : out.values()) CHECK(v == doctest::Approx(0.25).epsilon(1e-14));
}

TEST_CASE("softmax closed form for [0, ln 2]") {
    Tensor a = Tensor::from_vector({1, 2}, {0.0, std::log(2.0)});
    Tensor out = softmax_rows(a);
    CHECK(out.at(0, 0) == doctest::Approx(1.0 / 3.0).epsilon(1e-14));
    CHECK(out.at(0, 1) == doctest::Approx(2.0 / 3.0).epsilon(1e-14));
}

TEST_CASE("softmax shift invariance and row sums") {
    Tensor a = random_tensor({6, 9}, 4, -30.0, 30.0);
    Tensor shifted = affine(a, 1.0, 123.456);
    Tensor sa = softmax_rows(a);
    Tensor sb = softmax_rows(shifted);
    for (std::size_t i = 0; i < sa.size(); ++i)
        CHECK(sa.values()[i] == doctest::Approx(sb.values()[i]).epsilon(1e-12));
    for (std::size_t r = 0; r < 6; ++r) {
        double sum = 0.0;
        for (std::size_t c = 0; c < 9; ++c) {
            const double v = sa.at(r, c);
            CHECK(v > 0.0);
            CHECK(v < 1.0);
            sum += v;
        }
        CHECK(std::abs(sum - 1.0) <= 1e-12);
    }
}

TEST_CASE("softmax rejects non-finite input") {
    Tensor a = Tensor::from_vector({1, 2}, {std::nan(""), 0.0});
    CHECK_THROWS_AS(softmax_rows(a), NumericError);
    Tensor b = Tensor::from_vector({1, 2}, {std::numeric_limits<double>::infinity(), 0.0});
    CHECK_THROWS_AS(softmax_rows(b), NumericError);
}

TEST_CASE("layer_norm constant row maps to bias") {
    Tensor a = Tensor::from_vector({1, 4}, {5, 5, 5, 5});
    Tensor gain = Tensor::ones({4});
    Tensor bias = Tensor::zeros({4});
    Tensor out = layer_norm(a, gain, bias, 1e-5);
    for (double v : out.values()) CHECK(std::abs(v) < 1e-12);
}

TEST_CASE("layer_norm standardizes [1,-1]") {
    Tensor a = Tensor::from_vector({1, 2}, {1, -1});
    Tensor out = layer_norm(a, Tensor::ones({2}), Tensor::zeros({2}), 1e-12);
    CHECK(out.at(0, 0) == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(out.at(0, 1) == doctest::Approx(-1.0).epsilon(1e-9));
}

TEST_CASE("layer_norm gain zero recovers bias") {
    Tensor a = random_tensor({3, 5}, 5);
    Tensor bias = random_tensor({5}, 6);
    Tensor out = layer_norm(a, Tensor::zeros({5}), bias, 1e-5);
    for (std::size_t r = 0; r < 3; ++r)
        for (std::size_t c = 0; c < 5; ++c)
            CHECK(out.at(r, c) == doctest::Approx(bias.values()[c]).epsilon(1e-14));
}

TEST_CASE("zero-length extents are rejected at construction") {
    CHECK_THROWS_AS(Tensor::zeros({2, 0}), ShapeError);
}

TEST_CASE("layer_norm validates gain shape") {
    Tensor a = Tensor::zeros({2, 4});
    CHECK_THROWS_AS(layer_norm(a, Tensor::ones({3}), Tensor::zeros({4}), 1e-5), ShapeError);
}

TEST_CASE("gather and slice round trips") {
    Tensor a = random_tensor({6, 4}, 7);
    std::vector<std::size_t> idx{5, 0, 3};
    Tensor g = gather_rows(a, idx);
    CHECK(g.shape() == Shape{3, 4});
    for (std::size_t i = 0; i < idx.size(); ++i)
        for (std::size_t c = 0; c < 4; ++c) CHECK(g.at(i, c) == a.at(idx[i], c));

    Tensor left = slice_cols(a, 0, 2);
    Tensor right = slice_cols(a, 2, 4);
    const Tensor parts[] = {left, right};
    Tensor merged = concat_cols(parts);
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(merged.values()[i] == a.values()[i]);

    std::vector<std::size_t> bad{7};
    CHECK_THROWS_AS(gather_rows(a, bad), ContractError);
}

TEST_CASE("concat_rows stacks") {
    Tensor a = random_tensor({2, 3}, 8);
    Tensor b = random_tensor({1, 3}, 9);
    const Tensor parts[] = {a, b};
    Tensor out = concat_rows(parts);
    CHECK(out.shape() == Shape{3, 3});
    CHECK(out.at(2, 1) == b.at(0, 1));
}

TEST_CASE("extract_patches layout is row-major in patches") {
    // 1 channel, 4x4 image, patch 2 -> 4 patches of 4 values.
    std::vector<double> img(16);
    for (std::size_t i = 0; i < 16; ++i) img[i] = static_cast<double>(i);
    Tensor t = Tensor::from_vector({1, 4, 4}, img);
    Tensor p = extract_patches(t, 2);
    CHECK(p.shape() == Shape{4, 4});
    // patch (0,0): pixels (0,0),(0,1),(1,0),(1,1) = 0,1,4,5
    CHECK(p.at(0, 0) == 0.0);
    CHECK(p.at(0, 1) == 1.0);
    CHECK(p.at(0, 2) == 4.0);
    CHECK(p.at(0, 3) == 5.0);
    // patch (1,0) is row 2 in row-major patch order: pixels (2,0).. = 8,9,12,13
    CHECK(p.at(2, 0) == 8.0);
    CHECK(p.at(2, 3) == 13.0);
}

TEST_CASE("resize_pad_nearest places the crop and zeroes the rest") {
    Tensor t = random_tensor({1, 4, 4}, 10, 1.0, 2.0);
    Tensor out = resize_pad_nearest(t, 2, 1, 2);
    CHECK(out.shape() == t.shape());
    CHECK(out.at(0, 0, 0) == 0.0);
    CHECK(out.at(0, 1, 2) == t.at(0, 0, 0));
    CHECK_THROWS_AS(resize_pad_nearest(t, 5, 0, 0), ContractError);
    Tensor full = resize_pad_nearest(t, 4, 0, 0);
    for (std::size_t i = 0; i < t.size(); ++i) CHECK(full.values()[i] == t.values()[i]);
}

TEST_CASE("ops are deterministic bit for bit") {
    Tensor a = random_tensor({8, 8}, 11);
    Tensor b = random_tensor({8, 8}, 12);
    Tensor o1 = softmax_rows(matmul(a, b));
    Tensor o2 = softmax_rows(matmul(a, b));
    for (std::size_t i = 0; i < o1.size(); ++i) CHECK(o1.values()[i] == o2.values()[i]);
}
