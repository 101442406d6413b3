#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "sapr/rng.hpp"

using sapr::RngStream;

TEST_CASE("identical seed and keys reproduce the stream") {
    RngStream a(42, {7, 9});
    RngStream b(42, {7, 9});
    for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());
}

TEST_CASE("distinct keys give distinct streams") {
    RngStream a(42, {7});
    RngStream b(42, {8});
    int same = 0;
    for (int i = 0; i < 64; ++i)
        if (a.next_u64() == b.next_u64()) ++same;
    CHECK(same == 0);
}

TEST_CASE("derive is independent of parent consumption") {
    RngStream a(1);
    RngStream c1 = a.derive(5);
    a.next_u64();
    a.next_u64();
    RngStream a2(1);
    RngStream c2 = a2.derive(5);
    for (int i = 0; i < 16; ++i) CHECK(c1.next_u64() == c2.next_u64());
}

TEST_CASE("uniform01 stays inside the open unit interval") {
    RngStream rng(3);
    for (int i = 0; i < 10000; ++i) {
        const double u = rng.uniform01();
        CHECK(u > 0.0);
        CHECK(u < 1.0);
    }
}

TEST_CASE("normal draws have roughly standard moments") {
    RngStream rng(11);
    const int n = 20000;
    double sum = 0.0, sq = 0.0;
    for (int i = 0; i < n; ++i) {
        const double x = rng.normal();
        sum += x;
        sq += x * x;
    }
    const double mean = sum / n;
    const double var = sq / n - mean * mean;
    CHECK(std::abs(mean) < 0.03);
    CHECK(std::abs(var - 1.0) < 0.05);
}

TEST_CASE("permutation is a bijection") {
    RngStream rng(5);
    auto p = rng.permutation(257);
    std::vector<bool> seen(p.size(), false);
    for (std::size_t v : p) {
        REQUIRE(v < p.size());
        CHECK(!seen[v]);
        seen[v] = true;
    }
}

TEST_CASE("uniform_index respects the bound") {
    RngStream rng(6);
    for (int i = 0; i < 1000; ++i) CHECK(rng.uniform_index(7) < 7);
}

TEST_CASE("mix_keys is stable and key-sensitive") {
    CHECK(RngStream::mix_keys(1, {2, 3}) == RngStream::mix_keys(1, {2, 3}));
    CHECK(RngStream::mix_keys(1, {2, 3}) != RngStream::mix_keys(1, {3, 2}));
    CHECK(RngStream::mix_keys(1, {2}) != RngStream::mix_keys(2, {2}));
}
