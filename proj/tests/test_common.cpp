#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <numeric>
#include <string>
#include <vector>

#include "hum/common.hpp"
#include "hum/tensor.hpp"

using namespace hum;

TEST_CASE("uniform01 range and determinism") {
    rng_t a(42), b(42);
    for (int i = 0; i < 10000; ++i) {
        const double x = uniform01(a);
        REQUIRE(x >= 0.0);
        REQUIRE(x < 1.0);
        REQUIRE(x == uniform01(b));
    }
}

TEST_CASE("uniform_below bounds and coverage") {
    rng_t rng(7);
    std::vector<int> counts(8, 0);
    const int n = 80000;
    for (int i = 0; i < n; ++i) {
        const auto v = uniform_below(rng, 8);
        REQUIRE(v < 8);
        ++counts[static_cast<std::size_t>(v)];
    }
    for (int c : counts) {
        // Expected 10000 per bucket, binomial sd ~94; allow 5 sd.
        REQUIRE(std::abs(c - 10000) < 500);
    }
    REQUIRE(uniform_below(rng, 1) == 0);
    REQUIRE_THROWS_AS(uniform_below(rng, 0), std::invalid_argument);
}

TEST_CASE("normal01 moments") {
    rng_t rng(3);
    const int n = 200000;
    double sum = 0, sumsq = 0;
    for (int i = 0; i < n; ++i) {
        const double x = normal01(rng);
        sum += x;
        sumsq += x * x;
    }
    const double mean = sum / n;
    const double var = sumsq / n - mean * mean;
    REQUIRE(std::abs(mean) < 0.01);
    REQUIRE(std::abs(var - 1.0) < 0.02);
}

TEST_CASE("normal01 consumes exactly two raw draws") {
    rng_t a(99), b(99);
    (void)normal01(a);
    (void)b();
    (void)b();
    REQUIRE(a() == b());
}

TEST_CASE("shuffle is a deterministic permutation") {
    std::vector<int> v(100);
    std::iota(v.begin(), v.end(), 0);
    auto w = v;
    rng_t r1(5), r2(5);
    shuffle_inplace(v, r1);
    shuffle_inplace(w, r2);
    REQUIRE(v == w);
    auto sorted = v;
    std::sort(sorted.begin(), sorted.end());
    std::vector<int> expect(100);
    std::iota(expect.begin(), expect.end(), 0);
    REQUIRE(sorted == expect);
    REQUIRE(v != expect); // astronomically unlikely to be identity
}

TEST_CASE("derive_seed separates streams") {
    const auto a = derive_seed(1, fnv1a64("alpha"));
    const auto b = derive_seed(1, fnv1a64("beta"));
    const auto c = derive_seed(2, fnv1a64("alpha"));
    REQUIRE(a != b);
    REQUIRE(a != c);
    REQUIRE(derive_seed(1, fnv1a64("alpha")) == a);
}

TEST_CASE("fnv1a64 reference values") {
    REQUIRE(fnv1a64("") == 0xcbf29ce484222325ull);
    REQUIRE(fnv1a64("a") == 0xaf63dc4c8601ec8cull);
}

TEST_CASE("format_double round-trips bitwise") {
    const double values[] = {0.0,     -0.0,   0.1,      1.0 / 3.0, 1e-300,
                             123456.75, 2.5e17, -1.25e-7, 3.141592653589793};
    for (double v : values) {
        const std::string s = format_double(v);
        double back = 0;
        const auto res = std::from_chars(s.data(), s.data() + s.size(), back);
        REQUIRE(res.ec == std::errc());
        REQUIRE(std::memcmp(&back, &v, sizeof v) == 0);
    }
}

TEST_CASE("matmul matches hand computation") {
    Mat<double> a(2, 3), b(3, 2), c(2, 2);
    double k = 1;
    for (auto& x : a.a) x = k++;
    for (auto& x : b.a) x = k++;
    matmul(a, b, c, false);
    // a = [1 2 3; 4 5 6], b = [7 8; 9 10; 11 12]
    REQUIRE(c.at(0, 0) == 58.0);
    REQUIRE(c.at(0, 1) == 64.0);
    REQUIRE(c.at(1, 0) == 139.0);
    REQUIRE(c.at(1, 1) == 154.0);

    Mat<double> bt(2, 3);
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 2; ++j) bt.at(j, i) = b.at(i, j);
    Mat<double> c2(2, 2);
    matmul_bt(a, bt, c2, false);
    REQUIRE(c2.at(0, 0) == c.at(0, 0));
    REQUIRE(c2.at(1, 1) == c.at(1, 1));

    Mat<double> at(3, 2);
    for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 3; ++j) at.at(j, i) = a.at(i, j);
    Mat<double> c3(2, 2);
    matmul_at(at, b, c3, false);
    REQUIRE(c3.at(0, 1) == c.at(0, 1));
    REQUIRE(c3.at(1, 0) == c.at(1, 0));

    matmul(a, b, c, true); // accumulate doubles the result
    REQUIRE(c.at(0, 0) == 116.0);

    Mat<double> bad(4, 2);
    REQUIRE_THROWS_AS(matmul(a, bad, c, false), std::invalid_argument);
}
