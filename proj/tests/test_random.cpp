#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <vector>

#include "riskalign/random.hpp"

using riskalign::Rng;

TEST_CASE("engine matches the standard mt19937_64 sequence") {
    Rng rng(5489);
    std::mt19937_64 ref(5489);
    for (int i = 0; i < 100; ++i) CHECK(rng.next() == ref());
    // The 10000th output of a default-seeded mt19937_64 is fixed by the standard.
    Rng fresh(5489);
    std::uint64_t last = 0;
    for (int i = 0; i < 10000; ++i) last = fresh.next();
    CHECK(last == 9981545732273789042ULL);
}

TEST_CASE("uniform stays in [0,1) and has the right mean") {
    Rng rng(1);
    double sum = 0;
    for (int i = 0; i < 200000; ++i) {
        const double u = rng.uniform();
        REQUIRE(u >= 0.0);
        REQUIRE(u < 1.0);
        sum += u;
    }
    CHECK(sum / 200000 == doctest::Approx(0.5).epsilon(0.01));
}

TEST_CASE("below is unbiased over a small range") {
    Rng rng(2);
    std::vector<int> counts(7, 0);
    for (int i = 0; i < 70000; ++i) ++counts[rng.below(7)];
    for (int c : counts) CHECK(std::abs(c - 10000) < 400);
    CHECK(rng.below(1) == 0);
}

TEST_CASE("normal has mean 0 and variance 1") {
    Rng rng(3);
    double s = 0, s2 = 0;
    const int n = 200000;
    for (int i = 0; i < n; ++i) {
        const double z = rng.normal();
        s += z;
        s2 += z * z;
    }
    CHECK(std::abs(s / n) < 0.01);
    CHECK(s2 / n == doctest::Approx(1.0).epsilon(0.01));
}

TEST_CASE("shuffle is a permutation and seed-deterministic") {
    std::vector<int> a(50), b(50);
    std::iota(a.begin(), a.end(), 0);
    b = a;
    Rng r1(9), r2(9);
    r1.shuffle(a.begin(), a.end());
    r2.shuffle(b.begin(), b.end());
    CHECK(a == b);
    auto sorted = a;
    std::sort(sorted.begin(), sorted.end());
    for (int i = 0; i < 50; ++i) CHECK(sorted[i] == i);
    CHECK(a != sorted);
}

TEST_CASE("derived seeds separate streams") {
    using riskalign::derive_seed;
    CHECK(derive_seed(42, "smote") == derive_seed(42, "smote"));
    CHECK(derive_seed(42, "smote") != derive_seed(42, "split"));
    CHECK(derive_seed(42, 0) != derive_seed(43, 0));
    CHECK(derive_seed(42, 0) != derive_seed(42, 1));
    // FNV-1a reference values.
    CHECK(riskalign::hash_name("") == 0xcbf29ce484222325ULL);
    CHECK(riskalign::hash_name("a") == 0xaf63dc4c8601ec8cULL);
}
