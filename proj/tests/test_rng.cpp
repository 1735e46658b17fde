#include <catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <random>
#include <set>

#include "paforge/rng.hpp"

using namespace paforge;

TEST_CASE("splitmix64 matches the reference sequence", "[rng]") {
    // First output of the reference generator for state 0.
    CHECK(splitmix64(0) == 0xe220a8397b1dcdafull);
    CHECK(splitmix64(splitmix64(0)) != splitmix64(0));
}

TEST_CASE("engine bit sequence is the standard-mandated one", "[rng]") {
    // The standard pins the 10000th output of a default-seeded mt19937_64.
    std::mt19937_64 engine;
    engine.discard(9999);
    CHECK(engine() == 9981545732273789042ull);

    Rng a(7), b(7), c(8);
    std::mt19937_64 raw(splitmix64(7));
    CHECK(a.next_u64() == raw());
    CHECK(a.next_u64() == raw());
    b.next_u64();
    CHECK(a.next_u64() != c.next_u64());
}

TEST_CASE("below stays in range and reaches every value", "[rng]") {
    Rng rng(3);
    CHECK(rng.below(0) == 0);
    CHECK(rng.below(1) == 0);
    std::set<std::uint64_t> seen;
    for (int i = 0; i < 500; ++i) {
        auto v = rng.below(7);
        CHECK(v < 7);
        seen.insert(v);
    }
    CHECK(seen.size() == 7);
    for (int i = 0; i < 100; ++i) CHECK(rng.below(1ull << 62) < (1ull << 62));
}

TEST_CASE("unit and normal have sane distributions", "[rng]") {
    Rng rng(11);
    double sum = 0.0, sq = 0.0;
    const int n = 20000;
    for (int i = 0; i < n; ++i) {
        double u = rng.unit();
        REQUIRE(u >= 0.0);
        REQUIRE(u < 1.0);
        sum += u;
        sq += u * u;
    }
    CHECK_THAT(sum / n, Catch::Matchers::WithinAbs(0.5, 0.01));

    sum = sq = 0.0;
    for (int i = 0; i < n; ++i) {
        double z = rng.normal();
        sum += z;
        sq += z * z;
    }
    CHECK_THAT(sum / n, Catch::Matchers::WithinAbs(0.0, 0.03));
    CHECK_THAT(std::sqrt(sq / n), Catch::Matchers::WithinAbs(1.0, 0.03));
}

TEST_CASE("shuffle permutes and is seed-deterministic", "[rng]") {
    std::vector<int> v{1, 2, 3, 4, 5, 6, 7, 8};
    auto sorted = v;
    Rng(5).shuffle(v);
    auto once = v;
    std::sort(v.begin(), v.end());
    CHECK(v == sorted);

    std::vector<int> w{1, 2, 3, 4, 5, 6, 7, 8};
    Rng(5).shuffle(w);
    CHECK(w == once);
}

TEST_CASE("permutation covers 0..n-1", "[rng]") {
    auto p = Rng(9).permutation(40);
    REQUIRE(p.size() == 40);
    std::sort(p.begin(), p.end());
    for (std::size_t i = 0; i < p.size(); ++i) CHECK(p[i] == i);
}
