#include <catch2/catch_amalgamated.hpp>

#include <cstdint>
#include <set>

#include "fixture_gen.hpp"
#include "skillforge/stats.hpp"

namespace sf = skillforge;
using fixtures::thrown;

TEST_CASE("pcg32 reproduces the reference sequence", "[stats][rng]") {
    // First outputs of the round-1 demo stream, seed 42 / sequence 54.
    sf::pcg32 g(42, 54);
    const uint32_t want[6] = {0xa15c02b7u, 0x7b47f409u, 0xba1d3330u,
                              0x83d2f293u, 0xbfa4784bu, 0xcbed606eu};
    for (uint32_t w : want) CHECK(g.next() == w);

    sf::pcg32 g1(42, 54), g2(42, 54);
    for (int i = 0; i < 100; ++i) REQUIRE(g1.next() == g2.next());

    // distinct streams from the same seed diverge immediately
    sf::pcg32 h(42, 55);
    CHECK(h.next() != 0xa15c02b7u);
}

TEST_CASE("pcg32 derived draws", "[stats][rng]") {
    sf::pcg32 g(91, 12);
    CHECK(g.bounded(0) == 0);
    CHECK(g.bounded(1) == 0);
    std::set<uint32_t> seen;
    for (int i = 0; i < 1000; ++i) {
        uint32_t v = g.bounded(7);
        CHECK(v < 7);
        seen.insert(v);
    }
    CHECK(seen.size() == 7);

    double sum = 0;
    for (int i = 0; i < 10000; ++i) {
        double u = g.uniform();
        REQUIRE(u >= 0.0);
        REQUIRE(u < 1.0);
        sum += u;
    }
    CHECK(sum / 10000 == Catch::Approx(0.5).margin(0.02));

    int hits = 0;
    for (int i = 0; i < 10000; ++i) hits += g.bernoulli(0.25) ? 1 : 0;
    CHECK(hits / 10000.0 == Catch::Approx(0.25).margin(0.02));
}

TEST_CASE("fnv1a matches the published vectors", "[stats][rng]") {
    CHECK(sf::fnv1a(std::string{}) == 14695981039346656037ULL);
    CHECK(sf::fnv1a(std::string{"a"}) == 0xaf63dc4c8601ec8cULL);
    CHECK(sf::fnv1a(std::string{"foobar"}) == 0x85944171f73967e8ULL);
    // chaining: hashing "ab" equals hashing "b" seeded with the hash of "a"
    CHECK(sf::fnv1a(std::string{"ab"}) == sf::fnv1a(std::string{"b"}, sf::fnv1a(std::string{"a"})));
    CHECK(sf::fnv1a(std::string{"ab"}) != sf::fnv1a(std::string{"ba"}));
}

TEST_CASE("percentile interpolation", "[stats]") {
    std::vector<double> v{1, 2, 3, 4};
    CHECK(sf::detail::percentile_sorted(v, 0.5) == Catch::Approx(2.5).margin(1e-12));
    CHECK(sf::detail::percentile_sorted(v, 0.25) == Catch::Approx(1.75).margin(1e-12));
    CHECK(sf::detail::percentile_sorted(v, 0.0) == 1.0);
    CHECK(sf::detail::percentile_sorted(v, 1.0) == 4.0);
    CHECK(sf::detail::percentile_sorted({42.0}, 0.3) == 42.0);
    std::vector<double> w{10, 20};
    CHECK(sf::detail::percentile_sorted(w, 0.975) == Catch::Approx(19.75).margin(1e-12));
}

TEST_CASE("paired bootstrap degenerate inputs", "[stats]") {
    std::vector<int> ones(50, 1), zeros(50, 0);

    auto same = sf::paired_bootstrap(ones, ones, 200, 3);
    CHECK(same.diff.point == 0.0);
    CHECK(same.diff.lo == 0.0);
    CHECK(same.diff.hi == 0.0);
    CHECK(same.a.point == 100.0);
    CHECK(same.a.lo == 100.0);

    auto apart = sf::paired_bootstrap(ones, zeros, 200, 3);
    CHECK(apart.diff.point == 100.0);
    CHECK(apart.diff.lo == 100.0);
    CHECK(apart.diff.hi == 100.0);
    CHECK(apart.b.hi == 0.0);
}

TEST_CASE("paired bootstrap validation", "[stats]") {
    std::vector<int> a{1, 0, 1}, b{1, 1, 0};
    CHECK(thrown([&] { sf::paired_bootstrap(a, {1, 0}); }) == sf::errc::length_mismatch);
    CHECK(thrown([&] { sf::paired_bootstrap({}, {}); }) == sf::errc::empty_input);
    CHECK(thrown([&] { sf::paired_bootstrap(a, b, 0); }) == sf::errc::config_invalid);
    CHECK(thrown([&] { sf::paired_bootstrap(a, b, 1000, 7, 0.0); }) == sf::errc::config_invalid);
    CHECK(thrown([&] { sf::paired_bootstrap(a, b, 1000, 7, 1.0); }) == sf::errc::config_invalid);
    CHECK(thrown([&] { sf::paired_bootstrap(a, b, 1000, 7, 1.5); }) == sf::errc::config_invalid);
    CHECK(thrown([&] { sf::paired_bootstrap({1, 2, 0}, a); }) == sf::errc::invariant_violation);
    CHECK(thrown([&] { sf::paired_bootstrap(a, {1, -1, 0}); }) == sf::errc::invariant_violation);
    CHECK_NOTHROW(sf::paired_bootstrap(a, b, 1));
}

TEST_CASE("paired bootstrap is a pure function of its arguments", "[stats]") {
    auto p = fixtures::planted_pair();
    auto r1 = sf::paired_bootstrap(p.a, p.b, 500, 7);
    auto r2 = sf::paired_bootstrap(p.a, p.b, 500, 7);
    CHECK(r1.a.lo == r2.a.lo);
    CHECK(r1.a.hi == r2.a.hi);
    CHECK(r1.b.lo == r2.b.lo);
    CHECK(r1.b.hi == r2.b.hi);
    CHECK(r1.diff.lo == r2.diff.lo);
    CHECK(r1.diff.hi == r2.diff.hi);

    // another seed resamples differently
    auto r3 = sf::paired_bootstrap(p.a, p.b, 500, 8);
    CHECK((r1.diff.lo != r3.diff.lo || r1.diff.hi != r3.diff.hi));
}

TEST_CASE("planted 910-task pair: interval geometry", "[stats]") {
    auto p = fixtures::planted_pair();
    for (uint64_t seed : {7ULL, 8ULL, 9ULL}) {
        auto r = sf::paired_bootstrap(p.a, p.b, 1000, seed);
        INFO("seed " << seed);
        CHECK(r.a.point == Catch::Approx(p.sr_a).margin(1e-12));
        CHECK(r.b.point == Catch::Approx(p.sr_b).margin(1e-12));
        CHECK(r.diff.point == Catch::Approx(p.sr_a - p.sr_b).margin(1e-12));
        CHECK(r.diff.lo <= r.diff.point);
        CHECK(r.diff.point <= r.diff.hi);
        CHECK(r.diff.lo > 0.0); // the planted gap is significant at alpha=.05
        double half = (r.diff.hi - r.diff.lo) / 2.0;
        CHECK(half > 1.0);
        CHECK(half < 3.0);
        CHECK(r.a.lo <= r.a.point);
        CHECK(r.a.point <= r.a.hi);
    }

    // widening alpha narrows the percentile interval
    auto wide = sf::paired_bootstrap(p.a, p.b, 1000, 7, 0.05);
    auto narrow = sf::paired_bootstrap(p.a, p.b, 1000, 7, 0.5);
    CHECK(narrow.diff.lo >= wide.diff.lo);
    CHECK(narrow.diff.hi <= wide.diff.hi);
}

TEST_CASE("mcnemar exact p-values", "[stats]") {
    CHECK(sf::mcnemar_exact(0, 0) == 1.0);
    CHECK(sf::mcnemar_exact(10, 0) == Catch::Approx(0.001953125).margin(1e-12));
    CHECK(sf::mcnemar_exact(0, 10) == Catch::Approx(0.001953125).margin(1e-12));
    CHECK(sf::mcnemar_exact(0, 6) == Catch::Approx(0.03125).margin(1e-12));
    // cumulative C(10,0)+C(10,1)+C(10,2) = 56 over 2^10, doubled
    CHECK(sf::mcnemar_exact(2, 8) == Catch::Approx(0.109375).margin(1e-12));
    CHECK(sf::mcnemar_exact(8, 2) == sf::mcnemar_exact(2, 8));
    CHECK(sf::mcnemar_exact(3, 7) == sf::mcnemar_exact(7, 3));
    // balanced tables clamp at 1
    CHECK(sf::mcnemar_exact(1, 1) == 1.0);
    CHECK(sf::mcnemar_exact(5, 5) == 1.0);
    CHECK(sf::mcnemar_exact(200, 200) == 1.0);
    CHECK(thrown([] { sf::mcnemar_exact(-1, 5); }) == sf::errc::negative_count);
    CHECK(thrown([] { sf::mcnemar_exact(5, -1); }) == sf::errc::negative_count);

    // monotone in the imbalance at fixed m
    double prev = 1.0;
    for (long long b = 5; b <= 10; ++b) {
        double p = sf::mcnemar_exact(b, 10 - b);
        CHECK(p <= prev + 1e-15);
        prev = p;
    }
}

TEST_CASE("compare_outcomes on the planted pair", "[stats]") {
    auto p = fixtures::planted_pair();
    auto cmp = sf::compare_outcomes(p.a, p.b, 1000, 7);
    CHECK(cmp.n11 == p.n11);
    CHECK(cmp.n10 == p.n10);
    CHECK(cmp.n01 == p.n01);
    CHECK(cmp.n00 == p.n00);
    CHECK(cmp.mcnemar_p == sf::mcnemar_exact(88, 48));
    CHECK(cmp.mcnemar_p < 0.001);
    CHECK(cmp.mcnemar_p > 1e-5);
    CHECK(cmp.bootstrap.diff.point == Catch::Approx(100.0 * 40 / 910).margin(1e-12));
    CHECK(cmp.bootstrap.iterations == 1000);
    CHECK(cmp.bootstrap.seed == 7);
}
