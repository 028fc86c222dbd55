#include <atomic>
#include <bit>
#include <random>
#include <thread>

#include "doctest.h"
#include "dor/attribution.hpp"

using namespace dor;

TEST_CASE("constant utilities give every agent zero") {
    auto u = [](CoalitionMask) { return 5.0; };
    for (double phi : shapley(u, 3)) CHECK(phi == 0.0);
}

TEST_CASE("symmetric two-agent game splits the loss evenly") {
    auto u = [](CoalitionMask c) {
        switch (std::popcount(c)) {
            case 0: return 2.0;
            case 1: return 1.0;
            default: return 0.0;
        }
    };
    auto phi = shapley(u, 2);
    CHECK(phi[0] == doctest::Approx(-1.0).epsilon(1e-15));
    CHECK(phi[1] == doctest::Approx(-1.0).epsilon(1e-15));
}

TEST_CASE("efficiency, null player and symmetry hold on random games") {
    std::mt19937_64 rng(101);
    std::uniform_real_distribution<double> d(-3.0, 3.0);
    for (int round = 0; round < 50; ++round) {
        const std::size_t n = 2 + (round % 3);
        std::vector<double> table(1u << n);
        for (double& v : table) v = d(rng);
        auto u = [&](CoalitionMask c) { return table[c]; };
        auto phi = shapley(u, n);

        double total = 0.0;
        for (double p : phi) total += p;
        CHECK(total == doctest::Approx(table[full_mask(n)] - table[0]).epsilon(1e-9));
    }

    // null player: utilities never depend on the last agent's membership
    auto null_u = [](CoalitionMask c) { return double(std::popcount(c & 0b011u)); };
    auto phi = shapley(null_u, 3);
    CHECK(phi[2] == 0.0);

    // symmetry: agents 0 and 1 are interchangeable
    auto sym_u = [](CoalitionMask c) {
        int k = std::popcount(c & 0b011u);
        return k == 2 ? 4.0 : (k == 1 ? 1.5 : 0.0) + ((c & 0b100u) ? 0.25 : 0.0);
    };
    auto sym_phi = shapley(sym_u, 3);
    CHECK(sym_phi[0] == doctest::Approx(sym_phi[1]).epsilon(1e-12));
}

TEST_CASE("permuting two interchangeable agents permutes the values") {
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> d(-2.0, 2.0);
    std::vector<double> table(1u << 3);
    for (double& v : table) v = d(rng);
    auto u = [&](CoalitionMask c) { return table[c]; };
    // swap agents 0 and 1 inside the mask
    auto swapped = [&](CoalitionMask c) {
        CoalitionMask rest = c & ~0b011u;
        CoalitionMask swapped_bits = ((c & 1u) << 1) | ((c >> 1) & 1u);
        return table[rest | swapped_bits];
    };
    auto phi = shapley(u, 3);
    auto phi_swapped = shapley(swapped, 3);
    CHECK(phi[0] == doctest::Approx(phi_swapped[1]).epsilon(1e-12));
    CHECK(phi[1] == doctest::Approx(phi_swapped[0]).epsilon(1e-12));
    CHECK(phi[2] == doctest::Approx(phi_swapped[2]).epsilon(1e-12));
}

TEST_CASE("restriction to the full set reproduces the plain value exactly") {
    std::mt19937_64 rng(19);
    std::uniform_real_distribution<double> d(-2.0, 2.0);
    std::vector<double> table(1u << 4);
    for (double& v : table) v = d(rng);
    auto u = [&](CoalitionMask c) { return table[c]; };
    auto full = shapley(u, 4);
    auto restricted = restricted_shapley(u, full_mask(4), 4);
    for (std::size_t i = 0; i < 4; ++i) CHECK(full[i] == restricted[i]);

    for (double phi : restricted_shapley(u, 0, 4)) CHECK(phi == 0.0);
}

TEST_CASE("restriction mirrors a screened three-agent game") {
    // agent 1 (middle) is null; agents 0 and 2 are symmetric
    auto u = [](CoalitionMask c) { return (c & 0b101u) ? 1.0 : 2.0; };
    auto phi = restricted_shapley(u, 0b101u, 3);
    CHECK(phi[0] == doctest::Approx(phi[2]).epsilon(1e-15));
    CHECK(phi[1] == 0.0);
    auto full = shapley(u, 3);
    CHECK(full[1] == 0.0);
}

TEST_CASE("normalization turns shapley values into degrees of responsibility") {
    auto psi1 = dor_from_shapley({-2.0, 0.0});
    CHECK(psi1[0] == 1.0);
    CHECK(psi1[1] == 0.0);

    auto psi2 = dor_from_shapley({-1.0, 0.0, -1.0});
    CHECK(psi2[0] == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(psi2[1] == 0.0);
    CHECK(psi2[2] == doctest::Approx(0.5).epsilon(1e-15));

    auto psi3 = dor_from_shapley({0.0, 0.0});
    CHECK(psi3[0] == 0.0);
    CHECK(psi3[1] == 0.0);

    CHECK_THROWS_AS(dor_from_shapley({0.5, -1.0}), invariant_error);
}

TEST_CASE("scaling utilities rescales phi and leaves psi unchanged") {
    std::vector<double> phi = {-0.75, -0.25, 0.0};
    auto psi = dor_from_shapley(phi);
    std::vector<double> doubled;
    for (double p : phi) doubled.push_back(2.0 * p);
    auto psi2 = dor_from_shapley(doubled);
    for (std::size_t i = 0; i < phi.size(); ++i) CHECK(psi[i] == psi2[i]);

    std::vector<double> scaled;
    for (double p : phi) scaled.push_back(3.0 * p);
    auto psi3 = dor_from_shapley(scaled);
    for (std::size_t i = 0; i < phi.size(); ++i)
        CHECK(psi[i] == doctest::Approx(psi3[i]).epsilon(1e-12));
}

TEST_CASE("utility cache evaluates each coalition once, even concurrently") {
    std::atomic<int> calls{0};
    UtilityCache cache([&](CoalitionMask c) {
        calls.fetch_add(1);
        return double(c);
    });
    std::vector<std::thread> pool;
    for (int w = 0; w < 4; ++w)
        pool.emplace_back([&] {
            for (CoalitionMask c = 0; c < 8; ++c) CHECK(cache(c) == double(c));
        });
    for (auto& th : pool) th.join();
    // a mask may race once on first touch, but the table has exactly 8 entries
    CHECK(cache.snapshot().size() == 8);
    CHECK(calls.load() >= 8);
}

TEST_CASE("report construction enforces the invariants") {
    auto report = make_dor_report("demo", {"a", "b"}, {-1.0, 0.0}, 0b01u, {{0, 2.0}});
    CHECK(report.psi[0] == 1.0);
    CHECK_FALSE(report.no_responsibility);
    CHECK(report.utilities.at(0) == 2.0);

    auto empty = make_dor_report("demo", {"a", "b"}, {0.0, 0.0}, 0, {});
    CHECK(empty.no_responsibility);
    CHECK(empty.psi[0] == 0.0);

    CHECK_THROWS_AS(make_dor_report("demo", {"a"}, {1.0}, 0, {}), invariant_error);
    CHECK_THROWS_AS(make_dor_report("demo", {"a", "b"}, {-1.0}, 0, {}), std::invalid_argument);
}

TEST_CASE("the exact enumeration guard rejects oversized games") {
    auto u = [](CoalitionMask) { return 0.0; };
    CHECK_THROWS_AS(shapley(u, 21), guard_error);
}
