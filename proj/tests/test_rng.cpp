// SPDX-License-Identifier: MIT
#include <catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "vexsde/parallel.hpp"
#include "vexsde/rng.hpp"

using vexsde::NormalStream;
using vexsde::Philox4x32;

// Known-answer vectors from the Random123 distribution (kat_vectors, philox4x32_10).
TEST_CASE("Philox4x32-10 known-answer vectors", "[rng]") {
    using C = Philox4x32::Counter;
    using K = Philox4x32::Key;
    CHECK(Philox4x32::apply(C{0, 0, 0, 0}, K{0, 0}) == C{0x6627e8d5, 0xe169c58d, 0xbc57ac4c, 0x9b00dbd8});
    CHECK(Philox4x32::apply(C{0xffffffff, 0xffffffff, 0xffffffff, 0xffffffff}, K{0xffffffff, 0xffffffff}) ==
          C{0x408f276d, 0x41c83b0e, 0xa20bc7c6, 0x6d5451fd});
    CHECK(Philox4x32::apply(C{0x243f6a88, 0x85a308d3, 0x13198a2e, 0x03707344}, K{0xa4093822, 0x299f31d0}) ==
          C{0xd16cfe09, 0x94fdcceb, 0x5001e420, 0x24126ea1});
}

TEST_CASE("normal stream supports random access", "[rng]") {
    NormalStream seq(42, 7);
    std::vector<double> forward;
    for (std::uint64_t i = 0; i < 101; ++i) forward.push_back(seq(i));

    NormalStream jumpy(42, 7);
    for (std::uint64_t i : {100u, 3u, 57u, 0u, 1u, 99u, 42u}) {
        CHECK(jumpy(i) == forward[i]);
    }
}

TEST_CASE("streams and seeds are distinct", "[rng]") {
    NormalStream a(1, 0), b(1, 1), c(2, 0);
    int same_ab = 0, same_ac = 0;
    for (std::uint64_t i = 0; i < 64; ++i) {
        same_ab += a(i) == b(i);
        same_ac += a(i) == c(i);
    }
    CHECK(same_ab == 0);
    CHECK(same_ac == 0);
}

TEST_CASE("aggregated normals are the scaled sum of fine normals", "[rng]") {
    NormalStream s(9, 3);
    for (unsigned count : {1u, 2u, 10u}) {
        const std::uint64_t first = 17;
        double sum = 0.0;
        for (unsigned j = 0; j < count; ++j) sum += s(first + j);
        CHECK(s.aggregated(first, count) == Catch::Approx(sum / std::sqrt(static_cast<double>(count))).epsilon(1e-15));
    }
}

TEST_CASE("normal stream has standard normal moments", "[rng][statistical]") {
    constexpr std::size_t n = 200000;
    NormalStream s(2024, 0);
    double m1 = 0.0, m2 = 0.0, m4 = 0.0, tail = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double z = s(i);
        REQUIRE(std::isfinite(z));
        m1 += z;
        m2 += z * z;
        m4 += z * z * z * z;
        tail += std::abs(z) > 1.959963984540054;
    }
    m1 /= n;
    m2 /= n;
    m4 /= n;
    tail /= n;
    // Five standard errors of each sample statistic.
    CHECK(std::abs(m1) < 5.0 * std::sqrt(1.0 / n));
    CHECK(std::abs(m2 - 1.0) < 5.0 * std::sqrt(2.0 / n));
    CHECK(std::abs(m4 - 3.0) < 5.0 * std::sqrt(96.0 / n));
    CHECK(std::abs(tail - 0.05) < 5.0 * std::sqrt(0.05 * 0.95 / n));
}

TEST_CASE("parallel_for reports the lowest failing index", "[parallel]") {
    for (unsigned threads : {1u, 2u, 8u}) {
        try {
            vexsde::parallel_for(1000, vexsde::Execution{threads}, [](std::size_t i) {
                if (i == 123 || i == 777) throw std::runtime_error(std::to_string(i));
            });
            FAIL("expected an exception");
        } catch (const std::runtime_error& e) {
            CHECK(std::string(e.what()) == "123");
        }
    }
}

TEST_CASE("summarize computes mean and standard error", "[parallel]") {
    const std::vector<double> v{1.0, 2.0, 3.0, 4.0};
    const auto est = vexsde::summarize(v, "x", 5);
    CHECK(est.mean == 2.5);
    // Sample variance 5/3, SE = sqrt(5/3 / 4).
    CHECK(est.std_error == Catch::Approx(std::sqrt(5.0 / 12.0)).epsilon(1e-15));
    CHECK(est.n_paths == 4);
    const std::vector<double> flat(10, 1.0);
    CHECK(vexsde::summarize(flat).std_error == 0.0);
}
