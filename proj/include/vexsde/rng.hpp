// SPDX-License-Identifier: MIT
#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>

namespace vexsde {

/// Philox4x32-10 block cipher (Salmon et al., SC'11). Stateless: the output
/// is a pure function of (counter, key).
struct Philox4x32 {
    using Counter = std::array<std::uint32_t, 4>;
    using Key = std::array<std::uint32_t, 2>;

    static constexpr std::uint32_t kMulA = 0xD2511F53u;
    static constexpr std::uint32_t kMulB = 0xCD9E8D57u;
    static constexpr std::uint32_t kWeylA = 0x9E3779B9u;
    static constexpr std::uint32_t kWeylB = 0xBB67AE85u;

    static constexpr Counter round(const Counter& c, const Key& k) {
        const std::uint64_t p0 = std::uint64_t{kMulA} * c[0];
        const std::uint64_t p1 = std::uint64_t{kMulB} * c[2];
        return {static_cast<std::uint32_t>(p1 >> 32) ^ c[1] ^ k[0], static_cast<std::uint32_t>(p1),
                static_cast<std::uint32_t>(p0 >> 32) ^ c[3] ^ k[1], static_cast<std::uint32_t>(p0)};
    }

    static constexpr Counter apply(Counter c, Key k) {
        for (int r = 0; r < 10; ++r) {
            if (r > 0) {
                k[0] += kWeylA;
                k[1] += kWeylB;
            }
            c = round(c, k);
        }
        return c;
    }
};

/// Standard normal variates indexed by (seed, stream, index). Any element can
/// be produced without generating its predecessors, so the j-th Brownian
/// increment of path i is the same regardless of which thread computes it or
/// in which order.
class NormalStream {
public:
    NormalStream(std::uint64_t seed, std::uint64_t stream) noexcept
        : key_{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)},
          stream_lo_(static_cast<std::uint32_t>(stream)),
          stream_hi_(static_cast<std::uint32_t>(stream >> 32)) {}

    double operator()(std::uint64_t index) noexcept {
        const std::uint64_t block = index >> 1;
        if (block != cached_block_) {
            fill(block);
        }
        return cached_[index & 1u];
    }

    /// Sum of `count` consecutive normals starting at `first`, divided by
    /// sqrt(count): a standard normal for a coarse step that aggregates
    /// `count` fine steps of the same Brownian path.
    double aggregated(std::uint64_t first, unsigned count) noexcept {
        if (count == 1) return (*this)(first);
        double s = 0.0;
        for (unsigned i = 0; i < count; ++i) s += (*this)(first + i);
        return s / std::sqrt(static_cast<double>(count));
    }

private:
    static double to_open_unit(std::uint32_t hi, std::uint32_t lo) noexcept {
        const std::uint64_t bits = ((std::uint64_t{hi} << 32) | lo) >> 11;
        return (static_cast<double>(bits) + 0.5) * 0x1.0p-53;
    }

    void fill(std::uint64_t block) noexcept {
        const Philox4x32::Counter ctr{static_cast<std::uint32_t>(block), static_cast<std::uint32_t>(block >> 32),
                                      stream_lo_, stream_hi_};
        const auto w = Philox4x32::apply(ctr, key_);
        // Box-Muller
        const double u1 = to_open_unit(w[0], w[1]);
        const double u2 = to_open_unit(w[2], w[3]);
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double theta = 2.0 * std::numbers::pi * u2;
        cached_[0] = r * std::cos(theta);
        cached_[1] = r * std::sin(theta);
        cached_block_ = block;
    }

    Philox4x32::Key key_;
    std::uint32_t stream_lo_;
    std::uint32_t stream_hi_;
    std::uint64_t cached_block_ = ~std::uint64_t{0};
    std::array<double, 2> cached_{};
};

}  // namespace vexsde
