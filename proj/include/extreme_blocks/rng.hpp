#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <utility>

namespace extreme_blocks {

/// Philox4x32-10 counter-based generator (Salmon et al., Random123).
/// Stateless: the output is a pure function of (counter, key).
class Philox4x32 {
public:
    using Counter = std::array<std::uint32_t, 4>;
    using Key = std::array<std::uint32_t, 2>;

    static Counter generate(Counter ctr, Key key) {
        for (int round = 0; round < 10; ++round) {
            if (round > 0) {
                key[0] += kWeyl0;
                key[1] += kWeyl1;
            }
            const std::uint64_t p0 = std::uint64_t{kMul0} * ctr[0];
            const std::uint64_t p1 = std::uint64_t{kMul1} * ctr[2];
            const auto hi0 = static_cast<std::uint32_t>(p0 >> 32);
            const auto lo0 = static_cast<std::uint32_t>(p0);
            const auto hi1 = static_cast<std::uint32_t>(p1 >> 32);
            const auto lo1 = static_cast<std::uint32_t>(p1);
            ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
        }
        return ctr;
    }

private:
    static constexpr std::uint32_t kMul0 = 0xD2511F53u;
    static constexpr std::uint32_t kMul1 = 0xCD9E8D57u;
    static constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
    static constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;
};

/// Seeded source of independent substreams. Every value is addressed by
/// (stream, draw, slot), so results never depend on evaluation order or on
/// how draws are split across threads.
class CounterRng {
public:
    explicit CounterRng(std::uint64_t seed)
        : key_{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)} {}

    /// Two uniforms in the open interval (0, 1) for slot pair `block`.
    std::pair<double, double> uniform_pair(std::uint32_t stream, std::uint64_t draw, std::uint32_t block) const {
        const auto out = Philox4x32::generate(
            {static_cast<std::uint32_t>(draw), static_cast<std::uint32_t>(draw >> 32), stream, block}, key_);
        return {to_unit(out[0], out[1]), to_unit(out[2], out[3])};
    }

    /// Uniform in (0, 1) at the given slot.
    double uniform(std::uint32_t stream, std::uint64_t draw, std::uint32_t slot) const {
        auto [a, b] = uniform_pair(stream, draw, slot / 2);
        return slot % 2 == 0 ? a : b;
    }

    /// Standard normal at the given slot (Box-Muller on the slot pair).
    double normal(std::uint32_t stream, std::uint64_t draw, std::uint32_t slot) const {
        auto [u1, u2] = uniform_pair(stream, draw, slot / 2);
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double theta = 2.0 * std::numbers::pi * u2;
        return slot % 2 == 0 ? r * std::cos(theta) : r * std::sin(theta);
    }

private:
    static double to_unit(std::uint32_t hi, std::uint32_t lo) {
        const std::uint64_t bits = (std::uint64_t{hi} << 32 | lo) >> 11;
        return (static_cast<double>(bits) + 0.5) * 0x1.0p-53;
    }

    Philox4x32::Key key_;
};

}  // namespace extreme_blocks
