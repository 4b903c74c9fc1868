/**
 * @file philox.hpp
 * @brief Philox4x32-10 counter-based generator and keyed uniform streams.
 *
 * A stream is addressed by (seed, index, domain): the seed is the key, the
 * counter holds the 64-bit index, a 32-bit domain word and a block number.
 * Any element of any stream can be produced without touching the others,
 * which makes simulation results independent of how work is partitioned.
 */
#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>

namespace fiberbell::rng {

struct Philox4x32 {
    using Counter = std::array<std::uint32_t, 4>;
    using Key = std::array<std::uint32_t, 2>;

    static constexpr std::uint32_t multiplier0 = 0xD2511F53u;
    static constexpr std::uint32_t multiplier1 = 0xCD9E8D57u;
    static constexpr std::uint32_t weyl0 = 0x9E3779B9u;
    static constexpr std::uint32_t weyl1 = 0xBB67AE85u;
    static constexpr int rounds = 10;

    static constexpr Counter generate(Counter ctr, Key key)
    {
        for (int r = 0; r < rounds; ++r) {
            if (r > 0) {
                key[0] += weyl0;
                key[1] += weyl1;
            }
            const std::uint64_t p0 = std::uint64_t{multiplier0} * ctr[0];
            const std::uint64_t p1 = std::uint64_t{multiplier1} * ctr[2];
            const auto hi0 = static_cast<std::uint32_t>(p0 >> 32);
            const auto lo0 = static_cast<std::uint32_t>(p0);
            const auto hi1 = static_cast<std::uint32_t>(p1 >> 32);
            const auto lo1 = static_cast<std::uint32_t>(p1);
            ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
        }
        return ctr;
    }
};

inline constexpr Philox4x32::Key make_key(std::uint64_t seed)
{
    return {static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)};
}

/// Maps 32 random bits to the open interval (0, 1).
inline constexpr double to_unit(std::uint32_t bits) { return (static_cast<double>(bits) + 0.5) * 0x1p-32; }

/// Sequential uniforms for one (seed, index, domain) address.
class Stream {
public:
    Stream(std::uint64_t seed, std::uint64_t index, std::uint32_t domain)
        : key_(make_key(seed)),
          base_{static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32), domain, 0u}
    {
    }

    double uniform()
    {
        if (used_ == 4) refill();
        return to_unit(buffer_[used_++]);
    }

    /// Standard normal variate (Box-Muller, one value per call).
    double normal()
    {
        double u1 = uniform();
        double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
    }

    /// Raw first block, for callers that want all four words at once.
    Philox4x32::Counter block(std::uint32_t b) const
    {
        Philox4x32::Counter ctr = base_;
        ctr[3] = b;
        return Philox4x32::generate(ctr, key_);
    }

    /// Continue sequential draws starting at block b.
    void seek(std::uint32_t b)
    {
        next_block_ = b;
        used_ = 4;
    }

private:
    void refill()
    {
        buffer_ = block(next_block_++);
        used_ = 0;
    }

    Philox4x32::Key key_;
    Philox4x32::Counter base_;
    Philox4x32::Counter buffer_{};
    std::uint32_t next_block_ = 0;
    int used_ = 4;
};

}  // namespace fiberbell::rng
