#pragma once

// Counter-based random streams.
//
// Every stream is addressed by (master seed, replication, stream id). The
// Philox4x32-10 block cipher maps (key = seed, counter = [block, replication,
// stream]) to 128 random bits, so two streams never share state and the
// order in which replications execute cannot change any draw.

#include <array>
#include <cstdint>
#include <limits>

namespace banditflow {

/// Philox4x32 with 10 rounds (Salmon et al., Random123).
struct Philox4x32 {
    using Counter = std::array<std::uint32_t, 4>;
    using Key = std::array<std::uint32_t, 2>;

    static Counter generate(Counter ctr, Key key) noexcept;
};

struct StreamKey {
    std::uint64_t seed = 0;
    std::uint32_t replication = 0;
    std::uint32_t stream = 0;
};

/// Stream ids reserved for non-arm draws. Arm i uses stream id i.
inline constexpr std::uint32_t kAuxStreamBase = 0x8000'0000u;

/// Value-semantic random stream. Satisfies UniformRandomBitGenerator.
class RandomStream {
public:
    using result_type = std::uint64_t;

    RandomStream() = default;
    explicit RandomStream(StreamKey key) noexcept : key_(key) {}
    RandomStream(std::uint64_t seed, std::uint32_t replication, std::uint32_t stream) noexcept
        : key_{seed, replication, stream} {}

    static constexpr result_type min() noexcept { return 0; }
    static constexpr result_type max() noexcept { return std::numeric_limits<result_type>::max(); }

    result_type operator()() noexcept;

    /// Uniform on the open interval (0, 1) with 53-bit resolution.
    double uniform() noexcept;

    /// Standard normal via Wichura's AS241 inverse CDF applied to uniform().
    /// One uniform per normal, so the draw count is fixed and reproducible.
    double normal() noexcept;

    const StreamKey& key() const noexcept { return key_; }
    std::uint64_t draws() const noexcept { return block_ * 2 + (have_spare_ ? 1 : 0); }

private:
    StreamKey key_{};
    std::uint64_t block_ = 0;
    std::uint64_t spare_ = 0;
    bool have_spare_ = false;
};

/// Inverse of the standard normal CDF (AS241, PPND16; |rel err| ~ 1e-16).
/// Requires p in (0, 1).
double normal_quantile(double p) noexcept;

} // namespace banditflow
