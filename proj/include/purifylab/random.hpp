#pragma once

// Counter-based random streams. A stream is fully determined by
// (seed, stream index); draw j of a stream is Philox4x32-10 applied to the
// counter (j, stream) under the key derived from seed, so results do not
// depend on which worker evaluates which stream.

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <string_view>

namespace purifylab {

namespace detail {

inline constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept
{
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

inline constexpr std::uint64_t fnv1a(std::string_view s) noexcept
{
    std::uint64_t h = 0xCBF29CE484222325ULL;
    for (char ch : s) {
        h ^= static_cast<unsigned char>(ch);
        h *= 0x100000001B3ULL;
    }
    return h;
}

using PhiloxBlock = std::array<std::uint32_t, 4>;

inline constexpr PhiloxBlock philox4x32_10(PhiloxBlock ctr, std::array<std::uint32_t, 2> key) noexcept
{
    constexpr std::uint32_t m0 = 0xD2511F53u, m1 = 0xCD9E8D57u;
    constexpr std::uint32_t w0 = 0x9E3779B9u, w1 = 0xBB67AE85u;
    for (int round = 0; round < 10; ++round) {
        const std::uint64_t p0 = std::uint64_t{m0} * ctr[0];
        const std::uint64_t p1 = std::uint64_t{m1} * ctr[2];
        ctr = {static_cast<std::uint32_t>(p1 >> 32) ^ ctr[1] ^ key[0], static_cast<std::uint32_t>(p1),
               static_cast<std::uint32_t>(p0 >> 32) ^ ctr[3] ^ key[1], static_cast<std::uint32_t>(p0)};
        key[0] += w0;
        key[1] += w1;
    }
    return ctr;
}

} // namespace detail

/// Value-type handle to one reproducible substream.
class RandomStream {
public:
    constexpr RandomStream(std::uint64_t seed, std::uint64_t stream) noexcept
        : seed_(seed), stream_(stream), key_(detail::splitmix64(seed))
    {
    }

    constexpr std::uint64_t seed() const noexcept { return seed_; }
    constexpr std::uint64_t stream() const noexcept { return stream_; }

    /// Independent stream for a named purpose, keyed on (seed, tag, stream).
    constexpr RandomStream derive(std::string_view tag) const noexcept
    {
        return RandomStream(detail::splitmix64(seed_ ^ detail::fnv1a(tag)), stream_);
    }

    constexpr RandomStream with_stream(std::uint64_t stream) const noexcept
    {
        return RandomStream(seed_, stream);
    }

    std::uint64_t next_u64() noexcept
    {
        if (buffered_ == 0) refill();
        buffered_ -= 2;
        return (std::uint64_t{block_[buffered_]} << 32) | block_[buffered_ + 1];
    }

    /// Uniform double in (0, 1), never exactly 0 or 1.
    double uniform() noexcept
    {
        return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
    }

    /// Standard normal via Box-Muller; spare value cached.
    double normal() noexcept
    {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        const double r = std::sqrt(-2.0 * std::log(uniform()));
        const double theta = 2.0 * std::numbers::pi * uniform();
        spare_ = r * std::sin(theta);
        has_spare_ = true;
        return r * std::cos(theta);
    }

private:
    void refill() noexcept
    {
        const detail::PhiloxBlock ctr{static_cast<std::uint32_t>(counter_), static_cast<std::uint32_t>(counter_ >> 32),
                                      static_cast<std::uint32_t>(stream_), static_cast<std::uint32_t>(stream_ >> 32)};
        block_ = detail::philox4x32_10(ctr, {static_cast<std::uint32_t>(key_), static_cast<std::uint32_t>(key_ >> 32)});
        ++counter_;
        buffered_ = 4;
    }

    std::uint64_t seed_;
    std::uint64_t stream_;
    std::uint64_t key_;
    std::uint64_t counter_ = 0;
    detail::PhiloxBlock block_{};
    int buffered_ = 0;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

} // namespace purifylab
