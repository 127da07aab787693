#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <span>
#include <utility>

namespace dish {

/// SplitMix64 finalizer. Used to derive independent generator seeds.
inline constexpr std::uint64_t splitmix64(std::uint64_t x)
{
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// Derived seed = splitmix64(splitmix64(splitmix64(master) ^ a) ^ b).
/// Campaign points use (point index, replication index); the simulator uses
/// (stream tag, sub-index) so that e.g. traffic draws never depend on MAC draws.
inline constexpr std::uint64_t mix_seed(std::uint64_t master, std::uint64_t a, std::uint64_t b = 0)
{
    return splitmix64(splitmix64(splitmix64(master) ^ a) ^ b);
}

/// Stream tags for simulator sub-generators.
enum class Stream : std::uint64_t {
    Peers = 1,
    Altruists = 2,
    Flows = 3,
    Traffic = 4,
    Mac = 5,
};

inline constexpr std::uint64_t stream_seed(std::uint64_t seed, Stream s, std::uint64_t sub = 0)
{
    return mix_seed(seed, static_cast<std::uint64_t>(s), sub);
}

/// Thin wrapper over mt19937_64. The bounded and real-valued draws are written
/// out here (not via <random> distributions) so that sequences are identical
/// across standard library implementations.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : eng_(seed) {}

    std::uint64_t next() { return eng_(); }

    /// Uniform in [0, 1) with 53 bits of resolution.
    double uniform01() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

    /// Uniform integer in [0, n). n must be positive.
    std::uint64_t below(std::uint64_t n)
    {
        // Rejection to remove modulo bias.
        const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max()
            - std::numeric_limits<std::uint64_t>::max() % n;
        std::uint64_t v = eng_();
        while (v >= limit)
            v = eng_();
        return v % n;
    }

    /// Uniform integer in [lo, hi], inclusive.
    std::int64_t uniform_int(std::int64_t lo, std::int64_t hi)
    {
        return lo + static_cast<std::int64_t>(below(static_cast<std::uint64_t>(hi - lo) + 1));
    }

    double exponential(double mean) { return -mean * std::log1p(-uniform01()); }

    /// Exact Poisson draw by counting unit-rate arrivals in [0, mean].
    /// Linear in the mean, which is fine for the point counts used here.
    std::uint64_t poisson(double mean)
    {
        std::uint64_t count = 0;
        double t = exponential(1.0);
        while (t <= mean) {
            ++count;
            t += exponential(1.0);
        }
        return count;
    }

    template <typename T>
    void shuffle(std::span<T> v)
    {
        for (std::size_t i = v.size(); i > 1; --i)
            std::swap(v[i - 1], v[below(i)]);
    }

private:
    std::mt19937_64 eng_;
};

} // namespace dish
