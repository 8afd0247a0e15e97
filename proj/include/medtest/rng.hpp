#pragma once

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <random>
#include <span>
#include <utility>

namespace medtest {

/// SplitMix64 output function; used to mix seeds and stream identifiers.
constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// Derives the seed of a child stream from a master seed and a path of
/// stream identifiers (replication index, fold index, ...). Distinct paths
/// give statistically independent mt19937_64 streams; the mapping is fixed
/// so runs can be reproduced and resumed from any replication.
std::uint64_t derive_seed(std::uint64_t master, std::initializer_list<std::uint64_t> path);

/// Bit pattern of a double, for use as a stream identifier.
std::uint64_t seed_tag(double value) noexcept;

/// Deterministic random source: mt19937_64 engine with platform-independent
/// uniform and normal transforms (the std:: distributions are not specified
/// bit-exactly across standard libraries).
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next_u64() { return engine_(); }

    /// Uniform on [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    /// Standard normal via the Box-Muller transform.
    double normal();

    /// Uniform integer on [0, bound).
    std::size_t below(std::size_t bound);

    template <typename T>
    void shuffle(std::span<T> values) {
        for (std::size_t i = values.size(); i > 1; --i) {
            std::swap(values[i - 1], values[below(i)]);
        }
    }

private:
    std::mt19937_64 engine_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

}  // namespace medtest
