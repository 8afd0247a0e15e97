#include "medtest/rng.hpp"

#include <bit>
#include <cmath>
#include <numbers>

namespace medtest {

std::uint64_t derive_seed(std::uint64_t master, std::initializer_list<std::uint64_t> path) {
    std::uint64_t state = splitmix64(master);
    for (std::uint64_t id : path) {
        state = splitmix64(state ^ splitmix64(id + 0x632be59bd9b4e019ULL));
    }
    return state;
}

std::uint64_t seed_tag(double value) noexcept { return std::bit_cast<std::uint64_t>(value); }

double Rng::normal() {
    if (has_spare_) {
        has_spare_ = false;
        return spare_;
    }
    // 1 - uniform() lies in (0, 1], so the logarithm is finite.
    const double u1 = 1.0 - uniform();
    const double u2 = uniform();
    const double radius = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * std::numbers::pi * u2;
    spare_ = radius * std::sin(angle);
    has_spare_ = true;
    return radius * std::cos(angle);
}

std::size_t Rng::below(std::size_t bound) {
    if (bound <= 1) return 0;
    // Reject the top partial block so the modulo is unbiased.
    const std::uint64_t limit = (~std::uint64_t{0}) - ((~std::uint64_t{0}) % bound);
    std::uint64_t x = engine_();
    while (x >= limit) x = engine_();
    return static_cast<std::size_t>(x % bound);
}

}  // namespace medtest
