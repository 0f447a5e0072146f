#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace quantot {

using Rng = std::mt19937_64;

/// Mixes a base seed with a list of cell coordinates (estimator id, k, rep, ...)
/// into an independent 64-bit seed. Used so that every benchmark cell has a
/// seed that does not depend on scheduling order.
inline std::uint64_t derive_seed(std::uint64_t base, std::initializer_list<std::uint64_t> parts) {
    auto splitmix = [](std::uint64_t x) {
        x += 0x9e3779b97f4a7c15ULL;
        x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
        x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
        return x ^ (x >> 31);
    };
    std::uint64_t h = splitmix(base);
    for (std::uint64_t p : parts) h = splitmix(h ^ splitmix(p));
    return h;
}

} // namespace quantot
