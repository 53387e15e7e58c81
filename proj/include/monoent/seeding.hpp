#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace monoent {

using Rng = std::mt19937_64;

// splitmix64 finalizer
constexpr std::uint64_t mix64(std::uint64_t x) noexcept {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

// Per-task stream seed from (seed, label, indices). FNV-1a over the label keeps
// the result independent of std::hash.
constexpr std::uint64_t derive_seed(std::uint64_t seed, std::string_view label,
                                    std::uint64_t a = 0, std::uint64_t b = 0) noexcept {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (char c : label) {
        h ^= static_cast<unsigned char>(c);
        h *= 0x100000001b3ULL;
    }
    std::uint64_t s = mix64(seed ^ h);
    s = mix64(s ^ a);
    return mix64(s ^ (b + 0x632be59bd9b4e019ULL));
}

inline Rng make_rng(std::uint64_t seed, std::string_view label,
                    std::uint64_t a = 0, std::uint64_t b = 0) {
    return Rng(derive_seed(seed, label, a, b));
}

} // namespace monoent
