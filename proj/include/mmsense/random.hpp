#pragma once

#include <cstdint>
#include <initializer_list>

namespace mmsense {

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// Derives a stream seed from a master seed and a list of stream tags
/// (BS id, step index, purpose). Stable across runs.
inline std::uint64_t derive_seed(std::uint64_t master,
                                 std::initializer_list<std::uint64_t> tags) {
    std::uint64_t s = splitmix64(master);
    for (std::uint64_t t : tags) s = splitmix64(s ^ t);
    return s;
}

}  // namespace mmsense
