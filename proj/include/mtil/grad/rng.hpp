#pragma once

#include <cstdint>
#include <random>

namespace mtil::grad {

// splitmix64; used to derive independent RNG streams from (seed, stream id)
// so that e.g. epoch k's data order does not depend on epochs 0..k-1.
inline uint64_t mix_seed(uint64_t seed, uint64_t stream) {
    uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

inline std::mt19937_64 make_rng(uint64_t seed, uint64_t stream = 0) {
    return std::mt19937_64(mix_seed(seed, stream));
}

}  // namespace mtil::grad
