#pragma once

#include <cstdint>
#include <random>

namespace esgmi {

using Rng = std::mt19937_64;

// splitmix64 finalizer; decorrelates per-stream seeds derived from one master
// seed so chains/trees can run in parallel with sequential-identical results.
inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
    std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

inline Rng make_rng(std::uint64_t seed, std::uint64_t stream = 0) {
    return Rng(mix_seed(seed, stream));
}

}  // namespace esgmi
