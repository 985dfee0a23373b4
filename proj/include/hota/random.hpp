#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "hota/normal.hpp"

namespace hota {

/// SplitMix64 finalizer; used to derive independent substream seeds.
inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

inline std::uint64_t substream_seed(std::uint64_t seed, std::uint64_t stream) {
    return splitmix64(splitmix64(seed) ^ splitmix64(stream + 0x632BE59BD9B4E019ULL));
}

/// Uniform on the open interval (0, 1) from the top 53 bits of a 64-bit draw.
inline double open_uniform(std::mt19937_64& engine) {
    return (static_cast<double>(engine() >> 11) + 0.5) * 0x1.0p-53;
}

/// Standard normal by inversion. Fully specified, so streams are identical
/// across standard library implementations.
inline double standard_normal(std::mt19937_64& engine) {
    return normal::quantile(open_uniform(engine));
}

/// Normal draws are generated in fixed-size blocks, each from its own engine
/// seeded by (seed, block index). Any partition of the blocks across workers
/// therefore yields the same stream.
inline constexpr std::size_t kNormalBlockSize = 4096;

inline void fill_normal_block(std::uint64_t seed, std::size_t block, double* out, std::size_t count) {
    std::mt19937_64 engine(substream_seed(seed, block));
    for (std::size_t i = 0; i < count; ++i) out[i] = standard_normal(engine);
}

inline std::vector<double> standard_normal_stream(std::size_t count, std::uint64_t seed) {
    std::vector<double> z(count);
    for (std::size_t b = 0; b * kNormalBlockSize < count; ++b) {
        const std::size_t begin = b * kNormalBlockSize;
        fill_normal_block(seed, b, z.data() + begin, std::min(kNormalBlockSize, count - begin));
    }
    return z;
}

}  // namespace hota
