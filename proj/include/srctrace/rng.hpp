#ifndef srctrace_rng_hpp
#define srctrace_rng_hpp

#include <cstdint>
#include <random>

namespace srctrace {

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// Independent RNG stream derived from a master seed and a stream index.
/// Trials seeded this way are reproducible regardless of worker count.
inline std::mt19937_64 make_stream(std::uint64_t master_seed, std::uint64_t stream_index) {
    return std::mt19937_64(splitmix64(master_seed ^ splitmix64(stream_index)));
}

}  // namespace srctrace

#endif
