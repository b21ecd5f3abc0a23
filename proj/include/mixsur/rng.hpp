#pragma once

#include <cstdint>
#include <random>

namespace mixsur {

using Prng = std::mt19937_64;

// splitmix64 finalizer (Steele, Lea, Flood 2014). Used only to derive
// well-scrambled child seeds from a root seed plus structural coordinates
// (start index, bootstrap replicate, search cell), so results are keyed by
// what the work *is*, not by the order it ran in.
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Stream tags keep the derived sequences for unrelated purposes disjoint
// even when their indices collide.
namespace seed_stream {
constexpr std::uint64_t kStart = 0x53544152ULL;      // EM restarts
constexpr std::uint64_t kReplicate = 0x424f4f54ULL;  // bootstrap replicates
constexpr std::uint64_t kCell = 0x43454c4cULL;       // model search cells
constexpr std::uint64_t kSimulate = 0x53494d55ULL;   // standalone simulation
}  // namespace seed_stream

inline std::uint64_t derive_seed(std::uint64_t root, std::uint64_t stream,
                                 std::uint64_t index = 0) {
  return splitmix64(splitmix64(splitmix64(root) ^ stream) ^ index);
}

inline Prng make_prng(std::uint64_t seed) { return Prng(seed); }

}  // namespace mixsur
